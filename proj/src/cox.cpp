#include "raildelay/cox.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "raildelay/csvio.hpp"
#include "raildelay/errors.hpp"
#include "raildelay/jsonio.hpp"
#include "raildelay/numerics.hpp"
#include "raildelay/threading.hpp"

namespace raildelay::cox {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void CoxDataset::validate() const {
    for (const auto& t : trains) {
        if (!(t.censor_km > t.entry_km))
            throw DataError("train " + t.train_id + ": empty observation window");
        double prev = t.entry_km;
        for (double e : t.event_km) {
            if (!(e > prev))
                throw DataError("train " + t.train_id +
                                ": event distances not strictly increasing");
            prev = e;
        }
        if (!t.event_km.empty() && t.event_km.back() > t.censor_km)
            throw DataError("train " + t.train_id + ": event beyond censoring distance");
        if (t.covariates.pieces() == 0 ||
            static_cast<Eigen::Index>(covariate_names.size()) !=
                t.covariates.piece_value(0).size())
            throw DataError("train " + t.train_id + ": covariate dimension mismatch");
    }
}

CoxDataset make_cox_dataset(const ingest::AnalysisDataset& ds, int max_rank) {
    if (max_rank < 1) throw DataError("max_rank must be >= 1");
    std::map<std::string, std::vector<const ingest::SectionObservation*>> by_train;
    for (const auto& r : ds.rows) by_train[r.train_id].push_back(&r);

    CoxDataset out;
    out.covariate_names = {"direction", "temperature", "humidity", "snow_depth", "precip_flag"};
    out.max_rank = max_rank;
    for (auto& [id, rows] : by_train) {
        std::sort(rows.begin(), rows.end(),
                  [](const auto* a, const auto* b) { return a->section_index < b->section_index; });
        // Contiguous prefix only: a gap left by excluded sections ends the
        // observation window for this train.
        std::vector<double> breaks{rows[0]->from_km};
        std::vector<VectorXd> values;
        std::vector<double> events;
        for (const auto* r : rows) {
            if (std::abs(r->from_km - breaks.back()) > 1e-9) break;
            VectorXd x(5);
            x << r->direction, r->temperature, r->humidity, r->snow_depth,
                static_cast<double>(r->precip_flag);
            breaks.push_back(r->to_km);
            values.push_back(std::move(x));
            if (r->primary_delay) events.push_back(r->to_km);
        }
        if (values.empty()) continue;
        TrainHistory t;
        t.train_id = id;
        t.entry_km = breaks.front();
        t.censor_km = breaks.back();
        t.event_km = std::move(events);
        t.covariates = CovariatePath(std::move(breaks), std::move(values));
        out.trains.push_back(std::move(t));
    }
    out.validate();
    return out;
}

namespace {

// One (train, stratum) at-risk interval in counting-process form.
struct Interval {
    int train = 0;
    double start = 0.0;
    double stop = 0.0;
    bool event = false;
};

std::vector<std::vector<Interval>> strata_intervals(const CoxDataset& ds) {
    // Determine how many strata actually carry events, capped at max_rank.
    int max_observed = 0;
    for (const auto& t : ds.trains)
        max_observed = std::max(max_observed, static_cast<int>(t.event_km.size()));
    const int n_strata = std::min(ds.max_rank, max_observed);

    std::vector<std::vector<Interval>> strata(n_strata);
    for (std::size_t i = 0; i < ds.trains.size(); ++i) {
        const auto& t = ds.trains[i];
        double start = t.entry_km;
        for (int j = 1; j <= n_strata; ++j) {
            const bool has_event = static_cast<int>(t.event_km.size()) >= j;
            const double stop = has_event ? t.event_km[j - 1] : t.censor_km;
            if (stop > start)
                strata[j - 1].push_back({static_cast<int>(i), start, stop, has_event});
            if (!has_event) break;
            start = stop;
        }
    }
    return strata;
}

// Everything beta-independent about one event time, precomputed once.
struct EventBlock {
    int stratum = 0;
    double time = 0.0;
    int event_count = 0;
    std::vector<int> event_trains;
    std::vector<int> at_risk;
    MatrixXd x_risk;          // at_risk.size() x p, covariates at `time`
    VectorXd x_event_sum;     // sum of event trains' covariates at `time`
};

std::vector<EventBlock> make_blocks(const CoxDataset& ds) {
    const int p = ds.n_covariates();
    std::vector<EventBlock> blocks;
    const auto strata = strata_intervals(ds);
    for (std::size_t s = 0; s < strata.size(); ++s) {
        const auto& intervals = strata[s];
        std::vector<double> times;
        for (const auto& iv : intervals)
            if (iv.event) times.push_back(iv.stop);
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());

        for (double t : times) {
            EventBlock b;
            b.stratum = static_cast<int>(s) + 1;
            b.time = t;
            for (const auto& iv : intervals) {
                if (iv.start < t && t <= iv.stop) b.at_risk.push_back(iv.train);
                if (iv.event && iv.stop == t) b.event_trains.push_back(iv.train);
            }
            b.event_count = static_cast<int>(b.event_trains.size());
            std::sort(b.at_risk.begin(), b.at_risk.end());
            b.x_risk.resize(static_cast<Eigen::Index>(b.at_risk.size()), p);
            for (std::size_t r = 0; r < b.at_risk.size(); ++r)
                b.x_risk.row(static_cast<Eigen::Index>(r)) =
                    ds.trains[b.at_risk[r]].covariates.at(t).transpose();
            b.x_event_sum = VectorXd::Zero(p);
            for (int e : b.event_trains) b.x_event_sum += ds.trains[e].covariates.at(t);
            blocks.push_back(std::move(b));
        }
    }
    return blocks;
}

double eval_blocks(const std::vector<EventBlock>& blocks, const VectorXd& beta,
                   VectorXd* grad) {
    const Eigen::Index p = beta.size();
    std::vector<double> ll_parts(blocks.size());
    std::vector<VectorXd> grad_parts;
    if (grad) grad_parts.assign(blocks.size(), VectorXd());

    parallel_for(blocks.size(), [&](std::size_t k) {
        const EventBlock& b = blocks[k];
        const VectorXd eta = b.x_risk * beta;
        const double shift = eta.maxCoeff();
        const VectorXd w = (eta.array() - shift).exp();
        const double denom = w.sum();
        const double lse = shift + std::log(denom);
        ll_parts[k] = beta.dot(b.x_event_sum) - b.event_count * lse;
        if (grad) {
            const VectorXd xbar = b.x_risk.transpose() * (w / denom);
            grad_parts[k] = b.x_event_sum - b.event_count * xbar;
        }
    });

    double ll = 0.0;
    if (grad) grad->setZero(p);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        ll += ll_parts[k];
        if (grad) *grad += grad_parts[k];
    }
    return ll;
}

// Observed information at beta = 0; used for the collinearity check.
MatrixXd information_at_zero(const std::vector<EventBlock>& blocks, int p) {
    MatrixXd info = MatrixXd::Zero(p, p);
    for (const auto& b : blocks) {
        const double m = static_cast<double>(b.x_risk.rows());
        const VectorXd xbar = b.x_risk.colwise().mean();
        const MatrixXd second = b.x_risk.transpose() * b.x_risk / m;
        info += b.event_count * (second - xbar * xbar.transpose());
    }
    return info;
}

} // namespace

std::vector<RiskSet> build_risk_sets(const CoxDataset& ds) {
    ds.validate();
    std::vector<RiskSet> out;
    for (const auto& b : make_blocks(ds)) {
        RiskSet r;
        r.stratum = b.stratum;
        r.time = b.time;
        r.event_count = b.event_count;
        r.event_trains = b.event_trains;
        r.at_risk = b.at_risk;
        out.push_back(std::move(r));
    }
    return out;
}

double partial_log_likelihood(const VectorXd& beta, const CoxDataset& ds, VectorXd* grad) {
    ds.validate();
    if (beta.size() != ds.n_covariates())
        throw DataError("beta dimension does not match covariate count");
    return eval_blocks(make_blocks(ds), beta, grad);
}

CoxFit fit_stratified_cox(const CoxDataset& ds) {
    ds.validate();
    const int p = ds.n_covariates();
    const auto blocks = make_blocks(ds);
    if (blocks.empty()) throw DataError("no primary-delay events in any included stratum");

    // Collinear or risk-set-constant columns make the information singular;
    // report which ones before the optimizer wanders off.
    {
        const MatrixXd info0 = information_at_zero(blocks, p);
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(info0);
        const double max_ev = eig.eigenvalues().cwiseAbs().maxCoeff();
        std::string bad;
        for (Eigen::Index i = 0; i < p; ++i) {
            if (eig.eigenvalues()[i] < 1e-10 * std::max(max_ev, 1e-300)) {
                Eigen::Index worst;
                eig.eigenvectors().col(i).cwiseAbs().maxCoeff(&worst);
                if (!bad.empty()) bad += ", ";
                bad += ds.covariate_names[worst];
            }
        }
        if (!bad.empty())
            throw IdentifiabilityError("singular information: column(s) " + bad +
                                       " are collinear or constant within risk sets");
    }

    // The optimizer runs on rms-standardized columns, which keeps the
    // problem well conditioned and makes the fit exactly equivariant under
    // rescaling of a covariate column.
    VectorXd scale = VectorXd::Zero(p);
    {
        std::size_t count = 0;
        for (const auto& t : ds.trains)
            for (std::size_t k = 0; k < t.covariates.pieces(); ++k, ++count)
                scale += t.covariates.piece_value(k).cwiseAbs2();
        scale = (scale / static_cast<double>(count)).cwiseSqrt();
        for (Eigen::Index i = 0; i < p; ++i)
            if (!(scale[i] > 0)) scale[i] = 1.0;
    }
    const VectorXd inv_scale = scale.cwiseInverse();

    auto obj = [&](const VectorXd& b) {
        return eval_blocks(blocks, b.cwiseProduct(inv_scale), nullptr);
    };
    auto grad = [&](const VectorXd& b) {
        VectorXd g;
        eval_blocks(blocks, b.cwiseProduct(inv_scale), &g);
        return VectorXd(g.cwiseProduct(inv_scale));
    };
    numerics::OptimOptions opts;
    opts.tol = 1e-8;
    const auto res = numerics::maximize(obj, grad, VectorXd::Zero(p), opts);
    if (!res.converged)
        throw ConvergenceError("stratified Cox fit did not converge in " +
                               std::to_string(res.iterations) + " iterations");

    Eigen::FullPivLU<MatrixXd> lu(res.hessian);
    if (!lu.isInvertible())
        throw IdentifiabilityError("observed information is singular at the optimum");

    CoxFit fit;
    fit.beta = res.argmax.cwiseProduct(inv_scale);
    fit.covariance =
        inv_scale.asDiagonal() * lu.inverse() * inv_scale.asDiagonal();
    fit.covariate_names = ds.covariate_names;
    fit.log_likelihood = res.value;
    fit.converged = true;
    fit.iterations = res.iterations;
    fit.n_trains = static_cast<int>(ds.trains.size());
    for (const auto& b : blocks) fit.n_events += b.event_count;
    fit.max_rank = ds.max_rank;
    for (int i = 0; i < p; ++i)
        fit.table.push_back(
            wald_row(ds.covariate_names[i], fit.beta[i], std::sqrt(fit.covariance(i, i))));

    int n_strata = 0;
    for (const auto& b : blocks) n_strata = std::max(n_strata, b.stratum);
    for (int j = 1; j <= n_strata; ++j) fit.baseline.push_back(baseline_cumhaz(fit, ds, j));
    return fit;
}

StepCurve baseline_cumhaz(const CoxFit& fit, const CoxDataset& ds, int stratum) {
    StepCurve curve;
    double cum = 0.0;
    for (const auto& b : make_blocks(ds)) {
        if (b.stratum != stratum) continue;
        const VectorXd eta = b.x_risk * fit.beta;
        const double denom = eta.array().exp().sum();
        cum += b.event_count / denom;
        curve.times.push_back(b.time);
        curve.values.push_back(cum);
    }
    return curve;
}

SurvivalCurve survival_curve(const CoxFit& fit, int stratum, const CovariatePath& path) {
    if (stratum < 1 || stratum > static_cast<int>(fit.baseline.size()))
        throw DataError("no baseline for stratum " + std::to_string(stratum));
    const StepCurve& base = fit.baseline[stratum - 1];

    SurvivalCurve curve;
    curve.stratum = stratum;
    curve.km.push_back(0.0);
    curve.survival.push_back(1.0);
    double integral = 0.0;
    double prev_cum = 0.0;
    for (std::size_t k = 0; k < base.times.size(); ++k) {
        const double jump = base.values[k] - prev_cum;
        prev_cum = base.values[k];
        integral += jump * std::exp(fit.beta.dot(path.at(base.times[k])));
        curve.km.push_back(base.times[k]);
        curve.survival.push_back(std::exp(-integral));
    }
    if (curve.km.back() < path.end()) {
        curve.km.push_back(path.end());
        curve.survival.push_back(curve.survival.back());
    }
    return curve;
}

DropPoints detect_drop_points(const SurvivalCurve& curve, int k, double min_separation_km) {
    if (k < 1) throw DataError("detect_drop_points: k must be >= 1");
    struct Step {
        double drop;
        double km;
    };
    std::vector<Step> steps;
    for (std::size_t i = 1; i < curve.km.size(); ++i) {
        const double drop = curve.survival[i - 1] - curve.survival[i];
        if (drop > 0) steps.push_back({drop, curve.km[i]});
    }
    DropPoints out;
    if (steps.empty()) return out; // flat curve: nothing to suggest
    double lo = steps[0].drop, hi = steps[0].drop;
    for (const auto& s : steps) {
        lo = std::min(lo, s.drop);
        hi = std::max(hi, s.drop);
    }
    out.distinct = hi - lo > 1e-12;
    std::sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) {
        if (a.drop != b.drop) return a.drop > b.drop;
        return a.km < b.km;
    });
    for (const auto& s : steps) {
        if (out.km.size() >= static_cast<std::size_t>(k)) break;
        bool shadowed = false;
        for (double chosen : out.km)
            if (std::abs(chosen - s.km) < min_separation_km) shadowed = true;
        if (!shadowed) out.km.push_back(s.km);
    }
    std::sort(out.km.begin(), out.km.end());
    return out;
}

void write_cox_fit_json(std::ostream& out, const CoxFit& fit) {
    JsonWriter w(out);
    w.begin_object();
    w.kv("model", "stratified_cox");
    w.key("covariates").begin_array();
    for (const auto& n : fit.covariate_names) w.value(n);
    w.end_array();
    w.kv("n_trains", fit.n_trains);
    w.kv("n_events", fit.n_events);
    w.kv("max_rank", fit.max_rank);
    w.kv("log_likelihood", fit.log_likelihood);
    w.kv("converged", fit.converged);
    w.kv("iterations", fit.iterations);
    w.key("beta").begin_array();
    for (Eigen::Index i = 0; i < fit.beta.size(); ++i) w.value(fit.beta[i]);
    w.end_array();
    w.key("covariance").begin_array();
    for (Eigen::Index i = 0; i < fit.covariance.rows(); ++i) {
        w.begin_array();
        for (Eigen::Index j = 0; j < fit.covariance.cols(); ++j) w.value(fit.covariance(i, j));
        w.end_array();
    }
    w.end_array();
    w.key("hazard_ratios").begin_array();
    for (const auto& row : fit.table) {
        w.begin_object();
        w.kv("predictor", row.name);
        w.kv("hazard_ratio", row.hazard_ratio);
        w.kv("ci_lower", row.ci_lower);
        w.kv("ci_upper", row.ci_upper);
        w.kv("p_value", row.p_value);
        w.kv("coef", row.coef);
        w.kv("se", row.se);
        w.end_object();
    }
    w.end_array();
    w.key("baseline_cumhaz").begin_array();
    for (std::size_t j = 0; j < fit.baseline.size(); ++j) {
        w.begin_object();
        w.kv("stratum", static_cast<int>(j + 1));
        w.kv("km", fit.baseline[j].times);
        w.kv("cumhaz", fit.baseline[j].values);
        w.end_object();
    }
    w.end_array();
    w.end_object();
}

void write_survival_csv(std::ostream& out, const std::vector<SurvivalCurve>& curves) {
    out << "stratum,km,survival\n";
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.km.size(); ++i)
            out << c.stratum << ',' << format_double(c.km[i]) << ','
                << format_double(c.survival[i]) << '\n';
}

} // namespace raildelay::cox
