#include "raildelay/ctmc.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "raildelay/errors.hpp"
#include "raildelay/jsonio.hpp"
#include "raildelay/numerics.hpp"
#include "raildelay/threading.hpp"

namespace raildelay::ctmc {

using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

SegmentScheme::SegmentScheme(std::vector<double> bounds, double line_end)
    : boundaries(std::move(bounds)), line_end_km(line_end) {
    for (std::size_t i = 0; i < boundaries.size(); ++i) {
        if (boundaries[i] <= 0.0 || boundaries[i] >= line_end_km)
            throw DataError("segment boundary " + std::to_string(boundaries[i]) +
                            " outside (0, " + std::to_string(line_end_km) + ")");
        if (i > 0 && boundaries[i] <= boundaries[i - 1])
            throw DataError("segment boundaries must be strictly ascending");
    }
}

int SegmentScheme::segment_of(double t) const {
    int seg = 0;
    for (double b : boundaries)
        if (t >= b) ++seg;
    return seg;
}

CtmcParams CtmcParams::zero(int n_covariates, int n_boundaries) {
    CtmcParams p;
    p.n_covariates = n_covariates;
    p.n_boundaries = n_boundaries;
    p.theta = VectorXd::Zero(2 * (1 + n_covariates + n_boundaries));
    return p;
}

void ObservedPath::validate() const {
    if (km.size() < 2 || km.size() != state.size())
        throw DataError("path " + train_id + ": needs >= 2 (km, state) observations");
    for (std::size_t i = 0; i < km.size(); ++i) {
        if (i > 0 && !(km[i] > km[i - 1]))
            throw DataError("path " + train_id + ": distances not strictly increasing");
        if (state[i] != kPunctual && state[i] != kDelayed)
            throw DataError("path " + train_id + ": state must be 0 or 1");
    }
}

namespace {

// Off-diagonal rates at one point; the building block for Q and dQ.
inline double rate(const CtmcParams& p, int transition, const VectorXd& x, int segment) {
    double eta = p.log_q0(transition);
    for (int i = 0; i < p.n_covariates; ++i) eta += p.beta(transition, i) * x[i];
    if (segment >= 1) eta += p.z(transition, segment - 1);
    return std::exp(eta);
}

inline Matrix2d generator(double q_pd, double q_dp) {
    Matrix2d q;
    q << -q_pd, q_pd, q_dp, -q_dp;
    return q;
}

// One constant-intensity piece of a spot-to-spot interval.
struct Piece {
    double length = 0.0;
    int segment = 0;
    const VectorXd* x = nullptr;
};

// Cuts [a, b) at section boundaries and segment boundaries.
void cut_pieces(const CovariatePath& path, const SegmentScheme& scheme, double a, double b,
                std::vector<Piece>& out) {
    out.clear();
    std::vector<double> cuts{a};
    for (double c : path.breaks_inside(a, b)) cuts.push_back(c);
    for (double c : scheme.boundaries)
        if (c > a && c < b) cuts.push_back(c);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (!(cuts[i + 1] > cuts[i])) continue;
        Piece piece;
        piece.length = cuts[i + 1] - cuts[i];
        const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
        piece.segment = scheme.segment_of(cuts[i]);
        piece.x = &path.at(mid);
        out.push_back(piece);
    }
}

// Design vector of one transition's parameters for a piece:
// [1, x..., segment indicators...].
void design_vector(const Piece& piece, int n_cov, int n_bounds, VectorXd& u) {
    u.setZero(1 + n_cov + n_bounds);
    u[0] = 1.0;
    for (int i = 0; i < n_cov; ++i) u[1 + i] = (*piece.x)[i];
    if (piece.segment >= 1) u[1 + n_cov + piece.segment - 1] = 1.0;
}

} // namespace

MatrixXd intensity_matrix(const CtmcParams& params, const VectorXd& x, double t,
                          const SegmentScheme& scheme) {
    if (x.size() != params.n_covariates)
        throw DataError("covariate vector has wrong dimension");
    const int seg = scheme.segment_of(t);
    return generator(rate(params, 0, x, seg), rate(params, 1, x, seg));
}

MatrixXd path_transition_probability(const CtmcParams& params, const CovariatePath& covariates,
                                     double t_a, double t_b, const SegmentScheme& scheme) {
    if (!(t_a < t_b)) throw DataError("path_transition_probability: t_a must precede t_b");
    std::vector<Piece> pieces;
    cut_pieces(covariates, scheme, t_a, t_b, pieces);
    Matrix2d prob = Matrix2d::Identity();
    for (const Piece& piece : pieces) {
        const Matrix2d q = generator(rate(params, 0, *piece.x, piece.segment),
                                     rate(params, 1, *piece.x, piece.segment));
        prob = prob * numerics::matrix_exponential(q, piece.length);
    }
    return prob;
}

namespace {

struct PairTerm {
    double ll = 0.0;
    VectorXd grad; // empty when gradient not requested
    bool invalid = false;
    const char* reason = nullptr;
    double bad_a = 0.0, bad_b = 0.0;
};

// Log transition probability for one spot pair, with the analytic gradient
// assembled from Frechet derivatives of the piece exponentials.
void eval_pair(const CtmcParams& params, const CovariatePath& path,
               const SegmentScheme& scheme, double t_a, double t_b, int y_a, int y_b,
               bool want_grad, std::vector<Piece>& pieces, PairTerm& out) {
    cut_pieces(path, scheme, t_a, t_b, pieces);
    const std::size_t m = pieces.size();

    std::vector<Matrix2d> expo(m);
    std::vector<double> q_pd(m), q_dp(m);
    for (std::size_t k = 0; k < m; ++k) {
        q_pd[k] = rate(params, 0, *pieces[k].x, pieces[k].segment);
        q_dp[k] = rate(params, 1, *pieces[k].x, pieces[k].segment);
        if (!std::isfinite(q_pd[k]) || !std::isfinite(q_dp[k])) {
            // An overflowing trial point during optimization; reject it via
            // -inf rather than crashing.
            out.ll = -std::numeric_limits<double>::infinity();
            out.invalid = true;
            out.reason = "non-finite intensity";
            out.bad_a = t_a;
            out.bad_b = t_b;
            return;
        }
        expo[k] = numerics::matrix_exponential(generator(q_pd[k], q_dp[k]), pieces[k].length);
    }
    Matrix2d prob = Matrix2d::Identity();
    for (std::size_t k = 0; k < m; ++k) prob = prob * expo[k];

    const double p = prob(y_a, y_b);
    if (!(p > 0.0)) {
        out.ll = -std::numeric_limits<double>::infinity();
        out.invalid = true;
        out.reason = "zero transition probability";
        out.bad_a = t_a;
        out.bad_b = t_b;
        return;
    }
    out.ll = std::log(p);
    if (!want_grad) return;

    const int per = params.per_transition();
    out.grad.setZero(2 * per);

    // Prefix/suffix products around each piece.
    std::vector<Matrix2d> prefix(m), suffix(m);
    Matrix2d acc = Matrix2d::Identity();
    for (std::size_t k = 0; k < m; ++k) {
        prefix[k] = acc;
        acc = acc * expo[k];
    }
    acc = Matrix2d::Identity();
    for (std::size_t k = m; k-- > 0;) {
        suffix[k] = acc;
        acc = expo[k] * acc;
    }

    VectorXd u(per);
    for (std::size_t k = 0; k < m; ++k) {
        const double len = pieces[k].length;
        const Matrix2d a = len * generator(q_pd[k], q_dp[k]);
        // dQ/d(eta_pd) = q_pd * (E01 - E00), and analogously for dp; the
        // chain rule through the log-linear form contributes the design
        // vector as a scalar weight per parameter.
        Matrix2d dir_pd = Matrix2d::Zero();
        dir_pd(0, 0) = -q_pd[k];
        dir_pd(0, 1) = q_pd[k];
        Matrix2d dir_dp = Matrix2d::Zero();
        dir_dp(1, 0) = q_dp[k];
        dir_dp(1, 1) = -q_dp[k];

        const Matrix2d f_pd = numerics::expm_frechet(a, len * dir_pd);
        const Matrix2d f_dp = numerics::expm_frechet(a, len * dir_dp);
        const double m_pd = (prefix[k] * f_pd * suffix[k])(y_a, y_b) / p;
        const double m_dp = (prefix[k] * f_dp * suffix[k])(y_a, y_b) / p;

        design_vector(pieces[k], params.n_covariates, params.n_boundaries, u);
        out.grad.head(per) += m_pd * u;
        out.grad.tail(per) += m_dp * u;
    }
}

} // namespace

double log_likelihood(const CtmcParams& params, const std::vector<ObservedPath>& paths,
                      const SegmentScheme& scheme, VectorXd* grad, std::string* diagnostic) {
    const bool want_grad = grad != nullptr;
    std::vector<double> ll_parts(paths.size(), 0.0);
    std::vector<VectorXd> grad_parts;
    if (want_grad) grad_parts.assign(paths.size(), VectorXd());
    std::vector<PairTerm> bad(paths.size());

    parallel_for(paths.size(), [&](std::size_t i) {
        const ObservedPath& path = paths[i];
        path.validate();
        std::vector<Piece> scratch;
        double ll = 0.0;
        VectorXd g;
        if (want_grad) g.setZero(params.size());
        PairTerm term;
        for (std::size_t j = 0; j + 1 < path.km.size(); ++j) {
            eval_pair(params, path.covariates, scheme, path.km[j], path.km[j + 1],
                      path.state[j], path.state[j + 1], want_grad, scratch, term);
            if (term.invalid) {
                bad[i] = term;
                ll = -std::numeric_limits<double>::infinity();
                break;
            }
            ll += term.ll;
            if (want_grad) g += term.grad;
        }
        ll_parts[i] = ll;
        if (want_grad) grad_parts[i] = std::move(g);
    });

    double total = 0.0;
    if (want_grad) grad->setZero(params.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (bad[i].invalid) {
            if (diagnostic)
                *diagnostic = std::string(bad[i].reason) + " for train " + paths[i].train_id +
                              " between km " + std::to_string(bad[i].bad_a) + " and " +
                              std::to_string(bad[i].bad_b);
            if (want_grad) grad->setZero(params.size());
            return -std::numeric_limits<double>::infinity();
        }
        total += ll_parts[i];
        if (want_grad) *grad += grad_parts[i];
    }
    return total;
}

std::vector<ObservedPath> make_observed_paths(const ingest::AnalysisDataset& ds,
                                              bool assume_punctual_origin) {
    std::map<std::string, std::vector<const ingest::SectionObservation*>> by_train;
    for (const auto& r : ds.rows) by_train[r.train_id].push_back(&r);

    std::vector<ObservedPath> paths;
    for (auto& [id, rows] : by_train) {
        std::sort(rows.begin(), rows.end(),
                  [](const auto* a, const auto* b) { return a->section_index < b->section_index; });
        std::vector<double> breaks{rows[0]->from_km};
        std::vector<VectorXd> values;
        ObservedPath path;
        path.train_id = id;
        path.date = rows[0]->date;
        path.km.push_back(rows[0]->from_km);
        path.state.push_back(kPunctual);
        for (const auto* r : rows) {
            if (std::abs(r->from_km - breaks.back()) > 1e-9) break; // gap ends the path
            VectorXd x(5);
            x << r->direction, r->temperature, r->humidity, r->snow_depth,
                static_cast<double>(r->precip_flag);
            breaks.push_back(r->to_km);
            values.push_back(std::move(x));
            path.km.push_back(r->to_km);
            path.state.push_back(r->arrival_delay);
        }
        if (values.empty()) continue;
        path.covariates = CovariatePath(std::move(breaks), std::move(values));
        if (!assume_punctual_origin) {
            // Drop the synthesized origin observation; the path then starts
            // at the first arrival spot with its recorded state.
            path.km.erase(path.km.begin());
            path.state.erase(path.state.begin());
            if (path.km.size() < 2) continue;
        }
        paths.push_back(std::move(path));
    }
    return paths;
}

std::vector<CovariateTrack> make_covariate_tracks(const ingest::AnalysisDataset& ds) {
    std::vector<CovariateTrack> tracks;
    for (auto& path : make_observed_paths(ds, true)) {
        if (path.covariates.start() > 1e-9) continue; // unobserved origin
        tracks.push_back({std::move(path.train_id), std::move(path.covariates)});
    }
    return tracks;
}

MarkovFit fit_ctmc(const std::vector<ObservedPath>& paths, const SegmentScheme& scheme,
                   const std::vector<std::string>& covariate_names) {
    if (paths.empty()) throw DataError("fit_ctmc: empty dataset");
    const int n_cov = static_cast<int>(covariate_names.size());
    const int n_bounds = static_cast<int>(scheme.boundaries.size());

    // Crude transition counts and occupation distances for identifiability
    // and starting values.
    int count_pd = 0, count_dp = 0;
    double dist_p = 0.0, dist_d = 0.0;
    for (const auto& path : paths) {
        path.validate();
        for (std::size_t j = 0; j + 1 < path.km.size(); ++j) {
            const double len = path.km[j + 1] - path.km[j];
            if (path.state[j] == kPunctual) {
                dist_p += len;
                if (path.state[j + 1] == kDelayed) ++count_pd;
            } else {
                dist_d += len;
                if (path.state[j + 1] == kPunctual) ++count_dp;
            }
        }
    }
    if (count_pd == 0)
        throw IdentifiabilityError(
            "no punctual->delayed transition observed; q_pd is not identifiable");
    if (count_dp == 0)
        throw IdentifiabilityError(
            "no delayed->punctual transition observed; q_dp is not identifiable");

    CtmcParams init = CtmcParams::zero(n_cov, n_bounds);
    init.log_q0(0) = std::log(std::max(count_pd / std::max(dist_p, 1e-12), 1e-8));
    init.log_q0(1) = std::log(std::max(count_dp / std::max(dist_d, 1e-12), 1e-8));

    // Optimize with rms-standardized covariate coefficients; baselines and
    // segment offsets are already O(1).
    VectorXd rms = VectorXd::Zero(n_cov);
    {
        std::size_t count = 0;
        for (const auto& path : paths)
            for (std::size_t k = 0; k < path.covariates.pieces(); ++k, ++count)
                rms += path.covariates.piece_value(k).cwiseAbs2();
        rms = (rms / static_cast<double>(count)).cwiseSqrt();
    }
    const int per = init.per_transition();
    VectorXd inv_scale = VectorXd::Ones(init.size());
    for (int tr = 0; tr < 2; ++tr)
        for (int i = 0; i < n_cov; ++i)
            if (rms[i] > 0) inv_scale[tr * per + 1 + i] = 1.0 / rms[i];

    auto unpack = [&](const VectorXd& th) {
        CtmcParams p = init;
        p.theta = th.cwiseProduct(inv_scale);
        return p;
    };
    auto obj = [&](const VectorXd& th) {
        return log_likelihood(unpack(th), paths, scheme, nullptr);
    };
    auto grad = [&](const VectorXd& th) {
        VectorXd g;
        log_likelihood(unpack(th), paths, scheme, &g);
        return VectorXd(g.cwiseProduct(inv_scale));
    };

    numerics::OptimOptions opts;
    opts.tol = 1e-6;
    opts.max_iterations = 400;
    const auto res =
        numerics::maximize(obj, grad, init.theta.cwiseQuotient(inv_scale), opts);
    if (!res.converged)
        throw ConvergenceError("CTMC fit did not converge in " +
                               std::to_string(res.iterations) + " iterations");

    Eigen::FullPivLU<MatrixXd> lu(res.hessian);
    if (!lu.isInvertible())
        throw IdentifiabilityError("observed information is singular at the CTMC optimum");

    MarkovFit fit;
    fit.params = unpack(res.argmax);
    fit.covariance = inv_scale.asDiagonal() * lu.inverse() * inv_scale.asDiagonal();
    fit.covariate_names = covariate_names;
    fit.scheme = scheme;
    fit.log_likelihood = res.value;
    fit.converged = true;
    fit.iterations = res.iterations;
    fit.n_trains = static_cast<int>(paths.size());
    fit.n_transitions_pd = count_pd;
    fit.n_transitions_dp = count_dp;

    for (int tr = 0; tr < 2; ++tr) {
        auto& table = tr == 0 ? fit.table_pd : fit.table_dp;
        for (int i = 0; i < n_cov; ++i) {
            const int idx = tr * per + 1 + i;
            table.push_back(wald_row(covariate_names[i], fit.params.theta[idx],
                                     std::sqrt(fit.covariance(idx, idx))));
        }
        for (int b = 0; b < n_bounds; ++b) {
            const int idx = tr * per + 1 + n_cov + b;
            SegmentContrastRow row;
            row.transition = tr;
            row.segment = b + 2;
            row.contrast = wald_row("segment_" + std::to_string(b + 2) + "_vs_1",
                                    fit.params.theta[idx], std::sqrt(fit.covariance(idx, idx)));
            fit.segment_contrasts.push_back(std::move(row));
        }
    }
    return fit;
}

std::vector<double> predict_delay_rate(const CtmcParams& params,
                                       const std::vector<CovariateTrack>& cohort,
                                       const std::vector<double>& eval_points,
                                       const SegmentScheme& scheme,
                                       bool require_full_coverage) {
    for (double d : eval_points)
        if (d < 0 || d > scheme.line_end_km)
            throw DataError("evaluation point " + std::to_string(d) +
                            " outside [0, line end]");
    if (require_full_coverage) {
        double needed = 0.0;
        for (double d : eval_points) needed = std::max(needed, d);
        for (const auto& track : cohort)
            if (track.covariates.end() + 1e-9 < needed)
                throw DataError("train " + track.train_id +
                                ": covariate path has no section beyond km " +
                                std::to_string(track.covariates.end()) +
                                ", needed for evaluation point " + std::to_string(needed));
    }

    // Propagate each train once over the sorted unique points.
    std::vector<double> sorted = eval_points;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::vector<double> sum(sorted.size(), 0.0);
    std::vector<int> count(sorted.size(), 0);
    std::vector<std::vector<double>> per_train(cohort.size());

    parallel_for(cohort.size(), [&](std::size_t i) {
        const auto& track = cohort[i];
        auto& probs = per_train[i];
        probs.assign(sorted.size(), -1.0);
        Eigen::RowVector2d dist(1.0, 0.0); // punctual at the origin
        double pos = track.covariates.start();
        for (std::size_t k = 0; k < sorted.size(); ++k) {
            const double d = sorted[k];
            if (d > track.covariates.end() + 1e-9) break;
            if (d > pos) {
                dist = dist * path_transition_probability(params, track.covariates, pos, d,
                                                          scheme);
                pos = d;
            }
            probs[k] = dist[1];
        }
    });
    for (const auto& probs : per_train)
        for (std::size_t k = 0; k < sorted.size(); ++k)
            if (probs[k] >= 0.0) {
                sum[k] += probs[k];
                ++count[k];
            }

    std::vector<double> rates(eval_points.size());
    for (std::size_t i = 0; i < eval_points.size(); ++i) {
        const std::size_t k = static_cast<std::size_t>(
            std::lower_bound(sorted.begin(), sorted.end(), eval_points[i]) - sorted.begin());
        if (count[k] == 0)
            throw DataError("no train covers evaluation point " +
                            std::to_string(eval_points[i]));
        rates[i] = sum[k] / count[k];
    }
    return rates;
}

namespace {

const char* transition_name(int tr) {
    return tr == 0 ? "punctual_to_delayed" : "delayed_to_punctual";
}

void write_hr_rows(JsonWriter& w, const std::vector<HazardRatioRow>& rows) {
    w.begin_array();
    for (const auto& row : rows) {
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
}

} // namespace

void write_markov_fit_json(std::ostream& out, const MarkovFit& fit) {
    JsonWriter w(out);
    w.begin_object();
    w.kv("model", "inhomogeneous_ctmc");
    w.key("states").begin_array().value("punctual").value("delayed").end_array();
    w.key("covariates").begin_array();
    for (const auto& n : fit.covariate_names) w.value(n);
    w.end_array();
    w.kv("boundaries", fit.scheme.boundaries);
    w.kv("line_end_km", fit.scheme.line_end_km);
    w.kv("n_trains", fit.n_trains);
    w.key("n_transitions")
        .begin_object()
        .kv("punctual_to_delayed", fit.n_transitions_pd)
        .kv("delayed_to_punctual", fit.n_transitions_dp)
        .end_object();
    w.kv("log_likelihood", fit.log_likelihood);
    w.kv("converged", fit.converged);
    w.kv("iterations", fit.iterations);

    w.key("parameters").begin_object();
    for (int tr = 0; tr < 2; ++tr) {
        w.key(transition_name(tr)).begin_object();
        w.kv("log_q0", fit.params.log_q0(tr));
        w.key("beta").begin_object();
        for (std::size_t i = 0; i < fit.covariate_names.size(); ++i)
            w.kv(fit.covariate_names[i], fit.params.beta(tr, static_cast<int>(i)));
        w.end_object();
        w.key("z").begin_array();
        for (int b = 0; b < fit.params.n_boundaries; ++b) w.value(fit.params.z(tr, b));
        w.end_array();
        w.end_object();
    }
    w.end_object();

    w.key("theta").begin_array();
    for (Eigen::Index i = 0; i < fit.params.theta.size(); ++i) w.value(fit.params.theta[i]);
    w.end_array();
    w.key("covariance").begin_array();
    for (Eigen::Index i = 0; i < fit.covariance.rows(); ++i) {
        w.begin_array();
        for (Eigen::Index j = 0; j < fit.covariance.cols(); ++j) w.value(fit.covariance(i, j));
        w.end_array();
    }
    w.end_array();

    w.key("hazard_ratios").begin_object();
    w.key(transition_name(0));
    write_hr_rows(w, fit.table_pd);
    w.key(transition_name(1));
    write_hr_rows(w, fit.table_dp);
    w.end_object();

    w.key("segment_contrasts").begin_array();
    for (const auto& row : fit.segment_contrasts) {
        w.begin_object();
        w.kv("transition", transition_name(row.transition));
        w.kv("segment", row.segment);
        w.kv("vs_segment", 1);
        w.kv("hazard_ratio", row.contrast.hazard_ratio);
        w.kv("ci_lower", row.contrast.ci_lower);
        w.kv("ci_upper", row.contrast.ci_upper);
        w.kv("p_value", row.contrast.p_value);
        w.kv("coef", row.contrast.coef);
        w.kv("se", row.contrast.se);
        w.end_object();
    }
    w.end_array();
    w.end_object();
}

} // namespace raildelay::ctmc
