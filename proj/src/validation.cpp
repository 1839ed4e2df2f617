#include "raildelay/validation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "raildelay/csvio.hpp"
#include "raildelay/errors.hpp"
#include "raildelay/jsonio.hpp"
#include "raildelay/simulate.hpp"

namespace raildelay::validation {

std::vector<FoldSpec> walk_forward_split(Day data_begin, Day data_end, Day first_training_end,
                                         int window_days, int folds) {
    if (window_days < 1 || folds < 1)
        throw DataError("walk_forward_split: window_days and folds must be >= 1");
    if (first_training_end < data_begin)
        throw DataError("walk_forward_split: first training window ends " +
                        std::to_string(data_begin - first_training_end) +
                        " day(s) before the data begins (" + format_date(data_begin) + ")");
    const Day needed_end = first_training_end + static_cast<Day>(folds * window_days);
    if (needed_end > data_end)
        throw DataError("walk_forward_split: needs data through " + format_date(needed_end) +
                        " but the dataset ends " + format_date(data_end) + " (" +
                        std::to_string(needed_end - data_end) + " day(s) short)");

    std::vector<FoldSpec> out;
    for (int k = 1; k <= folds; ++k) {
        FoldSpec f;
        f.index = k;
        f.train_begin = data_begin;
        f.train_end = first_training_end + static_cast<Day>((k - 1) * window_days);
        f.val_begin = f.train_end + 1;
        f.val_end = f.train_end + static_cast<Day>(window_days);
        out.push_back(f);
    }
    return out;
}

double observed_delay_rate(const std::vector<ctmc::ObservedPath>& cohort, double eval_point,
                           int* count) {
    int total = 0;
    int delayed = 0;
    for (const auto& path : cohort) {
        if (path.km.back() < eval_point) continue; // run ends before the point
        // Nearest spot at or before the evaluation point.
        auto it = std::upper_bound(path.km.begin(), path.km.end(), eval_point);
        if (it == path.km.begin()) continue; // first spot is beyond the point
        const std::size_t idx = static_cast<std::size_t>(it - path.km.begin()) - 1;
        ++total;
        delayed += path.state[idx] == ctmc::kDelayed ? 1 : 0;
    }
    if (count) *count = total;
    if (total == 0)
        throw DataError("no train observed at or before evaluation point " +
                        std::to_string(eval_point));
    return static_cast<double>(delayed) / total;
}

double mae(const std::vector<double>& expected, const std::vector<double>& observed) {
    if (expected.size() != observed.size() || expected.empty())
        throw DataError("mae: vectors must have equal, nonzero length");
    double sum = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i)
        sum += std::abs(expected[i] - observed[i]);
    return sum / static_cast<double>(expected.size());
}

std::vector<double> default_eval_points(double line_end_km) {
    std::vector<double> pts;
    for (double d = 50.0; d <= line_end_km + 1e-9; d += 50.0) pts.push_back(d);
    return pts;
}

namespace {

ingest::AnalysisDataset slice_by_date(const ingest::AnalysisDataset& ds, Day begin, Day end) {
    ingest::AnalysisDataset out;
    out.line_end_km = ds.line_end_km;
    for (const auto& r : ds.rows)
        if (r.date >= begin && r.date <= end) out.rows.push_back(r);
    return out;
}

} // namespace

ValidationReport run_validation(const ingest::AnalysisDataset& ds,
                                const ctmc::SegmentScheme& scheme, const ValidationConfig& cfg,
                                const ctmc::CtmcParams* injected) {
    if (ds.rows.empty()) throw DataError("run_validation: empty dataset");
    Day data_begin = ds.rows.front().date;
    Day data_end = ds.rows.front().date;
    for (const auto& r : ds.rows) {
        data_begin = std::min(data_begin, r.date);
        data_end = std::max(data_end, r.date);
    }
    const Day first_end = cfg.first_training_end
                              ? *cfg.first_training_end
                              : data_end - static_cast<Day>(cfg.folds * cfg.window_days);
    const auto folds = walk_forward_split(data_begin, data_end, first_end, cfg.window_days,
                                          cfg.folds);

    ValidationReport report;
    report.eval_points =
        cfg.eval_points.empty() ? default_eval_points(ds.line_end_km) : cfg.eval_points;

    double mae_sum = 0.0;
    for (const auto& spec : folds) {
        FoldResult fold;
        fold.spec = spec;
        const auto training = slice_by_date(ds, spec.train_begin, spec.train_end);
        const auto validating = slice_by_date(ds, spec.val_begin, spec.val_end);
        try {
            const auto train_paths =
                ctmc::make_observed_paths(training, cfg.assume_punctual_origin);
            const auto val_paths = ctmc::make_observed_paths(validating, true);
            const auto val_tracks = ctmc::make_covariate_tracks(validating);
            fold.n_training_trains = static_cast<int>(train_paths.size());
            fold.n_validation_trains = static_cast<int>(val_paths.size());
            if (val_paths.empty())
                throw DataError("no validation trains in " + format_date(spec.val_begin) +
                                ".." + format_date(spec.val_end));

            ctmc::CtmcParams params;
            if (injected) {
                params = *injected;
            } else {
                params = ctmc::fit_ctmc(train_paths, scheme, sim::covariate_names()).params;
            }

            // Points nobody reaches are excluded, loudly.
            std::vector<double> usable;
            for (double d : report.eval_points) {
                int count = 0;
                for (const auto& p : val_paths)
                    if (p.km.back() >= d && p.km.front() <= d) ++count;
                if (count > 0) {
                    usable.push_back(d);
                } else {
                    report.warnings.push_back("fold " + std::to_string(spec.index) +
                                              ": no train at evaluation point " +
                                              format_double(d) + ", point excluded");
                }
            }
            if (usable.empty()) throw DataError("no usable evaluation points");

            fold.eval_points = usable;
            fold.expected = ctmc::predict_delay_rate(params, val_tracks, usable, scheme);
            for (double d : usable) {
                int count = 0;
                fold.observed.push_back(observed_delay_rate(val_paths, d, &count));
                fold.train_counts.push_back(count);
            }
            fold.mae_value = mae(fold.expected, fold.observed);
            fold.fitted = true;
            mae_sum += fold.mae_value;
            ++report.completed_folds;
        } catch (const std::exception& e) {
            fold.fitted = false;
            fold.failure = e.what();
            report.warnings.push_back("fold " + std::to_string(spec.index) +
                                      " failed: " + fold.failure);
        }
        report.folds.push_back(std::move(fold));
    }
    if (report.completed_folds == 0)
        throw ConvergenceError("run_validation: every fold failed");
    report.averaged_mae = mae_sum / report.completed_folds;
    return report;
}

void write_validation_report_json(std::ostream& out, const ValidationReport& report) {
    JsonWriter w(out);
    w.begin_object();
    w.kv("model", "walk_forward_validation");
    w.kv("eval_points", report.eval_points);
    w.kv("completed_folds", report.completed_folds);
    w.kv("averaged_mae", report.averaged_mae);
    w.key("folds").begin_array();
    for (const auto& fold : report.folds) {
        w.begin_object();
        w.kv("fold", fold.spec.index);
        w.kv("train_begin", format_date(fold.spec.train_begin));
        w.kv("train_end", format_date(fold.spec.train_end));
        w.kv("val_begin", format_date(fold.spec.val_begin));
        w.kv("val_end", format_date(fold.spec.val_end));
        w.kv("fitted", fold.fitted);
        if (!fold.fitted) {
            w.kv("failure", fold.failure);
        } else {
            w.kv("n_training_trains", fold.n_training_trains);
            w.kv("n_validation_trains", fold.n_validation_trains);
            w.kv("mae", fold.mae_value);
            w.kv("eval_points", fold.eval_points);
            w.kv("expected", fold.expected);
            w.kv("observed", fold.observed);
            w.key("train_counts").begin_array();
            for (int c : fold.train_counts) w.value(c);
            w.end_array();
        }
        w.end_object();
    }
    w.end_array();
    if (!report.warnings.empty()) {
        w.key("warnings").begin_array();
        for (const auto& msg : report.warnings) w.value(msg);
        w.end_array();
    }
    w.end_object();
}

void write_fold_curves_csv(std::ostream& out, const ValidationReport& report) {
    out << "fold,km,expected_rate,observed_rate,train_count\n";
    for (const auto& fold : report.folds) {
        if (!fold.fitted) continue;
        for (std::size_t i = 0; i < fold.eval_points.size(); ++i)
            out << fold.spec.index << ',' << format_double(fold.eval_points[i]) << ','
                << format_double(fold.expected[i]) << ',' << format_double(fold.observed[i])
                << ',' << fold.train_counts[i] << '\n';
    }
}

} // namespace raildelay::validation
