#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "raildelay/ctmc.hpp"
#include "raildelay/ingest.hpp"
#include "raildelay/timeutil.hpp"

namespace raildelay::validation {

// One expanding-window fold: train on [train_begin, train_end], score the
// following window_days.
struct FoldSpec {
    int index = 0; // 1-based
    Day train_begin = 0;
    Day train_end = 0;
    Day val_begin = 0;
    Day val_end = 0;
};

// Fold k trains through first_training_end + (k-1)*window_days and
// validates the next window_days. Throws DataError listing the shortfall
// when the dataset range cannot host the scheme.
std::vector<FoldSpec> walk_forward_split(Day data_begin, Day data_end, Day first_training_end,
                                         int window_days, int folds);

// A train's state at an evaluation point is its arrival-delay indicator at
// the nearest spot at or before the point; trains whose observation ends
// before the point are excluded. Throws DataError when no train qualifies.
double observed_delay_rate(const std::vector<ctmc::ObservedPath>& cohort, double eval_point,
                           int* count = nullptr);

double mae(const std::vector<double>& expected, const std::vector<double>& observed);

struct FoldResult {
    FoldSpec spec;
    bool fitted = false;
    std::string failure; // set when the fold's fit failed
    std::vector<double> eval_points;
    std::vector<double> expected;
    std::vector<double> observed;
    std::vector<int> train_counts;
    int n_training_trains = 0;
    int n_validation_trains = 0;
    double mae_value = 0.0;
};

struct ValidationReport {
    std::vector<FoldResult> folds;
    std::vector<double> eval_points;
    double averaged_mae = 0.0; // over completed folds only
    int completed_folds = 0;
    std::vector<std::string> warnings;
};

struct ValidationConfig {
    std::optional<Day> first_training_end; // default: squeeze folds at the range end
    int window_days = 7;
    int folds = 4;
    std::vector<double> eval_points; // default {50, 100, ..., 700}
    bool assume_punctual_origin = true;
};

std::vector<double> default_eval_points(double line_end_km);

// Per fold: fit the CTMC on the training range, compare predicted and
// observed arrival-delay rates at the evaluation points, and report MAE per
// fold plus the average over completed folds. Passing injected skips the
// fitting and scores those parameters directly (an oracle control run).
ValidationReport run_validation(const ingest::AnalysisDataset& ds,
                                const ctmc::SegmentScheme& scheme,
                                const ValidationConfig& cfg,
                                const ctmc::CtmcParams* injected = nullptr);

void write_validation_report_json(std::ostream& out, const ValidationReport& report);
void write_fold_curves_csv(std::ostream& out, const ValidationReport& report);

} // namespace raildelay::validation
