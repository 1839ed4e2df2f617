#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "raildelay/ingest.hpp"
#include "raildelay/stats.hpp"
#include "raildelay/stepfun.hpp"

namespace raildelay::cox {

inline constexpr int kDefaultMaxRank = 2;

// One train's recurrent-event record over running distance. entry_km is 0
// unless the leading sections were excluded during ingest; a train is at
// risk only on (entry, censor].
struct TrainHistory {
    std::string train_id;
    double entry_km = 0.0;
    std::vector<double> event_km; // ascending; rank j is event_km[j-1]
    double censor_km = 0.0;       // end of observation
    CovariatePath covariates;     // covers (entry, censor]
};

struct CoxDataset {
    std::vector<TrainHistory> trains;
    std::vector<std::string> covariate_names;
    int max_rank = kDefaultMaxRank; // strata beyond are dropped from the fit

    int n_covariates() const { return static_cast<int>(covariate_names.size()); }
    void validate() const;
};

// Events of rank > max_rank are ignored except that they censor the
// previous stratum's interval, matching the rank-cap convention.
CoxDataset make_cox_dataset(const ingest::AnalysisDataset& ds, int max_rank = kDefaultMaxRank);

// Risk set at one (stratum, event time): trains whose stratum-j interval
// (start, stop] contains the event time. The event's own train is always a
// member. Tied events share one entry.
struct RiskSet {
    int stratum = 0; // 1-based event rank
    double time = 0.0;
    int event_count = 0;
    std::vector<int> event_trains; // indices into CoxDataset::trains
    std::vector<int> at_risk;      // ascending train indices
};

std::vector<RiskSet> build_risk_sets(const CoxDataset& ds);

// Log of the stratified partial likelihood, with the analytic score in
// *grad when non-null. The inner log-sum is max-shifted.
double partial_log_likelihood(const Eigen::VectorXd& beta, const CoxDataset& ds,
                              Eigen::VectorXd* grad = nullptr);

// Right-continuous step function: value[i] holds from time[i] on.
struct StepCurve {
    std::vector<double> times;
    std::vector<double> values;
};

struct CoxFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;
    std::vector<HazardRatioRow> table;     // one row per covariate
    std::vector<StepCurve> baseline;       // cumulative hazard per stratum (index j-1)
    std::vector<std::string> covariate_names;
    double log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;
    int n_trains = 0;
    int n_events = 0;
    int max_rank = 0;
};

// Maximizes the partial likelihood; covariance is the inverse observed
// information (finite differences on the analytic score). Throws
// IdentifiabilityError naming collinear columns, ConvergenceError when the
// optimizer fails.
CoxFit fit_stratified_cox(const CoxDataset& ds);

// Breslow estimator: jump (events at t) / sum of exp(beta'x) over the risk
// set, cumulated over the stratum's event times.
StepCurve baseline_cumhaz(const CoxFit& fit, const CoxDataset& ds, int stratum);

struct SurvivalCurve {
    int stratum = 0;
    std::vector<double> km;       // grid, starting at 0
    std::vector<double> survival; // starts at 1, nonincreasing
};

// S(t) = exp(-sum of baseline jumps up to t weighted by exp(beta'x(u))),
// evaluated along the given covariate path.
SurvivalCurve survival_curve(const CoxFit& fit, int stratum, const CovariatePath& path);

// The k largest single-step decreases, positions ascending. Steps within
// min_separation_km of an already-selected larger step are suppressed, so
// one steep stretch of the curve yields one suggestion. distinct=false
// signals a flat curve or all-equal steps (no usable suggestion).
struct DropPoints {
    std::vector<double> km;
    bool distinct = false;
};

DropPoints detect_drop_points(const SurvivalCurve& curve, int k,
                              double min_separation_km = 50.0);

void write_cox_fit_json(std::ostream& out, const CoxFit& fit);
void write_survival_csv(std::ostream& out, const std::vector<SurvivalCurve>& curves);

} // namespace raildelay::cox
