#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "raildelay/ingest.hpp"
#include "raildelay/stats.hpp"
#include "raildelay/stepfun.hpp"
#include "raildelay/timeutil.hpp"

namespace raildelay::ctmc {

// State 0 = punctual, 1 = delayed (arrival-delay status at a spot).
inline constexpr int kPunctual = 0;
inline constexpr int kDelayed = 1;

// Distances where the transition intensities are allowed to jump. With
// boundaries {b1, b2} the segments are [0,b1), [b1,b2), [b2,end); segment
// coefficients are offsets of segments 2.. relative to segment 1.
struct SegmentScheme {
    std::vector<double> boundaries;
    double line_end_km = 0.0;

    SegmentScheme() = default;
    SegmentScheme(std::vector<double> bounds, double line_end);

    int n_segments() const { return static_cast<int>(boundaries.size()) + 1; }
    // 0-based segment containing t.
    int segment_of(double t) const;
};

// Log-linear intensity parameters for the two directed transitions.
// Packing per transition: [log_q0, beta (one per covariate), z (one per
// boundary)]; punctual->delayed first, then delayed->punctual.
struct CtmcParams {
    Eigen::VectorXd theta;
    int n_covariates = 0;
    int n_boundaries = 0;

    static CtmcParams zero(int n_covariates, int n_boundaries);
    int per_transition() const { return 1 + n_covariates + n_boundaries; }
    int size() const { return 2 * per_transition(); }

    double log_q0(int transition) const { return theta[transition * per_transition()]; }
    double beta(int transition, int i) const {
        return theta[transition * per_transition() + 1 + i];
    }
    double z(int transition, int b) const {
        return theta[transition * per_transition() + 1 + n_covariates + b];
    }
    double& log_q0(int transition) { return theta[transition * per_transition()]; }
    double& beta(int transition, int i) {
        return theta[transition * per_transition() + 1 + i];
    }
    double& z(int transition, int b) {
        return theta[transition * per_transition() + 1 + n_covariates + b];
    }
};

// States of one train recorded at its measuring spots, plus the per-section
// covariates in force between them.
struct ObservedPath {
    std::string train_id;
    Day date = 0;
    std::vector<double> km;  // ascending; km[0] is the initial station
    std::vector<int> state;  // same length; state[0] is punctual by convention
    CovariatePath covariates;

    void validate() const;
};

// 2x2 generator at distance t: off-diagonals q_rs = q0 * exp(beta'x + z of
// the segment containing t), rows summing to zero exactly.
Eigen::MatrixXd intensity_matrix(const CtmcParams& params, const Eigen::VectorXd& x, double t,
                                 const SegmentScheme& scheme);

// Transition probabilities over [t_a, t_b) along a covariate path: the
// interval is cut at every section boundary and segment boundary and the
// piece exponentials are multiplied in order. The product form is exactly
// the sum over the (censored) intermediate states at each cut.
Eigen::MatrixXd path_transition_probability(const CtmcParams& params,
                                            const CovariatePath& covariates, double t_a,
                                            double t_b, const SegmentScheme& scheme);

// Sum over trains and consecutive spot pairs of the log transition
// probability. A zero probability yields -inf (optionally described in
// *diagnostic), never a crash. The analytic gradient lands in *grad.
double log_likelihood(const CtmcParams& params, const std::vector<ObservedPath>& paths,
                      const SegmentScheme& scheme, Eigen::VectorXd* grad = nullptr,
                      std::string* diagnostic = nullptr);

struct SegmentContrastRow {
    int transition = 0;          // 0 = punctual->delayed, 1 = delayed->punctual
    int segment = 0;             // 1-based; contrasted against segment 1
    HazardRatioRow contrast;     // exp(z) with CI and p
};

struct MarkovFit {
    CtmcParams params;
    Eigen::MatrixXd covariance;
    std::vector<std::string> covariate_names;
    SegmentScheme scheme;
    // Hazard-ratio tables per transition (covariates) and per segment
    // contrast, in the layout of the reporting tables.
    std::vector<HazardRatioRow> table_pd;
    std::vector<HazardRatioRow> table_dp;
    std::vector<SegmentContrastRow> segment_contrasts;
    double log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;
    int n_trains = 0;
    int n_transitions_pd = 0;
    int n_transitions_dp = 0;
};

// Maximum likelihood fit. Requires both transitions observed at least once;
// otherwise throws IdentifiabilityError.
MarkovFit fit_ctmc(const std::vector<ObservedPath>& paths, const SegmentScheme& scheme,
                   const std::vector<std::string>& covariate_names);

// Cohort member for prediction: covariates only, no states.
struct CovariateTrack {
    std::string train_id;
    CovariatePath covariates;
};

// Expected arrival-delay rate at each evaluation point: every train starts
// punctual at its origin, the state distribution is propagated along its
// covariate path, and the delayed-state probabilities are averaged over the
// trains whose paths reach the point. With require_full_coverage a track
// whose covariates stop short of an evaluation point is an error naming the
// train and the distance where its sections end; otherwise such trains
// leave that point's average.
std::vector<double> predict_delay_rate(const CtmcParams& params,
                                       const std::vector<CovariateTrack>& cohort,
                                       const std::vector<double>& eval_points,
                                       const SegmentScheme& scheme,
                                       bool require_full_coverage = false);

// Conversions from the section dataset.
std::vector<ObservedPath> make_observed_paths(const ingest::AnalysisDataset& ds,
                                              bool assume_punctual_origin = true);
std::vector<CovariateTrack> make_covariate_tracks(const ingest::AnalysisDataset& ds);

void write_markov_fit_json(std::ostream& out, const MarkovFit& fit);

} // namespace raildelay::ctmc
