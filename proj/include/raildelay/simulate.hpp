#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "raildelay/cox.hpp"
#include "raildelay/ctmc.hpp"
#include "raildelay/ingest.hpp"
#include "raildelay/timeutil.hpp"

namespace raildelay::sim {

// AR(1) weather process: v_t = mean + x_t with x_t = ar * x_{t-1} + sd * e_t,
// started from its stationary distribution and clamped to [floor, ceil].
struct Ar1Spec {
    double mean = 0.0;
    double ar = 0.9;
    double sd = 1.0;
    double winter2_delta = 0.0; // mean shift from second_winter_start on
    double floor = -1e300;
    double ceil = 1e300;

    double stationary_sd() const;
};

// Covariate order everywhere: direction, temperature, humidity, snow_depth,
// precip_flag.
inline constexpr int kNumCovariates = 5;

struct SimConfig {
    std::uint64_t seed = 0; // mandatory in config files
    int trains_per_day = 2;
    Day date_begin = 0;
    Day date_end = 0;
    int spots = 116;
    double line_km = 711.0;
    double grid_step_km = 25.0;
    double direction_mix = 0.5; // fraction of runs departing the north terminus
    double base_speed_kmh = 110.0;
    int dwell_min = 2;
    double missing_actuals_rate = 0.0;

    Ar1Spec temperature;
    Ar1Spec humidity;
    Ar1Spec snow_depth;
    Ar1Spec precip; // latent; clamped at 0, many exact zeros
    std::optional<Day> second_winter_start;

    // Transition-intensity truth: baselines on the rate scale, covariate
    // and segment effects as hazard ratios.
    double ctmc_q0_pd = 0.004;
    double ctmc_q0_dp = 0.03;
    std::array<double, kNumCovariates> ctmc_hr_pd{0.586, 0.958, 0.997, 1.026, 1.142};
    std::array<double, kNumCovariates> ctmc_hr_dp{0.751, 1.017, 1.003, 0.984, 0.765};
    std::vector<double> boundaries{200.0, 500.0};
    std::vector<double> ctmc_hr_seg_pd{1.947, 1.658};
    std::vector<double> ctmc_hr_seg_dp{1.038, 0.718};

    // Primary-delay truth: piecewise-constant rank-1 baseline hazard over
    // distance, with high-rate windows around 200 km and 500 km; higher
    // ranks scale it by stratum_scale^(rank-1).
    std::vector<double> cox_h0_breaks{195.0, 215.0, 495.0, 515.0};
    std::vector<double> cox_h0_rates{0.0012, 0.012, 0.0012, 0.016, 0.0012};
    double cox_stratum_scale = 0.7;
    std::array<double, kNumCovariates> cox_hr{1.021, 0.989, 1.001, 1.014, 1.225};

    void validate() const;
};

SimConfig default_config();

// key = value file, '#' comments; seed is required. Errors carry the
// offending line number.
SimConfig load_sim_config(const std::string& path);

ctmc::CtmcParams true_ctmc_params(const SimConfig& cfg);
Eigen::VectorXd true_cox_beta(const SimConfig& cfg);
ctmc::SegmentScheme true_scheme(const SimConfig& cfg);

std::vector<std::string> covariate_names();

// Gridded AR(1) weather over [date_begin, date_end + 1], one sample per
// grid point per hour.
std::vector<ingest::WeatherSample> simulate_weather(const SimConfig& cfg);

// Full pipeline output: timetabled runs whose actual times realize the
// simulated arrival states and (where feasible) primary-delay events, the
// weather grid they were matched against, and the dataset the deriver is
// expected to reproduce.
struct PipelineData {
    std::vector<ingest::RunRecord> runs;
    std::vector<ingest::WeatherSample> weather;
    ingest::AnalysisDataset dataset;
    int primary_planted = 0;
    int primary_realized = 0;
};

PipelineData simulate_pipeline(const SimConfig& cfg);

// Direct oracles, bypassing the timetable round trip. Covariates are drawn
// per section from the stationary weather distributions; event distances
// are exact (state transitions by exponential waiting times within
// constant-rate pieces, Cox events by inversion of the cumulative hazard).
std::vector<ctmc::ObservedPath> simulate_ctmc_paths(const SimConfig& cfg, int n_trains);
cox::CoxDataset simulate_cox_dataset(const SimConfig& cfg, int n_trains);

void write_truth_json(std::ostream& out, const SimConfig& cfg, const PipelineData& data);

} // namespace raildelay::sim
