#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raildelay/timeutil.hpp"

namespace raildelay::ingest {

// One timetable row: a train calling at a measuring spot. Coordinates place
// the spot for weather matching (in synthetic data, lat carries the km
// position along the physical line and lon is 0).
struct SpotCall {
    std::string spot;
    double km = 0.0; // cumulative, from the train's initial station
    double lat = 0.0;
    double lon = 0.0;
    Minute planned_arrival = 0;
    Minute planned_departure = 0;
    std::optional<Minute> actual_arrival;
    std::optional<Minute> actual_departure;
};

enum class Terminus { north, south };

struct RunRecord {
    std::string train_id;
    Day date = 0; // service date (departure date at the initial station)
    Terminus initial_station = Terminus::north;
    std::vector<SpotCall> spots;

    void validate() const; // throws DataError on invariant breaches
};

struct WeatherSample {
    double lat = 0.0;
    double lon = 0.0;
    Minute hour = 0; // truncated to the hour
    double temperature = 0.0;
    double humidity = 0.0;
    double snow_depth = 0.0;
    double ice_snow_precip = 0.0;
};

// Samples grouped by hour for nearest-point lookup.
class WeatherGrid {
public:
    WeatherGrid() = default;
    explicit WeatherGrid(std::vector<WeatherSample> samples);

    const std::vector<WeatherSample>* at_hour(Minute hour) const;
    std::size_t size() const { return n_; }

private:
    std::map<Minute, std::vector<WeatherSample>> by_hour_;
    std::size_t n_ = 0;
};

struct SectionObservation {
    std::string train_id;
    Day date = 0;
    int section_index = 0; // 0-based
    double from_km = 0.0;
    double to_km = 0.0;
    int direction = 0; // 1 = departs the north terminus
    double temperature = 0.0;
    double humidity = 0.0;
    double snow_depth = 0.0;
    int precip_flag = 0;
    int primary_delay = 0;
    int arrival_delay = 0;
};

struct AnalysisDataset {
    std::vector<SectionObservation> rows; // sorted by (train_id, section_index)
    double line_end_km = 0.0;             // largest to_km seen
};

struct IngestReport {
    int runs_total = 0;
    int sections_total = 0;
    int sections_excluded_missing_actuals = 0;
    std::vector<std::string> excluded; // "train_id section=k" notes
};

// Indicator derivation for one run, before covariates are attached.
// excluded=true marks sections dropped for missing actual times.
struct IndicatorSection {
    int section_index = 0;
    double from_km = 0.0;
    double to_km = 0.0;
    int primary_delay = 0;
    int arrival_delay = 0;
    bool excluded = false;
};

// Primary delay: running time at least 3 minutes over schedule across the
// section. Arrival delay: arrival at least 5 minutes after schedule at the
// section's arrival spot. Both thresholds are inclusive, at minute
// resolution.
std::vector<IndicatorSection> derive_indicators(const RunRecord& run);

// Sample at the spatially nearest grid point for the hour nearest to
// event_time (half-hours round up). Throws MissingWeatherError naming the
// spot and hour when the grid has nothing for that hour.
const WeatherSample& match_weather(const std::string& spot_name, double lat, double lon,
                                   Minute event_time, const WeatherGrid& grid);

struct SectionCovariates {
    double temperature = 0.0;
    double humidity = 0.0;
    double snow_depth = 0.0;
    int precip_flag = 0;
};

// Arithmetic means of the endpoint samples; the precipitation flag is the
// binarized mean.
SectionCovariates section_covariates(const WeatherSample& dep, const WeatherSample& arr);

AnalysisDataset assemble_dataset(const std::vector<RunRecord>& runs, const WeatherGrid& grid,
                                 IngestReport* report = nullptr);

// CSV surfaces; column layouts are fixed and documented in FORMATS.md.
std::vector<RunRecord> read_runs_csv(const std::string& path);
void write_runs_csv(const std::string& path, const std::vector<RunRecord>& runs);
WeatherGrid read_weather_csv(const std::string& path);
void write_weather_csv(const std::string& path, const std::vector<WeatherSample>& samples);
AnalysisDataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const AnalysisDataset& ds);

} // namespace raildelay::ingest
