#include "raildelay/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "raildelay/csvio.hpp"
#include "raildelay/errors.hpp"

namespace raildelay::ingest {

void RunRecord::validate() const {
    if (spots.size() < 2)
        throw DataError("run " + train_id + ": needs at least 2 spots");
    for (std::size_t i = 0; i < spots.size(); ++i) {
        const auto& s = spots[i];
        if (i > 0 && !(s.km > spots[i - 1].km))
            throw DataError("run " + train_id + ": cumulative km not strictly increasing at '" +
                            s.spot + "'");
        if (s.planned_departure < s.planned_arrival)
            throw DataError("run " + train_id + ": planned departure before arrival at '" +
                            s.spot + "'");
    }
}

WeatherGrid::WeatherGrid(std::vector<WeatherSample> samples) {
    for (auto& s : samples) by_hour_[s.hour].push_back(std::move(s));
    for (auto& [h, v] : by_hour_) n_ += v.size();
}

const std::vector<WeatherSample>* WeatherGrid::at_hour(Minute hour) const {
    auto it = by_hour_.find(hour);
    return it == by_hour_.end() ? nullptr : &it->second;
}

std::vector<IndicatorSection> derive_indicators(const RunRecord& run) {
    run.validate();
    std::vector<IndicatorSection> out;
    out.reserve(run.spots.size() - 1);
    for (std::size_t i = 0; i + 1 < run.spots.size(); ++i) {
        const SpotCall& from = run.spots[i];
        const SpotCall& to = run.spots[i + 1];
        IndicatorSection sec;
        sec.section_index = static_cast<int>(i);
        sec.from_km = from.km;
        sec.to_km = to.km;
        if (!from.actual_departure || !to.actual_arrival) {
            sec.excluded = true;
            out.push_back(sec);
            continue;
        }
        const Minute actual_run = *to.actual_arrival - *from.actual_departure;
        const Minute planned_run = to.planned_arrival - from.planned_departure;
        sec.primary_delay = (actual_run - planned_run >= 3) ? 1 : 0;
        sec.arrival_delay = (*to.actual_arrival - to.planned_arrival >= 5) ? 1 : 0;
        out.push_back(sec);
    }
    return out;
}

const WeatherSample& match_weather(const std::string& spot_name, double lat, double lon,
                                   Minute event_time, const WeatherGrid& grid) {
    const Minute hour = round_to_hour(event_time);
    const auto* samples = grid.at_hour(hour);
    if (!samples || samples->empty())
        throw MissingWeatherError("no weather for spot '" + spot_name + "' at hour " +
                                  format_minute(hour));
    const WeatherSample* best = nullptr;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const auto& s : *samples) {
        const double dx = s.lat - lat;
        const double dy = s.lon - lon;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = &s;
        }
    }
    return *best;
}

SectionCovariates section_covariates(const WeatherSample& dep, const WeatherSample& arr) {
    SectionCovariates c;
    c.temperature = 0.5 * (dep.temperature + arr.temperature);
    c.humidity = 0.5 * (dep.humidity + arr.humidity);
    c.snow_depth = 0.5 * (dep.snow_depth + arr.snow_depth);
    c.precip_flag = (0.5 * (dep.ice_snow_precip + arr.ice_snow_precip) > 0.0) ? 1 : 0;
    return c;
}

AnalysisDataset assemble_dataset(const std::vector<RunRecord>& runs, const WeatherGrid& grid,
                                 IngestReport* report) {
    AnalysisDataset ds;
    IngestReport local;
    IngestReport& rep = report ? *report : local;
    rep.runs_total = static_cast<int>(runs.size());

    for (const auto& run : runs) {
        const auto sections = derive_indicators(run);
        const int direction = run.initial_station == Terminus::north ? 1 : 0;
        for (const auto& sec : sections) {
            ++rep.sections_total;
            if (sec.excluded) {
                ++rep.sections_excluded_missing_actuals;
                rep.excluded.push_back(run.train_id +
                                       " section=" + std::to_string(sec.section_index));
                continue;
            }
            const SpotCall& from = run.spots[sec.section_index];
            const SpotCall& to = run.spots[sec.section_index + 1];
            // Weather is looked up at the actual departure time at the
            // from-spot and the actual arrival time at the to-spot.
            const WeatherSample& dep =
                match_weather(from.spot, from.lat, from.lon, *from.actual_departure, grid);
            const WeatherSample& arr =
                match_weather(to.spot, to.lat, to.lon, *to.actual_arrival, grid);
            const SectionCovariates cov = section_covariates(dep, arr);

            SectionObservation obs;
            obs.train_id = run.train_id;
            obs.date = run.date;
            obs.section_index = sec.section_index;
            obs.from_km = sec.from_km;
            obs.to_km = sec.to_km;
            obs.direction = direction;
            obs.temperature = cov.temperature;
            obs.humidity = cov.humidity;
            obs.snow_depth = cov.snow_depth;
            obs.precip_flag = cov.precip_flag;
            obs.primary_delay = sec.primary_delay;
            obs.arrival_delay = sec.arrival_delay;
            ds.rows.push_back(std::move(obs));
        }
    }
    std::sort(ds.rows.begin(), ds.rows.end(), [](const auto& a, const auto& b) {
        if (a.train_id != b.train_id) return a.train_id < b.train_id;
        return a.section_index < b.section_index;
    });
    for (const auto& r : ds.rows) ds.line_end_km = std::max(ds.line_end_km, r.to_km);
    return ds;
}

// ---------------------------------------------------------------------------
// CSV surfaces

namespace {

std::optional<Minute> opt_minute(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_minute(s);
}

std::string opt_str(const std::optional<Minute>& m) {
    return m ? format_minute(*m) : std::string();
}

} // namespace

std::vector<RunRecord> read_runs_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int c_train = t.col("train_id");
    const int c_date = t.col("date");
    const int c_init = t.col("initial_station");
    const int c_spot = t.col("spot");
    const int c_km = t.col("km");
    const int c_lat = t.col("lat");
    const int c_lon = t.col("lon");
    const int c_pa = t.col("planned_arrival");
    const int c_pd = t.col("planned_departure");
    const int c_aa = t.col("actual_arrival");
    const int c_ad = t.col("actual_departure");

    std::vector<RunRecord> runs;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (runs.empty() || runs.back().train_id != row[c_train]) {
            RunRecord run;
            run.train_id = row[c_train];
            run.date = parse_date(row[c_date]);
            const std::string& init = row[c_init];
            if (init == "north_terminus")
                run.initial_station = Terminus::north;
            else if (init == "south_terminus")
                run.initial_station = Terminus::south;
            else
                throw ParseError(path + ":" + std::to_string(i + 2) +
                                 ": initial_station must be north_terminus or south_terminus");
            runs.push_back(std::move(run));
        }
        SpotCall s;
        s.spot = row[c_spot];
        s.km = csv_double(t, i, c_km);
        s.lat = csv_double(t, i, c_lat);
        s.lon = csv_double(t, i, c_lon);
        s.planned_arrival = parse_minute(row[c_pa]);
        s.planned_departure = parse_minute(row[c_pd]);
        s.actual_arrival = opt_minute(row[c_aa]);
        s.actual_departure = opt_minute(row[c_ad]);
        runs.back().spots.push_back(std::move(s));
    }
    for (const auto& r : runs) r.validate();
    return runs;
}

void write_runs_csv(const std::string& path, const std::vector<RunRecord>& runs) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "train_id,date,initial_station,spot,km,lat,lon,planned_arrival,planned_departure,"
           "actual_arrival,actual_departure\n";
    for (const auto& run : runs) {
        const std::string init =
            run.initial_station == Terminus::north ? "north_terminus" : "south_terminus";
        for (const auto& s : run.spots) {
            out << csv_line({run.train_id, format_date(run.date), init, s.spot,
                             format_double(s.km), format_double(s.lat), format_double(s.lon),
                             format_minute(s.planned_arrival),
                             format_minute(s.planned_departure), opt_str(s.actual_arrival),
                             opt_str(s.actual_departure)})
                << '\n';
        }
    }
}

WeatherGrid read_weather_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int c_lat = t.col("lat");
    const int c_lon = t.col("lon");
    const int c_hour = t.col("hour");
    const int c_temp = t.col("temperature");
    const int c_hum = t.col("humidity");
    const int c_snow = t.col("snow_depth");
    const int c_prec = t.col("ice_snow_precip");

    std::vector<WeatherSample> samples;
    samples.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        WeatherSample s;
        s.lat = csv_double(t, i, c_lat);
        s.lon = csv_double(t, i, c_lon);
        s.hour = parse_minute(t.rows[i][c_hour]);
        s.temperature = csv_double(t, i, c_temp);
        s.humidity = csv_double(t, i, c_hum);
        s.snow_depth = csv_double(t, i, c_snow);
        s.ice_snow_precip = csv_double(t, i, c_prec);
        if (s.humidity < 0 || s.humidity > 100)
            throw DataError(path + ":" + std::to_string(i + 2) + ": humidity outside [0,100]");
        if (s.snow_depth < 0 || s.ice_snow_precip < 0)
            throw DataError(path + ":" + std::to_string(i + 2) +
                            ": negative snow depth or precipitation");
        samples.push_back(s);
    }
    return WeatherGrid(std::move(samples));
}

void write_weather_csv(const std::string& path, const std::vector<WeatherSample>& samples) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "lat,lon,hour,temperature,humidity,snow_depth,ice_snow_precip\n";
    for (const auto& s : samples) {
        out << csv_line({format_double(s.lat), format_double(s.lon), format_minute(s.hour),
                         format_double(s.temperature), format_double(s.humidity),
                         format_double(s.snow_depth), format_double(s.ice_snow_precip)})
            << '\n';
    }
}

AnalysisDataset read_dataset_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int c_train = t.col("train_id");
    const int c_date = t.col("date");
    const int c_idx = t.col("section_index");
    const int c_from = t.col("from_km");
    const int c_to = t.col("to_km");
    const int c_dir = t.col("direction");
    const int c_temp = t.col("temperature");
    const int c_hum = t.col("humidity");
    const int c_snow = t.col("snow_depth");
    const int c_prec = t.col("precip_flag");
    const int c_prim = t.col("primary_delay");
    const int c_arr = t.col("arrival_delay");

    AnalysisDataset ds;
    ds.rows.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        SectionObservation o;
        o.train_id = t.rows[i][c_train];
        o.date = parse_date(t.rows[i][c_date]);
        o.section_index = static_cast<int>(csv_int(t, i, c_idx));
        o.from_km = csv_double(t, i, c_from);
        o.to_km = csv_double(t, i, c_to);
        o.direction = static_cast<int>(csv_int(t, i, c_dir));
        o.temperature = csv_double(t, i, c_temp);
        o.humidity = csv_double(t, i, c_hum);
        o.snow_depth = csv_double(t, i, c_snow);
        o.precip_flag = static_cast<int>(csv_int(t, i, c_prec));
        o.primary_delay = static_cast<int>(csv_int(t, i, c_prim));
        o.arrival_delay = static_cast<int>(csv_int(t, i, c_arr));
        if (!(o.to_km > o.from_km))
            throw DataError(path + ":" + std::to_string(i + 2) + ": to_km must exceed from_km");
        for (int v : {o.direction, o.precip_flag, o.primary_delay, o.arrival_delay})
            if (v != 0 && v != 1)
                throw DataError(path + ":" + std::to_string(i + 2) +
                                ": indicator fields must be 0 or 1");
        ds.rows.push_back(std::move(o));
        ds.line_end_km = std::max(ds.line_end_km, ds.rows.back().to_km);
    }
    return ds;
}

void write_dataset_csv(const std::string& path, const AnalysisDataset& ds) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "train_id,date,section_index,from_km,to_km,direction,temperature,humidity,"
           "snow_depth,precip_flag,primary_delay,arrival_delay\n";
    for (const auto& o : ds.rows) {
        out << csv_line({o.train_id, format_date(o.date), std::to_string(o.section_index),
                         format_double(o.from_km), format_double(o.to_km),
                         std::to_string(o.direction), format_double(o.temperature),
                         format_double(o.humidity), format_double(o.snow_depth),
                         std::to_string(o.precip_flag), std::to_string(o.primary_delay),
                         std::to_string(o.arrival_delay)})
            << '\n';
    }
}

} // namespace raildelay::ingest
