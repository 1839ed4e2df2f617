#include "raildelay/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "raildelay/errors.hpp"
#include "raildelay/jsonio.hpp"
#include "raildelay/rng.hpp"

namespace raildelay::sim {

using Eigen::VectorXd;

double Ar1Spec::stationary_sd() const { return sd / std::sqrt(1.0 - ar * ar); }

SimConfig default_config() {
    SimConfig cfg;
    cfg.date_begin = parse_date("2017-12-01");
    cfg.date_end = parse_date("2018-02-28");
    cfg.temperature = {-5.0, 0.98, 0.8, -3.0};
    cfg.humidity = {85.0, 0.97, 1.5, -6.0, 0.0, 100.0};
    cfg.snow_depth = {3.0, 0.995, 0.12, 3.0, 0.0};
    cfg.precip = {-0.4, 0.9, 0.35, 0.2, 0.0};
    cfg.second_winter_start = parse_date("2017-12-01");
    return cfg;
}

void SimConfig::validate() const {
    if (trains_per_day < 0) throw DataError("trains_per_day must be >= 0");
    if (spots < 2) throw DataError("spots must be >= 2");
    if (line_km <= 0) throw DataError("line_km must be > 0");
    if (date_end < date_begin) throw DataError("date_end before date_begin");
    if (direction_mix < 0 || direction_mix > 1)
        throw DataError("direction_mix must lie in [0,1]");
    if (cox_h0_rates.size() != cox_h0_breaks.size() + 1)
        throw DataError("cox.h0.rates needs one more entry than cox.h0.breaks");
    if (ctmc_hr_seg_pd.size() != boundaries.size() ||
        ctmc_hr_seg_dp.size() != boundaries.size())
        throw DataError("ctmc segment hazard ratios need one entry per boundary");
    for (double b : boundaries)
        if (b <= 0 || b >= line_km) throw DataError("ctmc boundary outside (0, line_km)");
}

std::vector<std::string> covariate_names() {
    return {"direction", "temperature", "humidity", "snow_depth", "precip_flag"};
}

ctmc::CtmcParams true_ctmc_params(const SimConfig& cfg) {
    auto p = ctmc::CtmcParams::zero(kNumCovariates, static_cast<int>(cfg.boundaries.size()));
    p.log_q0(0) = std::log(cfg.ctmc_q0_pd);
    p.log_q0(1) = std::log(cfg.ctmc_q0_dp);
    for (int i = 0; i < kNumCovariates; ++i) {
        p.beta(0, i) = std::log(cfg.ctmc_hr_pd[i]);
        p.beta(1, i) = std::log(cfg.ctmc_hr_dp[i]);
    }
    for (std::size_t b = 0; b < cfg.boundaries.size(); ++b) {
        p.z(0, static_cast<int>(b)) = std::log(cfg.ctmc_hr_seg_pd[b]);
        p.z(1, static_cast<int>(b)) = std::log(cfg.ctmc_hr_seg_dp[b]);
    }
    return p;
}

VectorXd true_cox_beta(const SimConfig& cfg) {
    VectorXd beta(kNumCovariates);
    for (int i = 0; i < kNumCovariates; ++i) beta[i] = std::log(cfg.cox_hr[i]);
    return beta;
}

ctmc::SegmentScheme true_scheme(const SimConfig& cfg) {
    return ctmc::SegmentScheme(cfg.boundaries, cfg.line_km);
}

// ---------------------------------------------------------------------------
// Config file

namespace {

std::vector<double> parse_list(const std::string& s, const std::string& ctx) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used])))
                ++used;
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ParseError(ctx + ": bad list entry '" + item + "'");
        }
    }
    if (out.empty()) throw ParseError(ctx + ": empty list");
    return out;
}

double parse_num(const std::string& s, const std::string& ctx) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(ctx + ": bad number '" + s + "'");
    }
}

// Covariate slot by name suffix (direction/temperature/...).
int covariate_slot(const std::string& name, const std::string& ctx) {
    const auto names = covariate_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (name == names[i] || (name == "precip" && names[i] == "precip_flag"))
            return static_cast<int>(i);
    }
    throw ParseError(ctx + ": unknown covariate '" + name + "'");
}

bool apply_ar1_key(Ar1Spec& spec, const std::string& field, double v) {
    if (field == "mean")
        spec.mean = v;
    else if (field == "ar")
        spec.ar = v;
    else if (field == "sd")
        spec.sd = v;
    else if (field == "winter2_delta")
        spec.winter2_delta = v;
    else
        return false;
    return true;
}

} // namespace

SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config '" + path + "'");
    SimConfig cfg = default_config();
    bool saw_seed = false;

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string ctx = path + ":" + std::to_string(lineno);
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(ctx + ": expected 'key = value'");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ParseError(ctx + ": expected 'key = value'");

        try {
            if (key == "seed") {
                cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
                saw_seed = true;
            } else if (key == "trains_per_day") {
                cfg.trains_per_day = static_cast<int>(parse_num(value, ctx));
            } else if (key == "date_begin") {
                cfg.date_begin = parse_date(value);
            } else if (key == "date_end") {
                cfg.date_end = parse_date(value);
            } else if (key == "spots") {
                cfg.spots = static_cast<int>(parse_num(value, ctx));
            } else if (key == "line_km") {
                cfg.line_km = parse_num(value, ctx);
            } else if (key == "grid_step_km") {
                cfg.grid_step_km = parse_num(value, ctx);
            } else if (key == "direction_mix") {
                cfg.direction_mix = parse_num(value, ctx);
            } else if (key == "base_speed_kmh") {
                cfg.base_speed_kmh = parse_num(value, ctx);
            } else if (key == "dwell_min") {
                cfg.dwell_min = static_cast<int>(parse_num(value, ctx));
            } else if (key == "missing_actuals_rate") {
                cfg.missing_actuals_rate = parse_num(value, ctx);
            } else if (key == "weather.second_winter_start") {
                cfg.second_winter_start = parse_date(value);
            } else if (key.rfind("weather.", 0) == 0) {
                const std::string rest = key.substr(8);
                const auto dot = rest.find('.');
                if (dot == std::string::npos)
                    throw ParseError(ctx + ": unknown key '" + key + "'");
                const std::string var = rest.substr(0, dot);
                const std::string field = rest.substr(dot + 1);
                Ar1Spec* spec = nullptr;
                if (var == "temperature") spec = &cfg.temperature;
                else if (var == "humidity") spec = &cfg.humidity;
                else if (var == "snow_depth") spec = &cfg.snow_depth;
                else if (var == "precip") spec = &cfg.precip;
                if (!spec || !apply_ar1_key(*spec, field, parse_num(value, ctx)))
                    throw ParseError(ctx + ": unknown key '" + key + "'");
            } else if (key == "ctmc.q0.pd") {
                cfg.ctmc_q0_pd = parse_num(value, ctx);
            } else if (key == "ctmc.q0.dp") {
                cfg.ctmc_q0_dp = parse_num(value, ctx);
            } else if (key == "ctmc.boundaries") {
                cfg.boundaries = parse_list(value, ctx);
            } else if (key == "ctmc.hr.pd.segments") {
                cfg.ctmc_hr_seg_pd = parse_list(value, ctx);
            } else if (key == "ctmc.hr.dp.segments") {
                cfg.ctmc_hr_seg_dp = parse_list(value, ctx);
            } else if (key.rfind("ctmc.hr.pd.", 0) == 0) {
                cfg.ctmc_hr_pd[covariate_slot(key.substr(11), ctx)] = parse_num(value, ctx);
            } else if (key.rfind("ctmc.hr.dp.", 0) == 0) {
                cfg.ctmc_hr_dp[covariate_slot(key.substr(11), ctx)] = parse_num(value, ctx);
            } else if (key == "cox.h0.breaks") {
                cfg.cox_h0_breaks = parse_list(value, ctx);
            } else if (key == "cox.h0.rates") {
                cfg.cox_h0_rates = parse_list(value, ctx);
            } else if (key == "cox.stratum_scale") {
                cfg.cox_stratum_scale = parse_num(value, ctx);
            } else if (key.rfind("cox.hr.", 0) == 0) {
                cfg.cox_hr[covariate_slot(key.substr(7), ctx)] = parse_num(value, ctx);
            } else {
                throw ParseError(ctx + ": unknown key '" + key + "'");
            }
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(ctx + ": " + e.what());
        }
    }
    if (!saw_seed) throw ParseError(path + ": missing mandatory key 'seed'");
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Generators

namespace {

// Shared line geometry: section lengths drawn uniformly in [0.3, 15] km and
// rescaled so the spots span exactly line_km.
std::vector<double> spot_positions(const SimConfig& cfg) {
    Rng rng = Rng(cfg.seed).substream("geometry");
    const int n_sections = cfg.spots - 1;
    std::vector<double> lengths(n_sections);
    double total = 0.0;
    for (auto& len : lengths) {
        len = rng.uniform(0.3, 15.0);
        total += len;
    }
    std::vector<double> pos{0.0};
    double acc = 0.0;
    for (int i = 0; i < n_sections; ++i) {
        acc += lengths[i] * (cfg.line_km / total);
        pos.push_back(i + 1 == n_sections ? cfg.line_km : acc);
    }
    return pos;
}

double ar1_mean(const Ar1Spec& spec, const SimConfig& cfg, Day day) {
    double m = spec.mean;
    if (cfg.second_winter_start && day >= *cfg.second_winter_start) m += spec.winter2_delta;
    return m;
}

double clamp_spec(const Ar1Spec& spec, double v) {
    return std::min(spec.ceil, std::max(spec.floor, v));
}

// One stationary draw, for the direct oracles.
double stationary_draw(const Ar1Spec& spec, Rng& rng) {
    return clamp_spec(spec, spec.mean + spec.stationary_sd() * rng.normal());
}

// States at the spot positions for one train, by exponential waiting times
// within constant-rate pieces (exact; rates are redrawn at every section
// and segment change, which the memoryless property makes free).
std::vector<int> simulate_states(const ctmc::CtmcParams& truth, const CovariatePath& path,
                                 const ctmc::SegmentScheme& scheme,
                                 const std::vector<double>& spots_km, Rng& rng) {
    std::vector<int> states{ctmc::kPunctual};
    int state = ctmc::kPunctual;
    for (std::size_t s = 0; s + 1 < spots_km.size(); ++s) {
        const double a = spots_km[s];
        const double b = spots_km[s + 1];
        std::vector<double> cuts{a};
        for (double c : path.breaks_inside(a, b)) cuts.push_back(c);
        for (double c : scheme.boundaries)
            if (c > a && c < b) cuts.push_back(c);
        cuts.push_back(b);
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            double pos = cuts[k];
            const double end = cuts[k + 1];
            if (!(end > pos)) continue;
            const Eigen::MatrixXd q =
                ctmc::intensity_matrix(truth, path.at(0.5 * (pos + end)), pos, scheme);
            for (;;) {
                const double out_rate = state == ctmc::kPunctual ? q(0, 1) : q(1, 0);
                if (!(out_rate > 0)) break;
                const double wait = rng.exponential(out_rate);
                if (pos + wait >= end) break;
                pos += wait;
                state = 1 - state;
            }
        }
        states.push_back(state);
    }
    return states;
}

double h0_at(const SimConfig& cfg, double t) {
    std::size_t seg = 0;
    for (double b : cfg.cox_h0_breaks)
        if (t >= b) ++seg;
    return cfg.cox_h0_rates[seg];
}

// Recurrent event distances by inversion of the piecewise-linear cumulative
// hazard; the rank-j baseline is the rank-1 baseline times
// stratum_scale^(j-1).
std::vector<double> simulate_cox_events(const SimConfig& cfg, const VectorXd& beta,
                                        const CovariatePath& path, Rng& rng) {
    std::vector<double> events;
    const double censor = path.end();
    double start = path.start();
    double rank_scale = 1.0;
    for (;;) {
        double target = rng.exponential(1.0);
        std::vector<double> cuts{start};
        for (double c : path.breaks_inside(start, censor)) cuts.push_back(c);
        for (double c : cfg.cox_h0_breaks)
            if (c > start && c < censor) cuts.push_back(c);
        cuts.push_back(censor);
        std::sort(cuts.begin(), cuts.end());
        double found = -1.0;
        for (std::size_t k = 0; k + 1 < cuts.size() && found < 0; ++k) {
            const double len = cuts[k + 1] - cuts[k];
            if (!(len > 0)) continue;
            const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
            const double rate = h0_at(cfg, cuts[k]) * rank_scale * std::exp(beta.dot(path.at(mid)));
            const double chunk = rate * len;
            if (target <= chunk && rate > 0)
                found = cuts[k] + target / rate;
            else
                target -= chunk;
        }
        if (found < 0) break;
        events.push_back(found);
        start = found;
        rank_scale *= cfg.cox_stratum_scale;
    }
    return events;
}

std::string train_name(Day date, int k) {
    char buf[32];
    const std::string d = format_date(date);
    std::snprintf(buf, sizeof(buf), "T%s_%02d", d.c_str(), k);
    return buf;
}

} // namespace

std::vector<ingest::WeatherSample> simulate_weather(const SimConfig& cfg) {
    cfg.validate();
    std::vector<double> grid;
    for (double p = 0.0; p <= cfg.line_km + 1e-9; p += cfg.grid_step_km) grid.push_back(p);

    // Hourly series per grid point over [date_begin, date_end + 1].
    const Minute first = minute_of_day(cfg.date_begin, 0, 0);
    const Minute last = minute_of_day(cfg.date_end + 1, 23, 0);
    const int n_hours = static_cast<int>((last - first) / 60) + 1;

    std::vector<ingest::WeatherSample> out;
    out.reserve(grid.size() * static_cast<std::size_t>(n_hours));
    const Ar1Spec* specs[4] = {&cfg.temperature, &cfg.humidity, &cfg.snow_depth, &cfg.precip};
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double noise[4];
        Rng rng = Rng(cfg.seed).substream("weather", g);
        for (int v = 0; v < 4; ++v) noise[v] = specs[v]->stationary_sd() * rng.normal();
        for (int h = 0; h < n_hours; ++h) {
            const Minute hour = first + static_cast<Minute>(h) * 60;
            const Day day = day_of_minute(hour);
            if (h > 0)
                for (int v = 0; v < 4; ++v)
                    noise[v] = specs[v]->ar * noise[v] + specs[v]->sd * rng.normal();
            ingest::WeatherSample s;
            s.lat = grid[g];
            s.lon = 0.0;
            s.hour = hour;
            s.temperature = clamp_spec(cfg.temperature, ar1_mean(cfg.temperature, cfg, day) + noise[0]);
            s.humidity = clamp_spec(cfg.humidity, ar1_mean(cfg.humidity, cfg, day) + noise[1]);
            s.snow_depth = clamp_spec(cfg.snow_depth, ar1_mean(cfg.snow_depth, cfg, day) + noise[2]);
            s.ice_snow_precip = clamp_spec(cfg.precip, ar1_mean(cfg.precip, cfg, day) + noise[3]);
            out.push_back(s);
        }
    }
    return out;
}

PipelineData simulate_pipeline(const SimConfig& cfg) {
    cfg.validate();
    PipelineData data;
    data.weather = simulate_weather(cfg);
    const ingest::WeatherGrid grid(data.weather);
    const std::vector<double> pos = spot_positions(cfg);
    const int n = cfg.spots;
    const auto scheme = true_scheme(cfg);
    const auto ctmc_truth = true_ctmc_params(cfg);
    const VectorXd cox_beta = true_cox_beta(cfg);

    std::uint64_t run_index = 0;
    for (Day date = cfg.date_begin; date <= cfg.date_end; ++date) {
        for (int k = 0; k < cfg.trains_per_day; ++k, ++run_index) {
            Rng rng = Rng(cfg.seed).substream("run", run_index);
            const bool north = rng.bernoulli(cfg.direction_mix);

            ingest::RunRecord run;
            run.train_id = train_name(date, k);
            run.date = date;
            run.initial_station = north ? ingest::Terminus::north : ingest::Terminus::south;

            // Planned timetable over the run-relative geometry.
            Minute t = minute_of_day(date, 5, 30) + static_cast<Minute>(k) * 40;
            std::vector<double> run_km(n);
            for (int i = 0; i < n; ++i) {
                const int phys = north ? i : n - 1 - i;
                run_km[i] = north ? pos[i] : cfg.line_km - pos[phys];
                ingest::SpotCall call;
                char name[16];
                std::snprintf(name, sizeof(name), "S%03d", phys);
                call.spot = name;
                call.km = run_km[i];
                call.lat = pos[phys];
                call.lon = 0.0;
                if (i > 0) {
                    const double len = run_km[i] - run_km[i - 1];
                    t += std::max<Minute>(
                        1, static_cast<Minute>(std::llround(len / cfg.base_speed_kmh * 60.0)));
                }
                call.planned_arrival = t;
                if (i + 1 < n) t += cfg.dwell_min;
                call.planned_departure = t;
                run.spots.push_back(std::move(call));
            }

            // Section covariates for the generative processes, matched at
            // planned times (the deriver re-matches at actual times).
            std::vector<double> breaks{0.0};
            std::vector<VectorXd> values;
            for (int i = 0; i + 1 < n; ++i) {
                const auto& from = run.spots[i];
                const auto& to = run.spots[i + 1];
                const auto& dep =
                    ingest::match_weather(from.spot, from.lat, from.lon, from.planned_departure, grid);
                const auto& arr =
                    ingest::match_weather(to.spot, to.lat, to.lon, to.planned_arrival, grid);
                const auto cov = ingest::section_covariates(dep, arr);
                VectorXd x(kNumCovariates);
                x << (north ? 1.0 : 0.0), cov.temperature, cov.humidity, cov.snow_depth,
                    static_cast<double>(cov.precip_flag);
                breaks.push_back(run_km[i + 1]);
                values.push_back(std::move(x));
            }
            const CovariatePath path(std::move(breaks), std::move(values));

            Rng state_rng = Rng(cfg.seed).substream("states", run_index);
            const std::vector<int> states =
                simulate_states(ctmc_truth, path, scheme, run_km, state_rng);
            Rng cox_rng = Rng(cfg.seed).substream("events", run_index);
            const std::vector<double> events = simulate_cox_events(cfg, cox_beta, path, cox_rng);
            data.primary_planted += static_cast<int>(events.size());

            // Realize indicators as actual times. Arrival states always win;
            // a primary delay is dropped when the incoming departure
            // lateness cannot accommodate it.
            std::vector<int> prim(n - 1, 0);
            for (double e : events) {
                const auto it = std::upper_bound(run_km.begin(), run_km.end(), e);
                std::size_t sec = static_cast<std::size_t>(it - run_km.begin());
                if (sec >= 1 && sec <= prim.size()) prim[sec - 1] = 1;
            }
            Minute lateness = 0;
            run.spots[0].actual_arrival = run.spots[0].planned_arrival;
            for (int i = 0; i + 1 < n; ++i) {
                const Minute dwell = run.spots[i].planned_departure - run.spots[i].planned_arrival;
                Minute dep_late;
                Minute next_late;
                const bool arr_next = states[i + 1] == ctmc::kDelayed;
                if (arr_next && prim[i]) {
                    dep_late = std::max<Minute>(0, lateness - dwell);
                    next_late = std::max<Minute>(6, dep_late + 3);
                } else if (arr_next) {
                    dep_late = std::max<Minute>(lateness, 4);
                    next_late = std::max<Minute>(6, dep_late - 1);
                } else if (prim[i]) {
                    dep_late = std::max<Minute>(0, lateness - dwell);
                    if (dep_late <= 1) {
                        next_late = dep_late + 3;
                    } else {
                        next_late = 0; // infeasible; the delay is not realized
                    }
                } else {
                    dep_late = std::max<Minute>(0, lateness - dwell);
                    next_late = std::min<Minute>(4, std::max<Minute>(0, dep_late - 1));
                }
                run.spots[i].actual_departure = run.spots[i].planned_departure + dep_late;
                run.spots[i + 1].actual_arrival = run.spots[i + 1].planned_arrival + next_late;
                lateness = next_late;
            }
            run.spots[n - 1].actual_departure =
                run.spots[n - 1].planned_departure + lateness;

            if (cfg.missing_actuals_rate > 0) {
                Rng miss_rng = Rng(cfg.seed).substream("missing", run_index);
                for (auto& call : run.spots)
                    if (miss_rng.bernoulli(cfg.missing_actuals_rate)) {
                        call.actual_arrival.reset();
                        call.actual_departure.reset();
                    }
            }
            data.runs.push_back(std::move(run));
        }
    }

    data.dataset = ingest::assemble_dataset(data.runs, grid);
    for (const auto& row : data.dataset.rows) data.primary_realized += row.primary_delay;
    if (data.dataset.rows.empty()) data.dataset.line_end_km = cfg.line_km;
    return data;
}

namespace {

// Per-section covariates for the direct oracles: stationary draws, no
// weather grid round trip.
CovariatePath draw_covariate_path(const SimConfig& cfg, const std::vector<double>& pos,
                                  bool north, Rng& rng) {
    std::vector<double> breaks{0.0};
    std::vector<VectorXd> values;
    for (std::size_t i = 0; i + 1 < pos.size(); ++i) {
        VectorXd x(kNumCovariates);
        const double latent_precip = stationary_draw(cfg.precip, rng);
        x << (north ? 1.0 : 0.0), stationary_draw(cfg.temperature, rng),
            stationary_draw(cfg.humidity, rng), stationary_draw(cfg.snow_depth, rng),
            (latent_precip > 0.0 ? 1.0 : 0.0);
        breaks.push_back(pos[i + 1]);
        values.push_back(std::move(x));
    }
    return CovariatePath(std::move(breaks), std::move(values));
}

Day spread_date(const SimConfig& cfg, int i, int n_trains) {
    const int n_days = cfg.date_end - cfg.date_begin + 1;
    return cfg.date_begin + static_cast<Day>((static_cast<long long>(i) * n_days) / n_trains);
}

} // namespace

std::vector<ctmc::ObservedPath> simulate_ctmc_paths(const SimConfig& cfg, int n_trains) {
    cfg.validate();
    const std::vector<double> pos = spot_positions(cfg);
    const auto scheme = true_scheme(cfg);
    const auto truth = true_ctmc_params(cfg);

    std::vector<ctmc::ObservedPath> paths;
    paths.reserve(n_trains);
    for (int i = 0; i < n_trains; ++i) {
        Rng rng = Rng(cfg.seed).substream("ctmc-oracle", static_cast<std::uint64_t>(i));
        const bool north = rng.bernoulli(cfg.direction_mix);
        ctmc::ObservedPath path;
        char name[16];
        std::snprintf(name, sizeof(name), "M%05d", i);
        path.train_id = name;
        path.date = spread_date(cfg, i, n_trains);
        path.covariates = draw_covariate_path(cfg, pos, north, rng);
        path.km = pos;
        path.state = simulate_states(truth, path.covariates, scheme, pos, rng);
        paths.push_back(std::move(path));
    }
    return paths;
}

cox::CoxDataset simulate_cox_dataset(const SimConfig& cfg, int n_trains) {
    cfg.validate();
    const std::vector<double> pos = spot_positions(cfg);
    const VectorXd beta = true_cox_beta(cfg);

    cox::CoxDataset ds;
    ds.covariate_names = covariate_names();
    for (int i = 0; i < n_trains; ++i) {
        Rng rng = Rng(cfg.seed).substream("cox-oracle", static_cast<std::uint64_t>(i));
        const bool north = rng.bernoulli(cfg.direction_mix);
        cox::TrainHistory train;
        char name[16];
        std::snprintf(name, sizeof(name), "C%05d", i);
        train.train_id = name;
        train.covariates = draw_covariate_path(cfg, pos, north, rng);
        train.entry_km = 0.0;
        train.censor_km = cfg.line_km;
        train.event_km = simulate_cox_events(cfg, beta, train.covariates, rng);
        ds.trains.push_back(std::move(train));
    }
    return ds;
}

void write_truth_json(std::ostream& out, const SimConfig& cfg, const PipelineData& data) {
    JsonWriter w(out);
    w.begin_object();
    w.kv("seed", static_cast<std::uint64_t>(cfg.seed));
    w.key("config")
        .begin_object()
        .kv("trains_per_day", cfg.trains_per_day)
        .kv("date_begin", format_date(cfg.date_begin))
        .kv("date_end", format_date(cfg.date_end))
        .kv("spots", cfg.spots)
        .kv("line_km", cfg.line_km)
        .kv("grid_step_km", cfg.grid_step_km)
        .kv("direction_mix", cfg.direction_mix)
        .kv("missing_actuals_rate", cfg.missing_actuals_rate)
        .end_object();

    const auto names = covariate_names();
    w.key("ctmc_truth").begin_object();
    w.kv("boundaries", cfg.boundaries);
    for (int tr = 0; tr < 2; ++tr) {
        w.key(tr == 0 ? "punctual_to_delayed" : "delayed_to_punctual").begin_object();
        w.kv("q0", tr == 0 ? cfg.ctmc_q0_pd : cfg.ctmc_q0_dp);
        w.key("hazard_ratios").begin_object();
        for (int i = 0; i < kNumCovariates; ++i)
            w.kv(names[i], tr == 0 ? cfg.ctmc_hr_pd[i] : cfg.ctmc_hr_dp[i]);
        w.end_object();
        w.kv("segment_hazard_ratios", tr == 0 ? cfg.ctmc_hr_seg_pd : cfg.ctmc_hr_seg_dp);
        w.end_object();
    }
    w.end_object();

    w.key("cox_truth").begin_object();
    w.key("hazard_ratios").begin_object();
    for (int i = 0; i < kNumCovariates; ++i) w.kv(names[i], cfg.cox_hr[i]);
    w.end_object();
    w.kv("h0_breaks", cfg.cox_h0_breaks);
    w.kv("h0_rates", cfg.cox_h0_rates);
    w.kv("stratum_scale", cfg.cox_stratum_scale);
    w.end_object();

    w.key("counts")
        .begin_object()
        .kv("runs", static_cast<std::int64_t>(data.runs.size()))
        .kv("weather_samples", static_cast<std::int64_t>(data.weather.size()))
        .kv("dataset_rows", static_cast<std::int64_t>(data.dataset.rows.size()))
        .kv("primary_planted", data.primary_planted)
        .kv("primary_realized", data.primary_realized)
        .end_object();
    w.kv("notes",
         "generative covariates matched at planned times; the deriver re-matches at actual "
         "times");
    w.end_object();
}

} // namespace raildelay::sim
