// Batch CLI for the delay-modeling pipeline:
//   simulate | derive | fit-cox | fit-markov | validate
// File formats, config keys, and exit codes are documented in FORMATS.md.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "raildelay/cox.hpp"
#include "raildelay/csvio.hpp"
#include "raildelay/ctmc.hpp"
#include "raildelay/errors.hpp"
#include "raildelay/ingest.hpp"
#include "raildelay/jsonio.hpp"
#include "raildelay/simulate.hpp"
#include "raildelay/svg.hpp"
#include "raildelay/threading.hpp"
#include "raildelay/validation.hpp"

namespace fs = std::filesystem;
using namespace raildelay;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitData = 3;
constexpr int kExitMissingWeather = 4;
constexpr int kExitConvergence = 5;
constexpr int kExitIdentifiability = 6;

std::string now_iso() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

// Every subcommand records what it ran with before doing any work.
void write_manifest(const fs::path& out_dir, const std::string& subcommand,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
    auto out = open_out(out_dir / "manifest.json");
    JsonWriter w(out);
    w.begin_object();
    w.kv("tool", "raildelay");
    w.kv("version", "0.1.0");
    w.kv("subcommand", subcommand);
    w.kv("started_at_utc", now_iso());
    w.kv("threads", max_threads());
    for (const auto& [k, v] : entries) w.kv(k, v);
    w.end_object();
}

fs::path resolve_out_dir(std::string flag_value) {
    if (flag_value.empty()) {
        if (const char* env = std::getenv("RAILDELAY_OUT")) flag_value = env;
    }
    if (flag_value.empty())
        throw ParseError("no output directory: pass --out or set RAILDELAY_OUT");
    fs::path dir(flag_value);
    fs::create_directories(dir);
    return dir;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ParseError(flag + ": bad number '" + item + "'");
        }
    }
    if (out.empty()) throw ParseError(flag + ": empty list");
    return out;
}

// --scenario key=value list onto the covariate order.
Eigen::VectorXd parse_scenario(const std::string& text) {
    const auto names = sim::covariate_names();
    Eigen::VectorXd x(static_cast<Eigen::Index>(names.size()));
    x << 1.0, -1.2, 85.0, 3.0, 1.0; // whole-data averages used for the report plots
    if (text.empty()) return x;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ParseError("--scenario: expected key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        bool found = false;
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (key == names[i]) {
                try {
                    x[static_cast<Eigen::Index>(i)] = std::stod(item.substr(eq + 1));
                } catch (const std::exception&) {
                    throw ParseError("--scenario: bad number in '" + item + "'");
                }
                found = true;
            }
        }
        if (!found) throw ParseError("--scenario: unknown covariate '" + key + "'");
    }
    return x;
}

int cmd_simulate(const std::string& config_path, const std::string& out_flag) {
    const auto cfg = sim::load_sim_config(config_path);
    const fs::path out_dir = resolve_out_dir(out_flag);
    write_manifest(out_dir, "simulate",
                   {{"config", config_path},
                    {"out", out_dir.string()},
                    {"seed", std::to_string(cfg.seed)}});

    const auto data = sim::simulate_pipeline(cfg);
    ingest::write_runs_csv((out_dir / "runs.csv").string(), data.runs);
    ingest::write_weather_csv((out_dir / "weather.csv").string(), data.weather);
    auto truth = open_out(out_dir / "truth.json");
    sim::write_truth_json(truth, cfg, data);
    std::cout << "simulate: " << data.runs.size() << " runs, " << data.weather.size()
              << " weather samples -> " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_derive(const std::string& runs_path, const std::string& weather_path,
               const std::string& out_flag) {
    const fs::path out_dir = resolve_out_dir(out_flag);
    write_manifest(out_dir, "derive",
                   {{"runs", runs_path}, {"weather", weather_path}, {"out", out_dir.string()}});

    const auto runs = ingest::read_runs_csv(runs_path);
    const auto grid = ingest::read_weather_csv(weather_path);
    ingest::IngestReport report;
    const auto ds = ingest::assemble_dataset(runs, grid, &report);
    ingest::write_dataset_csv((out_dir / "dataset.csv").string(), ds);

    auto rep = open_out(out_dir / "ingest_report.json");
    JsonWriter w(rep);
    w.begin_object();
    w.kv("runs_total", report.runs_total);
    w.kv("sections_total", report.sections_total);
    w.kv("sections_excluded_missing_actuals", report.sections_excluded_missing_actuals);
    w.key("excluded").begin_array();
    for (const auto& e : report.excluded) w.value(e);
    w.end_array();
    w.end_object();
    std::cout << "derive: " << ds.rows.size() << " sections ("
              << report.sections_excluded_missing_actuals << " excluded) -> "
              << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_fit_cox(const std::string& dataset_path, const std::string& out_flag, int max_rank,
                const std::string& scenario_text, int suggest_k) {
    const fs::path out_dir = resolve_out_dir(out_flag);
    write_manifest(out_dir, "fit-cox",
                   {{"dataset", dataset_path},
                    {"out", out_dir.string()},
                    {"max_rank", std::to_string(max_rank)},
                    {"scenario", scenario_text},
                    {"suggest_k", std::to_string(suggest_k)}});

    const auto ds = ingest::read_dataset_csv(dataset_path);
    const auto cox_ds = cox::make_cox_dataset(ds, max_rank);
    const auto fit = cox::fit_stratified_cox(cox_ds);
    {
        auto out = open_out(out_dir / "cox_fit.json");
        cox::write_cox_fit_json(out, fit);
    }

    const Eigen::VectorXd scenario = parse_scenario(scenario_text);
    const auto path = CovariatePath::constant(0.0, ds.line_end_km, scenario);
    std::vector<cox::SurvivalCurve> curves;
    for (int j = 1; j <= static_cast<int>(fit.baseline.size()); ++j)
        curves.push_back(cox::survival_curve(fit, j, path));
    {
        auto out = open_out(out_dir / "survival.csv");
        cox::write_survival_csv(out, curves);
    }

    // Change-point suggestions from the first stratum's curve.
    cox::DropPoints drops;
    if (!curves.empty()) drops = cox::detect_drop_points(curves.front(), suggest_k);
    {
        auto out = open_out(out_dir / "change_points.json");
        JsonWriter w(out);
        w.begin_object();
        w.kv("suggest_k", suggest_k);
        w.kv("distinct", drops.distinct);
        w.kv("suggested_boundaries", drops.km);
        w.key("per_stratum").begin_array();
        for (const auto& c : curves) {
            const auto d = cox::detect_drop_points(c, suggest_k);
            w.begin_object();
            w.kv("stratum", c.stratum);
            w.kv("drops_km", d.km);
            w.kv("distinct", d.distinct);
            w.end_object();
        }
        w.end_array();
        w.end_object();
    }
    {
        svg::Plot plot;
        plot.title = "Survival probability of the first primary delays";
        plot.x_label = "distance (km)";
        plot.y_label = "survival probability";
        plot.y_from_zero = true;
        plot.vlines = drops.km;
        const char* colors[] = {"#1f6fb4", "#b4701f", "#4d9950", "#8d4db4"};
        for (const auto& c : curves) {
            svg::Series s;
            s.label = "delay " + std::to_string(c.stratum);
            s.x = c.km;
            s.y = c.survival;
            s.color = colors[(c.stratum - 1) % 4];
            s.step = true;
            plot.series.push_back(std::move(s));
        }
        auto out = open_out(out_dir / "survival.svg");
        svg::write_plot(out, plot);
    }

    std::cout << "fit-cox: " << fit.n_events << " events over " << fit.n_trains
              << " trains, log-likelihood " << fit.log_likelihood << "\n";
    for (const auto& row : fit.table)
        std::cout << "  " << row.name << ": HR " << row.hazard_ratio << " [" << row.ci_lower
                  << ", " << row.ci_upper << "] p=" << row.p_value << "\n";
    return kExitOk;
}

ctmc::SegmentScheme scheme_from_flags(const std::string& boundaries_text,
                                      const std::string& boundaries_file, double line_end) {
    std::vector<double> bounds;
    if (!boundaries_text.empty() && !boundaries_file.empty())
        throw ParseError("pass either --boundaries or --boundaries-file, not both");
    if (!boundaries_text.empty()) {
        bounds = parse_double_list(boundaries_text, "--boundaries");
    } else if (!boundaries_file.empty()) {
        std::ifstream in(boundaries_file);
        if (!in) throw ParseError("cannot open '" + boundaries_file + "'");
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const std::exception& e) {
            throw ParseError(boundaries_file + ": " + e.what());
        }
        if (!doc.contains("suggested_boundaries"))
            throw ParseError(boundaries_file + ": no 'suggested_boundaries' array");
        for (const auto& v : doc["suggested_boundaries"]) bounds.push_back(v.get<double>());
    }
    return ctmc::SegmentScheme(bounds, line_end);
}

int cmd_fit_markov(const std::string& dataset_path, const std::string& out_flag,
                   const std::string& boundaries_text, const std::string& boundaries_file,
                   bool no_punctual_origin) {
    const fs::path out_dir = resolve_out_dir(out_flag);
    write_manifest(out_dir, "fit-markov",
                   {{"dataset", dataset_path},
                    {"out", out_dir.string()},
                    {"boundaries", boundaries_text},
                    {"boundaries_file", boundaries_file},
                    {"punctual_origin", no_punctual_origin ? "false" : "true"}});

    const auto ds = ingest::read_dataset_csv(dataset_path);
    const auto scheme = scheme_from_flags(boundaries_text, boundaries_file, ds.line_end_km);
    const auto paths = ctmc::make_observed_paths(ds, !no_punctual_origin);
    const auto fit = ctmc::fit_ctmc(paths, scheme, sim::covariate_names());
    {
        auto out = open_out(out_dir / "markov_fit.json");
        ctmc::write_markov_fit_json(out, fit);
    }
    {
        auto out = open_out(out_dir / "hazard_ratios.csv");
        out << "transition,predictor,hazard_ratio,ci_lower,ci_upper,p_value\n";
        auto dump = [&](const std::string& tr, const std::vector<HazardRatioRow>& rows) {
            for (const auto& r : rows)
                out << tr << ',' << r.name << ',' << format_double(r.hazard_ratio) << ','
                    << format_double(r.ci_lower) << ',' << format_double(r.ci_upper) << ','
                    << format_double(r.p_value) << '\n';
        };
        dump("punctual_to_delayed", fit.table_pd);
        dump("delayed_to_punctual", fit.table_dp);
        for (const auto& c : fit.segment_contrasts)
            out << (c.transition == 0 ? "punctual_to_delayed" : "delayed_to_punctual") << ','
                << "segment_" << c.segment << "_vs_1," << format_double(c.contrast.hazard_ratio)
                << ',' << format_double(c.contrast.ci_lower) << ','
                << format_double(c.contrast.ci_upper) << ','
                << format_double(c.contrast.p_value) << '\n';
    }

    // Expected arrival-delay rate along the line for the fitted cohort.
    {
        const auto tracks = ctmc::make_covariate_tracks(ds);
        double extent = 0.0;
        for (const auto& t : tracks) extent = std::max(extent, t.covariates.end());
        std::vector<double> grid;
        for (double d = 0.0; d <= extent + 1e-9; d += 10.0) grid.push_back(d);
        const auto rates = ctmc::predict_delay_rate(fit.params, tracks, grid, scheme);
        auto out = open_out(out_dir / "predicted_rates.csv");
        out << "km,expected_rate\n";
        for (std::size_t i = 0; i < grid.size(); ++i)
            out << format_double(grid[i]) << ',' << format_double(rates[i]) << '\n';

        svg::Plot plot;
        plot.title = "Expected arrival-delay rate over the line";
        plot.x_label = "distance (km)";
        plot.y_label = "arrival-delay rate";
        plot.y_from_zero = true;
        plot.vlines = scheme.boundaries;
        plot.series.push_back({"expected", grid, rates, "#1f6fb4", false, false});
        auto svg_out = open_out(out_dir / "predicted_rates.svg");
        svg::write_plot(svg_out, plot);
    }

    std::cout << "fit-markov: " << fit.n_trains << " trains, transitions p->d "
              << fit.n_transitions_pd << ", d->p " << fit.n_transitions_dp
              << ", log-likelihood " << fit.log_likelihood << "\n";
    return kExitOk;
}

int cmd_validate(const std::string& dataset_path, const std::string& out_flag,
                 const std::string& boundaries_text, const std::string& boundaries_file,
                 const std::string& first_training_end, int window_days, int folds,
                 const std::string& eval_points_text, bool no_punctual_origin) {
    const fs::path out_dir = resolve_out_dir(out_flag);
    write_manifest(out_dir, "validate",
                   {{"dataset", dataset_path},
                    {"out", out_dir.string()},
                    {"boundaries", boundaries_text},
                    {"boundaries_file", boundaries_file},
                    {"first_training_end", first_training_end},
                    {"window_days", std::to_string(window_days)},
                    {"folds", std::to_string(folds)},
                    {"eval_points", eval_points_text}});

    const auto ds = ingest::read_dataset_csv(dataset_path);
    const auto scheme = scheme_from_flags(boundaries_text, boundaries_file, ds.line_end_km);
    validation::ValidationConfig cfg;
    cfg.window_days = window_days;
    cfg.folds = folds;
    cfg.assume_punctual_origin = !no_punctual_origin;
    if (!first_training_end.empty()) cfg.first_training_end = parse_date(first_training_end);
    if (!eval_points_text.empty())
        cfg.eval_points = parse_double_list(eval_points_text, "--eval-points");

    const auto report = validation::run_validation(ds, scheme, cfg);
    {
        auto out = open_out(out_dir / "validation_report.json");
        validation::write_validation_report_json(out, report);
    }
    {
        auto out = open_out(out_dir / "fold_curves.csv");
        validation::write_fold_curves_csv(out, report);
    }
    {
        std::vector<svg::Plot> panels;
        for (const auto& fold : report.folds) {
            if (!fold.fitted) continue;
            svg::Plot p;
            p.title = "validation " + format_date(fold.spec.val_begin) + ".." +
                      format_date(fold.spec.val_end);
            p.x_label = "distance (km)";
            p.y_label = "arrival-delay rate";
            p.y_from_zero = true;
            svg::Series expected{"expected", fold.eval_points, fold.expected, "#1f6fb4",
                                 false, false};
            svg::Series observed{"observed", fold.eval_points, fold.observed, "#b4701f",
                                 false, true};
            p.series = {expected, observed};
            panels.push_back(std::move(p));
        }
        auto out = open_out(out_dir / "validation.svg");
        svg::write_panel_grid(out, panels, 2);
    }

    std::cout << "validate: " << report.completed_folds << "/" << report.folds.size()
              << " folds, averaged MAE " << report.averaged_mae << "\n";
    for (const auto& fold : report.folds)
        if (fold.fitted)
            std::cout << "  fold " << fold.spec.index << " (" << format_date(fold.spec.val_begin)
                      << ".." << format_date(fold.spec.val_end) << "): MAE " << fold.mae_value
                      << "\n";
        else
            std::cout << "  fold " << fold.spec.index << " FAILED: " << fold.failure << "\n";
    for (const auto& wmsg : report.warnings) std::cout << "  warning: " << wmsg << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Winter-delay modeling pipeline: stratified Cox for recurrent primary "
                 "delays, an inhomogeneous two-state Markov chain for arrival delays, and "
                 "expanding-window walk-forward validation."};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = all cores)");

    std::string config_path, out_flag;
    auto* simulate = app.add_subcommand("simulate", "generate runs.csv/weather.csv from a config");
    simulate->add_option("--config", config_path, "simulation config (key = value)")->required();
    simulate->add_option("--out", out_flag, "output directory (or RAILDELAY_OUT)");

    std::string runs_path, weather_path;
    auto* derive = app.add_subcommand("derive", "derive the section dataset from runs + weather");
    derive->add_option("--runs", runs_path, "runs.csv")->required();
    derive->add_option("--weather", weather_path, "weather.csv")->required();
    derive->add_option("--out", out_flag, "output directory");

    std::string dataset_path, scenario_text;
    int max_rank = cox::kDefaultMaxRank;
    int suggest_k = 2;
    auto* fit_cox = app.add_subcommand("fit-cox", "fit the stratified Cox model");
    fit_cox->add_option("--dataset", dataset_path, "dataset.csv")->required();
    fit_cox->add_option("--out", out_flag, "output directory");
    fit_cox->add_option("--max-rank", max_rank, "highest delay rank kept as a stratum");
    fit_cox->add_option("--scenario", scenario_text,
                        "survival-curve covariates, e.g. temperature=-1.2,humidity=85");
    fit_cox->add_option("--suggest-k", suggest_k, "change points to suggest");

    std::string boundaries_text, boundaries_file;
    bool no_punctual_origin = false;
    auto* fit_markov = app.add_subcommand("fit-markov", "fit the inhomogeneous Markov chain");
    fit_markov->add_option("--dataset", dataset_path, "dataset.csv")->required();
    fit_markov->add_option("--out", out_flag, "output directory");
    fit_markov->add_option("--boundaries", boundaries_text, "segment boundaries, e.g. 200,500");
    fit_markov->add_option("--boundaries-file", boundaries_file,
                           "change_points.json from fit-cox");
    fit_markov->add_flag("--no-punctual-origin", no_punctual_origin,
                         "do not assume trains start punctual at the origin");

    std::string first_training_end, eval_points_text;
    int window_days = 7, folds = 4;
    auto* validate = app.add_subcommand("validate", "expanding-window walk-forward validation");
    validate->add_option("--dataset", dataset_path, "dataset.csv")->required();
    validate->add_option("--out", out_flag, "output directory");
    validate->add_option("--boundaries", boundaries_text, "segment boundaries");
    validate->add_option("--boundaries-file", boundaries_file, "change_points.json");
    validate->add_option("--first-training-end", first_training_end,
                         "last day of the first training window (YYYY-MM-DD)");
    validate->add_option("--window-days", window_days, "validation window length");
    validate->add_option("--folds", folds, "number of folds");
    validate->add_option("--eval-points", eval_points_text, "comma list of distances (km)");
    validate->add_flag("--no-punctual-origin", no_punctual_origin,
                       "do not assume trains start punctual at the origin");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitParse;
    }

    set_max_threads(threads);
    try {
        if (simulate->parsed()) return cmd_simulate(config_path, out_flag);
        if (derive->parsed()) return cmd_derive(runs_path, weather_path, out_flag);
        if (fit_cox->parsed())
            return cmd_fit_cox(dataset_path, out_flag, max_rank, scenario_text, suggest_k);
        if (fit_markov->parsed())
            return cmd_fit_markov(dataset_path, out_flag, boundaries_text, boundaries_file,
                                  no_punctual_origin);
        if (validate->parsed())
            return cmd_validate(dataset_path, out_flag, boundaries_text, boundaries_file,
                                first_training_end, window_days, folds, eval_points_text,
                                no_punctual_origin);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const MissingWeatherError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissingWeather;
    } catch (const IdentifiabilityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIdentifiability;
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConvergence;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitParse;
}
