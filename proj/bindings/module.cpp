// pybind11 bindings for the delay-modeling pipeline. The python surface
// mirrors the CLI stages: simulate/derive produce datasets, fit_cox /
// fit_markov / run_validation consume them.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "raildelay/cox.hpp"
#include "raildelay/ctmc.hpp"
#include "raildelay/ingest.hpp"
#include "raildelay/numerics.hpp"
#include "raildelay/simulate.hpp"
#include "raildelay/threading.hpp"
#include "raildelay/validation.hpp"

namespace py = pybind11;
using namespace raildelay;

namespace {

std::string hr_row_repr(const HazardRatioRow& r) {
    std::ostringstream os;
    os << "HazardRatioRow(" << r.name << ": " << r.hazard_ratio << " [" << r.ci_lower << ", "
       << r.ci_upper << "], p=" << r.p_value << ")";
    return os.str();
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Winter-delay modeling: stratified Cox regression for recurrent primary "
              "delays, an inhomogeneous two-state Markov chain for arrival delays, and "
              "walk-forward validation.";

    m.def("set_max_threads", &set_max_threads, py::arg("n"),
          "Worker-thread cap for likelihood evaluation (0 = all cores).");

    // numerics
    m.def(
        "matrix_exponential",
        [](const Eigen::MatrixXd& q, double u) { return numerics::matrix_exponential(q, u); },
        py::arg("m"), py::arg("u"), "Exp(u*m).");
    m.def(
        "maximize",
        [](const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& init,
           double tol) {
            numerics::OptimOptions opts;
            opts.tol = tol;
            const auto res = numerics::maximize(f, init, opts);
            return py::make_tuple(res.argmax, res.value, res.converged);
        },
        py::arg("objective"), py::arg("init"), py::arg("tol") = 1e-8,
        "BFGS ascent; returns (argmax, value, converged).");

    // datasets
    py::class_<ingest::SectionObservation>(m, "SectionObservation")
        .def_readonly("train_id", &ingest::SectionObservation::train_id)
        .def_property_readonly(
            "date", [](const ingest::SectionObservation& o) { return format_date(o.date); })
        .def_readonly("section_index", &ingest::SectionObservation::section_index)
        .def_readonly("from_km", &ingest::SectionObservation::from_km)
        .def_readonly("to_km", &ingest::SectionObservation::to_km)
        .def_readonly("direction", &ingest::SectionObservation::direction)
        .def_readonly("temperature", &ingest::SectionObservation::temperature)
        .def_readonly("humidity", &ingest::SectionObservation::humidity)
        .def_readonly("snow_depth", &ingest::SectionObservation::snow_depth)
        .def_readonly("precip_flag", &ingest::SectionObservation::precip_flag)
        .def_readonly("primary_delay", &ingest::SectionObservation::primary_delay)
        .def_readonly("arrival_delay", &ingest::SectionObservation::arrival_delay);

    py::class_<ingest::AnalysisDataset>(m, "AnalysisDataset")
        .def_readonly("rows", &ingest::AnalysisDataset::rows)
        .def_readonly("line_end_km", &ingest::AnalysisDataset::line_end_km)
        .def("__len__", [](const ingest::AnalysisDataset& ds) { return ds.rows.size(); });

    m.def("load_dataset", &ingest::read_dataset_csv, py::arg("path"),
          "Read a dataset.csv produced by derive.");
    m.def(
        "derive",
        [](const std::string& runs, const std::string& weather) {
            const auto run_records = ingest::read_runs_csv(runs);
            const auto grid = ingest::read_weather_csv(weather);
            return ingest::assemble_dataset(run_records, grid, nullptr);
        },
        py::arg("runs_csv"), py::arg("weather_csv"),
        "Derive the section dataset from runs.csv + weather.csv.");

    // stats rows
    py::class_<HazardRatioRow>(m, "HazardRatioRow")
        .def_readonly("name", &HazardRatioRow::name)
        .def_readonly("coef", &HazardRatioRow::coef)
        .def_readonly("se", &HazardRatioRow::se)
        .def_readonly("hazard_ratio", &HazardRatioRow::hazard_ratio)
        .def_readonly("ci_lower", &HazardRatioRow::ci_lower)
        .def_readonly("ci_upper", &HazardRatioRow::ci_upper)
        .def_readonly("p_value", &HazardRatioRow::p_value)
        .def("__repr__", &hr_row_repr);

    // Cox
    py::class_<cox::StepCurve>(m, "StepCurve")
        .def_readonly("times", &cox::StepCurve::times)
        .def_readonly("values", &cox::StepCurve::values);

    py::class_<cox::SurvivalCurve>(m, "SurvivalCurve")
        .def_readonly("stratum", &cox::SurvivalCurve::stratum)
        .def_readonly("km", &cox::SurvivalCurve::km)
        .def_readonly("survival", &cox::SurvivalCurve::survival);

    py::class_<cox::CoxFit>(m, "CoxFit")
        .def_readonly("beta", &cox::CoxFit::beta)
        .def_readonly("covariance", &cox::CoxFit::covariance)
        .def_readonly("table", &cox::CoxFit::table)
        .def_readonly("baseline", &cox::CoxFit::baseline)
        .def_readonly("covariate_names", &cox::CoxFit::covariate_names)
        .def_readonly("log_likelihood", &cox::CoxFit::log_likelihood)
        .def_readonly("converged", &cox::CoxFit::converged)
        .def_readonly("n_events", &cox::CoxFit::n_events)
        .def_readonly("n_trains", &cox::CoxFit::n_trains);

    m.def(
        "fit_cox",
        [](const ingest::AnalysisDataset& ds, int max_rank) {
            return cox::fit_stratified_cox(cox::make_cox_dataset(ds, max_rank));
        },
        py::arg("dataset"), py::arg("max_rank") = cox::kDefaultMaxRank,
        "Fit the stratified Cox model to the section dataset.");
    m.def(
        "survival_curve",
        [](const cox::CoxFit& fit, int stratum, const Eigen::VectorXd& scenario,
           double line_end_km) {
            return cox::survival_curve(fit, stratum,
                                       CovariatePath::constant(0.0, line_end_km, scenario));
        },
        py::arg("fit"), py::arg("stratum"), py::arg("scenario"), py::arg("line_end_km"),
        "Survival curve for constant scenario covariates "
        "(direction, temperature, humidity, snow_depth, precip_flag).");
    m.def(
        "detect_drop_points",
        [](const cox::SurvivalCurve& curve, int k) {
            const auto d = cox::detect_drop_points(curve, k);
            return py::make_tuple(d.km, d.distinct);
        },
        py::arg("curve"), py::arg("k"), "Largest survival drops; returns (km, distinct).");

    // CTMC
    py::class_<ctmc::SegmentScheme>(m, "SegmentScheme")
        .def(py::init<std::vector<double>, double>(), py::arg("boundaries"),
             py::arg("line_end_km"))
        .def_readonly("boundaries", &ctmc::SegmentScheme::boundaries)
        .def_readonly("line_end_km", &ctmc::SegmentScheme::line_end_km);

    py::class_<ctmc::CtmcParams>(m, "CtmcParams")
        .def_readonly("theta", &ctmc::CtmcParams::theta)
        .def_readonly("n_covariates", &ctmc::CtmcParams::n_covariates)
        .def_readonly("n_boundaries", &ctmc::CtmcParams::n_boundaries);

    py::class_<ctmc::SegmentContrastRow>(m, "SegmentContrastRow")
        .def_readonly("transition", &ctmc::SegmentContrastRow::transition)
        .def_readonly("segment", &ctmc::SegmentContrastRow::segment)
        .def_readonly("contrast", &ctmc::SegmentContrastRow::contrast);

    py::class_<ctmc::MarkovFit>(m, "MarkovFit")
        .def_readonly("params", &ctmc::MarkovFit::params)
        .def_readonly("covariance", &ctmc::MarkovFit::covariance)
        .def_readonly("table_pd", &ctmc::MarkovFit::table_pd)
        .def_readonly("table_dp", &ctmc::MarkovFit::table_dp)
        .def_readonly("segment_contrasts", &ctmc::MarkovFit::segment_contrasts)
        .def_readonly("log_likelihood", &ctmc::MarkovFit::log_likelihood)
        .def_readonly("converged", &ctmc::MarkovFit::converged)
        .def_readonly("n_trains", &ctmc::MarkovFit::n_trains);

    m.def(
        "fit_markov",
        [](const ingest::AnalysisDataset& ds, const std::vector<double>& boundaries,
           bool assume_punctual_origin) {
            const ctmc::SegmentScheme scheme(boundaries, ds.line_end_km);
            const auto paths = ctmc::make_observed_paths(ds, assume_punctual_origin);
            return ctmc::fit_ctmc(paths, scheme, sim::covariate_names());
        },
        py::arg("dataset"), py::arg("boundaries") = std::vector<double>{},
        py::arg("assume_punctual_origin") = true,
        "Fit the inhomogeneous Markov chain to the section dataset.");
    m.def(
        "predict_delay_rate",
        [](const ctmc::MarkovFit& fit, const ingest::AnalysisDataset& ds,
           const std::vector<double>& eval_points) {
            return ctmc::predict_delay_rate(fit.params, ctmc::make_covariate_tracks(ds),
                                            eval_points, fit.scheme);
        },
        py::arg("fit"), py::arg("dataset"), py::arg("eval_points"),
        "Expected arrival-delay rate over the dataset's trains at each point.");

    // simulate
    py::class_<sim::SimConfig>(m, "SimConfig")
        .def_readonly("seed", &sim::SimConfig::seed)
        .def_readonly("spots", &sim::SimConfig::spots)
        .def_readonly("line_km", &sim::SimConfig::line_km)
        .def_readonly("trains_per_day", &sim::SimConfig::trains_per_day);

    m.def("load_sim_config", &sim::load_sim_config, py::arg("path"));
    m.def(
        "simulate_dataset",
        [](const std::string& config_path) {
            const auto cfg = sim::load_sim_config(config_path);
            return sim::simulate_pipeline(cfg).dataset;
        },
        py::arg("config_path"),
        "Run the simulation pipeline in memory and return the derived dataset.");

    // validation
    py::class_<validation::FoldResult>(m, "FoldResult")
        .def_readonly("fitted", &validation::FoldResult::fitted)
        .def_readonly("eval_points", &validation::FoldResult::eval_points)
        .def_readonly("expected", &validation::FoldResult::expected)
        .def_readonly("observed", &validation::FoldResult::observed)
        .def_readonly("mae", &validation::FoldResult::mae_value);

    py::class_<validation::ValidationReport>(m, "ValidationReport")
        .def_readonly("folds", &validation::ValidationReport::folds)
        .def_readonly("averaged_mae", &validation::ValidationReport::averaged_mae)
        .def_readonly("completed_folds", &validation::ValidationReport::completed_folds)
        .def_readonly("warnings", &validation::ValidationReport::warnings);

    m.def(
        "run_validation",
        [](const ingest::AnalysisDataset& ds, const std::vector<double>& boundaries,
           const std::string& first_training_end, int window_days, int folds,
           const std::vector<double>& eval_points) {
            const ctmc::SegmentScheme scheme(boundaries, ds.line_end_km);
            validation::ValidationConfig cfg;
            cfg.window_days = window_days;
            cfg.folds = folds;
            cfg.eval_points = eval_points;
            if (!first_training_end.empty())
                cfg.first_training_end = parse_date(first_training_end);
            return validation::run_validation(ds, scheme, cfg);
        },
        py::arg("dataset"), py::arg("boundaries") = std::vector<double>{},
        py::arg("first_training_end") = std::string(), py::arg("window_days") = 7,
        py::arg("folds") = 4, py::arg("eval_points") = std::vector<double>{},
        "Expanding-window walk-forward validation of the Markov chain.");

#ifdef RAILDELAY_VERSION
    m.attr("__version__") = RAILDELAY_VERSION;
#else
    m.attr("__version__") = "dev";
#endif
}
