#include <doctest.h>

#include <cmath>

#include "raildelay/errors.hpp"
#include "raildelay/simulate.hpp"
#include "raildelay/validation.hpp"

using namespace raildelay;
using namespace raildelay::validation;

namespace {

ctmc::ObservedPath path_with_states(const std::string& id, std::vector<double> km,
                                    std::vector<int> states) {
    ctmc::ObservedPath p;
    p.train_id = id;
    p.km = std::move(km);
    p.state = std::move(states);
    p.covariates = CovariatePath::constant(p.km.front(), p.km.back(), Eigen::VectorXd(0));
    return p;
}

} // namespace

TEST_CASE("fold boundaries follow the expanding four-week-February scheme") {
    // Data from December 2016 through February 2018; first training window
    // ends 31 January 2018; 4 folds of 7 days.
    const auto folds = walk_forward_split(parse_date("2016-12-01"), parse_date("2018-02-28"),
                                          parse_date("2018-01-31"), 7, 4);
    REQUIRE(folds.size() == 4);
    CHECK(format_date(folds[0].val_begin) == "2018-02-01");
    CHECK(format_date(folds[0].val_end) == "2018-02-07");
    CHECK(format_date(folds[1].val_begin) == "2018-02-08");
    CHECK(format_date(folds[1].val_end) == "2018-02-14");
    CHECK(format_date(folds[2].val_begin) == "2018-02-15");
    CHECK(format_date(folds[2].val_end) == "2018-02-21");
    CHECK(format_date(folds[3].val_begin) == "2018-02-22");
    CHECK(format_date(folds[3].val_end) == "2018-02-28");
    // Fold 3 trains through 14 February.
    CHECK(format_date(folds[2].train_end) == "2018-02-14");
    // Expanding window: nested training ranges, disjoint consecutive
    // validation windows.
    for (std::size_t k = 1; k < folds.size(); ++k) {
        CHECK(folds[k].train_begin == folds[0].train_begin);
        CHECK(folds[k].train_end == folds[k - 1].train_end + 7);
        CHECK(folds[k].val_begin == folds[k - 1].val_end + 1);
    }
}

TEST_CASE("a single fold is a classic train/test split") {
    const auto folds = walk_forward_split(parse_date("2018-01-01"), parse_date("2018-02-07"),
                                          parse_date("2018-01-31"), 7, 1);
    REQUIRE(folds.size() == 1);
    CHECK(format_date(folds[0].train_end) == "2018-01-31");
    CHECK(format_date(folds[0].val_end) == "2018-02-07");
}

TEST_CASE("insufficient range reports the shortfall") {
    CHECK_THROWS_WITH_AS(walk_forward_split(parse_date("2018-01-01"),
                                            parse_date("2018-02-14"),
                                            parse_date("2018-01-31"), 7, 4),
                         doctest::Contains("14 day(s) short"), DataError);
}

TEST_CASE("observed rate follows the nearest preceding spot") {
    std::vector<ctmc::ObservedPath> cohort;
    // Spots at 0, 140, 160: the state at 150 km is governed by 140.
    cohort.push_back(path_with_states("A", {0, 140, 160}, {0, 1, 0}));
    cohort.push_back(path_with_states("B", {0, 140, 160}, {0, 0, 1}));
    int count = 0;
    CHECK(observed_delay_rate(cohort, 150.0, &count) == 0.5);
    CHECK(count == 2);
    CHECK(observed_delay_rate(cohort, 160.0) == 0.5);
    CHECK(observed_delay_rate(cohort, 10.0) == 0.0); // origin state governs

    // 10 trains, 3 delayed at the governing spot.
    std::vector<ctmc::ObservedPath> ten;
    for (int i = 0; i < 10; ++i)
        ten.push_back(path_with_states("T" + std::to_string(i), {0, 100}, {0, i < 3 ? 1 : 0}));
    CHECK(observed_delay_rate(ten, 100.0) == doctest::Approx(0.3));
    // All punctual.
    std::vector<ctmc::ObservedPath> calm;
    for (int i = 0; i < 4; ++i)
        calm.push_back(path_with_states("C" + std::to_string(i), {0, 100}, {0, 0}));
    CHECK(observed_delay_rate(calm, 50.0) == 0.0);
}

TEST_CASE("trains ending before the point leave the denominator") {
    std::vector<ctmc::ObservedPath> cohort;
    cohort.push_back(path_with_states("long", {0, 100, 200}, {0, 1, 1}));
    cohort.push_back(path_with_states("short", {0, 80}, {0, 1}));
    int count = 0;
    CHECK(observed_delay_rate(cohort, 150.0, &count) == 1.0);
    CHECK(count == 1);
    // Beyond everyone: undefined.
    CHECK_THROWS_AS(observed_delay_rate(cohort, 300.0), DataError);
}

TEST_CASE("observed rate is idempotent per point") {
    std::vector<ctmc::ObservedPath> cohort;
    cohort.push_back(path_with_states("A", {0, 100, 200}, {0, 1, 0}));
    cohort.push_back(path_with_states("B", {0, 100, 200}, {0, 0, 0}));
    const double once = observed_delay_rate(cohort, 120.0);
    for (int rep = 0; rep < 3; ++rep) CHECK(observed_delay_rate(cohort, 120.0) == once);
}

TEST_CASE("mae arithmetic") {
    CHECK(mae({0.1, 0.2, 0.3}, {0.1, 0.2, 0.3}) == 0.0);
    CHECK(mae({0.1, 0.2}, {0.15, 0.10}) == doctest::Approx(0.075).epsilon(1e-15));
    CHECK_THROWS_AS(mae({0.1}, {0.1, 0.2}), DataError);

    // Symmetry and the triangle inequality against a third vector.
    const std::vector<double> a{0.1, 0.5, 0.9}, b{0.3, 0.2, 0.8}, c{0.0, 0.4, 0.85};
    CHECK(mae(a, b) == mae(b, a));
    CHECK(mae(a, b) <= mae(a, c) + mae(c, b) + 1e-15);
}

namespace {

ingest::AnalysisDataset validation_dataset(std::uint64_t seed, int spots, int n_trains,
                                           const char* begin, const char* end) {
    auto cfg = sim::default_config();
    cfg.seed = seed;
    cfg.spots = spots;
    cfg.date_begin = parse_date(begin);
    cfg.date_end = parse_date(end);
    const auto paths = sim::simulate_ctmc_paths(cfg, n_trains);
    ingest::AnalysisDataset ds;
    ds.line_end_km = cfg.line_km;
    for (const auto& p : paths) {
        for (std::size_t j = 0; j + 1 < p.km.size(); ++j) {
            ingest::SectionObservation o;
            o.train_id = p.train_id;
            o.date = p.date;
            o.section_index = static_cast<int>(j);
            o.from_km = p.km[j];
            o.to_km = p.km[j + 1];
            const auto& x = p.covariates.piece_value(j);
            o.direction = static_cast<int>(x[0]);
            o.temperature = x[1];
            o.humidity = x[2];
            o.snow_depth = x[3];
            o.precip_flag = static_cast<int>(x[4]);
            o.primary_delay = 0;
            o.arrival_delay = p.state[j + 1];
            ds.rows.push_back(std::move(o));
        }
    }
    return ds;
}

} // namespace

TEST_CASE("run_validation: fold accounting and averaged MAE") {
    // 35 days at ~14 trains/day; folds default to the last 4 weeks.
    const auto ds = validation_dataset(61, 18, 500, "2018-01-24", "2018-02-28");
    const auto scheme = sim::true_scheme(sim::default_config());
    ValidationConfig cfg;
    cfg.folds = 4;
    cfg.window_days = 7;
    cfg.first_training_end = parse_date("2018-01-31");
    const auto report = run_validation(ds, scheme, cfg);
    REQUIRE(report.completed_folds == 4);
    double sum = 0.0;
    for (const auto& fold : report.folds) {
        REQUIRE(fold.fitted);
        sum += fold.mae_value;
        CHECK(fold.mae_value >= 0.0);
        for (double r : fold.expected) {
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
        }
        for (double r : fold.observed) {
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
        }
        CHECK(fold.eval_points.size() == 14); // 50..700 on a 711 km line
    }
    CHECK(report.averaged_mae == doctest::Approx(sum / 4.0).epsilon(1e-15));

    // Nested training ranges.
    for (std::size_t k = 1; k < report.folds.size(); ++k)
        CHECK(report.folds[k].spec.train_end > report.folds[k - 1].spec.train_end);
}

TEST_CASE("run_validation with one fold reports a single MAE") {
    const auto ds = validation_dataset(71, 12, 220, "2018-01-20", "2018-02-07");
    const auto scheme = sim::true_scheme(sim::default_config());
    ValidationConfig cfg;
    cfg.folds = 1;
    cfg.window_days = 7;
    cfg.first_training_end = parse_date("2018-01-31");
    const auto report = run_validation(ds, scheme, cfg);
    REQUIRE(report.completed_folds == 1);
    CHECK(report.averaged_mae == report.folds[0].mae_value);
}

TEST_CASE("oracle control run: injecting the truth gives small MAE") {
    auto sim_cfg = sim::default_config();
    const auto ds = validation_dataset(81, 18, 900, "2018-01-10", "2018-02-28");
    const auto scheme = sim::true_scheme(sim_cfg);
    const auto truth = sim::true_ctmc_params(sim_cfg);
    ValidationConfig cfg;
    cfg.folds = 4;
    cfg.window_days = 7;
    cfg.first_training_end = parse_date("2018-01-31");
    const auto report = run_validation(ds, scheme, cfg, &truth);
    REQUIRE(report.completed_folds == 4);
    CHECK(report.averaged_mae < 0.06);
}
