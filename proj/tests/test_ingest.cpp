#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "raildelay/errors.hpp"
#include "raildelay/ingest.hpp"

using namespace raildelay;
using namespace raildelay::ingest;

namespace {

Minute at(const char* text) { return parse_minute(text); }

SpotCall spot(const char* name, double km, const char* pa, const char* pd, const char* aa,
              const char* ad) {
    SpotCall s;
    s.spot = name;
    s.km = km;
    s.lat = km;
    s.lon = 0.0;
    s.planned_arrival = at(pa);
    s.planned_departure = at(pd);
    if (aa[0]) s.actual_arrival = at(aa);
    if (ad[0]) s.actual_departure = at(ad);
    return s;
}

// Two spots, planned run 10:00->10:10, actual dep on time.
RunRecord two_spot_run(const char* actual_arrival) {
    RunRecord run;
    run.train_id = "T1";
    run.date = parse_date("2018-02-01");
    run.initial_station = Terminus::north;
    run.spots.push_back(spot("A", 0.0, "2018-02-01T10:00", "2018-02-01T10:00",
                             "2018-02-01T10:00", "2018-02-01T10:00"));
    run.spots.push_back(spot("B", 12.0, "2018-02-01T10:10", "2018-02-01T10:12",
                             actual_arrival, actual_arrival));
    return run;
}

WeatherSample sample(double lat, const char* hour, double temp, double hum, double snow,
                     double precip) {
    WeatherSample s;
    s.lat = lat;
    s.lon = 0.0;
    s.hour = at(hour);
    s.temperature = temp;
    s.humidity = hum;
    s.snow_depth = snow;
    s.ice_snow_precip = precip;
    return s;
}

} // namespace

TEST_CASE("primary delay: 3 minutes over schedule is inclusive") {
    // Planned run 10 min; actual run 13 min -> primary delay.
    auto sections = derive_indicators(two_spot_run("2018-02-01T10:13"));
    REQUIRE(sections.size() == 1);
    CHECK(sections[0].primary_delay == 1);
    // 12 min (2 over) is not a primary delay.
    sections = derive_indicators(two_spot_run("2018-02-01T10:12"));
    CHECK(sections[0].primary_delay == 0);
}

TEST_CASE("on-schedule run has no indicators") {
    const auto sections = derive_indicators(two_spot_run("2018-02-01T10:10"));
    REQUIRE(sections.size() == 1);
    CHECK(sections[0].primary_delay == 0);
    CHECK(sections[0].arrival_delay == 0);
}

TEST_CASE("arrival delay threshold at minute resolution") {
    // 4 minutes late is punctual; 5 minutes late is an arrival delay.
    auto sections = derive_indicators(two_spot_run("2018-02-01T10:14"));
    CHECK(sections[0].arrival_delay == 0);
    sections = derive_indicators(two_spot_run("2018-02-01T10:15"));
    CHECK(sections[0].arrival_delay == 1);
}

TEST_CASE("indicators are invariant under uniform time translation") {
    for (Minute shift : {-1440, 93, 60 * 24 * 30}) {
        RunRecord run = two_spot_run("2018-02-01T10:16");
        RunRecord moved = run;
        for (auto& s : moved.spots) {
            s.planned_arrival += shift;
            s.planned_departure += shift;
            *s.actual_arrival += shift;
            *s.actual_departure += shift;
        }
        const auto a = derive_indicators(run);
        const auto b = derive_indicators(moved);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].primary_delay == b[i].primary_delay);
            CHECK(a[i].arrival_delay == b[i].arrival_delay);
        }
    }
}

TEST_CASE("missing actual times flag the section as excluded") {
    const auto sections = derive_indicators(two_spot_run(""));
    REQUIRE(sections.size() == 1);
    CHECK(sections[0].excluded);
}

TEST_CASE("run invariants are enforced") {
    RunRecord run = two_spot_run("2018-02-01T10:10");
    run.spots[1].km = -1.0; // not increasing
    CHECK_THROWS_AS(derive_indicators(run), DataError);
    RunRecord single = two_spot_run("2018-02-01T10:10");
    single.spots.pop_back();
    CHECK_THROWS_AS(derive_indicators(single), DataError);
}

TEST_CASE("weather matching picks the nearest hour and grid point") {
    WeatherGrid grid({
        sample(1.2, "2018-02-01T10:00", -5, 80, 2, 0),
        sample(2.9, "2018-02-01T10:00", -7, 82, 3, 0),
        sample(1.2, "2018-02-01T11:00", -6, 81, 2, 0.3),
    });
    // 10:29 rounds down to 10:00.
    const auto& a = match_weather("X", 0.0, 0.0, at("2018-02-01T10:29"), grid);
    CHECK(a.temperature == -5);
    // 10:31 rounds up to 11:00.
    const auto& b = match_weather("X", 0.0, 0.0, at("2018-02-01T10:31"), grid);
    CHECK(b.temperature == -6);
    // Exact half hour rounds up.
    const auto& c = match_weather("X", 0.0, 0.0, at("2018-02-01T10:30"), grid);
    CHECK(c.temperature == -6);
    // Distances 1.2 km vs 2.9 km: the nearer point wins.
    const auto& d = match_weather("X", 0.0, 0.0, at("2018-02-01T10:00"), grid);
    CHECK(d.temperature == -5);
    // No sample for the rounded hour: the error names spot and hour.
    CHECK_THROWS_WITH_AS(match_weather("S042", 0.0, 0.0, at("2018-02-01T13:10"), grid),
                         doctest::Contains("S042"), MissingWeatherError);
}

TEST_CASE("section covariates are endpoint means; precipitation binarizes after averaging") {
    const auto c1 = section_covariates(sample(0, "2018-02-01T10:00", -4, 80, 2, 0.0),
                                       sample(1, "2018-02-01T10:00", -2, 90, 4, 0.0));
    CHECK(c1.temperature == -3.0);
    CHECK(c1.humidity == 85.0);
    CHECK(c1.snow_depth == 3.0);
    CHECK(c1.precip_flag == 0);

    // One wet endpoint: mean 0.1 > 0, so the flag is set.
    const auto c2 = section_covariates(sample(0, "2018-02-01T10:00", 0, 80, 2, 0.2),
                                       sample(1, "2018-02-01T10:00", 0, 80, 2, 0.0));
    CHECK(c2.precip_flag == 1);
}

TEST_CASE("precip flag 0 implies both endpoints were dry") {
    // Nonnegative inputs: a zero mean forces both values to zero.
    for (double a : {0.0, 0.1, 0.7}) {
        for (double b : {0.0, 0.2}) {
            const auto c = section_covariates(sample(0, "2018-02-01T10:00", 0, 80, 2, a),
                                              sample(1, "2018-02-01T10:00", 0, 80, 2, b));
            if (c.precip_flag == 0) {
                CHECK(a == 0.0);
                CHECK(b == 0.0);
            }
        }
    }
}

namespace {

// A 2-run x 3-spot fixture with hand-computed expectations.
std::vector<RunRecord> fixture_runs() {
    RunRecord north;
    north.train_id = "N1";
    north.date = parse_date("2018-02-01");
    north.initial_station = Terminus::north;
    north.spots.push_back(spot("A", 0.0, "2018-02-01T08:00", "2018-02-01T08:00",
                               "2018-02-01T08:00", "2018-02-01T08:00"));
    // Section A->B: planned 30, actual 34 (primary), arrival 4 late (punctual).
    north.spots.push_back(spot("B", 50.0, "2018-02-01T08:30", "2018-02-01T08:32",
                               "2018-02-01T08:34", "2018-02-01T08:34"));
    // Section B->C: planned 28, actual 31 (primary), arrival 7 late (delayed).
    north.spots.push_back(spot("C", 100.0, "2018-02-01T09:00", "2018-02-01T09:00",
                               "2018-02-01T09:05", "2018-02-01T09:05"));

    RunRecord south;
    south.train_id = "S1";
    south.date = parse_date("2018-02-01");
    south.initial_station = Terminus::south;
    south.spots.push_back(spot("C", 0.0, "2018-02-01T09:10", "2018-02-01T09:10",
                               "2018-02-01T09:10", "2018-02-01T09:10"));
    south.spots.push_back(spot("B", 50.0, "2018-02-01T09:40", "2018-02-01T09:42",
                               "2018-02-01T09:40", "2018-02-01T09:42"));
    south.spots.push_back(spot("A", 100.0, "2018-02-01T10:10", "2018-02-01T10:10",
                               "2018-02-01T10:10", ""));
    // Physical coordinates for the southbound run.
    south.spots[0].lat = 100.0;
    south.spots[1].lat = 50.0;
    south.spots[2].lat = 0.0;
    return {north, south};
}

WeatherGrid fixture_grid() {
    std::vector<WeatherSample> samples;
    for (int h = 8; h <= 11; ++h) {
        for (double lat : {0.0, 50.0, 100.0}) {
            char hour[20];
            std::snprintf(hour, sizeof(hour), "2018-02-01T%02d:00", h);
            // Temperature varies by position and hour so expected means are
            // easy to read off: temp = -(h - 8) - lat/50.
            samples.push_back(sample(lat, hour, -(h - 8.0) - lat / 50.0, 80.0 + (h - 8.0),
                                     2.0, lat == 50.0 ? 0.4 : 0.0));
        }
    }
    return WeatherGrid(samples);
}

} // namespace

TEST_CASE("assemble_dataset builds the hand-computed fixture") {
    IngestReport report;
    const auto ds = assemble_dataset(fixture_runs(), fixture_grid(), &report);

    // 2 runs x 2 sections each = 4 sections; one lacks an actual departure.
    CHECK(report.runs_total == 2);
    CHECK(report.sections_total == 4);
    CHECK(report.sections_excluded_missing_actuals == 0);
    REQUIRE(ds.rows.size() == 4);
    CHECK(ds.line_end_km == 100.0);

    // Sorted by (train_id, section_index): N1 first.
    const auto& n0 = ds.rows[0];
    CHECK(n0.train_id == "N1");
    CHECK(n0.direction == 1);
    CHECK(n0.from_km == 0.0);
    CHECK(n0.to_km == 50.0);
    CHECK(n0.primary_delay == 1);
    CHECK(n0.arrival_delay == 0);
    // Departure A at 08:00 -> hour 8, lat 0: temp -0. Arrival B at 08:34 ->
    // hour 9, lat 50: temp -(9-8) - 1 = -2. Mean = -1.
    CHECK(n0.temperature == doctest::Approx(-1.0));
    // Humidity 80 and 81 -> 80.5.
    CHECK(n0.humidity == doctest::Approx(80.5));
    // B endpoint precip 0.4 -> flag 1.
    CHECK(n0.precip_flag == 1);

    const auto& n1 = ds.rows[1];
    CHECK(n1.primary_delay == 1);
    CHECK(n1.arrival_delay == 1);

    const auto& s0 = ds.rows[2];
    CHECK(s0.train_id == "S1");
    CHECK(s0.direction == 0);
    CHECK(s0.primary_delay == 0);
    CHECK(s0.arrival_delay == 0);
    // Southbound section C->B: dep C (lat 100) at 09:10 -> hour 9: temp
    // -(1) - 2 = -3; arr B (lat 50) at 09:40 -> hour 10: temp -2 - 1 = -3.
    CHECK(s0.temperature == doctest::Approx(-3.0));

    // A's missing actual departure is never needed (last spot), so all four
    // sections are included.
    CHECK(ds.rows[3].train_id == "S1");
    CHECK(ds.rows[3].section_index == 1);
}

TEST_CASE("missing actuals are excluded and counted") {
    auto runs = fixture_runs();
    runs[0].spots[1].actual_departure.reset(); // kills N1 section 1
    IngestReport report;
    const auto ds = assemble_dataset(runs, fixture_grid(), &report);
    CHECK(report.sections_excluded_missing_actuals == 1);
    CHECK(ds.rows.size() == 3);
    REQUIRE(report.excluded.size() == 1);
    CHECK(report.excluded[0] == "N1 section=1");
}

TEST_CASE("section count equals spot count minus one") {
    for (int n_spots : {2, 5, 9}) {
        RunRecord run;
        run.train_id = "X";
        run.date = parse_date("2018-02-01");
        run.initial_station = Terminus::north;
        Minute t = at("2018-02-01T06:00");
        for (int i = 0; i < n_spots; ++i) {
            SpotCall s;
            s.spot = "P" + std::to_string(i);
            s.km = 10.0 * i;
            s.lat = s.km;
            s.planned_arrival = s.planned_departure = t;
            s.actual_arrival = s.actual_departure = t;
            t += 10;
            run.spots.push_back(s);
        }
        CHECK(derive_indicators(run).size() == static_cast<std::size_t>(n_spots - 1));
    }
}

TEST_CASE("weather csv round-trips into an equal grid") {
    std::vector<WeatherSample> samples;
    for (int h = 0; h < 3; ++h)
        for (double lat : {0.0, 37.5})
            samples.push_back(sample(lat, h == 0   ? "2018-02-01T06:00"
                                          : h == 1 ? "2018-02-01T07:00"
                                                   : "2018-02-01T08:00",
                                     -4.25 + h, 81.5, 2.125, h == 2 ? 0.375 : 0.0));
    write_weather_csv("test_ingest_weather.csv", samples);
    const WeatherGrid grid = read_weather_csv("test_ingest_weather.csv");
    CHECK(grid.size() == samples.size());
    for (const auto& s : samples) {
        const auto* at_hour = grid.at_hour(s.hour);
        REQUIRE(at_hour != nullptr);
        bool found = false;
        for (const auto& g : *at_hour)
            found |= g.lat == s.lat && g.lon == s.lon && g.temperature == s.temperature &&
                     g.humidity == s.humidity && g.snow_depth == s.snow_depth &&
                     g.ice_snow_precip == s.ice_snow_precip;
        CHECK(found);
    }
    std::remove("test_ingest_weather.csv");
}

TEST_CASE("runs and dataset csv round-trip") {
    const auto runs = fixture_runs();
    write_runs_csv("test_ingest_runs.csv", runs);
    const auto back = read_runs_csv("test_ingest_runs.csv");
    REQUIRE(back.size() == runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
        CHECK(back[i].train_id == runs[i].train_id);
        CHECK(back[i].initial_station == runs[i].initial_station);
        REQUIRE(back[i].spots.size() == runs[i].spots.size());
        for (std::size_t j = 0; j < runs[i].spots.size(); ++j) {
            CHECK(back[i].spots[j].km == runs[i].spots[j].km);
            CHECK(back[i].spots[j].planned_arrival == runs[i].spots[j].planned_arrival);
            CHECK(back[i].spots[j].actual_departure == runs[i].spots[j].actual_departure);
        }
    }
    std::remove("test_ingest_runs.csv");

    const auto ds = assemble_dataset(runs, fixture_grid(), nullptr);
    write_dataset_csv("test_ingest_ds.csv", ds);
    const auto ds2 = read_dataset_csv("test_ingest_ds.csv");
    REQUIRE(ds2.rows.size() == ds.rows.size());
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        CHECK(ds2.rows[i].train_id == ds.rows[i].train_id);
        CHECK(ds2.rows[i].temperature == ds.rows[i].temperature);
        CHECK(ds2.rows[i].humidity == ds.rows[i].humidity);
        CHECK(ds2.rows[i].primary_delay == ds.rows[i].primary_delay);
        CHECK(ds2.rows[i].arrival_delay == ds.rows[i].arrival_delay);
    }
    std::remove("test_ingest_ds.csv");
}
