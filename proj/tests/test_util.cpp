#include <doctest.h>

#include <Eigen/Core>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "raildelay/csvio.hpp"
#include "raildelay/errors.hpp"
#include "raildelay/jsonio.hpp"
#include "raildelay/rng.hpp"
#include "raildelay/stats.hpp"
#include "raildelay/stepfun.hpp"
#include "raildelay/timeutil.hpp"

using namespace raildelay;

TEST_CASE("date and timestamp round trips") {
    CHECK(format_date(parse_date("2018-02-01")) == "2018-02-01");
    CHECK(format_minute(parse_minute("2018-02-01T07:30")) == "2018-02-01T07:30");
    CHECK(format_minute(parse_minute("2018-02-01 07:30")) == "2018-02-01T07:30");
    CHECK(parse_date("2018-03-01") - parse_date("2018-02-01") == 28);
    CHECK(parse_date("2016-03-01") - parse_date("2016-02-01") == 29); // leap year
    CHECK_THROWS_AS(parse_date("2018/02/01"), ParseError);
    CHECK_THROWS_AS(parse_minute("2018-02-01T25:00"), ParseError);
}

TEST_CASE("hour rounding is nearest with half up") {
    CHECK(round_to_hour(parse_minute("2018-02-01T10:29")) == parse_minute("2018-02-01T10:00"));
    CHECK(round_to_hour(parse_minute("2018-02-01T10:31")) == parse_minute("2018-02-01T11:00"));
    CHECK(round_to_hour(parse_minute("2018-02-01T10:30")) == parse_minute("2018-02-01T11:00"));
    CHECK(round_to_hour(parse_minute("2018-02-01T23:45")) == parse_minute("2018-02-02T00:00"));
}

TEST_CASE("csv parsing, quoting and numeric errors") {
    const char* path = "test_util_tmp.csv";
    {
        std::ofstream out(path);
        out << "a,b,c\n1,\"x,y\",2.5\n3,plain,bad\n";
    }
    const CsvTable t = read_csv(path);
    CHECK(t.col("b") == 1);
    CHECK_THROWS_AS(t.col("missing"), ParseError);
    CHECK(t.rows[0][1] == "x,y");
    CHECK(csv_double(t, 0, 2) == 2.5);
    CHECK_THROWS_AS(csv_double(t, 1, 2), ParseError);
    std::remove(path);
}

TEST_CASE("format_double round-trips doubles exactly") {
    for (double v : {0.1, 1.0 / 3.0, 1e-17, 123456789.123456789, -2.5e300}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("json writer emits stable, ordered output") {
    std::ostringstream out;
    JsonWriter w(out);
    w.begin_object();
    w.kv("name", "x\"y");
    w.kv("value", 0.5);
    w.key("list").begin_array().value(1).value(2).end_array();
    w.end_object();
    CHECK(out.str() ==
          "{\n  \"name\": \"x\\\"y\",\n  \"value\": 0.5,\n  \"list\": [\n    1,\n    2\n  ]\n}\n");
}

TEST_CASE("json writer serializes non-finite numbers as null") {
    std::ostringstream out;
    JsonWriter w(out);
    w.begin_object();
    w.kv("hi", std::numeric_limits<double>::infinity());
    w.kv("lo", -std::numeric_limits<double>::infinity());
    w.kv("bad", std::numeric_limits<double>::quiet_NaN());
    w.end_object();
    CHECK(out.str() == "{\n  \"hi\": null,\n  \"lo\": null,\n  \"bad\": null\n}\n");
}

TEST_CASE("covariate path lookup is left-continuous") {
    Eigen::VectorXd a(1), b(1);
    a << 1.0;
    b << 2.0;
    const CovariatePath path({0.0, 10.0, 20.0}, {a, b});
    CHECK(path.at(0.0)[0] == 1.0);
    CHECK(path.at(5.0)[0] == 1.0);
    CHECK(path.at(10.0)[0] == 1.0); // upper endpoint belongs to the section
    CHECK(path.at(10.5)[0] == 2.0);
    CHECK(path.at(20.0)[0] == 2.0);
    CHECK_THROWS_AS(path.at(21.0), DataError);
    CHECK(path.breaks_inside(0.0, 20.0) == std::vector<double>{10.0});
    CHECK(path.breaks_inside(10.0, 20.0).empty());
}

TEST_CASE("rng streams are deterministic and substreams are order-free") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

    Rng master(7);
    Rng s1 = master.substream("weather", 3);
    master.uniform(); // consuming the master must not shift substreams
    Rng s2 = master.substream("weather", 3);
    for (int i = 0; i < 10; ++i) CHECK(s1.normal() == s2.normal());
}

TEST_CASE("rng moments are sane") {
    Rng rng(99);
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sum2 += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));

    double esum = 0.0;
    for (int i = 0; i < n; ++i) esum += rng.exponential(2.0);
    CHECK(esum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("wald rows keep the hazard-ratio table arithmetic consistent") {
    // Consistency of a table row: hazard ratio 1.225 with CI
    // [1.088, 1.379] implies a two-sided p-value of about 0.0008.
    const double coef = std::log(1.225);
    const double se = (std::log(1.379) - std::log(1.088)) / (2 * 1.96);
    const auto row = wald_row("precip", coef, se);
    CHECK(row.hazard_ratio == doctest::Approx(1.225));
    CHECK(row.ci_lower == doctest::Approx(1.088).epsilon(1e-3));
    CHECK(row.ci_upper == doctest::Approx(1.379).epsilon(1e-3));
    CHECK(row.p_value == doctest::Approx(0.0008).epsilon(0.15));
    // Log/exp consistency of a coefficient: 0.013903 -> 1.014.
    CHECK(std::exp(0.013903) == doctest::Approx(1.014).epsilon(1e-4));
}
