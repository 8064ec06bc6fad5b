#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <string>

#include "mzchain/imaging.hpp"
#include "test_support.hpp"

using namespace mzchain;
using namespace mzchain::imaging;
using Catch::Matchers::WithinAbs;

namespace {

const std::filesystem::path data_dir = MZCHAIN_TEST_DATA_DIR;

TransmissivityMap csv(const std::string& text) {
    std::istringstream in(text);
    return parse_csv_map(in);
}

TransmissivityMap pgm(const std::string& bytes) {
    std::istringstream in(bytes, std::ios::binary);
    return parse_pgm_map(in);
}

TransmissivityMap two_values(double background, double target) {
    return {4, 1, {background, target, background, target}};
}

}  // namespace

TEST_CASE("CSV maps") {
    SECTION("2x2 example") {
        const auto map = csv("0.5,0.95\n0.5,0.95");
        CHECK(map.width == 2);
        CHECK(map.height == 2);
        CHECK(map.values == std::vector<double>{0.5, 0.95, 0.5, 0.95});
        CHECK(map.at(1, 1) == 0.95);
    }
    SECTION("comments, blank lines, spaces and CRLF are tolerated") {
        const auto map = csv("# header\r\n\r\n 0 , 1 \r\n+0.25,1e-1\r\n");
        CHECK(map.values == std::vector<double>{0.0, 1.0, 0.25, 0.1});
    }
    SECTION("value outside [0,1] reports its position") {
        try {
            (void)csv("0.1,0.2\n0.3,1.5\n");
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.row() == 2);
            CHECK(e.column() == 2);
        }
    }
    SECTION("unparsable token reports its position") {
        try {
            (void)csv("0.1,abc,0.2\n");
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.row() == 1);
            CHECK(e.column() == 2);
        }
    }
    CHECK_THROWS_AS(csv("0.1,0.2\n0.3\n"), FormatError);
    CHECK_THROWS_AS(csv("0.1,,0.2\n"), FormatError);
    CHECK_THROWS_AS(csv("nan\n"), FormatError);
    CHECK_THROWS_AS(csv("# only a comment\n"), FormatError);
}

TEST_CASE("PGM maps") {
    SECTION("plain, maxval 255") {
        const auto map = pgm("P2\n# comment\n2 1\n255\n255 0\n");
        CHECK(map.values == std::vector<double>{1.0, 0.0});
    }
    SECTION("plain, maxval other than 255") {
        const auto map = pgm("P2 3 1 4 0 1 4");
        CHECK(map.values == std::vector<double>{0.0, 0.25, 1.0});
    }
    SECTION("binary, 8 bit") {
        std::string bytes = "P5\n2 2\n200\n";
        for (unsigned char v : {0, 50, 100, 200}) bytes.push_back(char(v));
        const auto map = pgm(bytes);
        CHECK(map.values == std::vector<double>{0.0, 0.25, 0.5, 1.0});
    }
    SECTION("binary, 16 bit big-endian") {
        std::string bytes = "P5\n2 1\n1000\n";
        for (unsigned char v : {0x01, 0xF4, 0x03, 0xE8}) bytes.push_back(char(v));  // 500, 1000
        const auto map = pgm(bytes);
        CHECK(map.values == std::vector<double>{0.5, 1.0});
    }
    SECTION("pixel above maxval reports its position") {
        try {
            (void)pgm("P2\n2 2\n10\n0 1\n2 11\n");
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.row() == 2);
            CHECK(e.column() == 2);
        }
    }
    CHECK_THROWS_AS(pgm("P3\n1 1\n255\n0 0 0\n"), FormatError);
    CHECK_THROWS_AS(pgm("P2\n2 2\n255\n0 1 2\n"), FormatError);
    CHECK_THROWS_AS(pgm("P5\n2 1\n255\n\x01"), FormatError);
    CHECK_THROWS_AS(pgm("P2\n0 1\n255\n"), FormatError);
}

TEST_CASE("loading the bundled sample maps") {
    const auto from_csv = load_map(data_dir / "two_region.csv");
    const auto from_pgm = load_map(data_dir / "two_region.pgm");
    CHECK(from_csv.width == 6);
    CHECK(from_csv.height == 6);
    CHECK(from_csv.values == from_pgm.values);
    CHECK(std::count(from_csv.values.begin(), from_csv.values.end(), 0.95) == 4);
    CHECK(format_from_path("map.PGM") == MapFormat::pgm);
    CHECK(format_from_path("map.txt") == MapFormat::csv);
    CHECK_THROWS_AS(load_map(data_dir / "missing.csv"), FormatError);
}

TEST_CASE("irradiation") {
    SECTION("transparent map absorbs nothing") {
        const TransmissivityMap map{3, 2, std::vector<double>(6, 1.0)};
        for (int n : {1, 7, 60}) {
            const auto dose = irradiate(map, ChainConfig::pi_over_n(n));
            for (double d : dose.values) REQUIRE(d <= 1e-12);
        }
    }
    SECTION("direct pass gives (1 - eta) I0") {
        const TransmissivityMap map{2, 2, {0.0, 0.3, 0.77, 1.0}};
        const auto dose = irradiate(map, ChainConfig(pi, 1, 2.0));
        for (std::size_t i = 0; i < map.values.size(); ++i)
            CHECK_THAT(dose.values[i], WithinAbs(4.0 * (1.0 - map.values[i]), 1e-14));
        CHECK(dose.input_intensity == 4.0);
    }
    SECTION("a chain tuned to 0.95 inverts the direct ordering") {
        const auto map = two_values(0.5, 0.95);
        const auto tune = analysis::tune_for_target(0.95, 200);
        const auto tuned = irradiate(map, ChainConfig::pi_over_n(tune.n_steps));
        const auto direct = irradiate(map, ChainConfig(pi, 1));
        CHECK(tuned.values[1] > tuned.values[0]);
        CHECK(direct.values[1] < direct.values[0]);
        CHECK(tuned.values[1] == absorbed_fraction(ChainConfig::pi_over_n(tune.n_steps), 0.95));
    }
}

TEST_CASE("selectivity and planning") {
    SECTION("two regions, target 0.95") {
        const auto map = load_map(data_dir / "two_region.csv");
        const auto plan = selective_plan(map, 0.95, 200);
        CHECK(plan.selectivity > 1.0);
        CHECK_THAT(plan.direct_selectivity, WithinAbs(0.1, 1e-12));
        CHECK(plan.dose.n_steps == plan.tune.n_steps);
        const double expected = absorbed_fraction(ChainConfig::pi_over_n(plan.tune.n_steps), 0.95) /
                                absorbed_fraction(ChainConfig::pi_over_n(plan.tune.n_steps), 0.5);
        CHECK_THAT(plan.selectivity, WithinAbs(expected, 1e-12));
    }
    SECTION("a reachable lower peak value is also selected") {
        const double target = analysis::peak_table(6, 6)[0].summary.eta_max;
        const auto plan = selective_plan(two_values(0.1, target), target, 100);
        CHECK(plan.tune.n_steps == 6);
        CHECK(plan.selectivity > 1.0);
    }
    SECTION("band edge cases") {
        const TransmissivityMap uniform{2, 2, std::vector<double>(4, 0.7)};
        CHECK_THROWS_AS(selective_plan(uniform, 0.7, 100), BandError);
        CHECK_THROWS_AS(selective_plan(two_values(0.5, 0.6), 0.9, 100), BandError);
        CHECK_THROWS_AS(selective_plan(two_values(0.5, 0.95), 0.95, 100, -1.0), DomainError);
    }
    CHECK_THROWS_AS(selective_plan(two_values(0.5, 0.95), 0.95, 10), UnreachableTargetError);
}

TEST_CASE("imaging properties") {
    test::ConfigGenerator gen(77);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t w = std::size_t(gen.n_steps(5)), h = std::size_t(gen.n_steps(5));
        TransmissivityMap map{w, h, std::vector<double>(w * h)};
        for (double& v : map.values) v = gen.eta();
        const ChainConfig config(gen.phi(), gen.n_steps(100), gen.amplitude());
        const auto dose = irradiate(map, config);

        for (double d : dose.values) REQUIRE((d >= 0.0 && d <= config.input_intensity() * (1.0 + 1e-15)));

        // Pixels are independent: permuting the map permutes the dose.
        std::vector<std::size_t> order(map.values.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), gen.engine());
        TransmissivityMap shuffled = map;
        for (std::size_t i = 0; i < order.size(); ++i) shuffled.values[i] = map.values[order[i]];
        const auto shuffled_dose = irradiate(shuffled, config);
        for (std::size_t i = 0; i < order.size(); ++i) REQUIRE(shuffled_dose.values[i] == dose.values[order[i]]);

        // A single pixel is just the forward model.
        const double eta = map.values.front();
        const auto single = irradiate(TransmissivityMap{1, 1, {eta}}, config.with_amplitude(1.0));
        REQUIRE(single.values[0] == absorbed_fraction(config, eta));
    }
}

TEST_CASE("dose map writers") {
    const DoseMap dose{2, 2, {0.0, 0.25, 0.5, 1.0}, 7, pi / 7, 1.0};
    SECTION("CSV") {
        std::ostringstream out;
        write_dose_csv(out, dose);
        std::istringstream lines(out.str());
        std::string first, second, row;
        std::getline(lines, first);
        std::getline(lines, second);
        CHECK(first == "# N=7 phi=" + format_number(pi / 7));
        CHECK(second == "# I0=1.00000000000");
        std::getline(lines, row);
        CHECK(row == "0.00000000000,0.250000000000");

        // The body reads back as a map with the same values.
        const auto back = csv(out.str());
        CHECK(back.values == dose.values);
    }
    SECTION("PGM") {
        std::ostringstream out;
        write_dose_pgm(out, dose);
        const auto back = pgm(out.str());
        REQUIRE(back.width == 2);
        for (std::size_t i = 0; i < 4; ++i) CHECK_THAT(back.values[i], WithinAbs(dose.values[i], 0.5 / 255));
    }
}
