#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "sqpr/config.hpp"

using namespace sqpr;

TEST_CASE("ConfigFile parses sections, comments, and typed accessors", "[config]") {
    std::istringstream is(R"(# header comment
[alpha]
x = 1.5            # trailing comment
n = 42
on = true
off = false
name = "a # not-a-comment"
items = ["u", "v"]
grid = [1.0, 2.5, -3]

[beta.gamma]
y = -2e-3
)");
    ConfigFile cf = ConfigFile::parse(is, "test");

    CHECK(cf.has("alpha.x"));
    CHECK_FALSE(cf.has("alpha.z"));
    CHECK(cf.number("alpha.x") == 1.5);
    CHECK(cf.integer("alpha.n") == 42);
    CHECK(cf.flag("alpha.on", false));
    CHECK_FALSE(cf.flag("alpha.off", true));
    CHECK(cf.flag("alpha.missing", true));
    CHECK(cf.text("alpha.name") == "a # not-a-comment");
    CHECK(cf.list("alpha.items") == std::vector<std::string>{"u", "v"});
    CHECK(cf.numbers("alpha.grid") == std::vector<double>{1.0, 2.5, -3.0});
    CHECK(cf.number("beta.gamma.y") == -2e-3);
    CHECK(cf.number("beta.gamma.missing", 7.0) == 7.0);
    CHECK(cf.keysUnder("alpha") ==
          std::vector<std::string>{"alpha.grid", "alpha.items", "alpha.n", "alpha.name",
                                   "alpha.off", "alpha.on", "alpha.x"});
}

TEST_CASE("ConfigFile rejects malformed input", "[config]") {
    SECTION("duplicate key") {
        std::istringstream is("[s]\nx = 1\nx = 2\n");
        CHECK_THROWS_AS(ConfigFile::parse(is), std::runtime_error);
    }
    SECTION("line without assignment") {
        std::istringstream is("[s]\njust words\n");
        CHECK_THROWS_AS(ConfigFile::parse(is), std::runtime_error);
    }
    SECTION("non-numeric value read as number") {
        std::istringstream is("[s]\nx = hello\n");
        ConfigFile cf = ConfigFile::parse(is);
        CHECK_THROWS_AS(cf.number("s.x"), std::runtime_error);
    }
    SECTION("missing key read without fallback") {
        std::istringstream is("[s]\nx = 1\n");
        ConfigFile cf = ConfigFile::parse(is);
        CHECK_THROWS_AS(cf.number("s.y"), std::runtime_error);
        CHECK_THROWS_AS(cf.text("s.y"), std::runtime_error);
    }
}

TEST_CASE("loadModelConfig maps the drive preset", "[config]") {
    LoadedConfig lc = loadModelConfig(std::string(SQPR_CONFIG_DIR) + "/upsand-cd.toml");
    constexpr double kDeg = std::numbers::pi / 180.0;

    REQUIRE(lc.system.planets.size() == 2);
    CHECK(lc.innerCount == 0);
    CHECK(lc.names == std::vector<std::string>{"c", "d"});
    CHECK(lc.system.m0 == 1.31);
    CHECK(lc.system.G == Catch::Approx(4.0 * std::numbers::pi * std::numbers::pi));
    CHECK(lc.system.planets[0].mass == Catch::Approx(15.9792 * 9.5458e-4));
    CHECK(lc.system.planets[1].el.a == 2.53);
    CHECK(lc.system.planets[1].el.inc == Catch::Approx(25.074 * kDeg));
    CHECK(lc.run.driveSpan == 131072.0);
    CHECK(lc.run.stepsPerPeriod == 100);
    CHECK(lc.run.eccLines == 4);
    CHECK(lc.run.incLines == 5);
}

TEST_CASE("loadModelConfig maps the restricted-model presets", "[config]") {
    LoadedConfig lc = loadModelConfig(std::string(SQPR_CONFIG_DIR) + "/upsand-b-17-5.toml");
    REQUIRE(lc.system.planets.size() == 3);
    CHECK(lc.innerCount == 1);
    CHECK(lc.names[0] == "b");
    CHECK_FALSE(lc.system.withGR);
    CHECK(lc.system.trigBandCount == 4);
    CHECK(lc.run.dio.gamma == 2.9200551117155624e-17);
    CHECK(lc.run.dio.tau == 4.0);
    CHECK(lc.run.dio.maxmodkcalc == 100);
    CHECK(lc.run.capExplicitSteps == 12);
    CHECK(lc.run.capTotalSteps == 2000);

    LoadedConfig gr = loadModelConfig(std::string(SQPR_CONFIG_DIR) + "/upsand-b-gr-20-0.toml");
    CHECK(gr.system.withGR);
    CHECK(gr.system.trigBandCount == 5);
    CHECK(gr.system.planets[0].el.inc == Catch::Approx(20.0 * std::numbers::pi / 180.0));
    CHECK(gr.run.dio.gamma == 2.6761115506846878e-17);
}

TEST_CASE("loadModelConfig validates the body lists", "[config]") {
    std::istringstream one(R"([star]
mass = 1.0
[bodies]
outer = ["c"]
[body.c]
mass_jupiter = 1
semi_major_axis = 1
eccentricity = 0
inclination_deg = 0
mean_anomaly_deg = 0
arg_pericenter_deg = 0
node_deg = 0
)");
    CHECK_THROWS_AS(loadModelConfig(ConfigFile::parse(one)), std::runtime_error);
}

TEST_CASE("drive samples round-trip through CSV", "[config]") {
    std::vector<DriveSample> rows(3);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 3; ++i) {
        rows[i].t = 1.0 / 3.0 * i;
        for (int p = 0; p < 2; ++p)
            for (int w = 0; w < 2; ++w) rows[i].z[p][w] = {u(rng), u(rng)};
    }
    std::stringstream ss;
    writeDriveSamples(ss, rows);
    auto back = readDriveSamples(ss);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].t == rows[i].t);  // exact: %.17g round-trips doubles
        for (int p = 0; p < 2; ++p)
            for (int w = 0; w < 2; ++w) CHECK(back[i].z[p][w] == rows[i].z[p][w]);
    }
}

TEST_CASE("spectral line lists round-trip through CSV", "[config]") {
    std::vector<SpectralLine> lines(2);
    lines[0].omega = -2.43699358194622660e-3;
    lines[0].A = 0.125;
    lines[0].theta = 1.75;
    lines[0].k = std::array<int, 3>{1, 0, 0};
    lines[1].omega = 4.88477275490260560e-3;
    lines[1].A = 3e-4;
    lines[1].theta = -0.5;  // unlabelled on purpose
    std::stringstream ss;
    writeLineList(ss, lines);
    auto back = readLineList(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].omega == lines[0].omega);
    CHECK(back[0].A == lines[0].A);
    CHECK(back[0].theta == lines[0].theta);
    REQUIRE(back[0].k);
    CHECK(*back[0].k == *lines[0].k);
    CHECK_FALSE(back[1].k);
    CHECK(back[1].omega == lines[1].omega);
}

TEST_CASE("content digest is stable and sensitive", "[config]") {
    CHECK(contentDigest("") == 1469598103934665603ULL);  // FNV-1a offset basis
    CHECK(contentDigest("abc") == contentDigest("abc"));
    CHECK(contentDigest("abc") != contentDigest("abd"));
}
