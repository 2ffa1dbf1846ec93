#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "scar/error.hpp"
#include "scar/pipeline.hpp"

using namespace scar;

TEST_CASE("config: defaults resolve to the desk scale") {
    RunConfig c = config_from_json(Json::object());
    resolve(c);
    CHECK(c.preset == "No7");
    CHECK(c.packet.speed() == doctest::Approx(60.0));
    CHECK(c.packet.sigma0 == doctest::Approx(0.15));
    CHECK(c.e_max == doctest::Approx(1800.0 + 4 * 60 / 0.15));
    CHECK(c.h == doctest::Approx(1.0 / 165));
    CHECK(std::sqrt(2 * c.e_max) * c.h <= 0.5);
    CHECK(c.dt == doctest::Approx(0.15 / 240));
    CHECK(c.T == 0.0);
    CHECK(c.T_autocorr == doctest::Approx(20 * preset_orbit(Preset::No7).L / 60).epsilon(1e-6));
}

TEST_CASE("config: layering of scale, preset and explicit keys") {
    RunConfig full = config_from_json(Json{{"scale", "paper"}});
    CHECK(full.packet.speed() == doctest::Approx(250.0));
    CHECK(full.T == doctest::Approx(9e4));

    const RunConfig bb = config_from_json(Json{{"preset", "BouncingBall"}});
    const PresetLaunch l = preset_launch(Preset::BouncingBall);
    CHECK(bb.orbit_angle == doctest::Approx(l.angle));

    const RunConfig over = config_from_json(Json{{"scale", "paper"}, {"packet", {{"p0", 40.0}}}});
    CHECK(over.packet.speed() == doctest::Approx(40.0));
    CHECK(over.T == doctest::Approx(9e4));
}

TEST_CASE("config: JSON round trip is a fixed point") {
    RunConfig c = config_from_json(Json{{"preset", "No14"}, {"packet", {{"p0", 20.0}}}, {"analysis", {{"epsilon", 2.5}}}});
    resolve(c);
    const Json j = config_to_json(c);
    RunConfig back = config_from_json(j);
    resolve(back);
    CHECK(config_to_json(back).dump() == j.dump());
    REQUIRE(back.epsilon.has_value());
    CHECK(*back.epsilon == 2.5);
}

TEST_CASE("config: invalid input is a config error") {
    auto kind_of = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::Solver;
    };
    CHECK(kind_of([] { config_from_json(Json{{"bogus", 1}}); }) == ErrorKind::Config);
    CHECK(kind_of([] { config_from_json(Json{{"preset", "NoSuch"}}); }) == ErrorKind::Config);
    CHECK(kind_of([] {
              RunConfig c = config_from_json(Json{{"solver", {{"h", 0.05}}}});
              resolve(c);
          }) == ErrorKind::Config);
    CHECK(kind_of([] {
              RunConfig c = config_from_json(Json{{"packet", {{"sigma0", -1.0}}}});
              resolve(c);
          }) == ErrorKind::Config);
}

TEST_CASE("basis cache: stored basis is reused only when it matches") {
    RunConfig c = config_from_json(Json{{"packet", {{"p0", 12.0}}}});
    const auto path = std::filesystem::temp_directory_path() / "scar_test_pipeline_basis.bin";
    std::filesystem::remove(path);
    c.basis_path = path.string();
    resolve(c);
    const Grid g = make_grid(c);
    const EigenBasis a = obtain_basis(c, g, true);
    REQUIRE(std::filesystem::exists(path));
    const EigenBasis b = obtain_basis(c, g, false);
    REQUIRE(a.size() == b.size());
    CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);

    // A higher cutoff needs more states than are stored: solved afresh.
    RunConfig hi = c;
    hi.e_max = c.e_max * 1.3;
    const EigenBasis d = obtain_basis(hi, g, false);
    CHECK(d.size() > a.size());
    std::filesystem::remove(path);
}
