#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "cavity_bloch/io.hpp"

using namespace cb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("cavity_bloch_test_io_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto raw = io::parse_config(R"({"u0": 0.007, "n_atoms": 5e4, "n_max": 16})");
    CHECK(raw.at("u0") == 0.007);
    CHECK(raw.at("n_atoms") == 5e4);
    CHECK(raw.at("n_max") == 16.0);
    CHECK_THROWS_AS(io::parse_config("{"), ConfigError);
    CHECK_THROWS_AS(io::parse_config("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(io::parse_config(R"({"u0": "small"})"), ConfigError);
    CHECK_THROWS_AS(io::read_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("doubles round trip through text exactly") {
    for (const double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        const auto s = io::fmt_double(v);
        CHECK(std::stod(s) == v);
    }
    CHECK(io::fmt_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("csv tables") {
    io::CsvTable t({"x", "kind", "y"});
    t.row().add(1.5).add(std::string("cavity_like")).add(2L);
    t.row().add(-0.25).add(std::string("marginal")).add(std::numeric_limits<double>::quiet_NaN());
    const auto text = t.str();
    CHECK(text == "x,kind,y\n1.5,cavity_like,2\n-0.25,marginal,nan\n");
    const auto d = io::parse_csv(text);
    CHECK(d.header.size() == 3);
    REQUIRE(d.rows.size() == 2);
    CHECK(d.rows[1][d.column("x")] == -0.25);
    CHECK(std::isnan(d.rows[0][d.column("kind")]));
    CHECK_THROWS_AS((void)d.column("z"), ConfigError);
    io::CsvTable bad({"a", "b"});
    bad.row().add(1.0);
    CHECK_THROWS((void)bad.str());
}

TEST_CASE("sha256 test vectors") {
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("manifest lists and verifies every emitted file") {
    const auto dir = scratch("manifest");
    io::RunManifest m;
    m.command = "test";
    m.version = "0";
    m.params.kappa = 2.0;
    io::emit(m, dir, "a.csv", "x\n1\n");
    io::emit(m, dir, "b.json", "{}\n");
    io::write_manifest(m, dir);
    CHECK(io::verify_manifest(dir).empty());
    const auto j = io::json::parse(io::read_text(dir / "manifest.json"));
    CHECK(j.at("files").size() == 2);
    CHECK(j.at("params").at("kappa").get<double>() == 2.0);
    io::write_text(dir / "a.csv", "x\n2\n");
    const auto bad = io::verify_manifest(dir);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0] == "a.csv");
}

TEST_CASE("scan rows round trip exactly through checkpoints") {
    SnrScanRow r;
    r.axis_value = 7.5;
    r.params.u0 = 0.1 / 3.0;
    r.params.n_atoms = 5e4;
    r.params.kappa = 345.0;
    r.params.eta = 1234.5678901234567;
    r.params.n_max = 8;
    r.detector_shot = {0.25, 25.1327, 1.0 / 7.0, 2.0 / 9.0, 0.123456789012345678, SnrMode::detector_shot};
    r.full = {0.25, 25.1327, 1.0 / 11.0, 3.0 / 13.0, 0.987654321, SnrMode::full_backaction};
    r.full_coarse = 0.98765;
    r.converged = true;
    r.contrast = 0.3;
    const auto j = io::scan_row_json(r);
    const auto back = io::scan_row_from_json(io::json::parse(j.dump()));
    CHECK(back.params == r.params);
    CHECK(back.full.snr == r.full.snr);
    CHECK(back.detector_shot.signal == r.detector_shot.signal);
    CHECK(back.full.mode == SnrMode::full_backaction);
    CHECK(io::scan_table("beta", {r}).str() == io::scan_table("beta", {back}).str());
}

TEST_CASE("trajectory table layout") {
    SystemParams p;
    p.n_max = 4;
    MeanfieldTrajectory traj;
    traj.params = p;
    MeanfieldState s;
    s.alpha = {1.0, -2.0};
    s.coeffs = VecC::Zero(9);
    s.coeffs[4] = 1.0;
    traj.grid = {0.0, 0.5};
    traj.states = {s, s};
    traj.depth = {3.0, 3.0};
    const auto d = io::parse_csv(io::trajectory_table(traj).str());
    CHECK(d.header.size() == 4 + 2 * 9 + 1);
    CHECK(d.header[4] == "re_c_-4");
    CHECK(d.rows[1][d.column("im_alpha")] == -2.0);
    CHECK(d.rows[0][d.column("re_c_0")] == 1.0);
}
