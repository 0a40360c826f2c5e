#include <doctest.h>

#include <cmath>
#include <limits>

#include "cavity_bloch/params.hpp"

using namespace cb;

namespace {

RawConfig canonical() {
    return {{"u0", 7e-3},      {"n_atoms", 5e4}, {"eta", 30.7 * 345}, {"delta_c", -0.75 * 345},
            {"kappa", 345.0},  {"force", kCanonicalForce}, {"q0", 0.0}, {"n_max", 16}};
}

bool rejects(RawConfig raw) {
    try {
        validate(raw);
    } catch (const ConfigError& e) {
        return !e.issues.empty();
    }
    return false;
}

}  // namespace

TEST_CASE("canonical configuration validates") {
    const auto p = validate(canonical());
    CHECK(p.kappa == 345.0);
    CHECK(p.n_max == 16);
    CHECK(p.beta() == doctest::Approx(7e-3 * 5e4 / 345.0));
    // omega_B = omega_R / 4 and T_B = 8 pi
    CHECK(p.omega_b() == doctest::Approx(0.25));
    CHECK(p.bloch_period() == doctest::Approx(8.0 * std::numbers::pi));
    CHECK(p.basis_size() == 33);
}

TEST_CASE("every single-field violation is rejected on its own") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::vector<std::pair<std::string, double>> bad{
        {"kappa", 0.0},   {"kappa", -1.0},  {"n_atoms", 0.0}, {"eta", -1.0},   {"q0", 1.5},
        {"q0", -1.0},     {"n_max", 2.0},   {"n_max", 4.5},   {"u0", nan},     {"delta_c", nan},
        {"force", std::numeric_limits<double>::infinity()}};
    for (const auto& [k, v] : bad) {
        auto raw = canonical();
        raw[k] = v;
        INFO(k << " = " << v);
        CHECK(rejects(raw));
    }
    auto missing = canonical();
    missing.erase("eta");
    CHECK(rejects(missing));
    auto extra = canonical();
    extra["detuning"] = 1.0;
    CHECK(rejects(extra));
}

TEST_CASE("several violations are all listed") {
    auto raw = canonical();
    raw["kappa"] = -1.0;
    raw["eta"] = -2.0;
    try {
        validate(raw);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.issues.size() >= 2);
    }
}

TEST_CASE("to_raw round trips") {
    const auto p = validate(canonical());
    CHECK(validate(to_raw(p)) == p);
}

TEST_CASE("scale family keeps beta and inverts") {
    const auto p = validate(canonical());
    for (const double r : {0.5, 2.0, 3.7}) {
        const auto s = scale_family(p, r);
        CHECK(s.beta() == doctest::Approx(p.beta()).epsilon(1e-15));
        const auto back = scale_family(s, 1.0 / r);
        CHECK(back.u0 == doctest::Approx(p.u0).epsilon(1e-15));
        CHECK(back.n_atoms == doctest::Approx(p.n_atoms).epsilon(1e-15));
        CHECK(back.eta == doctest::Approx(p.eta).epsilon(1e-15));
    }
    CHECK_THROWS_AS(scale_family(p, 0.0), ConfigError);
}

TEST_CASE("SI boundary") {
    auto p = validate(canonical());
    p.force = 0.0;
    CHECK(to_si(p, {}).at("force_newton") == 0.0);
    // gravity on 87Rb in a 780 nm lattice gives omega_B close to omega_R / 4
    const SiContext ctx{};
    const double ratio = bloch_ratio_for_force(1.443160648e-25 * 9.81, ctx);
    CHECK(std::abs(ratio / 0.25 - 1.0) < 0.15);
    // and to_si inverts bloch_ratio_for_force
    p.force = ratio / std::numbers::pi;
    CHECK(to_si(p, ctx).at("force_newton") == doctest::Approx(1.443160648e-25 * 9.81).epsilon(1e-12));
}
