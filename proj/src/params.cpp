#include "cavity_bloch/params.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cb {

namespace {

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
        if (!out.empty()) out += "; ";
        out += s;
    }
    return out;
}

constexpr double kHbar = 1.054571817e-34;

}  // namespace

ConfigError::ConfigError(std::vector<std::string> list)
    : std::runtime_error(join(list)), issues(std::move(list)) {}

ResourceError::ResourceError(const std::string& what, double required, double available)
    : std::runtime_error(what), required_bytes(required), available_bytes(available) {}

namespace {

std::vector<std::string> violations(const SystemParams& p) {
    std::vector<std::string> bad;
    const auto finite = [&](double v, const char* name) {
        if (!std::isfinite(v)) bad.push_back(std::string(name) + " must be finite");
        return std::isfinite(v);
    };
    if (finite(p.kappa, "kappa") && !(p.kappa > 0)) bad.emplace_back("kappa must be positive");
    if (finite(p.n_atoms, "n_atoms") && !(p.n_atoms > 0)) bad.emplace_back("n_atoms must be positive");
    if (finite(p.eta, "eta") && p.eta < 0) bad.emplace_back("eta must be non-negative");
    if (finite(p.q0, "q0") && !(p.q0 > -1.0 && p.q0 <= 1.0))
        bad.emplace_back("q0 outside first Brillouin zone");
    finite(p.u0, "u0");
    finite(p.delta_c, "delta_c");
    finite(p.force, "force");
    if (p.n_max < 4) bad.emplace_back("n_max must be at least 4");
    if (p.u0 > 0 && !std::isfinite(p.beta())) bad.emplace_back("beta must be finite");
    return bad;
}

}  // namespace

void check(const SystemParams& p) {
    if (auto bad = violations(p); !bad.empty()) throw ConfigError(std::move(bad));
}

SystemParams validate(const RawConfig& raw) {
    static const char* const keys[] = {"u0", "n_atoms", "eta", "delta_c", "kappa", "force", "q0", "n_max"};
    std::vector<std::string> bad;
    for (const char* k : keys)
        if (!raw.contains(k)) bad.push_back(std::string("missing key ") + k);
    for (const auto& [k, v] : raw)
        if (std::find_if(std::begin(keys), std::end(keys), [&](const char* s) { return k == s; }) == std::end(keys))
            bad.push_back("unknown key " + k);
    if (!bad.empty()) throw ConfigError(std::move(bad));

    SystemParams p;
    p.u0 = raw.at("u0");
    p.n_atoms = raw.at("n_atoms");
    p.eta = raw.at("eta");
    p.delta_c = raw.at("delta_c");
    p.kappa = raw.at("kappa");
    p.force = raw.at("force");
    p.q0 = raw.at("q0");
    const double nm = raw.at("n_max");
    if (!std::isfinite(nm) || nm != std::floor(nm) || std::abs(nm) > 4096) {
        bad.emplace_back("n_max must be an integer");
        p.n_max = 4;
    } else {
        p.n_max = static_cast<int>(nm);
    }
    auto rest = violations(p);
    bad.insert(bad.end(), rest.begin(), rest.end());
    if (!bad.empty()) throw ConfigError(std::move(bad));
    return p;
}

RawConfig to_raw(const SystemParams& p) {
    return {{"u0", p.u0},         {"n_atoms", p.n_atoms}, {"eta", p.eta},
            {"delta_c", p.delta_c}, {"kappa", p.kappa},   {"force", p.force},
            {"q0", p.q0},         {"n_max", static_cast<double>(p.n_max)}};
}

SystemParams scale_family(const SystemParams& p, double r) {
    if (!(r > 0) || !std::isfinite(r)) throw ConfigError({"scale factor must be positive"});
    SystemParams s = p;
    s.u0 = p.u0 * r;
    s.n_atoms = p.n_atoms / r;
    s.eta = p.eta / std::sqrt(r);
    return s;
}

std::map<std::string, double> to_si(const SystemParams& p, const SiContext& ctx) {
    if (!(ctx.recoil_frequency_hz > 0 && ctx.lattice_wavelength_m > 0 && ctx.atom_mass_kg > 0))
        throw ConfigError({"SI context values must be positive"});
    check(p);
    const double omega_r = 2.0 * std::numbers::pi * ctx.recoil_frequency_hz;
    const double d = ctx.lattice_wavelength_m / 2.0;
    const double omega_b = p.omega_b() * omega_r;
    return {
        {"bloch_frequency_hz", omega_b / (2.0 * std::numbers::pi)},
        {"force_newton", kHbar * omega_b / d},
        {"kappa_hz", p.kappa * ctx.recoil_frequency_hz},
        {"recoil_frequency_hz", ctx.recoil_frequency_hz},
    };
}

double bloch_ratio_for_force(double force_newton, const SiContext& ctx) {
    const double omega_r = 2.0 * std::numbers::pi * ctx.recoil_frequency_hz;
    return force_newton * (ctx.lattice_wavelength_m / 2.0) / kHbar / omega_r;
}

}  // namespace cb
