#pragma once

#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace cb {

// Dimensionless control parameters. Frequencies in units of the recoil
// frequency, times in units of its inverse, lengths in units of 1/k.
struct SystemParams {
    double u0 = 0.0;        // single-atom light shift
    double n_atoms = 1.0;   // atom number
    double eta = 0.0;       // pump rate
    double delta_c = 0.0;   // pump-cavity detuning
    double kappa = 1.0;     // cavity amplitude decay
    double force = 0.0;     // f = omega_B / pi
    double q0 = 0.0;        // initial quasimomentum
    int n_max = 16;         // plane waves e^{i2nx}, n in [-n_max, n_max]

    [[nodiscard]] double beta() const { return n_atoms * u0 / kappa; }
    [[nodiscard]] double omega_b() const { return std::numbers::pi * force; }
    // Infinite when force == 0.
    [[nodiscard]] double bloch_period() const { return 2.0 / force; }
    [[nodiscard]] int basis_size() const { return 2 * n_max + 1; }

    bool operator==(const SystemParams&) const = default;
};

// The canonical force, omega_B = omega_R / 4.
inline constexpr double kCanonicalForce = 0.25 / std::numbers::pi;

struct ConfigError : std::runtime_error {
    std::vector<std::string> issues;
    explicit ConfigError(std::vector<std::string> list);
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ResourceError : std::runtime_error {
    double required_bytes;
    double available_bytes;
    ResourceError(const std::string& what, double required, double available);
};

using RawConfig = std::map<std::string, double>;

// Throws ConfigError listing every violated invariant.
SystemParams validate(const RawConfig& raw);
void check(const SystemParams& p);
RawConfig to_raw(const SystemParams& p);

// {u0 r, N/r, eta/sqrt(r)}; beta is unchanged.
SystemParams scale_family(const SystemParams& p, double r);

struct SiContext {
    double recoil_frequency_hz = 3.8e3;   // omega_R / 2 pi
    double lattice_wavelength_m = 780e-9;
    double atom_mass_kg = 1.443160648e-25;  // 87Rb
};

// Keys: bloch_frequency_hz, force_newton, kappa_hz, recoil_frequency_hz.
std::map<std::string, double> to_si(const SystemParams& p, const SiContext& ctx);

// omega_B / omega_R produced by a force F on the lattice of ctx.
double bloch_ratio_for_force(double force_newton, const SiContext& ctx);

}  // namespace cb
