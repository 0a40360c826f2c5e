#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavity_bloch/coherent_approx.hpp"
#include "cavity_bloch/fluctuations.hpp"
#include "cavity_bloch/snr.hpp"
#include "cavity_bloch/spectrum.hpp"

namespace cb::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Flat JSON object of numbers. Throws ConfigError on malformed input.
RawConfig parse_config(const std::string& text);
RawConfig read_config(const fs::path& path);

// Shortest round-trip decimal form.
std::string fmt_double(double v);

// Small CSV builder; rows are written in insertion order.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);
    CsvTable& row();
    CsvTable& add(double v);
    CsvTable& add(long v);
    CsvTable& add(const std::string& s);
    [[nodiscard]] std::string str() const;
    [[nodiscard]] std::size_t rows() const { return rows_; }

private:
    std::vector<std::string> header_;
    std::string body_;
    std::size_t rows_ = 0;
    std::size_t cells_ = 0;
};

// Parses a CSV written by CsvTable into header and numeric cells; text cells become NaN.
struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    [[nodiscard]] std::size_t column(const std::string& name) const;
};
CsvData parse_csv(const std::string& text);

// t, re_alpha, im_alpha, s, re_c_{n}, im_c_{n} (n from -n_max).
CsvTable trajectory_table(const MeanfieldTrajectory& traj);
// t, dn, dN, commutator_residual
CsvTable occupation_table(const LinearRun& run);
// x, band, omega, gamma, kind, cavity_weight, occupation
struct SpectrumRow {
    double x = 0.0;
    int band = 0;
    const QuasiparticleMode* mode = nullptr;
    double occupation = 0.0;  // NaN when not computed
};
CsvTable spectrum_table(const std::string& x_name, const std::vector<SpectrumRow>& rows);
// t, j, E_j, u2, gamma_up, gamma_down, dN_j  and  t, dN_total
CsvTable rate_table(const RateRun& run);
CsvTable rate_total_table(const RateRun& run);
// axis_value, mode, omega, T, signal, variance, snr, converged
CsvTable scan_table(const std::string& axis, const std::vector<SnrScanRow>& rows);
// q, band, energy at the self-consistent depth
CsvTable band_table(const BlochBandSolution& band, int bands);

json params_json(const SystemParams& p);
json steady_state_json(const SystemParams& p, double q, const SelfConsistentState& s, int roots);

// Exact round trip through JSON for checkpoints.
json scan_row_json(const SnrScanRow& r);
SnrScanRow scan_row_from_json(const json& j);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

struct RunManifest {
    SystemParams params;
    std::string command;
    json settings = json::object();
    std::string version;
    std::string started;
    std::string finished;
    std::vector<std::pair<std::string, std::string>> files;  // relative name, sha256
};

// Writes the file, hashes it and records it in the manifest.
void emit(RunManifest& m, const fs::path& dir, const std::string& name, const std::string& text);
json manifest_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const fs::path& dir);
// Re-hashes every listed file; returns the names that differ or are missing.
std::vector<std::string> verify_manifest(const fs::path& dir);

std::string utc_timestamp();

}  // namespace cb::io
