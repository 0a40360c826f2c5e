#include "cavity_bloch/io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

namespace cb::io {

RawConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
    }
    if (!j.is_object()) throw ConfigError({"config must be a flat JSON object"});
    RawConfig raw;
    std::vector<std::string> bad;
    for (const auto& [k, v] : j.items()) {
        if (!v.is_number()) {
            bad.push_back("value of " + k + " is not a number");
            continue;
        }
        raw[k] = v.get<double>();
    }
    if (!bad.empty()) throw ConfigError(std::move(bad));
    return raw;
}

RawConfig read_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot read config " + path.string()});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row() {
    if (rows_ > 0 && cells_ != header_.size()) throw std::logic_error("CsvTable: short row");
    if (rows_ > 0) body_ += '\n';
    ++rows_;
    cells_ = 0;
    return *this;
}

CsvTable& CsvTable::add(const std::string& s) {
    if (rows_ == 0 || cells_ >= header_.size()) throw std::logic_error("CsvTable: cell outside a row");
    if (cells_ > 0) body_ += ',';
    body_ += s;
    ++cells_;
    return *this;
}

CsvTable& CsvTable::add(double v) { return add(fmt_double(v)); }
CsvTable& CsvTable::add(long v) { return add(std::to_string(v)); }

std::string CsvTable::str() const {
    if (rows_ > 0 && cells_ != header_.size()) throw std::logic_error("CsvTable: short row");
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
    out += '\n';
    if (rows_ > 0) out += body_ + '\n';
    return out;
}

std::size_t CsvData::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ConfigError({"csv: missing column " + name});
}

CsvData parse_csv(const std::string& text) {
    CsvData d;
    std::istringstream in(text);
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream s(l);
        while (std::getline(s, cell, ',')) out.push_back(cell);
        if (!l.empty() && l.back() == ',') out.emplace_back();
        return out;
    };
    if (!std::getline(in, line)) throw ConfigError({"csv: empty input"});
    d.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != d.header.size()) throw ConfigError({"csv: ragged row"});
        std::vector<double> r;
        for (const auto& c : cells) {
            double v = std::numeric_limits<double>::quiet_NaN();
            const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (res.ec != std::errc{} || res.ptr != c.data() + c.size()) v = std::numeric_limits<double>::quiet_NaN();
            r.push_back(v);
        }
        d.rows.push_back(std::move(r));
    }
    return d;
}

CsvTable trajectory_table(const MeanfieldTrajectory& traj) {
    const Eigen::Index k = traj.states.empty() ? 0 : traj.states.front().coeffs.size();
    const long n_max = static_cast<long>((k - 1) / 2);
    std::vector<std::string> h{"t", "re_alpha", "im_alpha", "s"};
    for (long n = -n_max; n <= n_max; ++n) {
        h.push_back("re_c_" + std::to_string(n));
        h.push_back("im_c_" + std::to_string(n));
    }
    h.emplace_back("zone_shift");
    CsvTable t(std::move(h));
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto& s = traj.states[i];
        t.row().add(traj.grid[i]).add(s.alpha.real()).add(s.alpha.imag()).add(traj.depth[i]);
        for (Eigen::Index j = 0; j < k; ++j) t.add(s.coeffs[j].real()).add(s.coeffs[j].imag());
        t.add(static_cast<long>(s.zone_shift));
    }
    return t;
}

CsvTable occupation_table(const LinearRun& run) {
    CsvTable t({"t", "dn", "dN", "commutator_residual"});
    for (std::size_t i = 0; i < run.t.size(); ++i) t.row().add(run.t[i]).add(run.dn[i]).add(run.dN[i]).add(run.commutator[i]);
    return t;
}

CsvTable spectrum_table(const std::string& x_name, const std::vector<SpectrumRow>& rows) {
    CsvTable t({x_name, "band", "omega", "gamma", "kind", "cavity_weight", "occupation"});
    for (const auto& r : rows)
        t.row()
            .add(r.x)
            .add(static_cast<long>(r.band))
            .add(r.mode->omega)
            .add(r.mode->gamma)
            .add(std::string(to_string(r.mode->kind)))
            .add(r.mode->cavity_weight)
            .add(r.occupation);
    return t;
}

CsvTable rate_table(const RateRun& run) {
    CsvTable t({"t", "j", "E_j", "u2", "gamma_up", "gamma_down", "dN_j"});
    for (Eigen::Index i = 0; i < run.energy.rows(); ++i)
        for (Eigen::Index j = 0; j < run.energy.cols(); ++j)
            t.row()
                .add(run.t[static_cast<std::size_t>(i) + 1])
                .add(static_cast<long>(j + 1))
                .add(run.energy(i, j))
                .add(run.coupling2(i, j))
                .add(run.gamma_up(i, j))
                .add(run.gamma_down(i, j))
                .add(run.dn_modes(i + 1, j));
    return t;
}

CsvTable rate_total_table(const RateRun& run) {
    CsvTable t({"t", "dN_total"});
    for (std::size_t i = 0; i < run.t.size(); ++i) t.row().add(run.t[i]).add(run.total[i]);
    return t;
}

CsvTable scan_table(const std::string& axis, const std::vector<SnrScanRow>& rows) {
    CsvTable t({axis, "mode", "omega", "T", "signal", "variance", "snr", "converged"});
    for (const auto& r : rows) {
        if (r.failed) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            for (const char* m : {"detector_shot", "full_backaction"})
                t.row().add(r.axis_value).add(std::string(m)).add(nan).add(nan).add(nan).add(nan).add(nan).add(0L);
            continue;
        }
        for (const SnrResult* s : {&r.detector_shot, &r.full})
            t.row()
                .add(r.axis_value)
                .add(std::string(to_string(s->mode)))
                .add(s->omega)
                .add(s->t_end)
                .add(s->signal)
                .add(s->variance)
                .add(s->snr)
                .add(static_cast<long>(s->mode == SnrMode::full_backaction ? r.converged : 1));
    }
    return t;
}

CsvTable band_table(const BlochBandSolution& band, int bands) {
    CsvTable t({"q", "band", "energy"});
    const auto n = std::min<Eigen::Index>(bands, band.energies.size());
    for (Eigen::Index j = 0; j < n; ++j) t.row().add(band.q).add(static_cast<long>(j)).add(band.energies[j]);
    return t;
}

json params_json(const SystemParams& p) {
    json j = json::object();
    for (const auto& [k, v] : to_raw(p)) j[k] = v;
    return j;
}

json steady_state_json(const SystemParams& p, double q, const SelfConsistentState& s, int roots) {
    json j = json::object();
    j["q"] = q;
    j["re_alpha"] = s.alpha_ss.real();
    j["im_alpha"] = s.alpha_ss.imag();
    j["photons"] = s.photons();
    j["depth"] = s.band.depth;
    j["cos2"] = s.cos2;
    j["beta"] = p.beta();
    j["steady_states"] = roots;
    j["converged"] = s.converged;
    j["iterations"] = s.iterations;
    return j;
}

namespace {

json result_json(const SnrResult& r) {
    return {{"mode", std::string(to_string(r.mode))}, {"omega", r.omega},       {"t_end", r.t_end},
            {"signal", r.signal},                    {"variance", r.variance}, {"snr", r.snr}};
}

SnrResult result_from(const json& j) {
    SnrResult r;
    const auto m = j.at("mode").get<std::string>();
    r.mode = m == "full_backaction" ? SnrMode::full_backaction
             : m == "analytic"      ? SnrMode::analytic
                                    : SnrMode::detector_shot;
    r.omega = j.at("omega").get<double>();
    r.t_end = j.at("t_end").get<double>();
    r.signal = j.at("signal").get<double>();
    r.variance = j.at("variance").get<double>();
    r.snr = j.at("snr").get<double>();
    return r;
}

}  // namespace

json scan_row_json(const SnrScanRow& r) {
    json j = json::object();
    j["axis_value"] = r.axis_value;
    j["params"] = params_json(r.params);
    j["failed"] = r.failed;
    j["error"] = r.error;
    if (!r.failed) {
        j["detector_shot"] = result_json(r.detector_shot);
        j["full"] = result_json(r.full);
        j["full_coarse"] = r.full_coarse;
        j["converged"] = r.converged;
        j["contrast"] = r.contrast;
    }
    return j;
}

SnrScanRow scan_row_from_json(const json& j) {
    SnrScanRow r;
    try {
        r.axis_value = j.at("axis_value").get<double>();
        RawConfig raw;
        for (const auto& [k, v] : j.at("params").items()) raw[k] = v.get<double>();
        r.params = validate(raw);
        r.failed = j.at("failed").get<bool>();
        r.error = j.at("error").get<std::string>();
        if (!r.failed) {
            r.detector_shot = result_from(j.at("detector_shot"));
            r.full = result_from(j.at("full"));
            r.full_coarse = j.at("full_coarse").get<double>();
            r.converged = j.at("converged").get<bool>();
            r.contrast = j.at("contrast").get<double>();
        }
    } catch (const json::exception& e) {
        throw ConfigError({std::string("checkpoint is malformed: ") + e.what()});
    }
    return r;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    // write then rename so an interrupted run never leaves a torn file
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << text;
        if (!out) throw std::runtime_error("write failed for " + path.string());
    }
    fs::rename(tmp, path);
}

void emit(RunManifest& m, const fs::path& dir, const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    m.files.emplace_back(name, sha256_hex(text));
}

json manifest_json(const RunManifest& m) {
    json j = json::object();
    j["command"] = m.command;
    j["version"] = m.version;
    j["params"] = params_json(m.params);
    j["settings"] = m.settings;
    j["started"] = m.started;
    j["finished"] = m.finished;
    json files = json::array();
    for (const auto& [name, hash] : m.files) files.push_back({{"name", name}, {"sha256", hash}});
    j["files"] = files;
    return j;
}

void write_manifest(const RunManifest& m, const fs::path& dir) {
    write_text(dir / "manifest.json", manifest_json(m).dump(2) + "\n");
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
    const json j = json::parse(read_text(dir / "manifest.json"));
    std::vector<std::string> bad;
    for (const auto& f : j.at("files")) {
        const auto name = f.at("name").get<std::string>();
        const fs::path path = dir / name;
        if (!fs::exists(path) || sha256_file(path) != f.at("sha256").get<std::string>()) bad.push_back(name);
    }
    return bad;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace cb::io
