#include "commands.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

namespace cb::cli {

namespace {

using io::json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SystemParams load(const Common& c) { return validate(io::read_config(c.config)); }

io::RunManifest begin(const SystemParams& p, const std::string& command) {
    io::RunManifest m;
    m.params = p;
    m.command = command;
    m.version = CAVITY_BLOCH_VERSION;
    m.started = io::utc_timestamp();
    return m;
}

void finish(io::RunManifest& m, const Common& c) {
    m.finished = io::utc_timestamp();
    io::write_manifest(m, c.out);
}

double resolve_t_end(const SystemParams& p, const std::optional<double>& t_end, const std::optional<double>& periods) {
    if (t_end && periods) throw ConfigError({"give either --t-end or --periods, not both"});
    if (t_end) {
        if (!(*t_end >= 0)) throw ConfigError({"--t-end must be non-negative"});
        return *t_end;
    }
    if (p.force == 0.0) {
        if (periods) throw ConfigError({"--periods needs a nonzero force"});
        throw ConfigError({"--t-end is required when force is zero"});
    }
    const double n = periods.value_or(1.0);
    if (!(n >= 0)) throw ConfigError({"--periods must be non-negative"});
    return n * std::abs(p.bloch_period());
}

// trajectory at spacing step/2 with a whole number of fluctuation steps
struct FineRun {
    MeanfieldTrajectory traj;
    double step = 0.0;
};

FineRun fine_trajectory(const SystemParams& p, double t_end, double max_step, double tol) {
    if (!(max_step > 0)) throw ConfigError({"--step must be positive"});
    double h = max_step;
    if (t_end > 0) h = t_end / std::ceil(t_end / max_step - 1e-9);
    return {evolve(p, initial_state(p), t_end, {tol, 0.5 * h, 0.05}), h};
}

MeanfieldTrajectory thin(const MeanfieldTrajectory& traj, long stride) {
    if (stride <= 1) return traj;
    MeanfieldTrajectory out = traj;
    out.grid.clear();
    out.states.clear();
    out.depth.clear();
    for (std::size_t i = 0; i < traj.size(); i += static_cast<std::size_t>(stride)) {
        out.grid.push_back(traj.grid[i]);
        out.states.push_back(traj.states[i]);
        out.depth.push_back(traj.depth[i]);
    }
    return out;
}

io::CsvTable covariance_dump(const LinearRun& run) {
    io::CsvTable t({"t", "zone_shift", "row", "col", "re", "im"});
    for (const auto& s : run.snapshots)
        for (Eigen::Index i = 0; i < s.c.rows(); ++i)
            for (Eigen::Index j = 0; j < s.c.cols(); ++j)
                t.row()
                    .add(s.t)
                    .add(static_cast<long>(s.zone_shift))
                    .add(static_cast<long>(i))
                    .add(static_cast<long>(j))
                    .add(s.c(i, j).real())
                    .add(s.c(i, j).imag());
    return t;
}

}  // namespace

io::RunManifest cmd_steady_state(const Common& c, const SteadyStateArgs& a) {
    SystemParams p = load(c);
    const double q = a.q.value_or(p.q0);
    if (!(q > -1.0 && q <= 1.0)) throw ConfigError({"--q outside the first Brillouin zone"});
    if (a.bands < 1) throw ConfigError({"--bands must be positive"});
    auto m = begin(p, "steady-state");
    m.settings = {{"q", q}, {"bands", a.bands}};
    const auto s = steady_state(p, q);
    const int roots = count_steady_states(p, q);
    io::emit(m, c.out, "steady_state.json", io::steady_state_json(p, q, s, roots).dump(2) + "\n");
    io::emit(m, c.out, "bands.csv", io::band_table(s.band, a.bands).str());
    finish(m, c);
    return m;
}

io::RunManifest cmd_calibrate(const Common& c, const CalibrateArgs& a) {
    SystemParams p = load(c);
    if (!(a.target > 0)) throw ConfigError({"--target must be positive"});
    auto m = begin(p, "calibrate");
    std::vector<double> betas = a.betas;
    if (betas.empty()) betas.push_back(p.beta());
    m.settings = {{"target", a.target}, {"betas", betas}};
    io::CsvTable t({"beta", "u0", "eta", "eta_over_kappa", "q_at_min", "min_depth", "bistable", "max_steady_states"});
    for (const double beta : betas) {
        if (!(beta > 0)) throw ConfigError({"beta values must be positive"});
        SystemParams pb = p;
        pb.u0 = beta * p.kappa / p.n_atoms;
        const auto cal = calibrate_pump(pb, a.target);
        pb.eta = cal.eta;
        int most = 0;
        for (int j = 0; j < 41; ++j) {
            const double q = j == 0 ? 1.0 : -1.0 + 2.0 * j / 40.0;
            most = std::max(most, count_steady_states(pb, q));
        }
        t.row()
            .add(beta)
            .add(pb.u0)
            .add(cal.eta)
            .add(cal.eta / p.kappa)
            .add(cal.q_at_min)
            .add(cal.min_depth)
            .add(static_cast<long>(cal.bistable || most > 1))
            .add(static_cast<long>(most));
    }
    io::emit(m, c.out, "calibration.csv", t.str());
    finish(m, c);
    return m;
}

io::RunManifest cmd_run(const Common& c, const RunArgs& a) {
    SystemParams p = load(c);
    const double t_end = resolve_t_end(p, a.t_end, a.periods);
    if (a.trajectory_stride < 1) throw ConfigError({"--trajectory-stride must be positive"});
    if (a.snapshot_stride < 0) throw ConfigError({"--snapshot-stride must be non-negative"});
    auto m = begin(p, "run");
    const char* level = a.level == RunLevel::meanfield      ? "meanfield"
                        : a.level == RunLevel::fluctuations ? "fluctuations"
                                                            : "coherent_approx";
    json summary = json::object();

    if (a.level == RunLevel::meanfield) {
        const auto traj = evolve(p, initial_state(p), t_end, {a.tol, a.step, 0.05});
        m.settings = {{"level", level}, {"t_end", t_end}, {"dt_out", a.step}, {"tol", a.tol}};
        io::emit(m, c.out, "trajectory.csv", io::trajectory_table(thin(traj, a.trajectory_stride)).str());
        summary["edge_loss"] = traj.edge_loss;
        summary["max_norm_drift"] = traj.max_norm_drift;
        if (p.force != 0.0 && t_end >= std::abs(p.bloch_period())) summary["contrast"] = contrast(traj);
    } else {
        FineRun fr = fine_trajectory(p, t_end, a.step, a.tol);
        m.settings = {{"level", level}, {"t_end", t_end}, {"step", fr.step}, {"tol", a.tol}};
        io::emit(m, c.out, "trajectory.csv", io::trajectory_table(thin(fr.traj, a.trajectory_stride)).str());
        summary["edge_loss"] = fr.traj.edge_loss;
        if (a.level == RunLevel::fluctuations) {
            LinearRunOptions o;
            o.step = fr.step;
            o.snapshot_stride = a.snapshot_stride;
            m.settings["snapshot_stride"] = a.snapshot_stride;
            const auto run = evolve_linear_system(p, fr.traj, vacuum_covariance(fr.traj.states.front()), o);
            io::emit(m, c.out, "occupations.csv", io::occupation_table(run).str());
            if (a.snapshot_stride > 0) io::emit(m, c.out, "covariance.csv", covariance_dump(run).str());
            summary["max_commutator_residual"] =
                run.commutator.empty() ? 0.0 : *std::max_element(run.commutator.begin(), run.commutator.end());
            summary["final_dN_over_N"] = run.dN.back() / p.n_atoms;
            summary["escaped_dN_over_N"] = run.dN_escaped.back() / p.n_atoms;
            if (p.force != 0.0)
                if (const auto on = heating_onset(run.t, run.dN, std::abs(p.bloch_period()))) summary["heating_onset"] = *on;
        } else {
            RateOptions o;
            o.modes = a.modes;
            m.settings["modes"] = a.modes;
            const auto rr = evolve_rates(p, fr.traj, o);
            io::emit(m, c.out, "rates.csv", io::rate_table(rr).str());
            io::emit(m, c.out, "rates_total.csv", io::rate_total_table(rr).str());
            double worst = 0.0;
            for (std::size_t i = 0; i < fr.traj.size(); i += 64)
                worst = std::max(worst, adiabaticity_diagnostic(p, fr.traj.states[i]).pair_values.maxCoeff());
            summary["max_adiabaticity"] = worst;
            summary["adiabatic_breakdown"] = worst > 0.1;
        }
    }
    io::emit(m, c.out, "summary.json", summary.dump(2) + "\n");
    finish(m, c);
    return m;
}

io::RunManifest cmd_spectrum(const Common& c, const SpectrumArgs& a) {
    SystemParams p = load(c);
    auto m = begin(p, "spectrum");
    std::vector<io::SpectrumRow> rows;
    if (a.over == "q") {
        if (a.q_points < 1) throw ConfigError({"empty q grid"});
        m.settings = {{"over", "q"}, {"q_points", a.q_points}};
        std::vector<std::vector<QuasiparticleMode>> all;
        std::vector<double> qs;
        for (int j = 0; j < a.q_points; ++j) {
            const double q = a.q_points == 1 ? 0.0 : -1.0 + 2.0 * j / (a.q_points - 1);
            qs.push_back(q);
            all.push_back(steady_state_spectrum(p, q <= -1.0 ? 1.0 : q));
        }
        for (std::size_t i = 0; i < all.size(); ++i)
            for (std::size_t n = 0; n < all[i].size(); ++n) rows.push_back({qs[i], static_cast<int>(n), &all[i][n], kNaN});
        io::emit(m, c.out, "spectrum.csv", io::spectrum_table("q", rows).str());
    } else if (a.over == "time") {
        const double t_end = resolve_t_end(p, a.t_end, a.periods);
        if (a.snapshot_stride < 1) throw ConfigError({"--snapshot-stride must be positive"});
        FineRun fr = fine_trajectory(p, t_end, a.step, 1e-10);
        LinearRunOptions o;
        o.step = fr.step;
        o.snapshot_stride = a.snapshot_stride;
        const auto run = evolve_linear_system(p, fr.traj, vacuum_covariance(fr.traj.states.front()), o);
        m.settings = {{"over", "time"}, {"t_end", t_end}, {"step", fr.step}, {"snapshot_stride", a.snapshot_stride}};
        const Eigen::Index k = p.basis_size();
        std::vector<std::vector<QuasiparticleMode>> all, shifted;
        std::vector<VecR> occ;
        for (std::size_t i = 0; i < run.snapshots.size(); ++i) {
            const auto& st = fr.traj.states[2 * i * static_cast<std::size_t>(a.snapshot_stride)];
            auto modes = quasiparticle_modes(run.matrices[i], st);
            classify(modes, effective_detuning(p, st), p.kappa);
            occ.push_back(qp_occupations(run.snapshots[i], st, modes));
            auto copy = modes;
            // compare eigenvectors in one labelling
            for (auto& q : copy) q.right = relabel_fluct(q.right, k, st.zone_shift, 0);
            shifted.push_back(std::move(copy));
            all.push_back(std::move(modes));
        }
        const auto tracked = track_modes(shifted);
        for (std::size_t i = 0; i < all.size(); ++i)
            for (std::size_t n = 0; n < all[i].size(); ++n)
                rows.push_back({run.snapshots[i].t, tracked.labels[i][n], &all[i][n], occ[i][static_cast<Eigen::Index>(n)]});
        io::emit(m, c.out, "spectrum.csv", io::spectrum_table("t", rows).str());
        io::CsvTable cr({"snapshot", "label"});
        for (const auto& [s, l] : tracked.crossings) cr.row().add(static_cast<long>(s)).add(static_cast<long>(l));
        io::emit(m, c.out, "crossings.csv", cr.str());
    } else {
        throw ConfigError({"--over must be q or time"});
    }
    finish(m, c);
    return m;
}

namespace {

struct PointOutcome {
    SnrScanRow row;
    ResonanceInterval range;
    double pir = kNaN;
};

json outcome_json(const PointOutcome& o, const std::string& key) {
    json j = json::object();
    j["key"] = key;
    j["row"] = io::scan_row_json(o.row);
    j["omega_min"] = o.range.omega_min;
    j["omega_max"] = o.range.omega_max;
    j["bistable"] = o.range.bistable;
    j["power_in_range"] = o.pir;
    return j;
}

std::optional<PointOutcome> outcome_from(const json& j, const std::string& key) {
    if (!j.contains("key") || j.at("key").get<std::string>() != key) return std::nullopt;
    PointOutcome o;
    o.row = io::scan_row_from_json(j.at("row"));
    auto num = [&](const char* name) { return j.at(name).is_null() ? kNaN : j.at(name).get<double>(); };
    o.range.omega_min = num("omega_min");
    o.range.omega_max = num("omega_max");
    o.range.bistable = j.at("bistable").get<bool>();
    o.pir = num("power_in_range");
    return o;
}

PointOutcome run_point(const SystemParams& base, ScanAxis axis, double v, const SnrArgs& a) {
    PointOutcome o;
    try {
        const SystemParams pp = scan_point_params(base, axis, v, a.settings);
        o.row = snr_point(pp, v, a.settings);
        o.range = resonance_interval(pp, a.q_points);
        const double t_end = a.settings.periods * std::abs(pp.bloch_period());
        const auto traj = evolve(pp, initial_state(pp), t_end, {a.settings.meanfield_tol, 0.01, 0.05});
        o.pir = power_in_range(depth_spectrum(traj), pp.omega_b(), o.range.omega_min, o.range.omega_max);
        // no atomic branch found: keep the file identical across checkpoint round trips
        if (!std::isfinite(o.range.omega_min) || !std::isfinite(o.range.omega_max))
            o.range.omega_min = o.range.omega_max = o.pir = kNaN;
    } catch (const std::exception& e) {
        spdlog::error("snr: point {} = {} failed: {}", to_string(axis), v, e.what());
        o.row = {};
        o.row.axis_value = v;
        o.row.failed = true;
        o.row.error = e.what();
        o.range.omega_min = o.range.omega_max = kNaN;
    }
    return o;
}

}  // namespace

io::RunManifest cmd_snr(const Common& c, const SnrArgs& a) {
    SystemParams p = load(c);
    const auto axis = parse_axis(a.axis);
    if (!axis) throw ConfigError({"unknown axis " + a.axis + " (beta, depth, n_atoms)"});
    if (a.grid.empty()) throw ConfigError({"empty scan grid"});
    if (p.force == 0.0) throw ConfigError({"snr needs a nonzero force"});
    if (!(a.settings.periods > 0)) throw ConfigError({"--periods must be positive"});
    auto m = begin(p, "snr");
    const auto& s = a.settings;
    m.settings = {{"axis", a.axis},
                  {"grid", a.grid},
                  {"periods", s.periods},
                  {"fixed_beta", s.fixed_beta},
                  {"target_depth", s.target_depth},
                  {"points_per_period", s.points_per_period},
                  {"fine_step", s.fine_step},
                  {"meanfield_tol", s.meanfield_tol},
                  {"convergence_tol", s.convergence_tol},
                  {"q_points", a.q_points}};
    const std::string key = io::sha256_hex(io::params_json(p).dump() + m.settings.dump() + m.version);

    const auto ckdir = c.out / "checkpoint";
    if (!c.resume && std::filesystem::exists(ckdir)) std::filesystem::remove_all(ckdir);
    std::filesystem::create_directories(ckdir);

    const std::size_t n = a.grid.size();
    std::vector<PointOutcome> results(n);
    std::vector<bool> done(n, false);
    if (c.resume) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto f = ckdir / ("point_" + std::to_string(i) + ".json");
            if (!std::filesystem::exists(f)) continue;
            try {
                if (auto o = outcome_from(json::parse(io::read_text(f)), key)) {
                    results[i] = std::move(*o);
                    done[i] = true;
                }
            } catch (const std::exception& e) {
                spdlog::warn("snr: ignoring checkpoint {}: {}", f.string(), e.what());
            }
        }
        spdlog::info("snr: resumed {} of {} points", std::count(done.begin(), done.end(), true), n);
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            if (done[i]) continue;
            results[i] = run_point(p, *axis, a.grid[i], a);
            io::write_text(ckdir / ("point_" + std::to_string(i) + ".json"), outcome_json(results[i], key).dump() + "\n");
            spdlog::info("snr: point {} = {} done", a.axis, a.grid[i]);
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(c.parallel, static_cast<unsigned>(n)));
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }

    std::vector<SnrScanRow> rows;
    io::CsvTable pr({a.axis, "omega_min", "omega_max", "power_in_range", "contrast", "bistable", "coarse_snr"});
    std::size_t failed = 0;
    for (const auto& o : results) {
        rows.push_back(o.row);
        failed += o.row.failed ? 1 : 0;
        pr.row()
            .add(o.row.axis_value)
            .add(o.range.omega_min)
            .add(o.range.omega_max)
            .add(o.pir)
            .add(o.row.failed ? kNaN : o.row.contrast)
            .add(static_cast<long>(o.range.bistable))
            .add(o.row.failed ? kNaN : o.row.full_coarse);
    }
    if (failed == n) throw NumericalError("snr: every scan point failed; first error: " + results.front().row.error);
    io::emit(m, c.out, "snr_scan.csv", io::scan_table(a.axis, rows).str());
    io::emit(m, c.out, "power_in_range.csv", pr.str());
    std::filesystem::remove_all(ckdir);
    finish(m, c);
    return m;
}

}  // namespace cb::cli
