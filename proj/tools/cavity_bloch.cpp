#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

namespace {

using cb::io::json;

int fail(int code, const std::string& kind, const std::string& message, const std::vector<std::string>& issues = {}) {
    json j = json::object();
    j["status"] = "error";
    j["error"] = kind;
    j["exit_code"] = code;
    j["message"] = message;
    j["issues"] = issues;
    std::cout << j.dump() << std::endl;
    return code;
}

std::filesystem::path default_out(const std::string& command) {
    const char* root = std::getenv("CAVITY_BLOCH_OUT");
    return std::filesystem::path(root && *root ? root : "cavity_bloch_out") / command;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("cavity-bloch"));
    spdlog::set_pattern("[%l] %v");

    CLI::App app{"Bloch oscillations of atoms in a pumped optical cavity: meanfield, fluctuations and readout noise"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(CAVITY_BLOCH_VERSION));

    cb::cli::Common common;
    std::string out_dir;
    unsigned parallel = std::max(1u, std::thread::hardware_concurrency());
    std::string log_level = "info";
    app.add_option("--config", common.config, "Flat JSON file with u0, n_atoms, eta, delta_c, kappa, force, q0, n_max")
        ->required();
    app.add_option("--out", out_dir, "Output directory (default $CAVITY_BLOCH_OUT/<command>)");
    app.add_option("--parallel", parallel, "Worker threads for scans")->check(CLI::PositiveNumber);
    app.add_flag("--resume", common.resume, "Reuse finished scan points from an interrupted run");
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

    cb::cli::SteadyStateArgs ss;
    auto* c_ss = app.add_subcommand("steady-state", "Self-consistent steady state and bands at one q");
    c_ss->add_option("--q", ss.q, "Quasimomentum (default: q0 from the config)");
    c_ss->add_option("--bands", ss.bands, "Bands to write");

    cb::cli::CalibrateArgs cal;
    auto* c_cal = app.add_subcommand("calibrate", "Pump strength for a target minimum lattice depth");
    c_cal->add_option("--target", cal.target, "Minimum depth over q, in recoil units");
    c_cal->add_option("--betas", cal.betas, "Comma-separated beta values (U0 rescaled at fixed N)")->delimiter(',');

    cb::cli::RunArgs run;
    std::string level = "meanfield";
    auto* c_run = app.add_subcommand("run", "Time evolution");
    c_run->add_option("--t-end", run.t_end, "Duration in inverse recoil frequencies");
    c_run->add_option("--periods", run.periods, "Duration in Bloch periods");
    c_run->add_option("--level", level, "meanfield, fluctuations or coherent_approx");
    c_run->add_option("--step", run.step, "Output spacing (meanfield) or fluctuation step bound");
    c_run->add_option("--tol", run.tol, "Meanfield integrator tolerance");
    c_run->add_option("--snapshot-stride", run.snapshot_stride, "Covariance dump every N fluctuation steps (0: none)");
    c_run->add_option("--trajectory-stride", run.trajectory_stride, "Write every N-th trajectory sample");
    c_run->add_option("--modes", run.modes, "Excited bands in the rate model");

    cb::cli::SpectrumArgs sp;
    auto* c_sp = app.add_subcommand("spectrum", "Quasiparticle spectra over q or along a run");
    c_sp->add_option("--over", sp.over, "q or time");
    c_sp->add_option("--q-points", sp.q_points, "Points on [-1, 1]");
    c_sp->add_option("--t-end", sp.t_end, "Duration in inverse recoil frequencies");
    c_sp->add_option("--periods", sp.periods, "Duration in Bloch periods");
    c_sp->add_option("--step", sp.step, "Fluctuation step bound");
    c_sp->add_option("--snapshot-stride", sp.snapshot_stride, "Spectrum every N fluctuation steps");

    cb::cli::SnrArgs sn;
    auto* c_sn = app.add_subcommand("snr", "Signal-to-noise scans");
    c_sn->add_option("--axis", sn.axis, "beta, depth or n_atoms");
    c_sn->add_option("--grid", sn.grid, "Comma-separated axis values")->delimiter(',');
    c_sn->add_option("--periods", sn.settings.periods, "Integration time in Bloch periods");
    c_sn->add_option("--fixed-beta", sn.settings.fixed_beta, "Beta for depth and n_atoms scans");
    c_sn->add_option("--target-depth", sn.settings.target_depth, "Minimum depth for beta and n_atoms scans");
    c_sn->add_option("--fine-step", sn.settings.fine_step, "Fluctuation step bound");
    c_sn->add_option("--q-points", sn.q_points, "q grid for the resonance range");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(2, "usage", e.what());
    }

    spdlog::set_level(spdlog::level::from_str(log_level));
    common.parallel = parallel;
    const std::string command = app.get_subcommands().front()->get_name();
    common.out = out_dir.empty() ? default_out(command) : std::filesystem::path(out_dir);

    try {
        std::filesystem::create_directories(common.out);
        cb::io::RunManifest m;
        if (c_ss->parsed()) m = cb::cli::cmd_steady_state(common, ss);
        if (c_cal->parsed()) m = cb::cli::cmd_calibrate(common, cal);
        if (c_run->parsed()) {
            if (level == "meanfield") run.level = cb::cli::RunLevel::meanfield;
            else if (level == "fluctuations") run.level = cb::cli::RunLevel::fluctuations;
            else if (level == "coherent_approx") run.level = cb::cli::RunLevel::coherent_approx;
            else throw cb::ConfigError({"unknown level " + level});
            m = cb::cli::cmd_run(common, run);
        }
        if (c_sp->parsed()) m = cb::cli::cmd_spectrum(common, sp);
        if (c_sn->parsed()) m = cb::cli::cmd_snr(common, sn);
        json ok = json::object();
        ok["status"] = "ok";
        ok["out"] = common.out.string();
        json files = json::array();
        for (const auto& f : m.files) files.push_back(f.first);
        ok["files"] = files;
        std::cout << ok.dump() << std::endl;
        return 0;
    } catch (const cb::ConfigError& e) {
        return fail(2, "config", e.what(), e.issues);
    } catch (const cb::NumericalError& e) {
        return fail(3, "numerical", e.what());
    } catch (const cb::ResourceError& e) {
        json j = json::object();
        return fail(4, "resource",
                    std::string(e.what()) + " (required " + cb::io::fmt_double(e.required_bytes) + " bytes, available " +
                        cb::io::fmt_double(e.available_bytes) + ")");
    } catch (const std::exception& e) {
        return fail(3, "runtime", e.what());
    }
}
