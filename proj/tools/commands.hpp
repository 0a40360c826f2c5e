#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cavity_bloch/io.hpp"

namespace cb::cli {

struct Common {
    std::filesystem::path config;
    std::filesystem::path out;  // resolved output directory
    unsigned parallel = 1;
    bool resume = false;
};

struct SteadyStateArgs {
    std::optional<double> q;
    int bands = 5;
};

struct CalibrateArgs {
    double target = 3.0;
    std::vector<double> betas;  // empty: the config's own beta
};

enum class RunLevel { meanfield, fluctuations, coherent_approx };

struct RunArgs {
    std::optional<double> t_end;
    std::optional<double> periods;
    RunLevel level = RunLevel::meanfield;
    double step = 0.01;
    double tol = 1e-10;
    long snapshot_stride = 0;
    long trajectory_stride = 1;
    int modes = 8;
};

struct SpectrumArgs {
    std::string over = "q";
    int q_points = 41;
    std::optional<double> t_end;
    std::optional<double> periods;
    double step = 0.01;
    long snapshot_stride = 50;
};

struct SnrArgs {
    std::string axis = "beta";
    std::vector<double> grid;
    SnrSettings settings{};
    int q_points = 41;
};

// Each returns the manifest that was written to common.out.
io::RunManifest cmd_steady_state(const Common& c, const SteadyStateArgs& a);
io::RunManifest cmd_calibrate(const Common& c, const CalibrateArgs& a);
io::RunManifest cmd_run(const Common& c, const RunArgs& a);
io::RunManifest cmd_spectrum(const Common& c, const SpectrumArgs& a);
io::RunManifest cmd_snr(const Common& c, const SnrArgs& a);

}  // namespace cb::cli
