#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "lagns/eulerian.hpp"

namespace lagns {

inline constexpr const char* kVersion = "0.1.0";

/// Configuration of one experiment run.  Parsed from a single JSON file; the
/// manifest written by `run` is itself a valid config.
struct ExperimentConfig {
    std::string kind; ///< identity-suite | stokes-suite | global-small | local-large |
                      ///< density-jump | cross-validate | besov-suite
    int n = 2;
    int N = 64;
    double L = 2.0 * std::numbers::pi;
    double T = 1.0;
    double dt = 1e-3;
    double mu = 1.0;
    double sigma = 0.05; ///< density jump size
    double p = 2.0;
    double c = 0.05;
    double C_stokes = 2.0;
    double tolerance = 1e-7; ///< outer tolerance; inner is tolerance * 1e-2
    std::uint64_t seed = 1;
    std::uint64_t mult_seed = 0; ///< seed of the multiplier probe; 0 = follow seed
    std::string output_dir = "run-out";

    // data construction knobs
    double u0_amplitude = 0.01; ///< B^{n/p-1} norm of u0
    int u0_kmax = 3;
    double rho_amplitude = 0.01;
    double disc_center_x = std::numbers::pi;
    double disc_center_y = std::numbers::pi;
    double disc_radius = 1.2;
    int markers = 256;
    int mult_trials = 32;
    int trials = 20; ///< seeded repetitions inside suites
    bool strict = false;
    int snapshot_stride = 50;

    static ExperimentConfig from_json_file(const std::filesystem::path& path);
    static ExperimentConfig from_json_text(const std::string& text);
    std::string to_json() const;
    void validate() const;

    GridSpec grid() const { return GridSpec(n, N, L); }
    TimeGrid time_grid() const {
        return TimeGrid{dt, static_cast<int>(std::lround(T / dt)) + 1};
    }
};

/// Execute the configured experiment.  Writes manifest.json, norms.csv,
/// diagnostics.csv, field dumps and plots into output_dir.  Returns 0 on
/// success; module errors surface as exceptions for the CLI to map.
int run(const ExperimentConfig& config);

struct CompareRow {
    std::string quantity;
    double max_abs_diff = 0.0;
    double max_rel_diff = 0.0;
    int rows_compared = 0;
};

struct CompareReport {
    std::vector<CompareRow> rows;
    /// ||u_b - u_a||_L2 / ||u0_b - u0_a||_L2 from the field dumps, when both
    /// runs carry them: the measured data-to-solution stability ratio.
    std::optional<double> stability_ratio;
    std::optional<double> du_norm;
    std::optional<double> du0_norm;
};

/// Numerical diff of two run directories (shared CSV quantities + dumps).
CompareReport compare(const std::filesystem::path& run_a, const std::filesystem::path& run_b);

/// Construct the standard experiment data from a config (shared by run and
/// the acceptance suite).
ScalarField config_density(const ExperimentConfig& cfg, const GridSpec& g);
VectorField config_velocity(const ExperimentConfig& cfg, const GridSpec& g);

} // namespace lagns
