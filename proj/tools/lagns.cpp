#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <lagns/harness.hpp>

namespace {

int thread_cap() {
    if (const char* env = std::getenv("LAGNS_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return static_cast<int>(std::thread::hardware_concurrency());
}

struct SuiteEntry {
    std::string name;
    lagns::ExperimentConfig cfg;
};

std::vector<SuiteEntry> suite_entries(const std::string& name, const std::string& out) {
    using lagns::ExperimentConfig;
    auto base = [&](const char* kind, int N, double T, double dt) {
        ExperimentConfig c;
        c.kind = kind;
        c.N = N;
        c.T = T;
        c.dt = dt;
        c.output_dir = out + "/" + kind;
        return c;
    };
    std::vector<SuiteEntry> entries;
    auto add = [&](ExperimentConfig c) { entries.push_back({c.kind, std::move(c)}); };

    if (name == "identity" || name == "quick" || name == "full")
        add(base("identity-suite", 32, 0.4, 0.05));
    if (name == "besov" || name == "quick" || name == "full")
        add(base("besov-suite", 32, 0.4, 0.05));
    if (name == "stokes" || name == "quick" || name == "full") {
        auto c = base("stokes-suite", 32, 0.5, 1e-3);
        c.trials = 6;
        add(c);
    }
    if (name == "physics" || name == "full") {
        auto gs = base("global-small", 32, 0.3, 5e-3);
        gs.u0_amplitude = 0.01;
        gs.rho_amplitude = 0.01;
        gs.mult_trials = 16;
        gs.snapshot_stride = 10;
        add(gs);
        auto ll = base("local-large", 32, 0.3, 5e-3);
        ll.u0_amplitude = 0.05;
        ll.rho_amplitude = 0.01;
        ll.mult_trials = 16;
        ll.snapshot_stride = 10;
        add(ll);
        auto dj = base("density-jump", 32, 0.25, 5e-3);
        dj.sigma = 0.04;
        dj.u0_amplitude = 0.005;
        dj.mult_trials = 16;
        dj.snapshot_stride = 10;
        add(dj);
        auto cv = base("cross-validate", 32, 0.25, 1e-3);
        cv.u0_amplitude = 0.01;
        cv.rho_amplitude = 0.02;
        cv.mult_trials = 16;
        cv.snapshot_stride = 50;
        add(cv);
    }
    if (entries.empty())
        throw lagns::ValidationError("unknown suite \"" + name +
                                     "\" (identity, besov, stokes, physics, quick, full)");
    return entries;
}

int run_suite(const std::string& name, const std::string& out, int jobs) {
    auto entries = suite_entries(name, out);
    jobs = std::max(1, std::min({jobs, thread_cap(), static_cast<int>(entries.size())}));
    std::atomic<std::size_t> cursor{0};
    std::atomic<int> failures{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= entries.size()) return;
            try {
                lagns::run(entries[i].cfg);
                std::printf("suite %-16s -> %s ok\n", entries[i].name.c_str(),
                            entries[i].cfg.output_dir.c_str());
            } catch (const std::exception& e) {
                std::printf("suite %-16s -> FAILED: %s\n", entries[i].name.c_str(), e.what());
                ++failures;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return failures ? 5 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"lagns: Lagrangian variable-density Navier-Stokes toolkit"};
    app.require_subcommand(1);

    std::string config_path, dir_a, dir_b, suite_name, suite_out = "runs";
    int jobs = 1;

    auto* run_cmd = app.add_subcommand("run", "execute one experiment from a JSON config");
    run_cmd->add_option("config", config_path, "path to the config JSON")->required();

    auto* cmp_cmd = app.add_subcommand("compare", "numerical diff of two run directories");
    cmp_cmd->add_option("a", dir_a, "first run directory")->required();
    cmp_cmd->add_option("b", dir_b, "second run directory")->required();

    auto* suite_cmd = app.add_subcommand("suite", "run a named bundle of experiments");
    suite_cmd->add_option("name", suite_name, "identity|besov|stokes|physics|quick|full")
        ->required();
    suite_cmd->add_option("--out", suite_out, "output root directory");
    suite_cmd->add_option("--jobs", jobs, "parallel entries (capped by LAGNS_THREADS)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            auto cfg = lagns::ExperimentConfig::from_json_file(config_path);
            lagns::run(cfg);
            std::printf("ok: artifacts in %s\n", cfg.output_dir.c_str());
            return 0;
        }
        if (*cmp_cmd) {
            auto rep = lagns::compare(dir_a, dir_b);
            std::printf("%-48s %12s %12s %6s\n", "quantity", "max_abs", "max_rel", "rows");
            for (const auto& r : rep.rows)
                std::printf("%-48s %12.5g %12.5g %6d\n", r.quantity.c_str(), r.max_abs_diff,
                            r.max_rel_diff, r.rows_compared);
            if (rep.du0_norm) std::printf("delta_u0_l2 = %.10g\n", *rep.du0_norm);
            if (rep.du_norm) std::printf("delta_u_l2  = %.10g\n", *rep.du_norm);
            if (rep.stability_ratio)
                std::printf("stability_ratio = %.10g\n", *rep.stability_ratio);
            return 0;
        }
        if (*suite_cmd) return run_suite(suite_name, suite_out, jobs);
    } catch (const lagns::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.error_class());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 5;
    }
    return 0;
}
