#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <lagns/eulerian.hpp>
#include <lagns/random.hpp>

using namespace lagns;

namespace {

// gaussian bump summed over periodic images so the extension is smooth
ScalarField smooth_blob(const GridSpec& g, double amp, double width = 0.8) {
    const double c = g.L / 2.0, L = g.L;
    return ScalarField::from_function(g, [=](const std::array<double, 3>& x) {
        double v = 1.0;
        for (int ix = -1; ix <= 1; ++ix)
            for (int iy = -1; iy <= 1; ++iy) {
                const double dx = x[0] - c + ix * L, dy = x[1] - c + iy * L;
                v += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
            }
        return v;
    });
}

Trajectory shear_solution(const GridSpec& g, double gamma, const TimeGrid& tg) {
    Trajectory tr;
    tr.time = tg;
    auto v = VectorField::from_function(g, [gamma](const std::array<double, 3>& x) {
        return std::array<double, 3>{gamma * std::sin(x[1]), 0.0, 0.0};
    });
    tr.velocity.assign(tg.samples, v);
    tr.grad_pressure.assign(tg.samples, VectorField::zero(g));
    return tr;
}

} // namespace

TEST_CASE("to_eulerian trivial cases") {
    GridSpec g(2, 32);
    TimeGrid tg{0.02, 11};
    auto rho0 = smooth_blob(g, 0.1);

    SUBCASE("zero velocity transports nothing") {
        auto snaps = to_eulerian(Trajectory::zero(g, tg), rho0, {0, 5, 10});
        for (auto& s : snaps) {
            CHECK(sup_norm(s.rho - rho0) < 1e-10);
            CHECK(sup_norm(s.u) < 1e-12);
        }
    }

    SUBCASE("constant density stays constant") {
        auto tr = shear_solution(g, 0.1, tg);
        auto snaps = to_eulerian(tr, ScalarField::constant(g, 1.0), {10});
        CHECK(sup_norm(snaps[0].rho - ScalarField::constant(g, 1.0)) < 1e-9);
    }
}

TEST_CASE("to_eulerian inverts the closed-form shear") {
    GridSpec g(2, 64);
    const double gamma = 0.15, dt = 1e-3, T = 0.1;
    TimeGrid tg{dt, static_cast<int>(T / dt) + 1};
    auto tr = shear_solution(g, gamma, tg);
    auto rho0 = smooth_blob(g, 0.1);
    auto snaps = to_eulerian(tr, rho0, {tg.samples - 1});
    // rho(T, x) = rho0(x1 - T gamma sin(x2), x2)
    auto expect = ScalarField::from_function(g, [&](const std::array<double, 3>& x) {
        const double c = g.L / 2.0, L = g.L;
        const double x1 = x[0] - T * gamma * std::sin(x[1]);
        double v = 1.0;
        for (int ix = -1; ix <= 1; ++ix)
            for (int iy = -1; iy <= 1; ++iy) {
                const double d0 = x1 - c + ix * L;
                const double d1 = x[1] - c + iy * L;
                v += 0.1 * std::exp(-(d0 * d0 + d1 * d1) / (2.0 * 0.8 * 0.8));
            }
        return v;
    });
    CHECK(lp_norm(snaps[0].rho - expect, 2.0) / lp_norm(expect, 2.0) < 1e-5);

    // mean of rho is conserved (measure-preserving composition)
    CHECK(std::abs(snaps[0].rho.mean() - rho0.mean()) < 1e-8);

    // range preservation
    CHECK(snaps[0].rho.values().maxCoeff() <= rho0.values().maxCoeff() + 1e-6);
    CHECK(snaps[0].rho.values().minCoeff() >= rho0.values().minCoeff() - 1e-6);
}

TEST_CASE("nse_residual: zero solution and snapshot count guard") {
    GridSpec g(2, 32);
    std::vector<EulerianSnapshot> snaps;
    for (int i = 0; i < 3; ++i) {
        EulerianSnapshot s;
        s.t = 0.01 * i;
        s.rho = ScalarField::constant(g, 1.0);
        s.u = VectorField::zero(g);
        s.grad_p = VectorField::zero(g);
        s.grad_u = MatrixField::zero(g);
        snaps.push_back(std::move(s));
    }
    auto r = nse_residual(snaps, 1.0);
    CHECK(r.mass == 0.0);
    CHECK(r.momentum == 0.0);
    CHECK(r.divergence == 0.0);
    snaps.pop_back();
    CHECK_THROWS_AS(nse_residual(snaps, 1.0), TooFewSnapshots);
}

TEST_CASE("nse_residual: exact Taylor-Green fields have O(dt^2) momentum residual") {
    GridSpec g(2, 32);
    const double mu = 0.3;
    auto make = [&](double dt) {
        std::vector<EulerianSnapshot> snaps;
        for (int i = 0; i < 3; ++i) {
            const double t = dt * i;
            const double decay = std::exp(-2.0 * mu * t);
            EulerianSnapshot s;
            s.t = t;
            s.rho = ScalarField::constant(g, 1.0);
            s.u = VectorField::from_function(g, [&](const std::array<double, 3>& x) {
                return std::array<double, 3>{decay * std::sin(x[0]) * std::cos(x[1]),
                                             -decay * std::cos(x[0]) * std::sin(x[1]), 0.0};
            });
            // P = -(rho/4)(cos 2x + cos 2y) e^{-4 mu t}
            s.grad_p = VectorField::from_function(g, [&](const std::array<double, 3>& x) {
                const double d2 = decay * decay;
                return std::array<double, 3>{-0.5 * d2 * std::sin(2.0 * x[0]),
                                             -0.5 * d2 * std::sin(2.0 * x[1]), 0.0};
            });
            s.grad_u = grad_vector(s.u);
            snaps.push_back(std::move(s));
        }
        return nse_residual(snaps, mu);
    };
    auto r1 = make(0.02);
    auto r2 = make(0.01);
    CHECK(r1.divergence < 1e-12);
    CHECK(r1.mass < 1e-12);
    CHECK(r1.momentum / r2.momentum == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("reference solver: constant density matches Taylor-Green at first order") {
    GridSpec g(2, 32);
    const double mu = 0.2, T = 0.25;
    auto u0 = VectorField::from_function(g, [](const std::array<double, 3>& x) {
        return std::array<double, 3>{std::sin(x[0]) * std::cos(x[1]),
                                     -std::cos(x[0]) * std::sin(x[1]), 0.0};
    });
    auto err_at = [&](double dt) {
        auto snaps =
            reference_eulerian_solve(ScalarField::constant(g, 1.0), u0, mu, T, dt, 1 << 20);
        const auto& last = snaps.back();
        auto exact = u0 * std::exp(-2.0 * mu * last.t);
        return lp_norm(last.u - exact, 2.0) / lp_norm(exact, 2.0);
    };
    const double e1 = err_at(1e-2);
    const double e2 = err_at(5e-3);
    CHECK(e1 < 0.05);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.35)); // first order in time

    // u0 = 0: rho frozen, u stays zero
    auto frozen = reference_eulerian_solve(smooth_blob(g, 0.1), VectorField::zero(g), mu, 0.1,
                                           0.01, 1 << 20);
    CHECK(sup_norm(frozen.back().u) < 1e-12);
    CHECK(sup_norm(frozen.back().rho - smooth_blob(g, 0.1)) < 1e-10);

    CHECK_THROWS_AS(
        reference_eulerian_solve(smooth_blob(g, 0.5), u0, mu, 0.1, 0.01, 1),
        DensityContrastTooLarge);
}

TEST_CASE("reference solver conserves mass") {
    GridSpec g(2, 32);
    RandomStream rng(3);
    auto u0 = leray_project(random_band_limited_vector(g, 3, rng, 0.3));
    auto rho0 = smooth_blob(g, 0.05);
    auto snaps = reference_eulerian_solve(rho0, u0, 0.5, 0.5, 1e-3, 100);
    const double m0 = rho0.mean();
    for (auto& s : snaps)
        CHECK(std::abs(s.rho.mean() - m0) / m0 < 1e-6);
}

TEST_CASE("density jump experiment basics") {
    GridSpec g(2, 32);
    DiscDomain disc{{std::numbers::pi, std::numbers::pi}, 1.2};

    SUBCASE("mollified disc approximates the sharp one") {
        auto moll = mollified_disc(g, disc, 2.0 * g.spacing());
        CHECK(moll.values().maxCoeff() == doctest::Approx(1.0).epsilon(0.05));
        CHECK(std::abs(moll.mean() - sharp_disc(g, disc).mean()) < 1e-10);
    }

    SUBCASE("zero velocity leaves the interface in place") {
        JumpExperimentOptions opt;
        opt.mult_trials = 8;
        auto rep = density_jump_experiment(g, disc, 0.04, VectorField::zero(g), 1.0, 0.1, 0.01, opt);
        for (double d : rep.area_drift) CHECK(std::abs(d) < 1e-12);
        for (double k : rep.curvature_change) CHECK(k < 1e-10);
        CHECK(rep.multiplier_bound > 0.0);
    }

    SUBCASE("small shear-like velocity preserves the area") {
        JumpExperimentOptions opt;
        opt.mult_trials = 8;
        auto u0 = VectorField::from_function(g, [](const std::array<double, 3>& x) {
            return std::array<double, 3>{0.002 * std::sin(x[1]), 0.0, 0.0};
        });
        auto rep = density_jump_experiment(g, disc, 0.04, u0, 1.0, 0.5, 5e-3, opt);
        CHECK(std::abs(rep.area_drift.back()) <= 1e-4);
        CHECK(rep.diagnostics.liouville_drift <= 1e-6);
    }
}

TEST_CASE("composition consistency: pull the Eulerian velocity back") {
    GridSpec g(2, 64);
    const double gamma = 0.1, dt = 2e-3, T = 0.1;
    TimeGrid tg{dt, static_cast<int>(T / dt) + 1};
    auto tr = shear_solution(g, gamma, tg);
    const int last = tg.samples - 1;
    auto snaps = to_eulerian(tr, smooth_blob(g, 0.05), {last});
    auto fs = flow_from_lagrangian_velocity(tr, tg.t(last));
    // u(X(y)) should recover ubar(y)
    auto pulled = compose(snaps[0].u, fs.displacement);
    CHECK(lp_norm(pulled - tr.velocity[last], 2.0) <= 2e-6);
}
