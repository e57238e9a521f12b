#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <lagns/fixed_point.hpp>
#include <lagns/random.hpp>

using namespace lagns;

namespace {

ScalarField density_blob(const GridSpec& g, double amp, double width = 0.8) {
    const double c = g.L / 2.0;
    return ScalarField::from_function(g, [=](const std::array<double, 3>& x) {
        double r2 = 0.0;
        for (int a = 0; a < 2; ++a) r2 += (x[a] - c) * (x[a] - c);
        return 1.0 + amp * std::exp(-r2 / (2.0 * width * width));
    });
}

ProblemData small_problem(const GridSpec& g, double rho_amp, double u_amp,
                          std::uint64_t seed = 11, int samples = 41, double dt = 0.01) {
    ProblemData d;
    d.rho0 = density_blob(g, rho_amp);
    RandomStream rng(seed);
    d.u0 = leray_project(random_band_limited_vector(g, 3, rng, 1.0));
    const BesovIndex idx = BesovIndex::critical_velocity(g.n, 2.0);
    d.u0 = d.u0 * (u_amp / besov_norm(d.u0, idx).total);
    d.mu = 1.0;
    d.p = 2.0;
    d.time = {dt, samples};
    d.seed = seed;
    return d;
}

Trajectory shear_pair(const GridSpec& g, double gamma, const TimeGrid& tg) {
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

TEST_CASE("rhs_f vanishes for rho0 = 1 and identity flow") {
    GridSpec g(2, 32);
    TimeGrid tg{0.05, 9};
    Trajectory zero_v = Trajectory::zero(g, tg);
    FlowSequence flow(zero_v);

    RandomStream rng(3);
    Trajectory w;
    w.time = tg;
    for (int i = 0; i < tg.samples; ++i) {
        w.velocity.push_back(random_band_limited_vector(g, 4, rng));
        w.grad_pressure.push_back(random_band_limited_vector(g, 4, rng));
    }
    auto f = rhs_f(w, ScalarField::constant(g, 1.0), flow, 0.7);
    for (auto& fi : f) CHECK(sup_norm(fi) < 1e-12);
}

TEST_CASE("rhs_f linear in the candidate for frozen flow and density") {
    GridSpec g(2, 32);
    TimeGrid tg{0.05, 9};
    auto vbar = shear_pair(g, 0.08, tg);
    FlowSequence flow(vbar);
    auto rho = density_blob(g, 0.05);

    RandomStream rng(5);
    Trajectory w1, w2, wsum;
    w1.time = w2.time = wsum.time = tg;
    for (int i = 0; i < tg.samples; ++i) {
        w1.velocity.push_back(random_band_limited_vector(g, 4, rng));
        w1.grad_pressure.push_back(random_band_limited_vector(g, 4, rng));
        w2.velocity.push_back(random_band_limited_vector(g, 4, rng));
        w2.grad_pressure.push_back(random_band_limited_vector(g, 4, rng));
        wsum.velocity.push_back(w1.velocity[i] * 2.0 + w2.velocity[i] * (-0.5));
        wsum.grad_pressure.push_back(w1.grad_pressure[i] * 2.0 + w2.grad_pressure[i] * (-0.5));
    }
    auto f1 = rhs_f(w1, rho, flow, 0.7);
    auto f2 = rhs_f(w2, rho, flow, 0.7);
    auto fs = rhs_f(wsum, rho, flow, 0.7);
    for (int i : {0, 4, 8}) {
        auto expect = f1[i] * 2.0 + f2[i] * (-0.5);
        CHECK(sup_norm(fs[i] - expect) < 1e-11 * std::max(1.0, sup_norm(expect)));
    }
}

TEST_CASE("rhs_f middle term matches a hand-assembled constant-coefficient form") {
    // constant shear A:
    // frozen flow from constant-in-space velocity gradient is not realizable
    // on the torus, so use the sin-shear and check against the direct
    // field-level assembly of mu div((A A^T - Id) grad w)
    GridSpec g(2, 32);
    TimeGrid tg{0.05, 5};
    auto vbar = shear_pair(g, 0.1, tg);
    FlowSequence flow(vbar);
    RandomStream rng(9);
    Trajectory w;
    w.time = tg;
    for (int i = 0; i < tg.samples; ++i) {
        // time-independent candidate kills the d_t w term
        w.velocity.assign(tg.samples, random_band_limited_vector(g, 4, rng));
        w.grad_pressure.assign(tg.samples, VectorField::zero(g));
    }
    const double mu = 0.7;
    auto f = rhs_f(w, ScalarField::constant(g, 1.0), flow, mu);

    const int i = 4;
    auto fs = flow.state(i);
    auto M = multiply(fs.adjDX, fs.adjDX.transpose()) - MatrixField::identity(g);
    auto expect = divergence(multiply(M, grad_vector(w.velocity[i]))) * mu;
    CHECK(lp_norm(f[i] - expect, 2.0) < 1e-9 * std::max(1.0, lp_norm(expect, 2.0)));
}

TEST_CASE("rhs_g: identity flow, stationary candidate, consistency") {
    GridSpec g(2, 32);
    TimeGrid tg{0.02, 11};

    SUBCASE("identity flow gives zero g and R") {
        Trajectory zero_v = Trajectory::zero(g, tg);
        FlowSequence flow(zero_v);
        RandomStream rng(7);
        Trajectory w;
        w.time = tg;
        for (int i = 0; i < tg.samples; ++i)
            w.velocity.push_back(random_band_limited_vector(g, 4, rng));
        auto out = rhs_g(w, flow);
        for (auto& gi : out.g) CHECK(sup_norm(gi) < 1e-12);
        for (auto& Ri : out.R) CHECK(sup_norm(Ri) < 1e-12);
    }

    SUBCASE("time-independent candidate leaves only R2") {
        auto vbar = shear_pair(g, 0.1, tg);
        FlowSequence flow(vbar);
        RandomStream rng(9);
        auto w0 = random_band_limited_vector(g, 4, rng);
        Trajectory w;
        w.time = tg;
        w.velocity.assign(tg.samples, w0);
        auto out = rhs_g(w, flow);
        // R = R2 = -d_t A w; compare against the direct field product
        const int i = 5;
        auto fsA = flow.state(i);
        // d_t adj(DX) for the steady shear: (div v) Id - Dv = -Dv
        auto dtA = jacobian(vbar.velocity[i]) * (-1.0);
        auto expect = multiply(dtA, w0) * (-1.0);
        CHECK(lp_norm(out.R[i] - expect, 2.0) < 1e-10);
    }

    SUBCASE("discrete consistency: d_t g vs div R at second order") {
        auto residual_at = [&](double dt, int samples) {
            TimeGrid tgl{dt, samples};
            auto vbar = shear_pair(g, 0.1, tgl);
            FlowSequence flow(vbar);
            RandomStream rng(13);
            auto base = random_band_limited_vector(g, 3, rng);
            Trajectory w;
            w.time = tgl;
            for (int i = 0; i < tgl.samples; ++i)
                w.velocity.push_back(base * std::cos(3.0 * tgl.t(i)));
            auto out = rhs_g(w, flow);
            double worst = 0.0;
            for (int i = 1; i + 1 < tgl.samples; ++i) {
                auto dg = (out.g[i + 1] - out.g[i - 1]) * (0.5 / dt);
                auto dr = divergence(out.R[i]);
                worst = std::max(worst, lp_norm(dg - dr, 2.0));
            }
            return worst;
        };
        const double r1 = residual_at(1.0 / 64, 33);
        const double r2 = residual_at(1.0 / 128, 65);
        const double r3 = residual_at(1.0 / 256, 129);
        CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.35));
        CHECK(r2 / r3 == doctest::Approx(4.0).epsilon(0.35));
    }
}

TEST_CASE("psi_map trivial cases") {
    GridSpec g(2, 32);
    auto data = small_problem(g, 0.0, 0.01, 17, 21, 0.01);
    data.rho0 = ScalarField::constant(g, 1.0);
    Trajectory zero_v = Trajectory::zero(g, data.time);
    FlowSequence flow(zero_v);

    SUBCASE("zero data, zero candidate -> zero") {
        ProblemData zd = data;
        zd.u0 = VectorField::zero(g);
        auto out = psi_map(flow, Trajectory::zero(g, data.time), zd);
        for (auto& u : out.velocity) CHECK(sup_norm(u) < 1e-13);
    }

    SUBCASE("rho0 = 1, v = 0: Psi is the free Stokes map for any candidate") {
        RandomStream rng(23);
        Trajectory cand;
        cand.time = data.time;
        for (int i = 0; i < data.time.samples; ++i) {
            cand.velocity.push_back(random_band_limited_vector(g, 3, rng, 0.1));
            cand.grad_pressure.push_back(random_band_limited_vector(g, 3, rng, 0.1));
        }
        auto out = psi_map(flow, cand, data);
        StokesData sd;
        sd.u0 = data.u0;
        sd.time = data.time;
        sd.mu = data.mu;
        auto free = solve_stokes(sd);
        for (int i : {0, 10, 20})
            CHECK(lp_norm(out.velocity[i] - free.velocity[i], 2.0) < 1e-12);
    }
}

TEST_CASE("phi_map: free Stokes is the exact fixed point for rho0=1, v=0") {
    GridSpec g(2, 32);
    auto data = small_problem(g, 0.0, 0.01, 29, 21, 0.01);
    data.rho0 = ScalarField::constant(g, 1.0);
    InnerStats st;
    auto out = phi_map(Trajectory::zero(g, data.time), data, 1e-10, 10, &st);
    StokesData sd;
    sd.u0 = data.u0;
    sd.time = data.time;
    sd.mu = data.mu;
    auto free = solve_stokes(sd);
    CHECK(st.iterations <= 2); // second application only confirms the fixed point
    for (int i : {0, 20}) CHECK(lp_norm(out.velocity[i] - free.velocity[i], 2.0) < 1e-11);

    // u0 = 0 gives the zero pair immediately
    ProblemData zd = data;
    zd.u0 = VectorField::zero(g);
    auto zout = phi_map(Trajectory::zero(g, data.time), zd, 1e-10, 10, &st);
    CHECK(ep_norm(zout, zd.p, zd.mu).total < 1e-13);
}

TEST_CASE("solve_global_small on a small-data problem") {
    GridSpec g(2, 32);
    auto data = small_problem(g, 0.01, 0.01);
    auto [pair, diag] = solve_global_small(data, 1e-8, 20, 1e-10, 30);

    CHECK(diag.smallness.rho_ok);
    CHECK(diag.smallness.u0_ok);
    CHECK(diag.smallness.m_u == doctest::Approx(0.01).epsilon(1e-6));

    // converged: fixed-point residual small
    CHECK(diag.fixed_point_residual <= 10 * 1e-8);

    // bound shadow: ||(u,P)||_Ep <= 2C ||u0|| with the configured C
    CHECK(diag.final_ep <= 2.0 * data.C_stokes * diag.smallness.u0_norm);

    // Liouville drift of the converged solution
    CHECK(diag.liouville_drift <= 1e-6);

    // outer differences decay geometrically
    for (std::size_t k = 2; k < diag.outer.size(); ++k)
        if (diag.outer[k].diff_norm > 1e-13)
            CHECK(diag.outer[k].diff_ratio <= 0.75);

    // solution satisfies the fixed-point property under one more Phi
    InnerStats st;
    auto again = phi_map(pair, data, 1e-10, 30, &st, &pair);
    double worst = 0.0;
    for (int i = 0; i < data.time.samples; ++i)
        worst = std::max(worst, lp_norm(again.velocity[i] - pair.velocity[i], 2.0));
    CHECK(worst <= 1e-6 * std::max(1e-300, diag.final_ep));
}

TEST_CASE("zero initial velocity gives the zero solution") {
    GridSpec g(2, 32);
    auto data = small_problem(g, 0.01, 0.01);
    data.u0 = VectorField::zero(g);
    auto [pair, diag] = solve_global_small(data);
    CHECK(ep_norm(pair, data.p, data.mu).total < 1e-12);
    CHECK(diag.outer.size() <= 2);
}

TEST_CASE("smallness flags fail loudly") {
    GridSpec g(2, 32);
    auto data = small_problem(g, 0.01, 0.2); // m_u = 0.2 >> c/(2C)
    CHECK_THROWS_AS(solve_global_small(data), SmallnessViolated);
}

TEST_CASE("monotone dependence on the data") {
    GridSpec g(2, 32);
    auto d1 = small_problem(g, 0.01, 0.01, 31);
    auto d2 = d1;
    d2.u0 = d1.u0 * 0.5;
    auto [p1, g1] = solve_global_small(d1);
    auto [p2, g2] = solve_global_small(d2);
    CHECK(g2.final_ep <= g1.final_ep * (1 + 1e-9));
}

TEST_CASE("contraction factor") {
    GridSpec g(2, 32);
    auto data = small_problem(g, 0.01, 0.01, 37, 21, 0.01);

    Trajectory zero = Trajectory::zero(g, data.time);
    StokesData sd;
    sd.u0 = data.u0;
    sd.time = data.time;
    sd.mu = data.mu;
    Trajectory free = solve_stokes(sd);

    CHECK_THROWS_AS(contraction_factor(data, zero, zero), IdenticalInputs);

    ContractionTerms terms;
    const double factor = contraction_factor(data, zero, free, &terms);
    CHECK(factor <= 0.6);
    CHECK(terms.df0 == 0.0);
    CHECK(std::isfinite(terms.df1 + terms.df2 + terms.df3 + terms.df4 + terms.df5));
    CHECK(std::isfinite(terms.dR1 + terms.dR2 + terms.dR3 + terms.dR4));
}

TEST_CASE("local scheme: small data passes at the requested horizon") {
    GridSpec g(2, 32);
    auto data = small_problem(g, 0.01, 0.005, 41, 41, 0.01);
    auto [pair, diag] = solve_local_large(data, 0.4);
    CHECK(diag.halvings == 0);
    CHECK(diag.horizon == doctest::Approx(0.4));
    CHECK(diag.perturbation_ep <= diag.smallness.ball_radius);
    CHECK(diag.liouville_drift <= 1e-6);
}

TEST_CASE("local scheme: horizon shrinks for large data and matches the heat integral") {
    GridSpec g(2, 32);
    // large single-mode u0: closed-form free decay
    ProblemData data;
    data.rho0 = ScalarField::constant(g, 1.0);
    data.u0 = VectorField::from_function(g, [](const std::array<double, 3>& x) {
        return std::array<double, 3>{std::sin(2.0 * x[1]), 0.0, 0.0};
    });
    data.mu = 1.0;
    data.p = 2.0;
    data.time = {5e-4, 2001}; // [0, 1]
    const BesovIndex idx = BesovIndex::critical_gradient(2, 2.0);
    const double S0 = besov_norm(jacobian(data.u0), idx).total;
    const double lam = data.mu * 4.0; // |k|^2 = 4

    const double Th1 = admissible_horizon(data, 1.0);
    const double predicted1 = -std::log(1.0 - lam * data.c / (2.0 * S0)) / lam;
    CHECK(Th1 == doctest::Approx(predicted1).epsilon(1e-3));

    ProblemData dbl = data;
    dbl.u0 = data.u0 * 2.0;
    const double Th2 = admissible_horizon(dbl, 1.0);
    const double predicted2 = -std::log(1.0 - lam * data.c / (4.0 * S0)) / lam;
    CHECK(Th2 == doctest::Approx(predicted2).epsilon(1e-3));

    // horizon halves within a factor two when the datum doubles
    const double ratio = Th1 / Th2;
    CHECK(ratio >= 1.0);
    CHECK(ratio <= 4.0);
}

TEST_CASE("horizon collapse") {
    GridSpec g(2, 32);
    ProblemData data;
    data.rho0 = ScalarField::constant(g, 1.0);
    data.u0 = VectorField::from_function(g, [](const std::array<double, 3>& x) {
        return std::array<double, 3>{40.0 * std::sin(x[1]), 0.0, 0.0};
    });
    data.mu = 1.0;
    data.p = 2.0;
    data.time = {0.05, 21};
    CHECK_THROWS_AS(solve_local_large(data, 1.0), HorizonCollapsed);
}
