#include "lagns/eulerian.hpp"

namespace lagns {

namespace {

/// Dealiased u . grad s.
ScalarField advection_term(const VectorField& u, const ScalarField& s) {
    auto gs = gradient(s);
    ScalarField acc = multiply(u[0], gs[0]);
    for (int a = 1; a < u.grid().n; ++a) acc = acc + multiply(u[a], gs[a]);
    return acc;
}

/// Dealiased (u . grad) v, component b = sum_a u_a d_a v^b.
VectorField convection_term(const VectorField& u, const VectorField& v) {
    std::vector<ScalarField> comps;
    for (int b = 0; b < u.grid().n; ++b) comps.push_back(advection_term(u, v[b]));
    return VectorField(u.grid(), std::move(comps));
}

} // namespace

std::vector<EulerianSnapshot> to_eulerian(const Trajectory& traj, const ScalarField& rho0,
                                          std::vector<int> sample_indices) {
    traj.validate();
    if (!rho0.valid() || rho0.grid() != traj.grid())
        throw ValidationError("to_eulerian: rho0 grid mismatch");
    if (sample_indices.empty())
        for (int i = 0; i < traj.time.samples; ++i) sample_indices.push_back(i);

    // one integration pass of the inverse-flow ODE, captured where needed
    std::vector<VectorField> Y = inverse_flow_sequence(traj, sample_indices);

    // flow algebra walked once; A is picked up at the captured indices
    const GridSpec& g = traj.grid();
    const int last = *std::max_element(sample_indices.begin(), sample_indices.end());
    std::vector<MatrixField> At(sample_indices.size());
    FlowSequence flow(traj);
    flow.walk(last, [&](const FlowSequence::Sample& s) {
        for (std::size_t c = 0; c < sample_indices.size(); ++c) {
            if (sample_indices[c] != s.index) continue;
            std::vector<ScalarField> comps;
            for (int i = 0; i < g.n; ++i)
                for (int j = 0; j < g.n; ++j)
                    comps.push_back(ScalarField::from_spectral(g, Eigen::ArrayXcd(s.A[j * g.n + i])));
            At[c] = MatrixField(g, std::move(comps)); // A^T
        }
    });

    const bool has_p = !traj.grad_pressure.empty();
    std::vector<EulerianSnapshot> snaps;
    for (std::size_t c = 0; c < sample_indices.size(); ++c) {
        const int i = sample_indices[c];
        EulerianSnapshot s;
        s.t = traj.time.t(i);
        s.rho = compose(rho0, Y[c]);
        s.u = compose(traj.velocity[i], Y[c]);
        if (has_p) {
            VectorField gp = multiply(At[c], traj.grad_pressure[i]);
            s.grad_p = compose(gp, Y[c]);
        } else {
            s.grad_p = VectorField::zero(g);
        }
        MatrixField gu = multiply(At[c], grad_vector(traj.velocity[i]));
        std::vector<ScalarField> comps;
        for (auto& e : gu.components()) comps.push_back(compose(e, Y[c]));
        s.grad_u = MatrixField(g, std::move(comps));
        snaps.push_back(std::move(s));
    }
    return snaps;
}

NseResiduals nse_residual(const std::vector<EulerianSnapshot>& snaps, double mu) {
    if (snaps.size() < 3) throw TooFewSnapshots("nse_residual: need at least 3 snapshots");
    NseResiduals out;
    for (std::size_t i = 1; i + 1 < snaps.size(); ++i) {
        const auto& prev = snaps[i - 1];
        const auto& cur = snaps[i];
        const auto& next = snaps[i + 1];
        const double dt2 = next.t - prev.t;

        const ScalarField dtrho = (next.rho - prev.rho) * (1.0 / dt2);
        const ScalarField adv = advection_term(cur.u, cur.rho);
        const double mass_scale = std::max({lp_norm(dtrho, 2.0), lp_norm(adv, 2.0), 1e-300});
        out.mass = std::max(out.mass, lp_norm(dtrho + adv, 2.0) / mass_scale);

        const VectorField dtu = (next.u - prev.u) * (1.0 / dt2);
        const VectorField conv = convection_term(cur.u, cur.u);
        const VectorField inertial = multiply(cur.rho, dtu + conv);
        const VectorField visc = laplacian(cur.u) * mu;
        const VectorField res = inertial - visc + cur.grad_p;
        const double mom_scale = std::max({lp_norm(inertial, 2.0), lp_norm(visc, 2.0),
                                           lp_norm(cur.grad_p, 2.0), 1e-300});
        out.momentum = std::max(out.momentum, lp_norm(res, 2.0) / mom_scale);

        const double gu = lp_norm(cur.grad_u, 2.0);
        out.divergence =
            std::max(out.divergence, lp_norm(divergence(cur.u), 2.0) / std::max(gu, 1e-300));
    }
    return out;
}

std::vector<EulerianSnapshot> reference_eulerian_solve(const ScalarField& rho0,
                                                       const VectorField& u0, double mu,
                                                       double T, double dt,
                                                       int snapshot_stride) {
    if (!rho0.valid() || !u0.valid() || rho0.grid() != u0.grid())
        throw ValidationError("reference_eulerian_solve: bad fields");
    const GridSpec& g = rho0.grid();
    const double contrast = (rho0.values() - 1.0).abs().maxCoeff();
    if (contrast > 0.2)
        throw DensityContrastTooLarge("reference solver: ||rho0 - 1||_inf = " +
                                      std::to_string(contrast) + " > 0.2");
    const int m = static_cast<int>(std::lround(T / dt)) + 1;
    if (snapshot_stride < 1) snapshot_stride = 1;

    FreqTable ft(g);
    const double ku2 = g.k_unit() * g.k_unit();

    ScalarField rho = rho0;
    VectorField u = leray_project(u0);
    VectorField gradp = VectorField::zero(g);

    std::vector<EulerianSnapshot> snaps;
    auto record = [&](int i) {
        EulerianSnapshot s;
        s.t = i * dt;
        s.rho = rho;
        s.u = u;
        s.grad_p = gradp;
        s.grad_u = grad_vector(u);
        snaps.push_back(std::move(s));
    };
    record(0);

    for (int i = 1; i < m; ++i) {
        // semi-Lagrangian departure values (first order in time)
        VectorField back = u * (-dt);
        ScalarField rho_new = compose(rho, back);
        VectorField u_tilde = compose(u, back);

        // implicit constant-coefficient viscosity
        std::vector<Eigen::ArrayXcd> us;
        for (auto& cmp : u_tilde.components()) us.push_back(cmp.spectrum());
        for (std::size_t flat = 0; flat < g.points(); ++flat) {
            const double denom = 1.0 + dt * mu * ku2 * static_cast<double>(ft.freq_norm2(flat));
            for (int a = 0; a < g.n; ++a) us[a][static_cast<Eigen::Index>(flat)] /= denom;
        }
        std::vector<ScalarField> ustar_c;
        for (auto& sarr : us) ustar_c.push_back(ScalarField::from_spectral(g, std::move(sarr)));
        VectorField ustar(g, std::move(ustar_c));

        // one density-correction sweep for the variable coefficient
        ScalarField inv_rho_m1 = ScalarField::from_physical(
            g, Eigen::ArrayXd(1.0 / rho_new.values() - 1.0));
        VectorField ustar2 = ustar + multiply(inv_rho_m1, laplacian(ustar)) * (dt * mu);

        // constant-density pressure projection
        VectorField unew = leray_project(ustar2);
        gradp = (ustar2 - unew) * (1.0 / dt);
        u = std::move(unew);
        rho = std::move(rho_new);

        if (i % snapshot_stride == 0 || i == m - 1) record(i);
    }
    return snaps;
}

ScalarField sharp_disc(const GridSpec& g, const DiscDomain& omega0) {
    return ScalarField::from_function(g, [&](const std::array<double, 3>& x) {
        double r2 = 0.0;
        for (int a = 0; a < 2; ++a) {
            double d = x[a] - omega0.center[a];
            // nearest periodic image
            d -= g.L * std::round(d / g.L);
            r2 += d * d;
        }
        return r2 <= omega0.radius * omega0.radius ? 1.0 : 0.0;
    });
}

ScalarField mollified_disc(const GridSpec& g, const DiscDomain& omega0, double width) {
    ScalarField sharp = sharp_disc(g, omega0);
    FreqTable ft(g);
    Eigen::ArrayXcd spec = sharp.spectrum();
    const double k2fac = 0.5 * width * width * g.k_unit() * g.k_unit();
    for (std::size_t flat = 0; flat < g.points(); ++flat)
        spec[static_cast<Eigen::Index>(flat)] *=
            std::exp(-k2fac * static_cast<double>(ft.freq_norm2(flat)));
    return ScalarField::from_spectral(g, std::move(spec));
}

namespace {

double polygon_area(const std::vector<std::array<double, 2>>& pts) {
    double a = 0.0;
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = pts[i];
        const auto& q = pts[(i + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    return 0.5 * std::abs(a);
}

/// Menger curvature of consecutive marker triples.
std::vector<double> discrete_curvature(const std::vector<std::array<double, 2>>& pts) {
    const std::size_t n = pts.size();
    std::vector<double> kappa(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = pts[(i + n - 1) % n];
        const auto& b = pts[i];
        const auto& c = pts[(i + 1) % n];
        const double ab = std::hypot(b[0] - a[0], b[1] - a[1]);
        const double bc = std::hypot(c[0] - b[0], c[1] - b[1]);
        const double ca = std::hypot(a[0] - c[0], a[1] - c[1]);
        const double cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        kappa[i] = 2.0 * cross / std::max(ab * bc * ca, 1e-300);
    }
    return kappa;
}

} // namespace

JumpReport density_jump_experiment(const GridSpec& g, const DiscDomain& omega0, double sigma,
                                   const VectorField& u0, double mu, double T, double dt,
                                   const JumpExperimentOptions& opt) {
    if (g.n != 2)
        throw UnsupportedDimension("density_jump_experiment: marker tracking is 2d");
    if (!(opt.p > g.n - 1.0) || !(opt.p < 2.0 * g.n))
        throw ValidationError("density_jump_experiment: need n-1 < p < 2n");

    JumpReport rep;
    rep.mollify_width = opt.mollify_width_factor * g.spacing();

    ProblemData data;
    data.rho0 = ScalarField::constant(g, 1.0) + mollified_disc(g, omega0, rep.mollify_width) * sigma;
    data.u0 = u0;
    data.mu = mu;
    data.p = opt.p;
    data.c = opt.c;
    data.C_stokes = opt.C_stokes;
    data.mult_trials = opt.mult_trials;
    data.seed = opt.seed;
    data.time = {dt, static_cast<int>(std::lround(T / dt)) + 1};

    auto [pair, diag] = solve_global_small(data);
    rep.diagnostics = std::move(diag);

    // boundary markers advected by the Lagrangian velocity at fixed y:
    // x_m(t) = y_m + int_0^t ubar(tau, y_m) dtau, the literal flow map
    std::vector<std::array<double, 3>> y(static_cast<std::size_t>(opt.markers));
    for (int mk = 0; mk < opt.markers; ++mk) {
        const double th = 2.0 * std::numbers::pi * mk / opt.markers;
        y[mk] = {omega0.center[0] + omega0.radius * std::cos(th),
                 omega0.center[1] + omega0.radius * std::sin(th), 0.0};
    }
    auto eval_velocity = [&](int i) {
        std::array<Eigen::ArrayXd, 2> vals;
        for (int a = 0; a < 2; ++a) vals[a] = detail::evaluate_at_points(pair.velocity[i][a], y);
        return vals;
    };

    std::vector<std::array<double, 2>> pos(y.size());
    for (std::size_t mk = 0; mk < y.size(); ++mk) pos[mk] = {y[mk][0], y[mk][1]};
    const double area0 = polygon_area(pos);
    const std::vector<double> kappa0 = discrete_curvature(pos);

    auto push_metrics = [&](double t) {
        rep.times.push_back(t);
        rep.area_drift.push_back(polygon_area(pos) / area0 - 1.0);
        const auto kap = discrete_curvature(pos);
        double worst = 0.0;
        for (std::size_t i = 0; i < kap.size(); ++i)
            worst = std::max(worst, std::abs(kap[i] - kappa0[i]));
        rep.curvature_change.push_back(worst);
    };
    auto push_frame = [&](double t) {
        rep.frames.push_back(pos);
        rep.frame_times.push_back(t);
    };
    push_metrics(0.0);
    push_frame(0.0);

    auto vprev = eval_velocity(0);
    for (int i = 1; i < data.time.samples; ++i) {
        auto vcur = eval_velocity(i);
        for (std::size_t mk = 0; mk < pos.size(); ++mk)
            for (int a = 0; a < 2; ++a)
                pos[mk][a] += 0.5 * dt *
                              (vprev[a][static_cast<Eigen::Index>(mk)] +
                               vcur[a][static_cast<Eigen::Index>(mk)]);
        vprev = std::move(vcur);
        push_metrics(data.time.t(i));
        if (opt.frame_stride > 0 && i % opt.frame_stride == 0) push_frame(data.time.t(i));
    }
    push_frame(data.time.horizon());

    // multiplier probe uses the sharp indicator
    const BesovIndex idx = BesovIndex::critical_velocity(g.n, opt.p);
    rep.multiplier_bound =
        multiplier_norm_lower_bound(sharp_disc(g, omega0) * sigma, idx, opt.mult_trials, opt.seed);
    return rep;
}

} // namespace lagns
