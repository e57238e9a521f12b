#pragma once

#include "lagns/trajectory.hpp"

namespace lagns {

/// Flow data at a fixed time: displacement d(y) = X(t,y) - y, the Jacobian
/// DX = Id + D d, its pointwise inverse A, adjugate, and determinant.
template <typename S> struct FlowStateT {
    double t = 0.0;
    VectorFieldT<S> displacement;
    MatrixFieldT<S> DX;
    MatrixFieldT<S> A;
    MatrixFieldT<S> adjDX;
    ScalarFieldT<S> detDX;
};

using FlowState = FlowStateT<double>;

/// The paper's invertibility threshold ||DX - Id||_inf <= 1/2, used verbatim
/// as a hard runtime guard.
inline constexpr double kFlowSmallness = 0.5;

namespace detail {

template <typename S, int N>
using SmallMat = Eigen::Matrix<S, N, N>;

/// Apply a pointwise matrix->matrix map over a matrix field.
template <typename S, int Dim, typename F>
MatrixFieldT<S> pointwise_matrix_map(const MatrixFieldT<S>& M, F&& f) {
    const GridSpec& g = M.grid();
    const std::size_t npts = g.points();
    std::vector<RealArray<S>> out(Dim * Dim, RealArray<S>(static_cast<Eigen::Index>(npts)));
    std::vector<const RealArray<S>*> in;
    for (auto& c : M.components()) in.push_back(&c.values());
    SmallMat<S, Dim> a, b;
    for (std::size_t p = 0; p < npts; ++p) {
        for (int i = 0; i < Dim; ++i)
            for (int j = 0; j < Dim; ++j) a(i, j) = (*in[i * Dim + j])[static_cast<Eigen::Index>(p)];
        b = f(a);
        for (int i = 0; i < Dim; ++i)
            for (int j = 0; j < Dim; ++j) out[i * Dim + j][static_cast<Eigen::Index>(p)] = b(i, j);
    }
    std::vector<ScalarFieldT<S>> comps;
    for (auto& arr : out) comps.push_back(ScalarFieldT<S>::from_physical(g, std::move(arr)));
    return MatrixFieldT<S>(g, std::move(comps));
}

template <typename S, int Dim> SmallMat<S, Dim> adjugate_small(const SmallMat<S, Dim>& m) {
    if constexpr (Dim == 2) {
        SmallMat<S, 2> a;
        a << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
        return a;
    } else {
        SmallMat<S, 3> a;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
                const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
                // adj(M)_{ij} = cofactor(M)_{ji}
                a(i, j) = m(j1, i1) * m(j2, i2) - m(j1, i2) * m(j2, i1);
            }
        return a;
    }
}

template <typename S>
ScalarFieldT<S> pointwise_determinant(const MatrixFieldT<S>& M) {
    const GridSpec& g = M.grid();
    const int n = g.n;
    RealArray<S> out(static_cast<Eigen::Index>(g.points()));
    std::vector<const RealArray<S>*> in;
    for (auto& c : M.components()) in.push_back(&c.values());
    for (std::size_t p = 0; p < g.points(); ++p) {
        const auto at = [&](int i, int j) { return (*in[i * n + j])[static_cast<Eigen::Index>(p)]; };
        if (n == 2)
            out[static_cast<Eigen::Index>(p)] = at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0);
        else
            out[static_cast<Eigen::Index>(p)] =
                at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) -
                at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0)) +
                at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
    }
    return ScalarFieldT<S>::from_physical(g, std::move(out));
}

/// Largest per-axis integer frequency actually present in a spectrum.
template <typename S>
int spectral_support_radius(const ScalarFieldT<S>& f) {
    const GridSpec& g = f.grid();
    const auto& spec = f.spectrum();
    const double cutoff = 1e-15 * std::max(1e-300, static_cast<double>(spec.abs().maxCoeff()));
    int K = 0;
    FreqTable ft(g);
    for (std::size_t flat = 0; flat < g.points(); ++flat) {
        if (std::abs(spec[static_cast<Eigen::Index>(flat)]) <= cutoff) continue;
        auto k = ft.freq(flat);
        for (int a = 0; a < g.n; ++a) K = std::max(K, std::abs(k[a]));
    }
    return std::min(K, g.N / 2 - 1);
}

/// Trigonometric evaluation of a field at arbitrary points (exact for
/// band-limited fields).  Direct Fourier summation over the spectral support.
template <typename S>
RealArray<S> evaluate_at_points(const ScalarFieldT<S>& f,
                                const std::vector<std::array<double, 3>>& pts) {
    using C = std::complex<S>;
    const GridSpec& g = f.grid();
    const double ku = g.k_unit();
    const int K = spectral_support_radius(f);
    const int Nm = 2 * K + 1;
    const Eigen::Index npts = static_cast<Eigen::Index>(pts.size());
    RealArray<S> out(npts);

    if (g.n == 2) {
        Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic> F(Nm, Nm);
        for (int a = 0; a < Nm; ++a)
            for (int b = 0; b < Nm; ++b)
                F(a, b) = f.spectrum()[static_cast<Eigen::Index>(
                    g.flatten({(a - K + g.N) % g.N, (b - K + g.N) % g.N, 0}))];
        Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic> P1(npts, Nm), P2(npts, Nm);
        for (Eigen::Index p = 0; p < npts; ++p) {
            const C s0 = std::polar(S(1), static_cast<S>(ku * pts[p][0]));
            const C s1 = std::polar(S(1), static_cast<S>(ku * pts[p][1]));
            C e0 = std::polar(S(1), static_cast<S>(-K * ku * pts[p][0]));
            C e1 = std::polar(S(1), static_cast<S>(-K * ku * pts[p][1]));
            for (int a = 0; a < Nm; ++a, e0 *= s0, e1 *= s1) {
                P1(p, a) = e0;
                P2(p, a) = e1;
            }
        }
        Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic> G = P1 * F;
        for (Eigen::Index p = 0; p < npts; ++p)
            out[p] = (G.row(p).cwiseProduct(P2.row(p))).sum().real();
        return out;
    }

    // n = 3: nested summation over the support cube with per-axis phases
    std::vector<C> ph0(Nm), ph1(Nm), ph2(Nm);
    for (Eigen::Index p = 0; p < npts; ++p) {
        for (int a = 0; a < g.n; ++a) {
            auto& ph = a == 0 ? ph0 : (a == 1 ? ph1 : ph2);
            const C step = std::polar(S(1), static_cast<S>(ku * pts[p][a]));
            C e = std::polar(S(1), static_cast<S>(-K * ku * pts[p][a]));
            for (int m = 0; m < Nm; ++m, e *= step) ph[m] = e;
        }
        C acc(0, 0);
        for (int a = 0; a < Nm; ++a) {
            C acc1(0, 0);
            for (int b = 0; b < Nm; ++b) {
                C acc2(0, 0);
                for (int c = 0; c < Nm; ++c)
                    acc2 += f.spectrum()[static_cast<Eigen::Index>(g.flatten(
                                {(a - K + g.N) % g.N, (b - K + g.N) % g.N, (c - K + g.N) % g.N}))] *
                            ph2[c];
                acc1 += acc2 * ph1[b];
            }
            acc += acc1 * ph0[a];
        }
        out[p] = acc.real();
    }
    return out;
}

} // namespace detail

/// Adjugate (transpose of the cofactor matrix), pointwise closed form.
/// Satisfies M adj(M) = det(M) Id at every grid point.
template <typename S>
MatrixFieldT<S> adjugate(const MatrixFieldT<S>& M) {
    const int n = M.grid().n;
    if (n == 2)
        return detail::pointwise_matrix_map<S, 2>(
            M, [](const detail::SmallMat<S, 2>& m) { return detail::adjugate_small<S, 2>(m); });
    if (n == 3)
        return detail::pointwise_matrix_map<S, 3>(
            M, [](const detail::SmallMat<S, 3>& m) { return detail::adjugate_small<S, 3>(m); });
    throw UnsupportedDimension("adjugate: n must be 2 or 3");
}

/// Build the algebraic members of a flow state from a displacement field.
template <typename S>
FlowStateT<S> flow_state_from_displacement(double t, const VectorFieldT<S>& d) {
    FlowStateT<S> fs;
    fs.t = t;
    fs.displacement = d;
    const GridSpec& g = d.grid();
    fs.DX = MatrixFieldT<S>::identity(g) + jacobian(d);
    const double smallness = matrix_sup_norm(fs.DX - MatrixFieldT<S>::identity(g));
    if (smallness > kFlowSmallness)
        throw SmallnessViolated("flow state: ||DX - Id||_inf = " + std::to_string(smallness) +
                                " exceeds 1/2");
    const int n = g.n;
    if (n == 2)
        fs.A = detail::pointwise_matrix_map<S, 2>(
            fs.DX, [](const detail::SmallMat<S, 2>& m) { return detail::SmallMat<S, 2>(m.inverse()); });
    else
        fs.A = detail::pointwise_matrix_map<S, 3>(
            fs.DX, [](const detail::SmallMat<S, 3>& m) { return detail::SmallMat<S, 3>(m.inverse()); });
    fs.adjDX = adjugate(fs.DX);
    fs.detDX = detail::pointwise_determinant(fs.DX);
    return fs;
}

/// Flow of a Lagrangian velocity: X(t,y) = y + int_0^t v(tau,y) dtau by
/// trapezoid over the stored samples (partial last interval interpolated).
template <typename S>
FlowStateT<S> flow_from_lagrangian_velocity(const TrajectoryT<S>& traj, double t) {
    traj.validate();
    const TimeGrid& tg = traj.time;
    if (t < -1e-12 || t > tg.horizon() + 1e-12)
        throw ValidationError("flow_from_lagrangian_velocity: t outside trajectory span");
    const GridSpec& g = traj.grid();
    VectorFieldT<S> d = VectorFieldT<S>::zero(g);
    int i = 0;
    while (i + 1 < tg.samples && tg.t(i + 1) <= t + 1e-12) {
        d = d + (traj.velocity[i] + traj.velocity[i + 1]) * static_cast<S>(0.5 * tg.dt);
        ++i;
    }
    const double rem = t - tg.t(i);
    if (rem > 1e-12 && i + 1 < tg.samples) {
        const double frac = rem / tg.dt;
        // trapezoid over [t_i, t] with v(t) linearly interpolated
        VectorFieldT<S> vt =
            traj.velocity[i] * static_cast<S>(1.0 - frac) + traj.velocity[i + 1] * static_cast<S>(frac);
        d = d + (traj.velocity[i] + vt) * static_cast<S>(0.5 * rem);
    }
    return flow_state_from_displacement(t, d);
}

/// Truncated Neumann series inverse of DX = Id + C with residual report.
template <typename S> struct NeumannInverse {
    MatrixFieldT<S> A;
    double residual = 0.0; ///< ||DX A - Id||_inf
};

template <typename S>
NeumannInverse<S> inverse_jacobian_neumann(const MatrixFieldT<S>& DX, int kmax) {
    const GridSpec& g = DX.grid();
    const MatrixFieldT<S> I = MatrixFieldT<S>::identity(g);
    const MatrixFieldT<S> C = DX - I;
    const double cnorm = matrix_sup_norm(C);
    if (cnorm >= 1.0)
        throw Divergent("inverse_jacobian_neumann: ||C||_inf = " + std::to_string(cnorm) +
                        " >= 1");
    MatrixFieldT<S> sum = I;
    MatrixFieldT<S> power = I;
    for (int k = 1; k <= kmax; ++k) {
        power = multiply(power, C);
        sum = (k % 2 == 1) ? sum - power : sum + power;
    }
    NeumannInverse<S> out;
    out.residual = matrix_sup_norm(multiply(DX, sum) - I);
    out.A = std::move(sum);
    return out;
}

/// ||Id - adj(Id+C) - (C - Tr C Id)||_inf.  Zero for n=2; exactly quadratic
/// in C for n=3 (checked behaviorally through lambda^2 homogeneity).
template <typename S>
double adjugate_expansion_residual(const MatrixFieldT<S>& C) {
    const GridSpec& g = C.grid();
    const MatrixFieldT<S> I = MatrixFieldT<S>::identity(g);
    MatrixFieldT<S> linear = C;
    const ScalarFieldT<S> tr = trace(C);
    std::vector<ScalarFieldT<S>> comps;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            comps.push_back(i == j ? C(i, j) - tr : C(i, j));
    linear = MatrixFieldT<S>(g, std::move(comps));
    return matrix_sup_norm(I - adjugate(I + C) - linear);
}

/// || div((Id-A) w) - Dw : (Id-A) ||_{L2}, the residual of the magic formula.
/// Requires det(A) = 1 within 1e-6 (the volume-preservation hypothesis).
template <typename S>
double magic_divergence_residual(const VectorFieldT<S>& w, const MatrixFieldT<S>& A) {
    const ScalarFieldT<S> detA = detail::pointwise_determinant(A);
    const double drift = static_cast<double>(
        (detA.values() - 1.0).abs().maxCoeff());
    if (drift > 1e-6)
        throw DeterminantNotUnit("magic_divergence_residual: |det A - 1| = " +
                                 std::to_string(drift));
    const MatrixFieldT<S> IdmA = MatrixFieldT<S>::identity(A.grid()) - A;
    const ScalarFieldT<S> lhs = divergence(multiply(IdmA, w));
    const ScalarFieldT<S> rhs = contract(jacobian(w), IdmA);
    return lp_norm(lhs - rhs, 2.0);
}

/// ||det DX(t) - 1||_inf at each stored time.
template <typename S>
std::vector<std::pair<double, double>> liouville_check(const TrajectoryT<S>& traj) {
    traj.validate();
    std::vector<std::pair<double, double>> drift;
    for (int i = 0; i < traj.time.samples; ++i) {
        FlowStateT<S> fs = flow_from_lagrangian_velocity(traj, traj.time.t(i));
        drift.emplace_back(traj.time.t(i),
                           static_cast<double>((fs.detDX.values() - 1.0).abs().maxCoeff()));
    }
    return drift;
}

/// Right-composition with a map: values of f at x + d(x) by trigonometric
/// interpolation.  d must stay well inside one period.
template <typename S>
ScalarFieldT<S> compose(const ScalarFieldT<S>& f, const VectorFieldT<S>& d) {
    const GridSpec& g = f.grid();
    for (int a = 0; a < g.n; ++a)
        if (sup_norm(d[a]) > g.L / 4.0)
            throw DisplacementTooLarge("compose: displacement exceeds L/4");
    std::vector<std::array<double, 3>> pts(g.points());
    for (std::size_t p = 0; p < g.points(); ++p) {
        pts[p] = g.point(p);
        for (int a = 0; a < g.n; ++a)
            pts[p][a] += static_cast<double>(d[a].values()[static_cast<Eigen::Index>(p)]);
    }
    return ScalarFieldT<S>::from_physical(g, detail::evaluate_at_points(f, pts));
}

template <typename S>
VectorFieldT<S> compose(const VectorFieldT<S>& f, const VectorFieldT<S>& d) {
    std::vector<ScalarFieldT<S>> c;
    for (auto& comp : f.components()) c.push_back(compose(comp, d));
    return VectorFieldT<S>(f.grid(), std::move(c));
}

/// Inverse flow displacements Y(t_i, x) - x at the requested sample indices,
/// from one RK4 integration of  v(t, Y) + DX(t, Y) dY/dt = 0.
template <typename S>
std::vector<VectorFieldT<S>> inverse_flow_sequence(const TrajectoryT<S>& traj,
                                                   const std::vector<int>& capture) {
    traj.validate();
    const GridSpec& g = traj.grid();
    const TimeGrid& tg = traj.time;
    const int n = g.n;
    for (int idx : capture)
        if (idx < 0 || idx >= tg.samples)
            throw ValidationError("inverse_flow: capture index outside trajectory");
    const int last = capture.empty() ? 0 : *std::max_element(capture.begin(), capture.end());

    // G(t) = -(A v)(t, .) with A from the running Jacobian integral
    MatrixFieldT<S> C = MatrixFieldT<S>::zero(g);
    auto makeG = [&](const MatrixFieldT<S>& Cnow, int i) {
        MatrixFieldT<S> DX = MatrixFieldT<S>::identity(g) + Cnow;
        if (matrix_sup_norm(Cnow) > kFlowSmallness)
            throw SmallnessViolated("inverse_flow: ||DX - Id||_inf exceeds 1/2");
        MatrixFieldT<S> A =
            n == 2 ? detail::pointwise_matrix_map<S, 2>(
                         DX, [](const detail::SmallMat<S, 2>& m) { return detail::SmallMat<S, 2>(m.inverse()); })
                   : detail::pointwise_matrix_map<S, 3>(
                         DX, [](const detail::SmallMat<S, 3>& m) { return detail::SmallMat<S, 3>(m.inverse()); });
        return multiply(A, traj.velocity[i]) * S(-1);
    };

    std::vector<std::array<double, 3>> Y(g.points());
    for (std::size_t p = 0; p < g.points(); ++p) Y[p] = g.point(p);

    auto displacement_field = [&](double t) {
        std::vector<ScalarFieldT<S>> comps;
        for (int a = 0; a < n; ++a) {
            detail::RealArray<S> arr(static_cast<Eigen::Index>(g.points()));
            for (std::size_t p = 0; p < g.points(); ++p)
                arr[static_cast<Eigen::Index>(p)] =
                    static_cast<S>(Y[p][a] - g.point(p)[a]);
            comps.push_back(ScalarFieldT<S>::from_physical(g, std::move(arr)));
        }
        (void)t;
        return VectorFieldT<S>(g, std::move(comps));
    };

    std::vector<VectorFieldT<S>> out(capture.size());
    auto capture_if_needed = [&](int i, double t) {
        for (std::size_t c = 0; c < capture.size(); ++c)
            if (capture[c] == i) out[c] = displacement_field(t);
    };
    capture_if_needed(0, 0.0);

    VectorFieldT<S> G0 = makeG(C, 0);
    const double h = tg.dt;
    for (int i = 0; i < last; ++i) {
        MatrixFieldT<S> Cnext = C + (jacobian(traj.velocity[i]) + jacobian(traj.velocity[i + 1])) *
                                        static_cast<S>(0.5 * h);
        VectorFieldT<S> G1 = makeG(Cnext, i + 1);
        VectorFieldT<S> Gm = (G0 + G1) * S(0.5);

        auto eval = [&](const VectorFieldT<S>& Gf, const std::vector<std::array<double, 3>>& pos) {
            std::vector<detail::RealArray<S>> vals;
            for (int a = 0; a < n; ++a) vals.push_back(detail::evaluate_at_points(Gf[a], pos));
            return vals;
        };
        auto shifted = [&](const std::vector<detail::RealArray<S>>& k, double fac) {
            std::vector<std::array<double, 3>> pos = Y;
            for (std::size_t p = 0; p < pos.size(); ++p)
                for (int a = 0; a < n; ++a)
                    pos[p][a] += fac * static_cast<double>(k[a][static_cast<Eigen::Index>(p)]);
            return pos;
        };

        auto k1 = eval(G0, Y);
        auto k2 = eval(Gm, shifted(k1, 0.5 * h));
        auto k3 = eval(Gm, shifted(k2, 0.5 * h));
        auto k4 = eval(G1, shifted(k3, h));
        for (std::size_t p = 0; p < Y.size(); ++p)
            for (int a = 0; a < n; ++a)
                Y[p][a] += h / 6.0 *
                           static_cast<double>(k1[a][static_cast<Eigen::Index>(p)] +
                                               2 * k2[a][static_cast<Eigen::Index>(p)] +
                                               2 * k3[a][static_cast<Eigen::Index>(p)] +
                                               k4[a][static_cast<Eigen::Index>(p)]);
        C = std::move(Cnext);
        G0 = std::move(G1);
        capture_if_needed(i + 1, tg.t(i + 1));
    }
    return out;
}

/// Inverse flow displacement Y(t,.) - x at one time (t snapped to the grid).
template <typename S>
VectorFieldT<S> inverse_flow(const TrajectoryT<S>& traj, double t) {
    const int i = static_cast<int>(std::llround(t / traj.time.dt));
    if (std::abs(traj.time.t(i) - t) > 1e-9 * std::max(1.0, t))
        throw ValidationError("inverse_flow: t must lie on the trajectory time grid");
    return inverse_flow_sequence(traj, {i})[0];
}

} // namespace lagns
