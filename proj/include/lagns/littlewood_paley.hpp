#pragma once

#include <optional>

#include "lagns/random.hpp"
#include "lagns/trajectory.hpp"

namespace lagns {

/// Besov regularity/integrability pair for B^s_{p,1} (third index fixed to 1).
struct BesovIndex {
    double s = 0.0;
    double p = 2.0;

    void validate() const {
        if (std::isnan(s) || p < 1.0)
            throw ValidationError("BesovIndex: need p in [1, inf]");
    }

    /// Critical velocity regularity s = n/p - 1.
    static BesovIndex critical_velocity(int n, double p) { return {n / p - 1.0, p}; }
    /// Critical gradient regularity s = n/p.
    static BesovIndex critical_gradient(int n, double p) { return {n / p, p}; }
};

/// Dyadic cutoff family.  Sharp annuli make single-mode examples exact; the
/// smooth variant uses a C-infinity transition over one octave.
enum class ShellFamily { Sharp, Smooth };

struct ShellRange {
    int j_min = 0;
    int j_max = 0;
};

/// Shells resolvable on a grid: j_min = 0 is the lowest nonzero lattice
/// frequency, j_max stays below the 2/3 dealiasing cutoff.
inline ShellRange resolvable_shells(const GridSpec& g) {
    return {0, static_cast<int>(std::floor(std::log2(g.N / 3.0)))};
}

namespace detail {

inline double smooth_step(double x) {
    // C-infinity glue: 0 for x<=0, 1 for x>=1
    auto phi = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
    const double a = phi(x), b = phi(1.0 - x);
    return a / (a + b);
}

/// Shell weight for |k| (lattice units): sharp indicator of [2^j, 2^{j+1}),
/// or the smooth telescoping difference eta(|k|/2^j) - eta(|k|/2^{j-1}).
inline double shell_weight(double kabs, int j, ShellFamily family) {
    const double lo = std::ldexp(1.0, j), hi = 2.0 * lo;
    if (family == ShellFamily::Sharp) return (kabs >= lo && kabs < hi) ? 1.0 : 0.0;
    auto eta = [](double r) { return 1.0 - smooth_step(r - 1.0); }; // 1 on r<=1, 0 on r>=2
    return eta(kabs / lo) - eta(2.0 * kabs / lo);
}

} // namespace detail

/// Restriction of u to the j-th dyadic annulus (lattice units of 2*pi/L).
template <typename S>
ScalarFieldT<S> dyadic_block(const ScalarFieldT<S>& u, int j,
                             ShellFamily family = ShellFamily::Sharp) {
    const GridSpec& g = u.grid();
    const ShellRange r = resolvable_shells(g);
    if (j < r.j_min || j > r.j_max)
        throw ShellOutOfRange("dyadic_block: shell " + std::to_string(j) +
                              " unresolvable at N = " + std::to_string(g.N));
    FreqTable ft(g);
    detail::ComplexArray<S> out(u.spectrum().size());
    for (std::size_t flat = 0; flat < g.points(); ++flat) {
        const double kabs = std::sqrt(static_cast<double>(ft.freq_norm2(flat)));
        out[static_cast<Eigen::Index>(flat)] =
            u.spectrum()[static_cast<Eigen::Index>(flat)] *
            static_cast<S>(detail::shell_weight(kabs, j, family));
    }
    return ScalarFieldT<S>::from_spectral(g, std::move(out));
}

template <typename S>
VectorFieldT<S> dyadic_block(const VectorFieldT<S>& u, int j,
                             ShellFamily family = ShellFamily::Sharp) {
    std::vector<ScalarFieldT<S>> c;
    for (auto& f : u.components()) c.push_back(dyadic_block(f, j, family));
    return VectorFieldT<S>(u.grid(), std::move(c));
}

/// Homogeneous Besov norm report: per-shell weighted contributions, their
/// l1 total, and what the grid could not resolve.
struct BesovReport {
    BesovIndex idx;
    int j_min = 0, j_max = 0;
    std::vector<double> shell_contribution; ///< 2^{js} ||Delta_j u||_{L_p}
    double total = 0.0;
    double zero_mode = 0.0;       ///< |mean| of the input, ignored by the norm
    double truncated_tail = 0.0;  ///< L2 mass beyond the resolvable shells
};

/// Besov norm over an arbitrary component stack (vector/matrix/tensor fields
/// use the pointwise Euclidean magnitude).
template <typename S>
BesovReport besov_norm_components(const GridSpec& g,
                                  const std::vector<const ScalarFieldT<S>*>& comps,
                                  BesovIndex idx, ShellFamily family = ShellFamily::Sharp) {
    idx.validate();
    const ShellRange r = resolvable_shells(g);
    BesovReport rep;
    rep.idx = idx;
    rep.j_min = r.j_min;
    rep.j_max = r.j_max;

    const bool l2_fast = idx.p == 2.0 && family == ShellFamily::Sharp;
    if (l2_fast) {
        // single Parseval pass over the cached shell table
        const auto& shell = detail::grid_tables(g).shell;
        const int nshell = r.j_max - r.j_min + 1;
        std::vector<double> bins(nshell, 0.0);
        double zero2 = 0.0, tail2 = 0.0;
        for (auto* c : comps) {
            const auto& sp = c->spectrum();
            for (std::size_t flat = 0; flat < g.points(); ++flat) {
                const double m = std::norm(sp[static_cast<Eigen::Index>(flat)]);
                const int s = shell[flat];
                if (s >= 0) bins[s] += m;
                else if (s == -1) zero2 += m;
                else tail2 += m;
            }
        }
        rep.zero_mode = std::sqrt(zero2);
        rep.truncated_tail = std::sqrt(g.volume() * tail2);
        for (int j = r.j_min; j <= r.j_max; ++j) {
            rep.shell_contribution.push_back(std::sqrt(g.volume() * bins[j - r.j_min]) *
                                             std::pow(2.0, idx.s * j));
            rep.total += rep.shell_contribution.back();
        }
        return rep;
    }

    FreqTable ft(g);
    double zero2 = 0.0, tail2 = 0.0;
    const double khi = std::ldexp(1.0, r.j_max + 1);
    for (auto* c : comps) {
        zero2 += std::norm(c->spectrum()[0]);
        for (std::size_t flat = 1; flat < g.points(); ++flat) {
            const double kabs = std::sqrt(static_cast<double>(ft.freq_norm2(flat)));
            if (kabs >= khi)
                tail2 += std::norm(c->spectrum()[static_cast<Eigen::Index>(flat)]);
        }
    }
    rep.zero_mode = std::sqrt(zero2);
    rep.truncated_tail = std::sqrt(g.volume() * tail2);

    for (int j = r.j_min; j <= r.j_max; ++j) {
        std::vector<ScalarFieldT<S>> blocks;
        std::vector<const ScalarFieldT<S>*> ptrs;
        for (auto* c : comps) blocks.push_back(dyadic_block(*c, j, family));
        for (auto& b : blocks) ptrs.push_back(&b);
        const double nrm = lp_norm_values(g, magnitude_values(ptrs), idx.p);
        rep.shell_contribution.push_back(nrm * std::pow(2.0, idx.s * j));
        rep.total += rep.shell_contribution.back();
    }
    return rep;
}

/// Besov total of a derivative-weighted field directly from spectra:
/// the L2 shell mass of |k_phys|^weight * u.  Sharp cutoffs, p = 2 only.
/// weight 1 covers gradients/Jacobians, 2 the full Hessian stack.
template <typename S>
double besov_l2_weighted(const GridSpec& g, const std::vector<const detail::ComplexArray<S>*>& spectra,
                         double s_index, int weight) {
    const auto& T = detail::grid_tables(g);
    const int nshell = T.j_max - T.j_min + 1;
    std::vector<double> bins(nshell, 0.0);
    const double ku2 = g.k_unit() * g.k_unit();
    for (auto* sp : spectra) {
        for (std::size_t flat = 0; flat < g.points(); ++flat) {
            const int sh = T.shell[flat];
            if (sh < 0) continue;
            double m = std::norm((*sp)[static_cast<Eigen::Index>(flat)]);
            for (int w = 0; w < weight; ++w) m *= ku2 * T.k2[flat];
            bins[sh] += m;
        }
    }
    double total = 0.0;
    for (int j = T.j_min; j <= T.j_max; ++j)
        total += std::sqrt(g.volume() * bins[j - T.j_min]) * std::pow(2.0, s_index * j);
    return total;
}

template <typename S>
BesovReport besov_norm(const ScalarFieldT<S>& u, BesovIndex idx,
                       ShellFamily family = ShellFamily::Sharp) {
    return besov_norm_components<S>(u.grid(), {&u}, idx, family);
}

template <typename S>
BesovReport besov_norm(const VectorFieldT<S>& u, BesovIndex idx,
                       ShellFamily family = ShellFamily::Sharp) {
    std::vector<const ScalarFieldT<S>*> c;
    for (auto& f : u.components()) c.push_back(&f);
    return besov_norm_components<S>(u.grid(), c, idx, family);
}

template <typename S>
BesovReport besov_norm(const MatrixFieldT<S>& u, BesovIndex idx,
                       ShellFamily family = ShellFamily::Sharp) {
    std::vector<const ScalarFieldT<S>*> c;
    for (auto& f : u.components()) c.push_back(&f);
    return besov_norm_components<S>(u.grid(), c, idx, family);
}

// ---------------------------------------------------------------------------
// E_p norm
// ---------------------------------------------------------------------------

/// Solution-space norm on a trajectory:
///   sup_t ||u||_{B^{n/p-1}} + int ( ||d_t u|| + mu ||D^2 u|| + ||grad P|| ) dt.
struct EpNormReport {
    double sup_velocity = 0.0;
    double int_time_derivative = 0.0;
    double int_viscous = 0.0;
    double int_pressure = 0.0;
    double total = 0.0;
};

template <typename S>
EpNormReport ep_norm(const TrajectoryT<S>& traj, double p, double mu,
                     ShellFamily family = ShellFamily::Sharp) {
    traj.validate();
    if (traj.time.samples < 2) throw EmptyTrajectory("ep_norm: need at least 2 time samples");
    const GridSpec& g = traj.grid();
    const BesovIndex idx = BesovIndex::critical_velocity(g.n, p);

    if (p == 2.0 && family == ShellFamily::Sharp) {
        // spectra-only pass: the Hessian stack is the |k|^2-weighted velocity
        EpNormReport rep;
        const int m = traj.time.samples;
        const double dt = traj.time.dt;
        std::vector<double> dtu(m), visc(m), pres(m, 0.0);
        for (int i = 0; i < m; ++i) {
            std::vector<const detail::ComplexArray<S>*> u;
            for (auto& c : traj.velocity[i].components()) u.push_back(&c.spectrum());
            rep.sup_velocity = std::max(rep.sup_velocity,
                                        besov_l2_weighted<S>(g, u, idx.s, 0));
            visc[i] = mu * besov_l2_weighted<S>(g, u, idx.s, 2);

            std::vector<detail::ComplexArray<S>> dts(g.n);
            for (int a = 0; a < g.n; ++a) {
                auto sp = [&](int k) -> const detail::ComplexArray<S>& {
                    return traj.velocity[k][a].spectrum();
                };
                if (m == 2) dts[a] = (sp(1) - sp(0)) / dt;
                else if (i == 0)
                    dts[a] = (S(-1.5) * sp(0) + S(2) * sp(1) - S(0.5) * sp(2)) / dt;
                else if (i == m - 1)
                    dts[a] = (S(1.5) * sp(m - 1) - S(2) * sp(m - 2) + S(0.5) * sp(m - 3)) / dt;
                else
                    dts[a] = (sp(i + 1) - sp(i - 1)) * (S(0.5) / dt);
            }
            std::vector<const detail::ComplexArray<S>*> dtp;
            for (auto& a : dts) dtp.push_back(&a);
            dtu[i] = besov_l2_weighted<S>(g, dtp, idx.s, 0);

            if (!traj.grad_pressure.empty()) {
                std::vector<const detail::ComplexArray<S>*> gp;
                for (auto& c : traj.grad_pressure[i].components()) gp.push_back(&c.spectrum());
                pres[i] = besov_l2_weighted<S>(g, gp, idx.s, 0);
            }
        }
        rep.int_time_derivative = time_integral(dtu, traj.time);
        rep.int_viscous = time_integral(visc, traj.time);
        rep.int_pressure = time_integral(pres, traj.time);
        rep.total =
            rep.sup_velocity + rep.int_time_derivative + rep.int_viscous + rep.int_pressure;
        return rep;
    }

    EpNormReport rep;
    std::vector<double> dtu(traj.time.samples), visc(traj.time.samples), pres(traj.time.samples, 0.0);
    for (int i = 0; i < traj.time.samples; ++i) {
        rep.sup_velocity = std::max(rep.sup_velocity, besov_norm(traj.velocity[i], idx, family).total);
        dtu[i] = besov_norm(time_derivative(traj.velocity, traj.time, i), idx, family).total;

        std::vector<MatrixFieldT<S>> hess;
        std::vector<const ScalarFieldT<S>*> comps;
        for (int a = 0; a < g.n; ++a) hess.push_back(hessian(traj.velocity[i][a]));
        for (auto& H : hess)
            for (auto& c : H.components()) comps.push_back(&c);
        visc[i] = mu * besov_norm_components<S>(g, comps, idx, family).total;

        if (!traj.grad_pressure.empty())
            pres[i] = besov_norm(traj.grad_pressure[i], idx, family).total;
    }
    rep.int_time_derivative = time_integral(dtu, traj.time);
    rep.int_viscous = time_integral(visc, traj.time);
    rep.int_pressure = time_integral(pres, traj.time);
    rep.total = rep.sup_velocity + rep.int_time_derivative + rep.int_viscous + rep.int_pressure;
    return rep;
}

// ---------------------------------------------------------------------------
// Empirical multiplier-norm estimator and algebra constant
// ---------------------------------------------------------------------------

namespace detail {

/// Random-phase field supported on a single dyadic shell.
template <typename S>
ScalarFieldT<S> random_shell_field(const GridSpec& g, int j, RandomStream& rng) {
    FreqTable ft(g);
    ComplexArray<S> spec = ComplexArray<S>::Zero(static_cast<Eigen::Index>(g.points()));
    const long lo2 = 1L << (2 * j), hi2 = 1L << (2 * j + 2);
    for (std::size_t flat = 1; flat < g.points(); ++flat) {
        const long k2 = ft.freq_norm2(flat);
        if (k2 < lo2 || k2 >= hi2 || ft.on_nyquist(flat)) continue;
        spec[static_cast<Eigen::Index>(flat)] =
            std::complex<S>(static_cast<S>(rng.normal()), static_cast<S>(rng.normal()));
    }
    ComplexArray<S> sym = spec;
    for (std::size_t flat = 1; flat < g.points(); ++flat) {
        auto idx = g.unflatten(flat);
        std::array<int, 3> neg{0, 0, 0};
        for (int a = 0; a < g.n; ++a) neg[a] = (g.N - idx[a]) % g.N;
        sym[static_cast<Eigen::Index>(flat)] =
            S(0.5) * (spec[static_cast<Eigen::Index>(flat)] +
                      std::conj(spec[static_cast<Eigen::Index>(g.flatten(neg))]));
    }
    return ScalarFieldT<S>::from_spectral(g, std::move(sym));
}

/// Random dyadic atom: sum over <= 4 random shells, normalized in B^s_{p,1}.
template <typename S>
ScalarFieldT<S> random_atom(const GridSpec& g, BesovIndex idx, RandomStream& rng,
                            ShellFamily family) {
    const ShellRange r = resolvable_shells(g);
    const int nshells = rng.uniform_int(1, 4);
    ScalarFieldT<S> psi = ScalarFieldT<S>::zero(g);
    for (int s = 0; s < nshells; ++s)
        psi = psi + random_shell_field<S>(g, rng.uniform_int(r.j_min, r.j_max), rng);
    const double nrm = besov_norm(psi, idx, family).total;
    if (nrm > 0) psi = psi * static_cast<S>(1.0 / nrm);
    return psi;
}

} // namespace detail

/// Certified lower bound of the multiplier norm of a: the max of
/// ||psi a||_{B^s_{p,1}} over random normalized dyadic atoms psi.
template <typename S>
double multiplier_norm_lower_bound(const ScalarFieldT<S>& a, BesovIndex idx, int trials,
                                   std::uint64_t seed,
                                   ShellFamily family = ShellFamily::Sharp) {
    if (trials < 1) throw ValidationError("multiplier_norm_lower_bound: trials >= 1");
    RandomStream master(seed);
    double best = 0.0;
    for (int t = 0; t < trials; ++t) {
        RandomStream rng = master.derive(static_cast<std::uint64_t>(t));
        ScalarFieldT<S> psi = detail::random_atom<S>(a.grid(), idx, rng, family);
        best = std::max(best, besov_norm(multiply(psi, a), idx, family).total);
    }
    return best;
}

/// Empirical lower bound on the algebra constant of B^{n/p}_{p,1}:
/// max over sampled pairs of ||uv|| / (||u|| ||v||).
inline double algebra_constant(const GridSpec& g, BesovIndex idx, int samples,
                               std::uint64_t seed, ShellFamily family = ShellFamily::Sharp) {
    if (std::abs(idx.s - g.n / idx.p) > 1e-12)
        throw ValidationError("algebra_constant: requires s = n/p");
    RandomStream master(seed);
    double best = 0.0;
    for (int t = 0; t < samples; ++t) {
        RandomStream r1 = master.derive(2 * static_cast<std::uint64_t>(t));
        RandomStream r2 = master.derive(2 * static_cast<std::uint64_t>(t) + 1);
        auto u = detail::random_atom<double>(g, idx, r1, family);
        auto v = detail::random_atom<double>(g, idx, r2, family);
        const double nu = besov_norm(u, idx, family).total;
        const double nv = besov_norm(v, idx, family).total;
        if (nu == 0.0 || nv == 0.0) continue;
        best = std::max(best, besov_norm(multiply(u, v), idx, family).total / (nu * nv));
    }
    return best;
}

} // namespace lagns
