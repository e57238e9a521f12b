#include "lagns/fixed_point.hpp"

#include <functional>

namespace lagns {

namespace {

using Spectra = std::vector<Eigen::ArrayXcd>;

Spectra component_spectra(const VectorField& v) {
    Spectra s;
    for (auto& c : v.components()) s.push_back(c.spectrum());
    return s;
}

/// Spectra of the Jacobian (Dv)_{ij} = d v^i / d x_j, row-major.
Spectra jacobian_spectra(const GridSpec& g, const Spectra& v) {
    const int n = g.n;
    const double ku = g.k_unit();
    Spectra J(n * n, Eigen::ArrayXcd(static_cast<Eigen::Index>(g.points())));
    for (int j = 0; j < n; ++j) {
        for (std::size_t flat = 0; flat < g.points(); ++flat) {
            auto idx = g.unflatten(flat);
            int k = g.freq_int(idx[j]);
            if (k == -g.N / 2) k = 0;
            const std::complex<double> ik(0.0, k * ku);
            for (int i = 0; i < n; ++i)
                J[i * n + j][static_cast<Eigen::Index>(flat)] =
                    v[i][static_cast<Eigen::Index>(flat)] * ik;
        }
    }
    return J;
}

/// d adj(M)[H] = det(M) ( tr(M^{-1} H) M^{-1} - M^{-1} H M^{-1} ), pointwise.
template <int Dim>
Eigen::Matrix<double, Dim, Dim> adjugate_differential(const Eigen::Matrix<double, Dim, Dim>& M,
                                                      const Eigen::Matrix<double, Dim, Dim>& H) {
    const auto Minv = M.inverse().eval();
    return M.determinant() * ((Minv * H).trace() * Minv - Minv * H * Minv);
}

/// Time-derivative spectra of a sampled vector series at index i.
Spectra time_derivative_spectra(const std::vector<VectorField>& series, const TimeGrid& tg,
                                int i) {
    const int n = series.front().grid().n;
    const int m = static_cast<int>(series.size());
    const double dt = tg.dt;
    Spectra out(n);
    auto sp = [&](int k, int a) { return series[k][a].spectrum(); };
    for (int a = 0; a < n; ++a) {
        if (m == 2)
            out[a] = (sp(1, a) - sp(0, a)) / dt;
        else if (i == 0)
            out[a] = (-1.5 * sp(0, a) + 2.0 * sp(1, a) - 0.5 * sp(2, a)) / dt;
        else if (i == m - 1)
            out[a] = (1.5 * sp(m - 1, a) - 2.0 * sp(m - 2, a) + 0.5 * sp(m - 3, a)) / dt;
        else
            out[a] = (sp(i + 1, a) - sp(i - 1, a)) * (0.5 / dt);
    }
    return out;
}

double ep_total(const Trajectory& t, double p, double mu) { return ep_norm(t, p, mu).total; }

Trajectory trajectory_difference(const Trajectory& a, const Trajectory& b) {
    Trajectory d;
    d.time = a.time;
    const bool pa = !a.grad_pressure.empty(), pb = !b.grad_pressure.empty();
    for (int i = 0; i < a.time.samples; ++i) {
        d.velocity.push_back(a.velocity[i] - b.velocity[i]);
        if (pa && pb)
            d.grad_pressure.push_back(a.grad_pressure[i] - b.grad_pressure[i]);
        else if (pa)
            d.grad_pressure.push_back(a.grad_pressure[i]);
        else if (pb)
            d.grad_pressure.push_back(b.grad_pressure[i] * -1.0);
    }
    return d;
}

double ep_difference(const Trajectory& a, const Trajectory& b, double p, double mu) {
    return ep_total(trajectory_difference(a, b), p, mu);
}

/// int ||D v||_{B^{n/p}} dt over the trajectory.
double gradient_integral(const Trajectory& traj, double p) {
    const BesovIndex idx = BesovIndex::critical_gradient(traj.grid().n, p);
    std::vector<double> vals(traj.time.samples);
    for (int i = 0; i < traj.time.samples; ++i) {
        if (p == 2.0) {
            std::vector<const detail::ComplexArray<double>*> u;
            for (auto& c : traj.velocity[i].components()) u.push_back(&c.spectrum());
            vals[i] = besov_l2_weighted<double>(traj.grid(), u, idx.s, 1);
        } else {
            vals[i] = besov_norm(jacobian(traj.velocity[i]), idx).total;
        }
    }
    return time_integral(vals, traj.time);
}

} // namespace

// ---------------------------------------------------------------------------
// FlowSequence
// ---------------------------------------------------------------------------

namespace detail_flow {

/// Streaming cursor over the flow samples of a Lagrangian velocity,
/// maintaining the running Jacobian integral C(t) spectrally.
class FlowCursor {
  public:
    explicit FlowCursor(const Trajectory& vbar) : traj_(&vbar), g_(vbar.grid()) {
        const int n = g_.n;
        C_.assign(n * n, Eigen::ArrayXcd::Zero(static_cast<Eigen::Index>(g_.points())));
        prevJ_ = jacobian_spectra(g_, component_spectra(vbar.velocity[0]));
    }

    FlowSequence::Sample next() {
        const int n = g_.n;
        const int i = index_++;
        Spectra J = i == 0 ? prevJ_ : jacobian_spectra(g_, component_spectra(traj_->velocity[i]));
        if (i > 0) {
            const double half_dt = 0.5 * traj_->time.dt;
            for (int e = 0; e < n * n; ++e) C_[e] += half_dt * (prevJ_[e] + J[e]);
            prevJ_ = J;
        }

        // physical DX for the smallness guard and the determinant drift
        std::vector<Eigen::ArrayXd> Cphys(n * n);
        for (int e = 0; e < n * n; ++e) Cphys[e] = detail::inverse_transform<double>(g_, C_[e]);
        double dev = 0.0, drift = 0.0;
        const std::size_t npts = g_.points();
        for (std::size_t pt = 0; pt < npts; ++pt) {
            const auto at = [&](int r, int c) {
                return Cphys[r * n + c][static_cast<Eigen::Index>(pt)];
            };
            if (n == 2) {
                const double fro2 = at(0, 0) * at(0, 0) + at(0, 1) * at(0, 1) +
                                    at(1, 0) * at(1, 0) + at(1, 1) * at(1, 1);
                const double det = at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0);
                const double disc = std::sqrt(std::max(0.0, fro2 * fro2 - 4 * det * det));
                dev = std::max(dev, std::sqrt(0.5 * (fro2 + disc)));
                drift = std::max(drift, std::abs((1 + at(0, 0)) * (1 + at(1, 1)) -
                                                 at(0, 1) * at(1, 0) - 1.0));
            } else {
                Eigen::Matrix3d M;
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) M(r, c) = at(r, c);
                Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M.transpose() * M,
                                                                  Eigen::EigenvaluesOnly);
                dev = std::max(dev, std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff())));
                M += Eigen::Matrix3d::Identity();
                drift = std::max(drift, std::abs(M.determinant() - 1.0));
            }
        }
        if (dev > kFlowSmallness)
            throw SmallnessViolated("flow sequence: ||DX - Id||_inf = " + std::to_string(dev) +
                                    " exceeds 1/2 at t = " + std::to_string(traj_->time.t(i)));
        max_drift_ = std::max(max_drift_, drift);

        FlowSequence::Sample s;
        s.index = i;
        s.t = traj_->time.t(i);
        s.det_drift = max_drift_;
        s.dx_deviation = dev;
        s.A.resize(n * n);
        s.dtA.resize(n * n);
        if (n == 2) {
            // adj(Id + C) = (1 + Tr C) Id - C, linear in C: assemble spectrally
            Eigen::ArrayXcd trC = C_[0] + C_[3];
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) {
                    Eigen::ArrayXcd a = -C_[r * 2 + c];
                    if (r == c) {
                        a += trC;
                        a[0] += 1.0;
                    }
                    s.A[r * 2 + c] = std::move(a);
                }
            Eigen::ArrayXcd divv = J[0] + J[3];
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c)
                    s.dtA[r * 2 + c] = r == c ? Eigen::ArrayXcd(divv - J[r * 2 + c])
                                              : Eigen::ArrayXcd(-J[r * 2 + c]);
        } else {
            // pointwise adjugate and its differential, then back to spectra
            std::vector<Eigen::ArrayXd> Jphys(9), adj(9, Eigen::ArrayXd(static_cast<Eigen::Index>(npts))),
                dadj(9, Eigen::ArrayXd(static_cast<Eigen::Index>(npts)));
            for (int e = 0; e < 9; ++e) Jphys[e] = detail::inverse_transform<double>(g_, J[e]);
            for (std::size_t pt = 0; pt < npts; ++pt) {
                Eigen::Matrix3d M, H;
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) {
                        M(r, c) = (r == c ? 1.0 : 0.0) + Cphys[r * 3 + c][static_cast<Eigen::Index>(pt)];
                        H(r, c) = Jphys[r * 3 + c][static_cast<Eigen::Index>(pt)];
                    }
                const Eigen::Matrix3d am = detail::adjugate_small<double, 3>(M);
                const Eigen::Matrix3d dm = adjugate_differential<3>(M, H);
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) {
                        adj[r * 3 + c][static_cast<Eigen::Index>(pt)] = am(r, c);
                        dadj[r * 3 + c][static_cast<Eigen::Index>(pt)] = dm(r, c);
                    }
            }
            for (int e = 0; e < 9; ++e) {
                s.A[e] = detail::forward_transform<double>(g_, adj[e]);
                s.dtA[e] = detail::forward_transform<double>(g_, dadj[e]);
            }
        }
        return s;
    }

  private:
    const Trajectory* traj_;
    GridSpec g_;
    Spectra C_;
    Spectra prevJ_;
    int index_ = 0;
    double max_drift_ = 0.0;
};

} // namespace detail_flow

FlowSequence::FlowSequence(const Trajectory& vbar) : vbar_(&vbar) { vbar.validate(); }

void FlowSequence::walk(int last, const std::function<void(const Sample&)>& fn) const {
    if (last < 0 || last >= vbar_->time.samples)
        throw ValidationError("FlowSequence::walk: sample index out of range");
    detail_flow::FlowCursor cur(*vbar_);
    for (int i = 0; i <= last; ++i) fn(cur.next());
}

FlowState FlowSequence::state(int i) const {
    return flow_from_lagrangian_velocity(*vbar_, vbar_->time.t(i));
}

// ---------------------------------------------------------------------------
// Right-hand-side assembly
// ---------------------------------------------------------------------------

namespace {

struct RhsOut {
    std::vector<VectorField> f;
    std::vector<ScalarField> g;
    std::vector<VectorField> R;
    double g_mean_residue = 0.0;
    double det_drift = 0.0;
};

/// Streaming assembly of f(w, grad Q), g(w) and R(w) over the whole time
/// grid.  All pointwise products run on the padded grid; padded operand
/// arrays are shared between the terms of one sample.
RhsOut assemble_rhs(const Trajectory& wQ, const ScalarField* rho0, const FlowSequence& flow,
                    double mu, bool want_f, bool want_g) {
    wQ.validate();
    const GridSpec& g = wQ.grid();
    const int n = g.n;
    const int m = wQ.time.samples;
    const int M = detail::padded_size(g);
    const double ku = g.k_unit();
    const bool has_q = !wQ.grad_pressure.empty();

    Eigen::ArrayXd rho_pad;
    bool has_rho = false;
    if (want_f && rho0 && rho0->valid()) {
        ScalarField one_minus = ScalarField::constant(g, 1.0) - *rho0;
        if (sup_norm(one_minus) > 1e-14) {
            rho_pad = detail::padded_physical<double>(g, one_minus.spectrum(), M);
            has_rho = true;
        }
    }

    RhsOut out;
    out.f.reserve(want_f ? m : 0);
    out.g.reserve(want_g ? m : 0);
    out.R.reserve(want_g ? m : 0);

    auto padded = [&](const Eigen::ArrayXcd& spec) {
        return detail::padded_physical<double>(g, spec, M);
    };
    auto to_spec = [&](const Eigen::ArrayXd& pad) {
        return detail::padded_spectrum<double>(g, pad, M);
    };

    flow.walk(m - 1, [&](const FlowSequence::Sample& s) {
        const int i = s.index;
        out.det_drift = std::max(out.det_drift, s.det_drift);

        // w-family spectra and pads
        Spectra w = component_spectra(wQ.velocity[i]);
        Spectra dtw = time_derivative_spectra(wQ.velocity, wQ.time, i);
        Spectra Dw = jacobian_spectra(g, w);

        std::vector<Eigen::ArrayXd> padA(n * n), padDtA(n * n), padDw(n * n);
        std::vector<Eigen::ArrayXd> padW(n), padDtW(n);
        for (int e = 0; e < n * n; ++e) {
            padA[e] = padded(s.A[e]);
            padDw[e] = padded(Dw[e]);
            if (want_g) padDtA[e] = padded(s.dtA[e]);
        }
        for (int a = 0; a < n; ++a) {
            padDtW[a] = padded(dtw[a]);
            if (want_g) padW[a] = padded(w[a]);
        }

        if (want_g) {
            // g = Dw : (Id - A) = sum_{r,c} Dw_{rc} (Id - A)_{cr}
            Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(padDw[0].size());
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) {
                    Eigen::ArrayXd idma = -padA[c * n + r];
                    if (r == c) idma += 1.0;
                    acc += padDw[r * n + c] * idma;
                }
            Eigen::ArrayXcd gs = to_spec(acc);
            out.g_mean_residue = std::max(out.g_mean_residue, std::abs(gs[0]));
            gs[0] = 0.0;
            out.g.push_back(ScalarField::from_spectral(g, std::move(gs)));

            // R = (Id - A) d_t w - d_t A w
            std::vector<ScalarField> Rc;
            for (int r = 0; r < n; ++r) {
                Eigen::ArrayXd racc = Eigen::ArrayXd::Zero(padDw[0].size());
                for (int c = 0; c < n; ++c) {
                    Eigen::ArrayXd idma = -padA[r * n + c];
                    if (r == c) idma += 1.0;
                    racc += idma * padDtW[c] - padDtA[r * n + c] * padW[c];
                }
                Rc.push_back(ScalarField::from_spectral(g, to_spec(racc)));
            }
            out.R.push_back(VectorField(g, std::move(Rc)));
        }

        if (want_f) {
            // (A A^T - Id): pairwise padded product, truncated before reuse
            std::vector<Eigen::ArrayXd> padAAt(n * n);
            for (int r = 0; r < n; ++r)
                for (int c = r; c < n; ++c) {
                    Eigen::ArrayXd acc = padA[r * n] * padA[c * n];
                    for (int k = 1; k < n; ++k) acc += padA[r * n + k] * padA[c * n + k];
                    Eigen::ArrayXcd sp = to_spec(acc);
                    if (r == c) sp[0] -= 1.0;
                    padAAt[r * n + c] = padded(sp);
                    if (r != c) padAAt[c * n + r] = padAAt[r * n + c];
                }

            // P2 = (A A^T - Id) grad w, with (grad w)_{kj} = (Dw)_{jk}
            Spectra P2(n * n);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) {
                    Eigen::ArrayXd acc = padAAt[r * n] * padDw[c * n];
                    for (int k = 1; k < n; ++k) acc += padAAt[r * n + k] * padDw[c * n + k];
                    P2[r * n + c] = to_spec(acc);
                }

            std::vector<ScalarField> fc;
            Spectra q;
            std::vector<Eigen::ArrayXd> padQ;
            if (has_q) {
                q = component_spectra(wQ.grad_pressure[i]);
                for (int a = 0; a < n; ++a) padQ.push_back(padded(q[a]));
            }
            for (int a = 0; a < n; ++a) {
                Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(padDw[0].size());
                if (has_rho) acc += rho_pad * padDtW[a];
                if (has_q) {
                    // (Id - A^T) grad Q, (A^T)_{ac} = A_{ca}
                    for (int c = 0; c < n; ++c) {
                        Eigen::ArrayXd idmat = -padA[c * n + a];
                        if (a == c) idmat += 1.0;
                        acc += idmat * padQ[c];
                    }
                }
                Eigen::ArrayXcd fs = to_spec(acc);
                // + mu (div P2)_a = mu sum_r d_r P2_{ra}
                for (std::size_t flat = 0; flat < g.points(); ++flat) {
                    auto idx = g.unflatten(flat);
                    std::complex<double> dsum(0, 0);
                    for (int r = 0; r < n; ++r) {
                        int k = g.freq_int(idx[r]);
                        if (k == -g.N / 2) k = 0;
                        dsum += std::complex<double>(0.0, k * ku) *
                                P2[r * n + a][static_cast<Eigen::Index>(flat)];
                    }
                    fs[static_cast<Eigen::Index>(flat)] += mu * dsum;
                }
                fc.push_back(ScalarField::from_spectral(g, std::move(fs)));
            }
            out.f.push_back(VectorField(g, std::move(fc)));
        }
    });
    return out;
}

} // namespace

std::vector<VectorField> rhs_f(const Trajectory& wQ, const ScalarField& rho0,
                               const FlowSequence& flow, double mu) {
    return assemble_rhs(wQ, &rho0, flow, mu, true, false).f;
}

RhsG rhs_g(const Trajectory& wQ, const FlowSequence& flow) {
    RhsOut out = assemble_rhs(wQ, nullptr, flow, 0.0, false, true);
    if (out.det_drift > 1e-6)
        throw DeterminantNotUnit("rhs_g: determinant drift " + std::to_string(out.det_drift));
    return RhsG{std::move(out.g), std::move(out.R), out.g_mean_residue};
}

// ---------------------------------------------------------------------------
// Problem data and smallness
// ---------------------------------------------------------------------------

void ProblemData::validate() const {
    if (!rho0.valid() || !u0.valid()) throw ValidationError("ProblemData: missing fields");
    if (rho0.grid() != u0.grid()) throw ValidationError("ProblemData: grids differ");
    time.validate();
    if (time.samples < 2) throw ValidationError("ProblemData: need at least 2 time samples");
    if (!(mu > 0.0)) throw ValidationError("ProblemData: mu must be positive");
    if (!(c > 0.0) || !(C_stokes > 0.0))
        throw ValidationError("ProblemData: constants c, C must be positive");
    const int n = grid().n;
    if (p < 1.0 || p >= 2.0 * n)
        throw ValidationError("ProblemData: need 1 <= p < 2n");
    const double un = lp_norm(u0, 2.0);
    if (un > 0 && lp_norm(divergence(u0), 2.0) > 1e-8 * un)
        throw ValidationError("ProblemData: u0 is not divergence-free");
}

SmallnessReport smallness_report(const ProblemData& data) {
    data.validate();
    const GridSpec& g = data.grid();
    const BesovIndex idx = BesovIndex::critical_velocity(g.n, data.p);
    SmallnessReport rep;
    ScalarField dev = data.rho0 - ScalarField::constant(g, 1.0);
    rep.m_rho = sup_norm(dev) < 1e-14
                    ? 0.0
                    : multiplier_norm_lower_bound(dev, idx, data.mult_trials, data.seed);
    rep.u0_norm = besov_norm(data.u0, idx).total;
    rep.m_u = rep.u0_norm / data.mu;
    rep.ball_radius = data.c * data.mu;
    rep.rho_ok = rep.m_rho <= data.c;
    rep.u0_ok = 2.0 * data.C_stokes * rep.u0_norm <= data.c * data.mu;
    return rep;
}

// ---------------------------------------------------------------------------
// Psi / Phi and the solvers
// ---------------------------------------------------------------------------

Trajectory psi_map(const FlowSequence& v_flow, const Trajectory& wQ, const ProblemData& data) {
    RhsOut rhs = assemble_rhs(wQ, &data.rho0, v_flow, data.mu, true, true);
    StokesData sd;
    sd.u0 = data.u0;
    sd.time = data.time;
    sd.mu = data.mu;
    sd.force = std::move(rhs.f);
    sd.div_data = std::move(rhs.g);
    sd.div_flux = std::move(rhs.R);
    return solve_stokes(sd);
}

Trajectory phi_map(const Trajectory& vQ, const ProblemData& data, double inner_tol,
                   int inner_max, InnerStats* stats, const Trajectory* inner_init) {
    data.validate();
    vQ.validate();
    FlowSequence flow(vQ);

    const double smallv = gradient_integral(vQ, data.p);
    const bool smallv_ok = smallv <= data.c;
    if (!smallv_ok && data.strict)
        throw SmallnessViolated("phi_map: int ||D v|| dt = " + std::to_string(smallv) +
                                " exceeds c = " + std::to_string(data.c));

    Trajectory cur = inner_init ? *inner_init : Trajectory::zero(data.grid(), data.time);
    InnerStats st;
    st.smallv_integral = smallv;
    st.smallv_ok = smallv_ok;
    bool converged = false;
    for (int k = 1; k <= inner_max; ++k) {
        Trajectory next = psi_map(flow, cur, data);
        const double nn = ep_total(next, data.p, data.mu);
        const double diff = ep_difference(next, cur, data.p, data.mu);
        cur = std::move(next);
        st.iterations = k;
        st.residual = nn > 0 ? diff / nn : diff;
        if (st.residual <= inner_tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw InnerNotConverged("phi_map: Psi fixed point not reached in " +
                                std::to_string(inner_max) + " iterations (residual " +
                                std::to_string(st.residual) + ")");
    if (stats) *stats = st;
    return cur;
}

namespace {

double liouville_drift_of(const Trajectory& u) {
    FlowSequence fl(u);
    double drift = 0.0;
    fl.walk(u.time.samples - 1,
            [&](const FlowSequence::Sample& s) { drift = std::max(drift, s.det_drift); });
    return drift;
}

std::pair<Trajectory, IterationDiagnostics>
picard_iterate(const ProblemData& data, Trajectory pair, const Trajectory* anchor,
               double ball_radius, double outer_tol, int outer_max, double inner_tol,
               int inner_max, IterationDiagnostics diag) {
    double prev_diff = -1.0;
    bool converged = false;
    double last_diff = 0.0;
    for (int k = 1; k <= outer_max; ++k) {
        InnerStats st;
        Trajectory next = phi_map(pair, data, inner_tol, inner_max, &st, &pair);
        const double diff = ep_difference(next, pair, data.p, data.mu);
        const double epn = ep_total(next, data.p, data.mu);
        const double dist = anchor ? ep_difference(next, *anchor, data.p, data.mu) : epn;

        OuterIterationRecord rec;
        rec.iter = k;
        rec.ep_norm = epn;
        rec.diff_norm = diff;
        rec.diff_ratio = prev_diff > 0 ? diff / prev_diff : 0.0;
        rec.smallv_integral = st.smallv_integral;
        rec.smallv_ok = st.smallv_ok;
        rec.ball_ok = dist <= ball_radius * (1 + 1e-12);
        rec.inner_iterations = st.iterations;
        rec.inner_residual = st.residual;
        diag.outer.push_back(rec);
        if (!rec.ball_ok && data.strict)
            throw SmallnessViolated("iterate left the ball: distance " + std::to_string(dist) +
                                    " > R = " + std::to_string(ball_radius));
        prev_diff = diff;
        last_diff = diff;
        pair = std::move(next);
        if (diff <= outer_tol * std::max(epn, 1e-300)) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw OuterNotConverged("Picard iteration: no fixed point in " +
                                std::to_string(outer_max) + " iterations");
    diag.final_ep = ep_total(pair, data.p, data.mu);
    diag.fixed_point_residual = diag.final_ep > 0 ? last_diff / diag.final_ep : last_diff;
    diag.liouville_drift = liouville_drift_of(pair);
    if (anchor) diag.perturbation_ep = ep_difference(pair, *anchor, data.p, data.mu);
    return {std::move(pair), std::move(diag)};
}

} // namespace

std::pair<Trajectory, IterationDiagnostics>
solve_global_small(const ProblemData& data, double outer_tol, int outer_max, double inner_tol,
                   int inner_max) {
    IterationDiagnostics diag;
    diag.smallness = smallness_report(data);
    if (!diag.smallness.rho_ok || !diag.smallness.u0_ok)
        throw SmallnessViolated(
            "solve_global_small: smallness flags fail (m_rho = " +
            std::to_string(diag.smallness.m_rho) + " vs c = " + std::to_string(data.c) +
            "; 2C||u0|| = " + std::to_string(2 * data.C_stokes * diag.smallness.u0_norm) +
            " vs c mu = " + std::to_string(data.c * data.mu) + ")");

    auto [pair, out] = picard_iterate(data, Trajectory::zero(data.grid(), data.time), nullptr,
                                      diag.smallness.ball_radius, outer_tol, outer_max,
                                      inner_tol, inner_max, std::move(diag));
    out.bound_ratio =
        out.smallness.u0_norm > 0 ? out.final_ep / out.smallness.u0_norm : 0.0;
    out.horizon = data.time.horizon();
    return {std::move(pair), std::move(out)};
}

double admissible_horizon(const ProblemData& data, double Tmax) {
    data.validate();
    StokesData sd;
    sd.u0 = data.u0;
    sd.mu = data.mu;
    const int m = static_cast<int>(std::lround(Tmax / data.time.dt)) + 1;
    sd.time = {data.time.dt, m};
    Trajectory free = solve_stokes(sd);
    const BesovIndex idx = BesovIndex::critical_gradient(data.grid().n, data.p);
    const double target = data.c / 2.0;
    double acc = 0.0;
    double prev = besov_norm(jacobian(free.velocity[0]), idx).total;
    for (int i = 1; i < m; ++i) {
        const double curv = besov_norm(jacobian(free.velocity[i]), idx).total;
        const double step = 0.5 * (prev + curv) * sd.time.dt;
        if (acc + step >= target) {
            const double frac = (target - acc) / step;
            return sd.time.t(i - 1) + frac * sd.time.dt;
        }
        acc += step;
        prev = curv;
    }
    return std::numeric_limits<double>::infinity();
}

std::pair<Trajectory, IterationDiagnostics>
solve_local_large(const ProblemData& data, double T, double outer_tol, int outer_max,
                  double inner_tol, int inner_max) {
    data.validate();
    IterationDiagnostics diag;
    diag.smallness = smallness_report(data);
    if (!diag.smallness.rho_ok)
        throw SmallnessViolated("solve_local_large: m_rho = " +
                                std::to_string(diag.smallness.m_rho) +
                                " exceeds c = " + std::to_string(data.c));

    // free Stokes solution on the requested horizon; halvings restrict to
    // prefixes of the same solution
    StokesData sd;
    sd.u0 = data.u0;
    sd.mu = data.mu;
    int m = static_cast<int>(std::lround(T / data.time.dt)) + 1;
    if (m < 2) throw ValidationError("solve_local_large: T shorter than dt");
    sd.time = {data.time.dt, m};
    const Trajectory free_full = solve_stokes(sd);

    const GridSpec& g = data.grid();
    const BesovIndex idx_g = BesovIndex::critical_gradient(g.n, data.p);
    const BesovIndex idx_v = BesovIndex::critical_velocity(g.n, data.p);
    std::vector<double> du_norm(m), load_norm(m), ul_norm(m);
    for (int i = 0; i < m; ++i) {
        du_norm[i] = besov_norm(jacobian(free_full.velocity[i]), idx_g).total;
        ul_norm[i] = besov_norm(free_full.velocity[i], idx_g).total;
        std::vector<MatrixField> hess;
        std::vector<const ScalarField*> comps;
        for (int a = 0; a < g.n; ++a) hess.push_back(hessian(free_full.velocity[i][a]));
        for (auto& H : hess)
            for (auto& c : H.components()) comps.push_back(&c);
        load_norm[i] = besov_norm(time_derivative(free_full.velocity, sd.time, i), idx_v).total +
                       data.mu * besov_norm_components<double>(g, comps, idx_v).total +
                       besov_norm(free_full.grad_pressure[i], idx_v).total;
    }

    const double R = data.c * data.mu / 2.0;
    int halvings = 0;
    int mh = m;
    while (true) {
        TimeGrid tg{data.time.dt, mh};
        std::vector<double> du(du_norm.begin(), du_norm.begin() + mh);
        std::vector<double> ld(load_norm.begin(), load_norm.begin() + mh);
        std::vector<double> ul(ul_norm.begin(), ul_norm.begin() + mh);
        const double I_du = time_integral(du, tg);
        const double I_load = time_integral(ld, tg);
        const double L2_ul = time_l2(ul, tg);
        const bool ok_bis = I_du <= data.c / 2.0;
        const bool ok_free1 =
            data.C_stokes * data.c * I_load + data.C_stokes * L2_ul * L2_ul <= R / 2.0;
        const bool ok_free2 = data.C_stokes * L2_ul / std::sqrt(data.mu) <= 0.5;
        if (ok_bis && ok_free1 && ok_free2) {
            diag.free_gradient_integral = I_du;
            break;
        }
        mh = (mh - 1) / 2 + 1;
        ++halvings;
        if (mh < 2)
            throw HorizonCollapsed("solve_local_large: horizon collapsed below dt after " +
                                   std::to_string(halvings) + " halvings");
    }
    diag.halvings = halvings;
    diag.horizon = data.time.dt * (mh - 1);

    Trajectory free_h;
    free_h.time = {data.time.dt, mh};
    free_h.velocity.assign(free_full.velocity.begin(), free_full.velocity.begin() + mh);
    free_h.grad_pressure.assign(free_full.grad_pressure.begin(),
                                free_full.grad_pressure.begin() + mh);

    ProblemData local = data;
    local.time = free_h.time;
    auto [pair, out] = picard_iterate(local, free_h, &free_h, R, outer_tol, outer_max,
                                      inner_tol, inner_max, std::move(diag));
    out.bound_ratio = out.smallness.u0_norm > 0 ? out.final_ep / out.smallness.u0_norm : 0.0;
    return {std::move(pair), std::move(out)};
}

// ---------------------------------------------------------------------------
// Contraction diagnostics
// ---------------------------------------------------------------------------

double contraction_factor(const ProblemData& data, const Trajectory& pair1,
                          const Trajectory& pair2, ContractionTerms* terms, double inner_tol,
                          int inner_max) {
    const double den = ep_difference(pair2, pair1, data.p, data.mu);
    if (den < 1e-14)
        throw IdenticalInputs("contraction_factor: input pairs coincide");
    Trajectory out1 = phi_map(pair1, data, inner_tol, inner_max);
    Trajectory out2 = phi_map(pair2, data, inner_tol, inner_max);
    const double num = ep_difference(out2, out1, data.p, data.mu);

    if (terms) {
        const GridSpec& g = data.grid();
        const int n = g.n;
        const int m = data.time.samples;
        const BesovIndex lo = BesovIndex::critical_velocity(n, data.p);
        const BesovIndex hi = BesovIndex::critical_gradient(n, data.p);
        const ScalarField one_minus_rho = ScalarField::constant(g, 1.0) - data.rho0;
        const MatrixField I = MatrixField::identity(g);

        detail_flow::FlowCursor c1(pair1), c2(pair2);
        std::vector<double> f1(m), f2(m), f3(m), f4(m), f5(m), r1(m), r2(m), r3(m), r4(m);
        for (int i = 0; i < m; ++i) {
            auto s1 = c1.next();
            auto s2 = c2.next();
            auto mat = [&](const Spectra& sp) {
                std::vector<ScalarField> cc;
                for (auto& a : sp) cc.push_back(ScalarField::from_spectral(g, Eigen::ArrayXcd(a)));
                return MatrixField(g, std::move(cc));
            };
            const MatrixField A1 = mat(s1.A), A2 = mat(s2.A);
            const MatrixField dtA1 = mat(s1.dtA), dtA2 = mat(s2.dtA);
            const VectorField du = out2.velocity[i] - out1.velocity[i];
            const VectorField dtdu = time_derivative(out2.velocity, data.time, i) -
                                     time_derivative(out1.velocity, data.time, i);
            const VectorField dP = out2.grad_pressure[i] - out1.grad_pressure[i];

            f1[i] = besov_norm(multiply(one_minus_rho, dtdu), lo).total;
            f2[i] = besov_norm(multiply(I - A2.transpose(), dP), lo).total;
            f3[i] = besov_norm(multiply((A1 - A2).transpose(), out1.grad_pressure[i]), lo).total;
            const MatrixField AAt1 = multiply(A1, A1.transpose());
            const MatrixField AAt2 = multiply(A2, A2.transpose());
            const MatrixField gradu1 = grad_vector(out1.velocity[i]);
            f4[i] = besov_norm(multiply(AAt2 - AAt1, gradu1), hi).total;
            f5[i] = besov_norm(multiply(AAt2 - I, grad_vector(du)), hi).total;
            r1[i] = besov_norm(multiply(dtA2, du), lo).total;
            r2[i] = besov_norm(multiply(I - A2, dtdu), lo).total;
            r3[i] = besov_norm(multiply(dtA1 - dtA2, out1.velocity[i]), lo).total;
            r4[i] = besov_norm(multiply(A1 - A2, time_derivative(out1.velocity, data.time, i)),
                               lo).total;
        }
        terms->df0 = 0.0; // single density here; nonzero only across perturbed data
        terms->df1 = time_integral(f1, data.time);
        terms->df2 = time_integral(f2, data.time);
        terms->df3 = time_integral(f3, data.time);
        terms->df4 = time_integral(f4, data.time);
        terms->df5 = time_integral(f5, data.time);
        terms->dR1 = time_integral(r1, data.time);
        terms->dR2 = time_integral(r2, data.time);
        terms->dR3 = time_integral(r3, data.time);
        terms->dR4 = time_integral(r4, data.time);
    }
    return num / den;
}

} // namespace lagns
