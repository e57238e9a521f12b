#pragma once

#include <functional>

#include "lagns/flow.hpp"
#include "lagns/stokes.hpp"

namespace lagns {

/// Data and configured constants for the Lagrangian construction.  The
/// smallness constants c and C are not pinned by the theory; defaults are
/// config-exposed and every smallness check reports its margin.
struct ProblemData {
    ScalarField rho0;
    VectorField u0;
    double mu = 1.0;
    double p = 2.0; ///< integrability index, 1 <= p < 2n
    TimeGrid time;

    double c = 0.05;       ///< smallness constant of the theory
    double C_stokes = 2.0; ///< Stokes estimate constant used in the flags
    int mult_trials = 32;  ///< trials for the multiplier-norm probe
    std::uint64_t seed = 1;
    bool strict = false;   ///< abort (instead of flag) when iterates leave the ball

    const GridSpec& grid() const { return u0.grid(); }
    void validate() const;
};

struct SmallnessReport {
    double m_rho = 0.0;      ///< multiplier lower bound of rho0 - 1
    double m_u = 0.0;        ///< mu^{-1} ||u0||_{B^{n/p-1}}
    double u0_norm = 0.0;
    double ball_radius = 0.0; ///< R = c mu
    bool rho_ok = false;      ///< m_rho <= c
    bool u0_ok = false;       ///< 2 C ||u0|| <= c mu
};

SmallnessReport smallness_report(const ProblemData& data);

/// Lazy per-sample flow algebra for a Lagrangian velocity trajectory.
/// A is realized as adj(DX) (they coincide under |DX| = 1, which is monitored
/// as the determinant drift); d_t A comes from the adjugate derivative.
class FlowSequence {
  public:
    explicit FlowSequence(const Trajectory& vbar);

    struct Sample {
        int index = 0;
        double t = 0.0;
        std::vector<Eigen::ArrayXcd> A;      ///< n*n spectra, row-major
        std::vector<Eigen::ArrayXcd> dtA;    ///< n*n spectra of d_t adj(DX)
        double det_drift = 0.0;              ///< max |det DX - 1| so far
        double dx_deviation = 0.0;           ///< ||DX - Id||_inf at this sample
    };

    /// Walk samples 0..last in order.  Throws SmallnessViolated when the
    /// flow leaves ||DX - Id||_inf <= 1/2.
    void walk(int last, const std::function<void(const Sample&)>& fn) const;

    /// Full FlowState at one sample (for inspection and tests).
    FlowState state(int i) const;

    const Trajectory& velocity() const { return *vbar_; }
    const GridSpec& grid() const { return vbar_->grid(); }

  private:
    const Trajectory* vbar_;
};

/// Right-hand side f(w, grad Q) of the rewritten momentum equation:
///   (1 - rho0) d_t w + mu div((A^T A - Id) grad w) + (Id - A^T) grad Q.
std::vector<VectorField> rhs_f(const Trajectory& wQ, const ScalarField& rho0,
                               const FlowSequence& flow, double mu);

/// Inhomogeneous divergence via the magic contraction form, with its flux:
///   g = Dw : (Id - A),   R = (Id - A) d_t w - d_t A w.
struct RhsG {
    std::vector<ScalarField> g;
    std::vector<VectorField> R;
    double mean_residue = 0.0; ///< max |zero mode of g| before removal
};
RhsG rhs_g(const Trajectory& wQ, const FlowSequence& flow);

/// One application of the inner linear map Psi: assemble the right-hand
/// sides for the candidate pair and solve the Stokes system.
Trajectory psi_map(const FlowSequence& v_flow, const Trajectory& wQ, const ProblemData& data);

struct InnerStats {
    int iterations = 0;
    double residual = 0.0;        ///< last relative E_p change
    double smallv_integral = 0.0; ///< int ||D vbar||_{B^{n/p}} dt
    bool smallv_ok = true;
    double g_mean_residue = 0.0;
    double det_drift = 0.0;
};

/// The outer map Phi: fixed point of Psi for the flow frozen at vQ.
Trajectory phi_map(const Trajectory& vQ, const ProblemData& data, double inner_tol,
                   int inner_max, InnerStats* stats = nullptr,
                   const Trajectory* inner_init = nullptr);

struct OuterIterationRecord {
    int iter = 0;
    double ep_norm = 0.0;
    double diff_norm = 0.0;
    double diff_ratio = 0.0;      ///< vs previous difference
    double smallv_integral = 0.0; ///< of the input iterate
    bool smallv_ok = true;
    bool ball_ok = true;
    int inner_iterations = 0;
    double inner_residual = 0.0;
};

struct IterationDiagnostics {
    SmallnessReport smallness;
    std::vector<OuterIterationRecord> outer;
    double final_ep = 0.0;
    double bound_ratio = 0.0;          ///< ||(u,P)||_Ep / ||u0||_{B^{n/p-1}}
    double fixed_point_residual = 0.0; ///< last Cauchy difference / final norm
    double liouville_drift = 0.0;      ///< ||det DX_u - 1||_inf over the run
    // local scheme
    double horizon = 0.0;
    int halvings = 0;
    double free_gradient_integral = 0.0; ///< int ||D u_L||_{B^{n/p}} dt on [0,T]
    double perturbation_ep = 0.0;        ///< ||(u,P) - (u_L,P_L)||_Ep(T)
};

/// Global small-data solve: outer Picard iteration of Phi from (0,0).
std::pair<Trajectory, IterationDiagnostics>
solve_global_small(const ProblemData& data, double outer_tol = 1e-7, int outer_max = 30,
                   double inner_tol = 1e-9, int inner_max = 40);

/// Local-in-time solve around the free Stokes solution; the horizon is
/// halved until the free-solution smallness conditions pass.
std::pair<Trajectory, IterationDiagnostics>
solve_local_large(const ProblemData& data, double T, double outer_tol = 1e-7,
                  int outer_max = 30, double inner_tol = 1e-9, int inner_max = 40);

/// Crossing time of int_0^T ||D u_L||_{B^{n/p}} dt = c/2 for the free
/// solution (the admissibility horizon), interpolated within a step;
/// +infinity when the threshold is never reached on [0, Tmax].
double admissible_horizon(const ProblemData& data, double Tmax);

/// Per-term diagnostics of the difference system.
struct ContractionTerms {
    double df0 = 0.0, df1 = 0.0, df2 = 0.0, df3 = 0.0, df4 = 0.0, df5 = 0.0;
    double dR1 = 0.0, dR2 = 0.0, dR3 = 0.0, dR4 = 0.0;
};

/// ||Phi(pair2) - Phi(pair1)||_Ep / ||pair2 - pair1||_Ep with the
/// difference-system term norms exposed.  delta rho0 is zero here (one
/// density), so df0 vanishes; it is kept for the stability experiment.
double contraction_factor(const ProblemData& data, const Trajectory& pair1,
                          const Trajectory& pair2, ContractionTerms* terms = nullptr,
                          double inner_tol = 1e-9, int inner_max = 40);

} // namespace lagns
