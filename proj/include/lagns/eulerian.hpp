#pragma once

#include "lagns/fixed_point.hpp"

namespace lagns {

/// Eulerian variables at one time, mapped back from Lagrangian coordinates
/// (or produced by the reference solver).
struct EulerianSnapshot {
    double t = 0.0;
    ScalarField rho;
    VectorField u;
    VectorField grad_p;
    MatrixField grad_u; ///< (grad u)_{ij} = d u^j / d x_i
};

/// Map a Lagrangian solution pair back to Eulerian variables at the given
/// sample indices (all samples when empty):
///   rho = rho0 o Y,  u = ubar o Y,  grad P = (A^T grad Pbar) o Y,
///   grad u = (A^T grad ubar) o Y,  with Y the inverse flow of ubar.
std::vector<EulerianSnapshot> to_eulerian(const Trajectory& traj, const ScalarField& rho0,
                                          std::vector<int> sample_indices = {});

struct NseResiduals {
    double mass = 0.0;       ///< ||d_t rho + u.grad rho|| / term scale
    double momentum = 0.0;   ///< ||rho(d_t u + u.grad u) - mu Lap u + grad P|| / term scale
    double divergence = 0.0; ///< ||div u|| / ||grad u||
};

/// Residuals of the Eulerian system over consecutive snapshot triples
/// (max over interior snapshots; needs at least 3).
NseResiduals nse_residual(const std::vector<EulerianSnapshot>& snaps, double mu);

/// Independent oracle: first-order semi-implicit projection scheme with
/// semi-Lagrangian advection, valid for ||rho0 - 1||_inf <= 0.2.  Structurally
/// different from the Lagrangian solver by design.
std::vector<EulerianSnapshot> reference_eulerian_solve(const ScalarField& rho0,
                                                       const VectorField& u0, double mu,
                                                       double T, double dt,
                                                       int snapshot_stride = 1);

/// Disc/ball descriptor for the density-jump experiment.
struct DiscDomain {
    std::array<double, 2> center{0.0, 0.0};
    double radius = 1.0;
};

struct JumpExperimentOptions {
    double p = 2.0;
    double c = 0.05;
    double C_stokes = 2.0;
    int markers = 256;
    int mult_trials = 64;
    std::uint64_t seed = 1;
    double mollify_width_factor = 2.0; ///< gaussian width in grid spacings
    int frame_stride = 0;              ///< staored marker frames; 0 = endpoints only
};

struct JumpReport {
    std::vector<double> times;
    std::vector<double> area_drift;       ///< |Omega_t| / |Omega_0| - 1
    std::vector<double> curvature_change; ///< max_i |kappa_i(t) - kappa_i(0)|
    double multiplier_bound = 0.0;        ///< lower bound for sigma chi_Omega
    double mollify_width = 0.0;
    IterationDiagnostics diagnostics;
    std::vector<std::vector<std::array<double, 2>>> frames; ///< marker positions
    std::vector<double> frame_times;
};

/// Corollary experiment: rho0 = 1 + sigma * (mollified disc indicator), solve
/// globally, advect boundary markers with the flow, and report measure and
/// smoothness drift plus the multiplier bound of the sharp jump.
JumpReport density_jump_experiment(const GridSpec& g, const DiscDomain& omega0, double sigma,
                                   const VectorField& u0, double mu, double T, double dt,
                                   const JumpExperimentOptions& opt = {});

/// Sharp disc indicator mollified at grid scale (gaussian multiplier in
/// frequency space).
ScalarField mollified_disc(const GridSpec& g, const DiscDomain& omega0, double width);
ScalarField sharp_disc(const GridSpec& g, const DiscDomain& omega0);

} // namespace lagns
