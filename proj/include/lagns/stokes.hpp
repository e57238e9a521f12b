#pragma once

#include "lagns/littlewood_paley.hpp"
#include "lagns/trajectory.hpp"

namespace lagns {

/// Data for the constant-coefficient Stokes system
///   d_t u - mu Lap u + grad P = f,   div u = g,   u(0) = u0,
/// with d_t g = div R.  Empty trajectories stand for zero data.
struct StokesData {
    VectorField u0;
    TimeGrid time;
    std::vector<VectorField> force;     ///< f
    std::vector<ScalarField> div_data;  ///< g
    std::vector<VectorField> div_flux;  ///< R
    double mu = 1.0;

    const GridSpec& grid() const { return u0.grid(); }

    /// Throws IncompatibleData on g(0) != div u0 or nonzero-mean g.
    void validate() const;

    /// Max over steps of || (g_{i+1}-g_i)/dt - div (R_i+R_{i+1})/2 ||_{L2};
    /// O(dt^2) for consistent data, reported rather than enforced.
    double consistency_residual() const;
};

/// Spectral projection onto divergence-free fields; zero mode untouched.
VectorField leray_project(const VectorField& v);

/// Convenience construction of the canonical flux R = grad InvLap d_t g
/// (second-order differenced).  Flagged derived: the solver treats R as data.
std::vector<VectorField> canonical_div_flux(const std::vector<ScalarField>& g, const TimeGrid& tg);

/// Solve the Stokes system.  The gradient part grad InvLap g is split off and
/// the divergence-free remainder integrated with an exact per-mode
/// integrating factor and exponential-trapezoid Duhamel quadrature; grad P is
/// diagnosed spectrally per step.  Returns (u, grad P) as one trajectory.
Trajectory solve_stokes(const StokesData& data);

/// Measured maximal-regularity ratio at s = n/p - 1:
///   [ ||u||_{L_inf B^s} + ||d_t u, mu D^2 u, grad P||_{L1 B^s} ]
///   / [ ||f, mu grad g, R||_{L1 B^s} + ||u0||_{B^s} ].
double verify_estimate(const StokesData& data, const Trajectory& solution, double p);

} // namespace lagns
