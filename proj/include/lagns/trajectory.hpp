#pragma once

#include <vector>

#include "lagns/spectral.hpp"

namespace lagns {

/// Uniform time grid t_i = i * dt, i = 0..samples-1.
struct TimeGrid {
    double dt = 0.0;
    int samples = 0;

    double t(int i) const { return i * dt; }
    double horizon() const { return samples > 1 ? dt * (samples - 1) : 0.0; }

    void validate() const {
        if (samples < 1 || !(dt > 0.0))
            throw ValidationError("TimeGrid: need samples >= 1 and dt > 0");
    }
};

/// Time-stamped sequence of (velocity, pressure gradient) fields on a uniform
/// grid.  grad_pressure may be empty when a run only carries velocities.
template <typename S> struct TrajectoryT {
    TimeGrid time;
    std::vector<VectorFieldT<S>> velocity;
    std::vector<VectorFieldT<S>> grad_pressure;

    const GridSpec& grid() const { return velocity.front().grid(); }

    void validate() const {
        time.validate();
        if (velocity.size() != static_cast<std::size_t>(time.samples))
            throw EmptyTrajectory("trajectory velocity count != time samples");
        if (!grad_pressure.empty() &&
            grad_pressure.size() != static_cast<std::size_t>(time.samples))
            throw ValidationError("trajectory pressure count != time samples");
    }

    static TrajectoryT zero(const GridSpec& g, const TimeGrid& tg) {
        TrajectoryT tr;
        tr.time = tg;
        tr.velocity.assign(tg.samples, VectorFieldT<S>::zero(g));
        tr.grad_pressure.assign(tg.samples, VectorFieldT<S>::zero(g));
        return tr;
    }
};

using Trajectory = TrajectoryT<double>;

/// Second-order time derivative of a sampled series (centered; one-sided at
/// the endpoints).
template <typename S>
VectorFieldT<S> time_derivative(const std::vector<VectorFieldT<S>>& series, const TimeGrid& tg,
                                int i) {
    const int m = static_cast<int>(series.size());
    if (m < 2) throw EmptyTrajectory("time_derivative: need at least 2 samples");
    const double dt = tg.dt;
    if (m == 2) return (series[1] - series[0]) * (S(1) / dt);
    if (i == 0)
        return series[0] * (S(-1.5) / dt) + series[1] * (S(2) / dt) + series[2] * (S(-0.5) / dt);
    if (i == m - 1)
        return series[m - 1] * (S(1.5) / dt) + series[m - 2] * (S(-2) / dt) +
               series[m - 3] * (S(0.5) / dt);
    return (series[i + 1] - series[i - 1]) * (S(0.5) / dt);
}

/// Trapezoid quadrature of sampled values over the uniform grid.
inline double time_integral(const std::vector<double>& vals, const TimeGrid& tg) {
    if (vals.size() < 2) return 0.0;
    double s = 0.5 * (vals.front() + vals.back());
    for (std::size_t i = 1; i + 1 < vals.size(); ++i) s += vals[i];
    return s * tg.dt;
}

/// L2-in-time norm of sampled values.
inline double time_l2(const std::vector<double>& vals, const TimeGrid& tg) {
    std::vector<double> sq(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) sq[i] = vals[i] * vals[i];
    return std::sqrt(time_integral(sq, tg));
}

} // namespace lagns
