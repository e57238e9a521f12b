#include "lagns/stokes.hpp"

namespace lagns {

namespace {

// phi1(z) = (e^z - 1)/z, phi2(z) = (e^z - 1 - z)/z^2, series-guarded near 0
double phi1(double z) {
    if (std::abs(z) < 1e-4) return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
    return std::expm1(z) / z;
}
double phi2(double z) {
    if (std::abs(z) < 1e-4) return 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0;
    return (std::expm1(z) - z) / (z * z);
}

std::vector<Eigen::ArrayXcd> spectra(const VectorField& v) {
    std::vector<Eigen::ArrayXcd> s;
    for (auto& c : v.components()) s.push_back(c.spectrum());
    return s;
}

VectorField from_spectra(const GridSpec& g, std::vector<Eigen::ArrayXcd> s) {
    std::vector<ScalarField> c;
    for (auto& a : s) c.push_back(ScalarField::from_spectral(g, std::move(a)));
    return VectorField(g, std::move(c));
}

// apply Id - k k^T / |k|^2 in place (k = 0 untouched)
void project_spectra(const GridSpec& g, std::vector<Eigen::ArrayXcd>& s) {
    FreqTable ft(g);
    const int n = g.n;
    for (std::size_t flat = 1; flat < g.points(); ++flat) {
        const long k2 = ft.freq_norm2(flat);
        if (k2 == 0) continue;
        auto k = ft.freq(flat);
        std::complex<double> dot(0, 0);
        for (int a = 0; a < n; ++a) dot += static_cast<double>(k[a]) * s[a][static_cast<Eigen::Index>(flat)];
        dot /= static_cast<double>(k2);
        for (int a = 0; a < n; ++a) s[a][static_cast<Eigen::Index>(flat)] -= static_cast<double>(k[a]) * dot;
    }
}

} // namespace

VectorField leray_project(const VectorField& v) {
    auto s = spectra(v);
    project_spectra(v.grid(), s);
    return from_spectra(v.grid(), std::move(s));
}

void StokesData::validate() const {
    time.validate();
    if (!(mu > 0.0)) throw ValidationError("StokesData: mu must be positive");
    const auto samples = static_cast<std::size_t>(time.samples);
    if (!force.empty() && force.size() != samples)
        throw ValidationError("StokesData: force sample count mismatch");
    if (!div_data.empty() && div_data.size() != samples)
        throw ValidationError("StokesData: divergence sample count mismatch");
    if (!div_flux.empty() && div_flux.size() != samples)
        throw ValidationError("StokesData: flux sample count mismatch");

    const ScalarField g0 = div_data.empty() ? ScalarField::zero(grid()) : div_data.front();
    const double compat = lp_norm(g0 - divergence(u0), 2.0);
    if (compat > 1e-8)
        throw IncompatibleData("StokesData: ||g(0) - div u0||_L2 = " + std::to_string(compat));
    for (const auto& gt : div_data) {
        const double m = std::abs(gt.spectrum()[0]);
        if (m > 1e-10 * std::max(1.0, lp_norm(gt, 2.0)))
            throw IncompatibleData("StokesData: g has nonzero mean " + std::to_string(m));
    }
}

double StokesData::consistency_residual() const {
    if (div_data.empty() || div_flux.empty() || time.samples < 2) return 0.0;
    double worst = 0.0;
    for (int i = 0; i + 1 < time.samples; ++i) {
        auto dg = (div_data[i + 1] - div_data[i]) * (1.0 / time.dt);
        auto dr = divergence(div_flux[i] + div_flux[i + 1]) * 0.5;
        worst = std::max(worst, lp_norm(dg - dr, 2.0));
    }
    return worst;
}

std::vector<VectorField> canonical_div_flux(const std::vector<ScalarField>& g, const TimeGrid& tg) {
    tg.validate();
    if (g.size() != static_cast<std::size_t>(tg.samples))
        throw ValidationError("canonical_div_flux: sample count mismatch");
    std::vector<VectorField> R;
    const int m = tg.samples;
    for (int i = 0; i < m; ++i) {
        ScalarField dtg = [&] {
            if (m == 2) return (g[1] - g[0]) * (1.0 / tg.dt);
            if (i == 0) return g[0] * (-1.5 / tg.dt) + g[1] * (2.0 / tg.dt) + g[2] * (-0.5 / tg.dt);
            if (i == m - 1)
                return g[m - 1] * (1.5 / tg.dt) + g[m - 2] * (-2.0 / tg.dt) + g[m - 3] * (0.5 / tg.dt);
            return (g[i + 1] - g[i - 1]) * (0.5 / tg.dt);
        }();
        R.push_back(gradient(inverse_laplacian(dtg)));
    }
    return R;
}

Trajectory solve_stokes(const StokesData& data) {
    data.validate();
    const GridSpec& g = data.grid();
    const TimeGrid& tg = data.time;
    const int n = g.n;
    const int m = tg.samples;
    const double ku2 = g.k_unit() * g.k_unit();
    FreqTable ft(g);

    const bool has_g = !data.div_data.empty();
    const bool has_f = !data.force.empty();
    const bool has_R = !data.div_flux.empty();

    // gradient lift u_g(t) = grad InvLap g(t)
    auto lift = [&](int i) {
        return has_g ? gradient(inverse_laplacian(data.div_data[i]))
                     : VectorField::zero(g);
    };

    // divergence-free part at t=0
    VectorField w = leray_project(data.u0 - lift(0));
    auto wspec = spectra(w);

    // projected force at a sample
    auto projected_force = [&](int i) {
        std::vector<Eigen::ArrayXcd> s =
            has_f ? spectra(data.force[i])
                  : std::vector<Eigen::ArrayXcd>(
                        n, Eigen::ArrayXcd::Zero(static_cast<Eigen::Index>(g.points())));
        project_spectra(g, s);
        return s;
    };

    // grad P(t) = (Id - Leray) f + mu grad g - grad InvLap div R
    auto pressure_gradient = [&](int i) {
        std::vector<Eigen::ArrayXcd> acc(
            n, Eigen::ArrayXcd::Zero(static_cast<Eigen::Index>(g.points())));
        if (has_f) {
            auto s = spectra(data.force[i]);
            auto sp = s;
            project_spectra(g, sp);
            for (int a = 0; a < n; ++a) acc[a] = s[a] - sp[a];
        }
        if (has_g) {
            auto gg = gradient(data.div_data[i]);
            for (int a = 0; a < n; ++a) acc[a] += data.mu * gg[a].spectrum();
        }
        if (has_R) {
            auto dr = divergence(data.div_flux[i]);
            // remove any (tiny) mean so the inverse Laplacian is defined
            Eigen::ArrayXcd s = dr.spectrum();
            s[0] = 0.0;
            auto gp = gradient(inverse_laplacian(ScalarField::from_spectral(g, std::move(s))));
            for (int a = 0; a < n; ++a) acc[a] -= gp[a].spectrum();
        }
        return acc;
    };

    Trajectory out;
    out.time = tg;
    out.velocity.reserve(m);
    out.grad_pressure.reserve(m);

    auto fprev = projected_force(0);
    {
        VectorField u0 = lift(0) + from_spectra(g, wspec);
        out.velocity.push_back(std::move(u0));
        out.grad_pressure.push_back(from_spectra(g, pressure_gradient(0)));
    }

    for (int i = 1; i < m; ++i) {
        auto fnext = projected_force(i);
        const double dt = tg.dt;
        for (std::size_t flat = 0; flat < g.points(); ++flat) {
            const double lam = data.mu * ku2 * static_cast<double>(ft.freq_norm2(flat));
            const double z = -lam * dt;
            const double E = std::exp(z);
            const double c0 = dt * (phi1(z) - phi2(z));
            const double c1 = dt * phi2(z);
            for (int a = 0; a < n; ++a) {
                auto& wa = wspec[a][static_cast<Eigen::Index>(flat)];
                wa = E * wa + c0 * fprev[a][static_cast<Eigen::Index>(flat)] +
                     c1 * fnext[a][static_cast<Eigen::Index>(flat)];
            }
        }
        fprev = std::move(fnext);
        out.velocity.push_back(lift(i) + from_spectra(g, wspec));
        out.grad_pressure.push_back(from_spectra(g, pressure_gradient(i)));
    }
    return out;
}

double verify_estimate(const StokesData& data, const Trajectory& solution, double p) {
    data.validate();
    solution.validate();
    const GridSpec& g = data.grid();
    const BesovIndex idx = BesovIndex::critical_velocity(g.n, p);
    const int m = data.time.samples;

    const double numerator = ep_norm(solution, p, data.mu).total;

    std::vector<double> dat(m, 0.0);
    for (int i = 0; i < m; ++i) {
        if (!data.force.empty()) dat[i] += besov_norm(data.force[i], idx).total;
        if (!data.div_data.empty())
            dat[i] += data.mu * besov_norm(gradient(data.div_data[i]), idx).total;
        if (!data.div_flux.empty()) dat[i] += besov_norm(data.div_flux[i], idx).total;
    }
    const double denominator = besov_norm(data.u0, idx).total + time_integral(dat, data.time);
    if (denominator < 1e-300) throw ZeroData("verify_estimate: zero data");
    return numerator / denominator;
}

} // namespace lagns
