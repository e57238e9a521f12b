#pragma once

#include <cstdint>
#include <random>

#include "lagns/spectral.hpp"

namespace lagns {

/// Deterministic random stream: mt19937_64 with a portable Box-Muller normal
/// (std::normal_distribution is implementation-defined).  Child streams are
/// derived by hashing so per-trial seeds do not collide.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    double uniform() {
        // 53-bit mantissa uniform in [0,1)
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) { // inclusive bounds
        return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    double normal() {
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    RandomStream derive(std::uint64_t salt) const {
        // splitmix64 step on (seed ^ salt)
        std::uint64_t z = seed_mix_ + salt * 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return RandomStream(z ^ (z >> 31));
    }

    std::uint64_t raw() { return gen_(); }

  private:
    explicit RandomStream(std::uint64_t seed, int) : gen_(seed) {}
    std::mt19937_64 gen_;
    std::uint64_t seed_mix_ = gen_();
};

/// Mean-zero real scalar field with independent Gaussian coefficients on all
/// modes 1 <= |k| <= kmax (integer lattice units), conjugate-symmetrized.
template <typename S = double>
ScalarFieldT<S> random_band_limited_scalar(const GridSpec& g, int kmax, RandomStream& rng,
                                           double amplitude = 1.0) {
    FreqTable ft(g);
    detail::ComplexArray<S> spec =
        detail::ComplexArray<S>::Zero(static_cast<Eigen::Index>(g.points()));
    const long kmax2 = static_cast<long>(kmax) * kmax;
    for (std::size_t flat = 1; flat < g.points(); ++flat) {
        const long k2 = ft.freq_norm2(flat);
        if (k2 == 0 || k2 > kmax2 || ft.on_nyquist(flat)) continue;
        spec[static_cast<Eigen::Index>(flat)] =
            std::complex<S>(static_cast<S>(rng.normal()), static_cast<S>(rng.normal()));
    }
    // enforce conjugate symmetry: f_hat(-k) = conj(f_hat(k))
    detail::ComplexArray<S> sym = spec;
    for (std::size_t flat = 1; flat < g.points(); ++flat) {
        auto idx = g.unflatten(flat);
        std::array<int, 3> neg{0, 0, 0};
        for (int a = 0; a < g.n; ++a) neg[a] = (g.N - idx[a]) % g.N;
        const std::size_t nf = g.flatten(neg);
        sym[static_cast<Eigen::Index>(flat)] =
            S(0.5) * (spec[static_cast<Eigen::Index>(flat)] +
                      std::conj(spec[static_cast<Eigen::Index>(nf)]));
    }
    ScalarFieldT<S> f = ScalarFieldT<S>::from_spectral(g, std::move(sym));
    const S nrm = lp_norm(f, 2.0);
    if (nrm > 0) f = f * static_cast<S>(amplitude / nrm);
    return f;
}

template <typename S = double>
VectorFieldT<S> random_band_limited_vector(const GridSpec& g, int kmax, RandomStream& rng,
                                           double amplitude = 1.0) {
    std::vector<ScalarFieldT<S>> comps;
    for (int a = 0; a < g.n; ++a)
        comps.push_back(random_band_limited_scalar<S>(g, kmax, rng, amplitude));
    return VectorFieldT<S>(g, std::move(comps));
}

} // namespace lagns
