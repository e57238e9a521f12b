#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "lagns/errors.hpp"

namespace lagns {

/// Uniform periodic grid on the torus [0,L)^n.
///
/// Physical points are x_a = i_a * L/N, i_a in 0..N-1, stored row-major
/// (axis 0 slowest).  The spectral lattice uses integer frequencies
/// k_a in {-N/2, ..., N/2-1} in FFT order; physical wavenumbers carry the
/// factor 2*pi/L.
struct GridSpec {
    int n = 2;            ///< spatial dimension, 2 or 3
    int N = 32;           ///< points per axis, power of two, >= 8
    double L = 2.0 * std::numbers::pi;

    GridSpec() = default;
    GridSpec(int n_, int N_, double L_ = 2.0 * std::numbers::pi) : n(n_), N(N_), L(L_) {
        validate();
    }

    void validate() const {
        if (n != 2 && n != 3)
            throw UnsupportedDimension("GridSpec: n must be 2 or 3, got " + std::to_string(n));
        if (N < 8 || (N & (N - 1)) != 0)
            throw ValidationError("GridSpec: N must be a power of two >= 8, got " +
                                  std::to_string(N));
        if (!(L > 0.0))
            throw ValidationError("GridSpec: L must be positive");
    }

    std::size_t points() const {
        std::size_t p = 1;
        for (int a = 0; a < n; ++a) p *= static_cast<std::size_t>(N);
        return p;
    }

    double spacing() const { return L / N; }
    double volume() const { return std::pow(L, n); }

    /// Base physical wavenumber 2*pi/L.
    double k_unit() const { return 2.0 * std::numbers::pi / L; }

    /// Integer frequency of spectral index i along one axis (FFT order).
    int freq_int(int i) const { return i < N / 2 ? i : i - N; }

    /// Decompose a flat row-major index into per-axis indices.
    std::array<int, 3> unflatten(std::size_t flat) const {
        std::array<int, 3> idx{0, 0, 0};
        for (int a = n - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(flat % N);
            flat /= N;
        }
        return idx;
    }

    std::size_t flatten(const std::array<int, 3>& idx) const {
        std::size_t flat = 0;
        for (int a = 0; a < n; ++a)
            flat = flat * N + static_cast<std::size_t>((idx[a] % N + N) % N);
        return flat;
    }

    /// Physical coordinates of a flat index.
    std::array<double, 3> point(std::size_t flat) const {
        auto idx = unflatten(flat);
        std::array<double, 3> x{0.0, 0.0, 0.0};
        for (int a = 0; a < n; ++a) x[a] = idx[a] * spacing();
        return x;
    }

    /// Largest per-axis integer frequency retained by the 2/3 dealiasing rule.
    int dealias_limit() const { return N / 3; }

    bool operator==(const GridSpec& o) const { return n == o.n && N == o.N && L == o.L; }
    bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

/// Per-mode integer frequency data for a grid, built on demand where hot.
struct FreqTable {
    const GridSpec grid;
    explicit FreqTable(const GridSpec& g) : grid(g) {}

    /// Integer frequency vector of a flat spectral index.
    std::array<int, 3> freq(std::size_t flat) const {
        auto idx = grid.unflatten(flat);
        std::array<int, 3> k{0, 0, 0};
        for (int a = 0; a < grid.n; ++a) k[a] = grid.freq_int(idx[a]);
        return k;
    }

    /// |k|^2 in integer lattice units.
    long freq_norm2(std::size_t flat) const {
        auto k = freq(flat);
        long s = 0;
        for (int a = 0; a < grid.n; ++a) s += static_cast<long>(k[a]) * k[a];
        return s;
    }

    /// True if any axis sits on the unpaired Nyquist plane k_a = -N/2.
    bool on_nyquist(std::size_t flat) const {
        auto k = freq(flat);
        for (int a = 0; a < grid.n; ++a)
            if (k[a] == -grid.N / 2) return true;
        return false;
    }
};

} // namespace lagns
