#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "lagns/grid.hpp"
#include "lagns/grid_cache.hpp"

namespace lagns::detail {

template <typename S> using RealArray = Eigen::Array<S, Eigen::Dynamic, 1>;
template <typename S> using ComplexArray = Eigen::Array<std::complex<S>, Eigen::Dynamic, 1>;

template <typename S> Eigen::FFT<S>& fft_engine() {
    static thread_local Eigen::FFT<S> engine;
    return engine;
}

/// In-place unnormalized c2c transform along every axis of a row-major
/// N^n array.  forward = exp(-ikx) sums; inverse = conjugated forward,
/// with the conjugations fused into the first and last axis passes.
template <typename S>
void fft_all_axes(ComplexArray<S>& data, int n, int N, bool forward) {
    auto& engine = fft_engine<S>();
    std::vector<std::complex<S>> line(static_cast<std::size_t>(N)), out(static_cast<std::size_t>(N));
    const std::size_t total = data.size();
    for (int axis = n - 1; axis >= 0; --axis) {
        const bool conj_in = !forward && axis == n - 1;
        const bool conj_out = !forward && axis == 0;
        std::size_t stride = 1;
        for (int a = axis + 1; a < n; ++a) stride *= static_cast<std::size_t>(N);
        const std::size_t block = stride * static_cast<std::size_t>(N);
        for (std::size_t hi = 0; hi < total; hi += block) {
            for (std::size_t lo = 0; lo < stride; ++lo) {
                const std::size_t base = hi + lo;
                if (stride == 1 && !conj_in) {
                    engine.fwd(out.data(), &data[base], N);
                } else {
                    for (int j = 0; j < N; ++j) {
                        const auto v = data[base + j * stride];
                        line[j] = conj_in ? std::conj(v) : v;
                    }
                    engine.fwd(out.data(), line.data(), N);
                }
                for (int j = 0; j < N; ++j)
                    data[base + j * stride] = conj_out ? std::conj(out[j]) : out[j];
            }
        }
    }
}

/// Physical values -> Fourier coefficients f_hat with f(x) = sum_k f_hat(k) e^{ik.x}.
template <typename S>
ComplexArray<S> forward_transform(const GridSpec& g, const RealArray<S>& phys) {
    ComplexArray<S> spec(phys.size());
    for (Eigen::Index i = 0; i < phys.size(); ++i) spec[i] = std::complex<S>(phys[i], S(0));
    fft_all_axes(spec, g.n, g.N, true);
    spec *= S(1) / static_cast<S>(g.points());
    return spec;
}

/// Fourier coefficients -> physical values (real part; imaginary residue of a
/// conjugate-symmetric spectrum is roundoff).
template <typename S>
RealArray<S> inverse_transform(const GridSpec& g, const ComplexArray<S>& spec) {
    ComplexArray<S> work = spec;
    fft_all_axes(work, g.n, g.N, false);
    return work.real();
}

/// Embed an N-grid spectrum into the padded M-grid (M = 3N/2), zeroing the
/// unpaired Nyquist plane.  Products of two N-grid fields evaluated on the
/// padded grid are alias-free on every retained mode |k_a| <= N/2 - 1.
template <typename S>
ComplexArray<S> pad_spectrum(const GridSpec& g, const ComplexArray<S>& spec, int M) {
    std::size_t mpoints = 1;
    for (int a = 0; a < g.n; ++a) mpoints *= static_cast<std::size_t>(M);
    ComplexArray<S> out = ComplexArray<S>::Zero(static_cast<Eigen::Index>(mpoints));
    const auto& map = grid_tables(g).pad_map;
    const std::size_t total = spec.size();
    for (std::size_t flat = 0; flat < total; ++flat)
        if (map[flat] >= 0)
            out[static_cast<Eigen::Index>(map[flat])] = spec[static_cast<Eigen::Index>(flat)];
    return out;
}

/// Truncate a padded M-grid spectrum back to the N-grid (Nyquist plane zeroed).
template <typename S>
ComplexArray<S> truncate_spectrum(const GridSpec& g, const ComplexArray<S>& specM, int M) {
    ComplexArray<S> out = ComplexArray<S>::Zero(static_cast<Eigen::Index>(g.points()));
    const auto& map = grid_tables(g).pad_map;
    const std::size_t total = out.size();
    for (std::size_t flat = 0; flat < total; ++flat)
        if (map[flat] >= 0)
            out[static_cast<Eigen::Index>(flat)] = specM[static_cast<Eigen::Index>(map[flat])];
    return out;
}

/// Padded-grid physical values of an N-grid spectrum.
template <typename S>
RealArray<S> padded_physical(const GridSpec& g, const ComplexArray<S>& spec, int M) {
    ComplexArray<S> big = pad_spectrum(g, spec, M);
    fft_all_axes(big, g.n, M, false);
    return big.real();
}

/// Forward transform on the padded grid, truncated to the N-grid spectrum.
template <typename S>
ComplexArray<S> padded_spectrum(const GridSpec& g, const RealArray<S>& physM, int M) {
    ComplexArray<S> big(physM.size());
    for (Eigen::Index i = 0; i < physM.size(); ++i) big[i] = std::complex<S>(physM[i], S(0));
    fft_all_axes(big, g.n, M, true);
    std::size_t mpoints = 1;
    for (int a = 0; a < g.n; ++a) mpoints *= static_cast<std::size_t>(M);
    big *= S(1) / static_cast<S>(mpoints);
    return truncate_spectrum(g, big, M);
}

inline int padded_size(const GridSpec& g) { return 3 * g.N / 2; }

} // namespace lagns::detail
