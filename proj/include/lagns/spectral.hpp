#pragma once

#include <cmath>
#include <limits>

#include "lagns/field.hpp"

namespace lagns {

// ---------------------------------------------------------------------------
// Spectral derivatives
// ---------------------------------------------------------------------------

/// d f / d x_axis by multiplying coefficients with i*k_axis.  The unpaired
/// Nyquist plane is zeroed to keep the result conjugate-symmetric.
template <typename S>
ScalarFieldT<S> derivative(const ScalarFieldT<S>& f, int axis) {
    const GridSpec& g = f.grid();
    const double ku = g.k_unit();
    detail::ComplexArray<S> out(f.spectrum().size());
    const auto& in = f.spectrum();
    for (std::size_t flat = 0; flat < g.points(); ++flat) {
        auto idx = g.unflatten(flat);
        int k = g.freq_int(idx[axis]);
        if (k == -g.N / 2) k = 0;
        out[static_cast<Eigen::Index>(flat)] =
            in[static_cast<Eigen::Index>(flat)] * std::complex<S>(0, static_cast<S>(k * ku));
    }
    return ScalarFieldT<S>::from_spectral(g, std::move(out));
}

template <typename S>
VectorFieldT<S> gradient(const ScalarFieldT<S>& f) {
    std::vector<ScalarFieldT<S>> c;
    for (int a = 0; a < f.grid().n; ++a) c.push_back(derivative(f, a));
    return VectorFieldT<S>(f.grid(), std::move(c));
}

template <typename S>
ScalarFieldT<S> divergence(const VectorFieldT<S>& v) {
    ScalarFieldT<S> d = derivative(v[0], 0);
    for (int a = 1; a < v.grid().n; ++a) d = d + derivative(v[a], a);
    return d;
}

/// Jacobian: entry (i,j) is d v^i / d x_j.
template <typename S>
MatrixFieldT<S> jacobian(const VectorFieldT<S>& v) {
    const int n = v.grid().n;
    std::vector<ScalarFieldT<S>> c;
    c.reserve(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) c.push_back(derivative(v[i], j));
    return MatrixFieldT<S>(v.grid(), std::move(c));
}

/// Gradient of a vector field, (grad u)_{ij} = d u^j / d x_i  (= (Du)^T).
template <typename S>
MatrixFieldT<S> grad_vector(const VectorFieldT<S>& u) {
    return jacobian(u).transpose();
}

/// Row divergence of a matrix field: (div M)_j = sum_i d M_{ij} / d x_i.
template <typename S>
VectorFieldT<S> divergence(const MatrixFieldT<S>& M) {
    const int n = M.grid().n;
    std::vector<ScalarFieldT<S>> c;
    for (int j = 0; j < n; ++j) {
        ScalarFieldT<S> d = derivative(M(0, j), 0);
        for (int i = 1; i < n; ++i) d = d + derivative(M(i, j), i);
        c.push_back(std::move(d));
    }
    return VectorFieldT<S>(M.grid(), std::move(c));
}

template <typename S>
ScalarFieldT<S> trace(const MatrixFieldT<S>& M) {
    ScalarFieldT<S> t = M(0, 0);
    for (int i = 1; i < M.grid().n; ++i) t = t + M(i, i);
    return t;
}

template <typename S>
ScalarFieldT<S> laplacian(const ScalarFieldT<S>& f) {
    const GridSpec& g = f.grid();
    const double ku2 = g.k_unit() * g.k_unit();
    FreqTable ft(g);
    detail::ComplexArray<S> out(f.spectrum().size());
    const auto& in = f.spectrum();
    for (std::size_t flat = 0; flat < g.points(); ++flat)
        out[static_cast<Eigen::Index>(flat)] =
            in[static_cast<Eigen::Index>(flat)] * static_cast<S>(-ku2 * ft.freq_norm2(flat));
    return ScalarFieldT<S>::from_spectral(g, std::move(out));
}

template <typename S>
VectorFieldT<S> laplacian(const VectorFieldT<S>& v) {
    std::vector<ScalarFieldT<S>> c;
    for (int a = 0; a < v.grid().n; ++a) c.push_back(laplacian(v[a]));
    return VectorFieldT<S>(v.grid(), std::move(c));
}

/// Hessian of a scalar field, entry (i,j) = d^2 f / dx_i dx_j.
template <typename S>
MatrixFieldT<S> hessian(const ScalarFieldT<S>& f) {
    const int n = f.grid().n;
    std::vector<ScalarFieldT<S>> c;
    for (int i = 0; i < n; ++i) {
        ScalarFieldT<S> di = derivative(f, i);
        for (int j = 0; j < n; ++j) c.push_back(derivative(di, j));
    }
    return MatrixFieldT<S>(f.grid(), std::move(c));
}

/// Mean-zero solution of Laplace(g) = f.  The zero mode of the result is zero.
template <typename S>
ScalarFieldT<S> inverse_laplacian(const ScalarFieldT<S>& f) {
    const GridSpec& g = f.grid();
    const auto& in = f.spectrum();
    const S l2 = static_cast<S>(
        std::sqrt(g.volume() * in.abs2().sum()));
    if (std::abs(in[0]) > S(1e-10) * std::max(l2, std::numeric_limits<S>::min()))
        throw NonZeroMean("inverse_laplacian: datum has nonzero mean " +
                          std::to_string(std::abs(in[0])));
    const double ku2 = g.k_unit() * g.k_unit();
    FreqTable ft(g);
    detail::ComplexArray<S> out(in.size());
    out[0] = std::complex<S>(0, 0);
    for (std::size_t flat = 1; flat < g.points(); ++flat) {
        const long k2 = ft.freq_norm2(flat);
        out[static_cast<Eigen::Index>(flat)] =
            k2 == 0 ? std::complex<S>(0, 0)
                    : in[static_cast<Eigen::Index>(flat)] / static_cast<S>(-ku2 * k2);
    }
    return ScalarFieldT<S>::from_spectral(g, std::move(out));
}

// ---------------------------------------------------------------------------
// Dealiased pointwise products (3/2-rule zero padding)
// ---------------------------------------------------------------------------

/// A field realized on the padded 3N/2 grid, ready for alias-free products.
template <typename S> struct Padded {
    GridSpec grid;
    int M = 0;
    detail::RealArray<S> values;
};

template <typename S>
Padded<S> pad(const ScalarFieldT<S>& f) {
    const int M = detail::padded_size(f.grid());
    return Padded<S>{f.grid(), M, detail::padded_physical<S>(f.grid(), f.spectrum(), M)};
}

template <typename S>
ScalarFieldT<S> unpad(const GridSpec& g, const detail::RealArray<S>& prod) {
    return ScalarFieldT<S>::from_spectral(g, detail::padded_spectrum<S>(g, prod, detail::padded_size(g)));
}

/// Dealiased pointwise product of two scalar fields.
template <typename S>
ScalarFieldT<S> multiply(const ScalarFieldT<S>& a, const ScalarFieldT<S>& b) {
    if (a.grid() != b.grid()) throw ValidationError("multiply: grids differ");
    Padded<S> pa = pad(a), pb = pad(b);
    return unpad<S>(a.grid(), detail::RealArray<S>(pa.values * pb.values));
}

/// Dealiased M v (matrix field times vector field).
template <typename S>
VectorFieldT<S> multiply(const MatrixFieldT<S>& M, const VectorFieldT<S>& v) {
    const GridSpec& g = M.grid();
    const int n = g.n;
    std::vector<Padded<S>> pm, pv;
    for (auto& c : M.components()) pm.push_back(pad(c));
    for (auto& c : v.components()) pv.push_back(pad(c));
    std::vector<ScalarFieldT<S>> out;
    for (int i = 0; i < n; ++i) {
        detail::RealArray<S> acc = pm[i * n] .values * pv[0].values;
        for (int j = 1; j < n; ++j) acc += pm[i * n + j].values * pv[j].values;
        out.push_back(unpad<S>(g, acc));
    }
    return VectorFieldT<S>(g, std::move(out));
}

/// Dealiased A B (matrix times matrix).
template <typename S>
MatrixFieldT<S> multiply(const MatrixFieldT<S>& A, const MatrixFieldT<S>& B) {
    const GridSpec& g = A.grid();
    const int n = g.n;
    std::vector<Padded<S>> pa, pb;
    for (auto& c : A.components()) pa.push_back(pad(c));
    for (auto& c : B.components()) pb.push_back(pad(c));
    std::vector<ScalarFieldT<S>> out;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            detail::RealArray<S> acc = pa[i * n].values * pb[j].values;
            for (int k = 1; k < n; ++k) acc += pa[i * n + k].values * pb[k * n + j].values;
            out.push_back(unpad<S>(g, acc));
        }
    return MatrixFieldT<S>(g, std::move(out));
}

/// Dealiased scalar * vector.
template <typename S>
VectorFieldT<S> multiply(const ScalarFieldT<S>& a, const VectorFieldT<S>& v) {
    Padded<S> pa = pad(a);
    std::vector<ScalarFieldT<S>> out;
    for (auto& c : v.components())
        out.push_back(unpad<S>(v.grid(), detail::RealArray<S>(pa.values * pad(c).values)));
    return VectorFieldT<S>(v.grid(), std::move(out));
}

/// Dealiased matrix contraction A:B = sum_{ij} A_{ij} B_{ji}.
template <typename S>
ScalarFieldT<S> contract(const MatrixFieldT<S>& A, const MatrixFieldT<S>& B) {
    const GridSpec& g = A.grid();
    const int n = g.n;
    detail::RealArray<S> acc;
    bool first = true;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            detail::RealArray<S> term = pad(A(i, j)).values * pad(B(j, i)).values;
            if (first) { acc = std::move(term); first = false; }
            else acc += term;
        }
    return unpad<S>(g, acc);
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

/// Pointwise Euclidean magnitude over a set of components.
template <typename S>
detail::RealArray<S> magnitude_values(const std::vector<const ScalarFieldT<S>*>& comps) {
    detail::RealArray<S> m = comps[0]->values().square();
    for (std::size_t i = 1; i < comps.size(); ++i) m += comps[i]->values().square();
    return m.sqrt();
}

/// L_p norm by uniform-grid quadrature; exact max for p = infinity.
template <typename S>
S lp_norm_values(const GridSpec& g, const detail::RealArray<S>& absvals, double p) {
    if (std::isinf(p)) return absvals.maxCoeff();
    if (p < 1.0) throw ValidationError("lp_norm: p must be in [1, inf]");
    const double hn = std::pow(g.spacing(), g.n);
    if (p == 2.0) return static_cast<S>(std::sqrt(hn * absvals.square().sum()));
    if (p == 1.0) return static_cast<S>(hn * absvals.sum());
    return static_cast<S>(std::pow(hn * absvals.pow(p).sum(), 1.0 / p));
}

template <typename S>
S lp_norm(const ScalarFieldT<S>& f, double p) {
    return lp_norm_values(f.grid(), detail::RealArray<S>(f.values().abs()), p);
}

template <typename S>
S lp_norm(const VectorFieldT<S>& v, double p) {
    std::vector<const ScalarFieldT<S>*> comps;
    for (auto& c : v.components()) comps.push_back(&c);
    return lp_norm_values(v.grid(), magnitude_values(comps), p);
}

template <typename S>
S lp_norm(const MatrixFieldT<S>& M, double p) {
    std::vector<const ScalarFieldT<S>*> comps;
    for (auto& c : M.components()) comps.push_back(&c);
    return lp_norm_values(M.grid(), magnitude_values(comps), p);
}

/// L_2 norm evaluated from spectral coefficients (Parseval route).
template <typename S>
S spectral_l2_norm(const ScalarFieldT<S>& f) {
    return static_cast<S>(std::sqrt(f.grid().volume() * f.spectrum().abs2().sum()));
}

template <typename S> S sup_norm(const ScalarFieldT<S>& f) { return lp_norm(f, std::numeric_limits<double>::infinity()); }
template <typename S> S sup_norm(const VectorFieldT<S>& v) { return lp_norm(v, std::numeric_limits<double>::infinity()); }

/// Max over grid points of the pointwise operator 2-norm of a matrix field.
template <typename S>
S matrix_sup_norm(const MatrixFieldT<S>& M) {
    const GridSpec& g = M.grid();
    const int n = g.n;
    std::vector<const detail::RealArray<S>*> comp;
    for (auto& c : M.components()) comp.push_back(&c.values());
    S best = 0;
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> A(n, n);
    for (std::size_t pt = 0; pt < g.points(); ++pt) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = (*comp[i * n + j])[static_cast<Eigen::Index>(pt)];
        if (n == 2) {
            // closed-form largest singular value of a 2x2 matrix
            const S fro2 = A.squaredNorm();
            const S det = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
            const S disc = std::sqrt(std::max(S(0), fro2 * fro2 - 4 * det * det));
            best = std::max(best, std::sqrt(S(0.5) * (fro2 + disc)));
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix<S, 3, 3>> es(
                (A.transpose() * A).template topLeftCorner<3, 3>(), Eigen::EigenvaluesOnly);
            best = std::max(best, std::sqrt(std::max(S(0), es.eigenvalues().maxCoeff())));
        }
    }
    return best;
}

} // namespace lagns
