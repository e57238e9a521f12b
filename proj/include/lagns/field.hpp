#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "lagns/transform.hpp"

namespace lagns {

namespace detail {

/// Shared immutable storage holding either representation of a field;
/// the missing one is materialized once, thread-safely, on first access.
template <typename S> struct FieldStorage {
    GridSpec grid;
    mutable std::once_flag phys_once, spec_once;
    mutable std::optional<RealArray<S>> phys;
    mutable std::optional<ComplexArray<S>> spec;

    const RealArray<S>& physical() const {
        std::call_once(phys_once, [this] {
            if (!phys) phys = inverse_transform<S>(grid, *spec);
        });
        return *phys;
    }

    const ComplexArray<S>& spectral() const {
        std::call_once(spec_once, [this] {
            if (!spec) spec = forward_transform<S>(grid, *phys);
        });
        return *spec;
    }
};

} // namespace detail

/// Real scalar field on a periodic grid.  Immutable after construction;
/// copies share storage.
template <typename S> class ScalarFieldT {
  public:
    using Real = S;
    using RealArray = detail::RealArray<S>;
    using ComplexArray = detail::ComplexArray<S>;

    ScalarFieldT() = default;

    static ScalarFieldT from_physical(const GridSpec& g, RealArray values) {
        check_size(g, values.size());
        auto st = std::make_shared<detail::FieldStorage<S>>();
        st->grid = g;
        st->phys = std::move(values);
        return ScalarFieldT(std::move(st));
    }

    static ScalarFieldT from_spectral(const GridSpec& g, ComplexArray coeffs) {
        check_size(g, coeffs.size());
        auto st = std::make_shared<detail::FieldStorage<S>>();
        st->grid = g;
        st->spec = std::move(coeffs);
        return ScalarFieldT(std::move(st));
    }

    template <typename F> static ScalarFieldT from_function(const GridSpec& g, F&& f) {
        RealArray v(static_cast<Eigen::Index>(g.points()));
        for (std::size_t i = 0; i < g.points(); ++i)
            v[static_cast<Eigen::Index>(i)] = f(g.point(i));
        return from_physical(g, std::move(v));
    }

    static ScalarFieldT zero(const GridSpec& g) {
        return from_physical(g, RealArray::Zero(static_cast<Eigen::Index>(g.points())));
    }

    static ScalarFieldT constant(const GridSpec& g, S c) {
        return from_physical(g, RealArray::Constant(static_cast<Eigen::Index>(g.points()), c));
    }

    bool valid() const { return static_cast<bool>(st_); }
    const GridSpec& grid() const { return st_->grid; }
    const RealArray& values() const { return st_->physical(); }
    const ComplexArray& spectrum() const { return st_->spectral(); }

    S mean() const { return values().mean(); }

    ScalarFieldT operator+(const ScalarFieldT& o) const { return combine(o, S(1)); }
    ScalarFieldT operator-(const ScalarFieldT& o) const { return combine(o, S(-1)); }
    ScalarFieldT operator*(S a) const {
        return from_physical(grid(), RealArray(values() * a));
    }
    friend ScalarFieldT operator*(S a, const ScalarFieldT& f) { return f * a; }

  private:
    explicit ScalarFieldT(std::shared_ptr<detail::FieldStorage<S>> st) : st_(std::move(st)) {}

    static void check_size(const GridSpec& g, Eigen::Index size) {
        g.validate();
        if (static_cast<std::size_t>(size) != g.points())
            throw ValidationError("field data size does not match grid");
    }

    ScalarFieldT combine(const ScalarFieldT& o, S sign) const {
        if (grid() != o.grid()) throw ValidationError("field grids differ");
        // Stay in whichever representation both operands already have.
        if (st_->spec && o.st_->spec && !(st_->phys && o.st_->phys))
            return from_spectral(grid(), ComplexArray(spectrum() + sign * o.spectrum()));
        return from_physical(grid(), RealArray(values() + sign * o.values()));
    }

    std::shared_ptr<detail::FieldStorage<S>> st_;
};

/// Vector field: n scalar components.
template <typename S> class VectorFieldT {
  public:
    VectorFieldT() = default;
    VectorFieldT(const GridSpec& g, std::vector<ScalarFieldT<S>> comps)
        : grid_(g), comps_(std::move(comps)) {
        if (static_cast<int>(comps_.size()) != g.n)
            throw ValidationError("vector field needs n components");
    }

    static VectorFieldT zero(const GridSpec& g) {
        std::vector<ScalarFieldT<S>> c(g.n, ScalarFieldT<S>::zero(g));
        return VectorFieldT(g, std::move(c));
    }

    template <typename F> static VectorFieldT from_function(const GridSpec& g, F&& f) {
        std::vector<ScalarFieldT<S>> c;
        c.reserve(g.n);
        for (int a = 0; a < g.n; ++a)
            c.push_back(ScalarFieldT<S>::from_function(
                g, [&f, a](const std::array<double, 3>& x) { return f(x)[a]; }));
        return VectorFieldT(g, std::move(c));
    }

    bool valid() const { return !comps_.empty(); }
    const GridSpec& grid() const { return grid_; }
    const ScalarFieldT<S>& operator[](int a) const { return comps_[a]; }
    const std::vector<ScalarFieldT<S>>& components() const { return comps_; }

    VectorFieldT operator+(const VectorFieldT& o) const {
        std::vector<ScalarFieldT<S>> c;
        for (int a = 0; a < grid_.n; ++a) c.push_back(comps_[a] + o.comps_[a]);
        return VectorFieldT(grid_, std::move(c));
    }
    VectorFieldT operator-(const VectorFieldT& o) const {
        std::vector<ScalarFieldT<S>> c;
        for (int a = 0; a < grid_.n; ++a) c.push_back(comps_[a] - o.comps_[a]);
        return VectorFieldT(grid_, std::move(c));
    }
    VectorFieldT operator*(S s) const {
        std::vector<ScalarFieldT<S>> c;
        for (int a = 0; a < grid_.n; ++a) c.push_back(comps_[a] * s);
        return VectorFieldT(grid_, std::move(c));
    }
    friend VectorFieldT operator*(S s, const VectorFieldT& v) { return v * s; }

  private:
    GridSpec grid_;
    std::vector<ScalarFieldT<S>> comps_;
};

/// Matrix field: n x n scalar components, row-major.  Entry (i,j) of a
/// Jacobian D X is d X^i / d x_j.
template <typename S> class MatrixFieldT {
  public:
    MatrixFieldT() = default;
    MatrixFieldT(const GridSpec& g, std::vector<ScalarFieldT<S>> comps)
        : grid_(g), comps_(std::move(comps)) {
        if (static_cast<int>(comps_.size()) != g.n * g.n)
            throw ValidationError("matrix field needs n*n components");
    }

    static MatrixFieldT zero(const GridSpec& g) {
        std::vector<ScalarFieldT<S>> c(g.n * g.n, ScalarFieldT<S>::zero(g));
        return MatrixFieldT(g, std::move(c));
    }

    static MatrixFieldT identity(const GridSpec& g) {
        std::vector<ScalarFieldT<S>> c;
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                c.push_back(i == j ? ScalarFieldT<S>::constant(g, S(1)) : ScalarFieldT<S>::zero(g));
        return MatrixFieldT(g, std::move(c));
    }

    bool valid() const { return !comps_.empty(); }
    const GridSpec& grid() const { return grid_; }
    const ScalarFieldT<S>& operator()(int i, int j) const { return comps_[i * grid_.n + j]; }
    const std::vector<ScalarFieldT<S>>& components() const { return comps_; }

    MatrixFieldT operator+(const MatrixFieldT& o) const {
        std::vector<ScalarFieldT<S>> c;
        for (std::size_t i = 0; i < comps_.size(); ++i) c.push_back(comps_[i] + o.comps_[i]);
        return MatrixFieldT(grid_, std::move(c));
    }
    MatrixFieldT operator-(const MatrixFieldT& o) const {
        std::vector<ScalarFieldT<S>> c;
        for (std::size_t i = 0; i < comps_.size(); ++i) c.push_back(comps_[i] - o.comps_[i]);
        return MatrixFieldT(grid_, std::move(c));
    }
    MatrixFieldT operator*(S s) const {
        std::vector<ScalarFieldT<S>> c;
        for (auto& f : comps_) c.push_back(f * s);
        return MatrixFieldT(grid_, std::move(c));
    }

    MatrixFieldT transpose() const {
        std::vector<ScalarFieldT<S>> c;
        for (int i = 0; i < grid_.n; ++i)
            for (int j = 0; j < grid_.n; ++j) c.push_back((*this)(j, i));
        return MatrixFieldT(grid_, std::move(c));
    }

  private:
    GridSpec grid_;
    std::vector<ScalarFieldT<S>> comps_;
};

using ScalarField = ScalarFieldT<double>;
using VectorField = VectorFieldT<double>;
using MatrixField = MatrixFieldT<double>;

} // namespace lagns
