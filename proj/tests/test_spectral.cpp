#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <lagns/random.hpp>
#include <lagns/spectral.hpp>

using namespace lagns;

namespace {

// Centered second-order finite differences, the independent oracle for the
// spectral derivative operators.
ScalarField fd_derivative(const ScalarField& f, int axis) {
    const GridSpec& g = f.grid();
    const double h = g.spacing();
    Eigen::ArrayXd out(f.values().size());
    for (std::size_t flat = 0; flat < g.points(); ++flat) {
        auto up = g.unflatten(flat);
        auto dn = up;
        up[axis] += 1;
        dn[axis] -= 1;
        out[static_cast<Eigen::Index>(flat)] =
            (f.values()[static_cast<Eigen::Index>(g.flatten(up))] -
             f.values()[static_cast<Eigen::Index>(g.flatten(dn))]) /
            (2.0 * h);
    }
    return ScalarField::from_physical(g, std::move(out));
}

double rel_err(const ScalarField& a, const ScalarField& b) {
    return lp_norm(a - b, 2.0) / std::max(lp_norm(b, 2.0), 1e-300);
}

// The same low-frequency test function sampled on any grid.
double smooth_probe(const std::array<double, 3>& x) {
    return std::sin(2 * x[0]) * std::cos(x[1]) + 0.3 * std::cos(3 * x[0] + x[1]);
}

} // namespace

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(GridSpec(4, 32), UnsupportedDimension);
    CHECK_THROWS_AS(GridSpec(2, 12), ValidationError);
    CHECK_THROWS_AS(GridSpec(2, 4), ValidationError);
    GridSpec g(2, 32);
    CHECK(g.points() == 1024);
    CHECK(g.freq_int(0) == 0);
    CHECK(g.freq_int(16) == -16);
    CHECK(g.freq_int(31) == -1);
}

TEST_CASE("transform round trip is 1e-12 accurate") {
    for (int n : {2, 3}) {
        GridSpec g(n, 16);
        RandomStream rng(7 + n);
        Eigen::ArrayXd vals(g.points());
        for (Eigen::Index i = 0; i < vals.size(); ++i) vals[i] = rng.normal();
        auto f = ScalarField::from_physical(g, vals);
        auto back = ScalarField::from_spectral(g, Eigen::ArrayXcd(f.spectrum()));
        CHECK(((back.values() - vals).abs().maxCoeff() / vals.abs().maxCoeff()) < 1e-12);
    }
}

TEST_CASE("gradient of constant is zero") {
    GridSpec g(2, 32);
    auto f = ScalarField::constant(g, 3.25);
    auto gr = gradient(f);
    CHECK(sup_norm(gr) < 1e-14);
}

TEST_CASE("gradient of sin(x1) is (cos(x1), 0)") {
    GridSpec g(2, 32);
    auto f = ScalarField::from_function(g, [](const std::array<double, 3>& x) { return std::sin(x[0]); });
    auto gr = gradient(f);
    auto c0 = ScalarField::from_function(g, [](const std::array<double, 3>& x) { return std::cos(x[0]); });
    CHECK(sup_norm(gr[0] - c0) < 1e-12);
    CHECK(sup_norm(gr[1]) < 1e-12);
}

TEST_CASE("spectral derivatives match finite differences at O(h^2)") {
    // fixed band-limited field; FD error must shrink ~4x per refinement
    double prev = -1.0;
    for (int N : {32, 64, 128}) {
        GridSpec g(2, N);
        auto f = ScalarField::from_function(g, smooth_probe);
        double err = rel_err(fd_derivative(f, 0), derivative(f, 0));
        if (prev > 0) {
            CHECK(err < prev / 3.0);
            CHECK(err > prev / 6.0);
        }
        prev = err;
    }
}

TEST_CASE("divergence examples") {
    GridSpec g(2, 32);
    auto v = VectorField::from_function(g, [](const std::array<double, 3>& x) {
        return std::array<double, 3>{std::cos(x[1]), std::sin(x[0]), 0.0};
    });
    CHECK(sup_norm(divergence(v)) < 1e-12);

    auto f = ScalarField::from_function(g, smooth_probe);
    CHECK(rel_err(divergence(gradient(f)), laplacian(f)) < 1e-12);

    RandomStream rng(11);
    double prev = -1.0;
    for (int N : {32, 64, 128}) {
        GridSpec gn(2, N);
        auto w = VectorField::from_function(gn, [](const std::array<double, 3>& x) {
            return std::array<double, 3>{smooth_probe(x), std::cos(2 * x[1]) * std::sin(x[0]), 0.0};
        });
        ScalarField fd = fd_derivative(w[0], 0) + fd_derivative(w[1], 1);
        double err = rel_err(fd, divergence(w));
        if (prev > 0) CHECK(err < prev / 3.0);
        prev = err;
    }
}

TEST_CASE("jacobian of a shear and trace identity") {
    GridSpec g(2, 32);
    auto v = VectorField::from_function(g, [](const std::array<double, 3>& x) {
        return std::array<double, 3>{std::sin(x[1]), 0.0, 0.0};
    });
    auto J = jacobian(v);
    auto c = ScalarField::from_function(g, [](const std::array<double, 3>& x) { return std::cos(x[1]); });
    CHECK(sup_norm(J(0, 0)) < 1e-12);
    CHECK(sup_norm(J(0, 1) - c) < 1e-12);
    CHECK(sup_norm(J(1, 0)) < 1e-12);
    CHECK(sup_norm(J(1, 1)) < 1e-12);

    RandomStream rng(3);
    auto w = random_band_limited_vector(g, 5, rng);
    CHECK(rel_err(trace(jacobian(w)), divergence(w)) < 1e-12);
}

TEST_CASE("inverse laplacian") {
    GridSpec g(2, 32);
    auto f = ScalarField::from_function(g, [](const std::array<double, 3>& x) { return -std::sin(x[0]); });
    auto s = ScalarField::from_function(g, [](const std::array<double, 3>& x) { return std::sin(x[0]); });
    CHECK(sup_norm(inverse_laplacian(f) - s) < 1e-12);

    RandomStream rng(5);
    auto r = random_band_limited_scalar(g, 6, rng);
    CHECK(rel_err(laplacian(inverse_laplacian(r)), r) < 1e-12);

    CHECK_THROWS_AS(inverse_laplacian(ScalarField::constant(g, 1.0)), NonZeroMean);
}

TEST_CASE("lp norms") {
    GridSpec g(2, 32);
    auto c = ScalarField::constant(g, -2.0);
    const double V = g.volume();
    CHECK(lp_norm(c, 1.0) == doctest::Approx(2.0 * V).epsilon(1e-12));
    CHECK(lp_norm(c, 2.0) == doctest::Approx(2.0 * std::sqrt(V)).epsilon(1e-12));
    CHECK(lp_norm(c, std::numeric_limits<double>::infinity()) == doctest::Approx(2.0));

    auto s = ScalarField::from_function(g, [](const std::array<double, 3>& x) { return std::sin(x[0]); });
    // ||sin x1||_L2 on [0,2pi)^2 = sqrt(2pi^2) = 2pi/sqrt(2)
    CHECK(lp_norm(s, 2.0) == doctest::Approx(2.0 * std::numbers::pi / std::sqrt(2.0)).epsilon(1e-12));

    // p=1 quadrature vs refined grid (Richardson-style oracle)
    RandomStream rng(17);
    auto coarse = random_band_limited_scalar(GridSpec(2, 32), 5, rng);
    ScalarField fine = ScalarField::from_spectral(
        GridSpec(2, 64), [&] {
            GridSpec gf(2, 64);
            Eigen::ArrayXcd spec = Eigen::ArrayXcd::Zero(gf.points());
            GridSpec gc = coarse.grid();
            FreqTable ft(gc);
            for (std::size_t flat = 0; flat < gc.points(); ++flat) {
                auto k = ft.freq(flat);
                spec[static_cast<Eigen::Index>(gf.flatten(
                    {(k[0] % 64 + 64) % 64, (k[1] % 64 + 64) % 64, 0}))] =
                    coarse.spectrum()[static_cast<Eigen::Index>(flat)];
            }
            return spec;
        }());
    CHECK(std::abs(lp_norm(coarse, 1.0) - lp_norm(fine, 1.0)) / lp_norm(fine, 1.0) < 0.01);
}

TEST_CASE("Parseval and operator properties") {
    GridSpec g(2, 64);
    RandomStream rng(23);
    auto f = random_band_limited_scalar(g, 10, rng);
    CHECK(std::abs(lp_norm(f, 2.0) - spectral_l2_norm(f)) / spectral_l2_norm(f) < 1e-10);

    // mixed partials commute
    CHECK(rel_err(derivative(derivative(f, 0), 1), derivative(derivative(f, 1), 0)) < 1e-12);

    // linearity
    auto h = random_band_limited_scalar(g, 10, rng);
    auto lhs = gradient(f * 2.5 + h * (-1.25));
    for (int a = 0; a < 2; ++a) {
        auto rhs = gradient(f)[a] * 2.5 + gradient(h)[a] * (-1.25);
        CHECK(sup_norm(lhs[a] - rhs) < 1e-12 * std::max(1.0, sup_norm(rhs)));
    }
}

TEST_CASE("dealiased product is exact for band-limited factors") {
    GridSpec g(2, 32);
    // product of two single modes: cos(k1.x)cos(k2.x) has exact coefficients
    auto a = ScalarField::from_function(g, [](const std::array<double, 3>& x) { return std::cos(3 * x[0]); });
    auto b = ScalarField::from_function(g, [](const std::array<double, 3>& x) { return std::cos(2 * x[0]); });
    auto ab = multiply(a, b);
    auto exact = ScalarField::from_function(g, [](const std::array<double, 3>& x) {
        return 0.5 * (std::cos(5 * x[0]) + std::cos(x[0]));
    });
    CHECK(sup_norm(ab - exact) < 1e-13);

    // aliasing stress: factors near the dealias limit do not pollute retained modes
    const int klim = g.dealias_limit();
    auto hi = ScalarField::from_function(g, [klim](const std::array<double, 3>& x) { return std::cos(klim * x[0]); });
    auto sq = multiply(hi, hi); // = 1/2 + cos(2*klim x)/2; 2*klim > N/2 is dropped
    auto expect = ScalarField::constant(g, 0.5);
    CHECK(sup_norm(sq - expect) < 1e-13);
}

TEST_CASE("matrix product and contraction conventions") {
    GridSpec g(2, 32);
    // constant matrices: contract(A,B) = sum A_ij B_ji
    auto A = MatrixField(g, {ScalarField::constant(g, 1.0), ScalarField::constant(g, 2.0),
                             ScalarField::constant(g, 3.0), ScalarField::constant(g, 4.0)});
    auto B = MatrixField(g, {ScalarField::constant(g, 5.0), ScalarField::constant(g, 6.0),
                             ScalarField::constant(g, 7.0), ScalarField::constant(g, 8.0)});
    auto tr = contract(A, B);
    // 1*5 + 2*7 + 3*6 + 4*8 = 69
    CHECK(sup_norm(tr - ScalarField::constant(g, 69.0)) < 1e-12);

    auto AB = multiply(A, B);
    CHECK(sup_norm(AB(0, 0) - ScalarField::constant(g, 19.0)) < 1e-12);
    CHECK(sup_norm(AB(1, 1) - ScalarField::constant(g, 50.0)) < 1e-12);

    Eigen::ArrayXd ones = Eigen::ArrayXd::Ones(g.points());
    auto v = VectorField(g, {ScalarField::constant(g, 1.0), ScalarField::constant(g, -1.0)});
    auto Av = multiply(A, v);
    CHECK(sup_norm(Av[0] - ScalarField::constant(g, -1.0)) < 1e-12);
    CHECK(sup_norm(Av[1] - ScalarField::constant(g, -1.0)) < 1e-12);
}

TEST_CASE("matrix sup norm") {
    GridSpec g(2, 16);
    auto M = MatrixField(g, {ScalarField::zero(g), ScalarField::constant(g, 0.3),
                             ScalarField::zero(g), ScalarField::zero(g)});
    CHECK(matrix_sup_norm(M) == doctest::Approx(0.3).epsilon(1e-12));

    GridSpec g3(3, 8);
    auto I3 = MatrixField::identity(g3);
    CHECK(matrix_sup_norm(I3) == doctest::Approx(1.0).epsilon(1e-12));
}
