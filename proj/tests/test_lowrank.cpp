#include <doctest.h>

#include "nufi/error.hpp"
#include "nufi/lowrank.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace nufi;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd A(m, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < m; ++i)
            A(i, j) = g(rng);
    return A;
}

Eigen::MatrixXd random_orthogonal(Eigen::Index n, std::uint64_t seed) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(n, n, seed));
    return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

double tail_norm(const Eigen::VectorXd& s, Eigen::Index k) {
    return std::sqrt(s.tail(s.size() - k).squaredNorm());
}

// independent multilinear interpolation of nodal data over one side of the grid
double interp_side(const std::vector<AxisSpec>& axes, const Coords& q, const std::function<double(std::size_t)>& at) {
    std::array<std::size_t, 2> lo{}, hi{};
    std::array<double, 2> t{};
    for (std::size_t d = 0; d < axes.size(); ++d) {
        const AxisSpec& a = axes[d];
        double x = q[d];
        if (a.boundary == Boundary::periodic) {
            x = wrap_periodic(x, a);
        } else if (x < a.min || x > a.max) {
            return 0.0;
        }
        const double s = (x - a.min) / a.spacing();
        std::size_t i = std::size_t(std::floor(s));
        const std::size_t last = a.boundary == Boundary::periodic ? a.count - 1 : a.count - 2;
        if (i > last)
            i = last;
        lo[d] = i;
        hi[d] = (a.boundary == Boundary::periodic && i + 1 == a.count) ? 0 : i + 1;
        t[d] = s - double(i);
    }
    if (axes.size() == 1)
        return (1 - t[0]) * at(lo[0]) + t[0] * at(hi[0]);
    const std::size_t nx = axes[0].count;
    return (1 - t[0]) * (1 - t[1]) * at(lo[0] + nx * lo[1]) + t[0] * (1 - t[1]) * at(hi[0] + nx * lo[1]) +
           (1 - t[0]) * t[1] * at(lo[0] + nx * hi[1]) + t[0] * t[1] * at(hi[0] + nx * hi[1]);
}

double interp_dense(const Eigen::MatrixXd& M, const std::vector<AxisSpec>& rows, const Coords& rq,
                    const std::vector<AxisSpec>& cols, const Coords& cq) {
    return interp_side(rows, rq, [&](std::size_t i) {
        return interp_side(cols, cq, [&](std::size_t j) { return M(Eigen::Index(i), Eigen::Index(j)); });
    });
}

Factorization random_factorization(std::size_t m, std::size_t n, std::size_t k, std::uint64_t seed) {
    Factorization f;
    f.row_factor = random_matrix(Eigen::Index(m), Eigen::Index(k), seed);
    f.col_factor = random_matrix(Eigen::Index(n), Eigen::Index(k), seed + 1);
    f.singular_values = Eigen::VectorXd::Ones(Eigen::Index(k));
    return f;
}

} // namespace

TEST_SUITE("lowrank") {

TEST_CASE("truncate_svd examples") {
    Eigen::MatrixXd D = Eigen::Vector3d(3, 2, 1).asDiagonal();
    const auto f = truncate_svd(D, 2);
    CHECK(f.rank() == 2);
    CHECK((D - f.reconstruct()).norm() == doctest::Approx(1.0).epsilon(1e-14));

    const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(30, -1, 2), v = Eigen::VectorXd::LinSpaced(20, 0.5, 3);
    const Eigen::MatrixXd R1 = u * v.transpose();
    CHECK((R1 - truncate_svd(R1, 1).reconstruct()).norm() <= 1e-12 * R1.norm());

    const Eigen::MatrixXd A = random_matrix(50, 40, 17);
    const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues();
    CHECK(std::abs((A - truncate_svd(A, 10).reconstruct()).norm() - tail_norm(s, 10)) < 1e-10);
}

TEST_CASE("Eckart-Young on many random matrices") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Eigen::Index m = 10 + Eigen::Index(seed * 3 % 37), n = 8 + Eigen::Index(seed * 7 % 29);
        const Eigen::MatrixXd A = random_matrix(m, n, 100 + seed);
        const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues();
        const std::size_t k = std::size_t(1 + seed % std::size_t(std::min(m, n) - 1));
        REQUIRE(std::abs((A - truncate_svd(A, k).reconstruct()).norm() - tail_norm(s, Eigen::Index(k))) < 1e-10);
    }
}

TEST_CASE("truncate_svd with a policy applies both limits") {
    Eigen::VectorXd s(8);
    s << 1, 0.5, 0.1, 0.02, 5e-3, 1e-3, 5e-4, 1e-5;
    const Eigen::MatrixXd U = random_orthogonal(8, 1), V = random_orthogonal(8, 2);
    const Eigen::MatrixXd A = U * s.asDiagonal() * V.transpose();
    TruncationPolicy p;
    p.max_rank = 8;
    p.rel_tol = 1e-3;
    CHECK(truncate_svd(A, p).rank() == 6);
    p.max_rank = 3;
    CHECK(truncate_svd(A, p).rank() == 3);
    CHECK_THROWS_AS(truncate_svd(A, 9), UsageError);
}

TEST_CASE("rsvd captures an exactly low-rank matrix") {
    const Eigen::MatrixXd A = random_matrix(60, 3, 4) * random_matrix(3, 45, 5);
    TruncationPolicy p;
    p.max_rank = 3;
    p.oversampling = 5;
    p.rel_tol = 1e-12;
    const auto f = rsvd(MatvecOracle::from_dense(A), p, 42);
    CHECK(f.rank() == 3);
    CHECK((A - f.reconstruct()).norm() <= 1e-10 * A.norm());
}

TEST_CASE("rsvd relative cutoff") {
    const Eigen::Index n = 40;
    Eigen::VectorXd s(n);
    for (Eigen::Index j = 0; j < n; ++j)
        s(j) = std::pow(10.0, -double(j));
    const Eigen::MatrixXd A = random_orthogonal(n, 7) * s.asDiagonal() * random_orthogonal(n, 8).transpose();
    TruncationPolicy p;
    p.max_rank = 20;
    p.rel_tol = 1e-3;
    const auto f = rsvd(MatvecOracle::from_dense(A), p, 1);
    CHECK(f.rank() == 4); // 1, 0.1, 0.01, 0.001
}

TEST_CASE("rsvd on a planted spectrum stays near the optimal tail") {
    const Eigen::Index n = 200;
    Eigen::VectorXd s(n);
    for (Eigen::Index j = 0; j < n; ++j)
        s(j) = std::pow(2.0, -double(j + 1));
    const Eigen::MatrixXd A = random_orthogonal(n, 21) * s.asDiagonal() * random_orthogonal(n, 22).transpose();
    TruncationPolicy p;
    p.max_rank = 10;
    p.oversampling = 5;
    p.rel_tol = 1e-12;
    const double optimal = tail_norm(s, 10);
    const auto oracle = MatvecOracle::from_dense(A);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const double err = (A - rsvd(oracle, p, seed).reconstruct()).norm();
        CHECK(err <= 10 * optimal);
    }
}

TEST_CASE("rsvd is deterministic and its factors are orthonormal") {
    const Eigen::MatrixXd A = random_matrix(70, 50, 9);
    TruncationPolicy p;
    p.max_rank = 12;
    p.rel_tol = 1e-12;
    const auto o = MatvecOracle::from_dense(A);
    const auto f1 = rsvd(o, p, 5), f2 = rsvd(o, p, 5);
    CHECK(f1.row_factor == f2.row_factor);
    CHECK(f1.col_factor == f2.col_factor);
    CHECK(f1.singular_values == f2.singular_values);
    const auto f3 = rsvd(o, p, 6);
    CHECK(f3.row_factor != f1.row_factor);

    const Eigen::MatrixXd VtV = f1.col_factor.transpose() * f1.col_factor;
    CHECK((VtV - Eigen::MatrixXd::Identity(12, 12)).norm() < 1e-10);
    // row_factor = U S with orthonormal U
    const Eigen::MatrixXd U = f1.row_factor * f1.singular_values.cwiseInverse().asDiagonal();
    CHECK((U.transpose() * U - Eigen::MatrixXd::Identity(12, 12)).norm() < 1e-10);
    for (Eigen::Index r = 1; r < 12; ++r)
        CHECK(f1.singular_values(r) <= f1.singular_values(r - 1));
}

TEST_CASE("power iterations improve a slowly decaying spectrum") {
    const Eigen::Index n = 120;
    Eigen::VectorXd s(n);
    for (Eigen::Index j = 0; j < n; ++j)
        s(j) = 1.0 / double(j + 1);
    const Eigen::MatrixXd A = random_orthogonal(n, 31) * s.asDiagonal() * random_orthogonal(n, 32).transpose();
    TruncationPolicy p;
    p.max_rank = 10;
    p.rel_tol = 1e-12;
    const auto o = MatvecOracle::from_dense(A);
    const double e0 = (A - rsvd(o, p, 3).reconstruct()).norm();
    p.power_iterations = 2;
    const double e2 = (A - rsvd(o, p, 3).reconstruct()).norm();
    CHECK(e2 < e0);
}

TEST_CASE("rsvd rejects ranks beyond the matrix") {
    TruncationPolicy p;
    p.max_rank = 8;
    p.oversampling = 5;
    CHECK_THROWS_AS(rsvd(MatvecOracle::from_dense(random_matrix(12, 12, 1)), p, 0), UsageError);
    p.max_rank = 0;
    CHECK_THROWS_AS(p.validate(), UsageError);
}

TEST_CASE("adjoint check on oracles") {
    const Eigen::MatrixXd A = random_matrix(30, 20, 3);
    CHECK(adjoint_mismatch(MatvecOracle::from_dense(A), 1) < 1e-12);
    MatvecOracle bad = MatvecOracle::from_dense(A);
    const Eigen::MatrixXd B = random_matrix(30, 20, 4);
    bad.apply_transpose = [B](const Eigen::VectorXd& y) -> Eigen::VectorXd { return B.transpose() * y; };
    bad.apply_transpose_block = nullptr;
    CHECK(adjoint_mismatch(bad, 1) > 1e-3);
    TruncationPolicy p;
    p.max_rank = 5;
    p.check_adjoint = true;
    CHECK_THROWS_AS(rsvd(bad, p, 0), NumericalError);
}

TEST_CASE("counter gaussian is addressable and roughly standard") {
    CHECK(counter_gaussian(1, 2, 3) == counter_gaussian(1, 2, 3));
    CHECK(counter_gaussian(1, 2, 3) != counter_gaussian(1, 3, 2));
    double m = 0, m2 = 0;
    const int N = 200000;
    for (int i = 0; i < N; ++i) {
        const double g = counter_gaussian(9, std::uint64_t(i), 0);
        m += g;
        m2 += g * g;
    }
    CHECK(std::abs(m / N) < 0.01);
    CHECK(std::abs(m2 / N - 1) < 0.02);
}

TEST_CASE("separable evaluation") {
    const std::vector<AxisSpec> rows{AxisSpec::periodic(0, 4 * std::numbers::pi, 16)};
    const std::vector<AxisSpec> cols{AxisSpec::bounded(-6, 6, 21)};
    const InterpGeometry rg(rows), cg(cols);

    SUBCASE("rank-1 ones") {
        Factorization f;
        f.row_factor = RowMatrix::Ones(16, 1);
        f.col_factor = RowMatrix::Ones(21, 1);
        f.singular_values = Eigen::VectorXd::Ones(1);
        for (double x : {0.0, 1.3, 12.5, -3.0})
            for (double v : {-6.0, -0.1, 5.99, 6.0})
                CHECK(eval_factored_point(f, rg, {x, 0}, cg, {v, 0}) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(eval_factored_point(f, rg, {1.0, 0}, cg, {6.01, 0}) == 0.0);
        CHECK(eval_factored_point(f, rg, {1.0, 0}, cg, {-7.0, 0}) == 0.0);
    }
    SUBCASE("nodes reproduce the product") {
        const auto f = random_factorization(16, 21, 5, 3);
        const Eigen::MatrixXd M = f.reconstruct();
        for (std::size_t i = 0; i < 16; i += 3)
            for (std::size_t j = 0; j < 21; j += 4)
                CHECK(eval_factored_point(f, rg, {rows[0].node(i), 0}, cg, {cols[0].node(j), 0}) ==
                      doctest::Approx(M(Eigen::Index(i), Eigen::Index(j))).epsilon(1e-13));
    }
    SUBCASE("random queries against interpolation of the reconstruction") {
        const auto f = random_factorization(16, 21, 5, 8);
        const Eigen::MatrixXd M = f.reconstruct();
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> ux(-5, 20), uv(-6, 6);
        double worst = 0;
        for (int q = 0; q < 1000; ++q) {
            const Coords x{ux(rng), 0}, v{uv(rng), 0};
            worst = std::max(worst, std::abs(eval_factored_point(f, rg, x, cg, v) - interp_dense(M, rows, x, cols, v)));
        }
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("separable evaluation in 2D2V") {
    const std::vector<AxisSpec> rows{AxisSpec::periodic(0, 10, 6), AxisSpec::periodic(0, 10, 5)};
    const std::vector<AxisSpec> cols{AxisSpec::bounded(-3, 3, 7), AxisSpec::bounded(-2, 2, 4)};
    const InterpGeometry rg(rows), cg(cols);
    CHECK(rg.count() == 30);
    CHECK(cg.count() == 28);
    const auto f = random_factorization(30, 28, 4, 12);
    const Eigen::MatrixXd M = f.reconstruct();
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ux(-10, 20), uu(-3, 3), uw(-2, 2);
    double worst = 0;
    for (int q = 0; q < 1000; ++q) {
        const Coords x{ux(rng), ux(rng)}, v{uu(rng), uw(rng)};
        worst = std::max(worst, std::abs(eval_factored_point(f, rg, x, cg, v) - interp_dense(M, rows, x, cols, v)));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("cubic interpolation") {
    SUBCASE("reproduces cubics on bounded axes, edges included") {
        const AxisSpec a = AxisSpec::bounded(-2, 3, 11);
        auto p = [](double x) { return 0.3 - 1.1 * x + 0.7 * x * x - 0.25 * x * x * x; };
        Factorization f;
        f.row_factor = RowMatrix::Ones(1, 1);
        f.col_factor.resize(11, 1);
        for (std::size_t j = 0; j < 11; ++j)
            f.col_factor(Eigen::Index(j), 0) = p(a.node(j));
        f.singular_values = Eigen::VectorXd::Ones(1);
        const InterpGeometry rg({AxisSpec::bounded(0, 1, 1 + 1)}, Interpolation::cubic);
        f.row_factor = RowMatrix::Ones(2, 1);
        const InterpGeometry cg({a}, Interpolation::cubic);
        for (double v : {-2.0, -1.93, -1.5, 0.01, 1.234, 2.7, 2.99, 3.0})
            CHECK(eval_factored_point(f, rg, {0.5, 0}, cg, {v, 0}) == doctest::Approx(p(v)).epsilon(1e-13));
        CHECK(eval_factored_point(f, rg, {0.5, 0}, cg, {3.01, 0}) == 0.0);
    }
    SUBCASE("periodic error falls as h^4") {
        auto err = [](std::size_t n) {
            const AxisSpec a = AxisSpec::periodic(0, 2 * std::numbers::pi, n);
            Factorization f;
            f.row_factor.resize(Eigen::Index(n), 1);
            for (std::size_t i = 0; i < n; ++i)
                f.row_factor(Eigen::Index(i), 0) = std::sin(a.node(i));
            f.col_factor = RowMatrix::Ones(2, 1);
            f.singular_values = Eigen::VectorXd::Ones(1);
            const InterpGeometry rg({a}, Interpolation::cubic), cg({AxisSpec::bounded(0, 1, 2)});
            double worst = 0;
            for (int q = 0; q < 997; ++q) {
                const double x = -7.0 + 0.0317 * q;
                worst = std::max(worst, std::abs(eval_factored_point(f, rg, {x, 0}, cg, {0.5, 0}) - std::sin(x)));
            }
            return worst;
        };
        const double e1 = err(16), e2 = err(32);
        CHECK(e1 < 1e-3);
        CHECK(e1 / e2 > 12.0);
    }
    SUBCASE("nodes are exact and the 2D stencil is the tensor product") {
        const std::vector<AxisSpec> rows{AxisSpec::periodic(0, 10, 6), AxisSpec::periodic(0, 10, 5)};
        const std::vector<AxisSpec> cols{AxisSpec::bounded(-3, 3, 7), AxisSpec::bounded(-2, 2, 4)};
        const InterpGeometry rg(rows, Interpolation::cubic), cg(cols, Interpolation::cubic);
        const auto f = random_factorization(30, 28, 4, 5);
        const Eigen::MatrixXd M = f.reconstruct();
        for (std::size_t i = 0; i < 30; i += 7)
            for (std::size_t j = 0; j < 28; j += 5) {
                const Coords x{rows[0].node(i % 6), rows[1].node(i / 6)}, v{cols[0].node(j % 7), cols[1].node(j / 7)};
                CHECK(eval_factored_point(f, rg, x, cg, v) ==
                      doctest::Approx(M(Eigen::Index(i), Eigen::Index(j))).epsilon(1e-12));
            }
        Stencil st;
        REQUIRE(rg.stencil({1.1, 7.3}, st));
        CHECK(st.size == 16);
        double sum = 0;
        for (int k = 0; k < st.size; ++k)
            sum += st.weight[k];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("short axes fall back to linear") {
        const InterpGeometry g({AxisSpec::bounded(0, 1, 3)}, Interpolation::cubic);
        Stencil st;
        REQUIRE(g.stencil({0.4, 0}, st));
        CHECK(st.size == 2);
    }
    CHECK(parse_interpolation("cubic") == Interpolation::cubic);
    CHECK(to_string(Interpolation::linear) == "linear");
    CHECK_THROWS_AS(parse_interpolation("spline"), UsageError);
}

} // TEST_SUITE
