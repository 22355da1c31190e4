#include "nufi/lowrank.hpp"

#include "nufi/error.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace nufi {

Eigen::MatrixXd MatvecOracle::times(const Eigen::MatrixXd& X) const {
    if (apply_block)
        return apply_block(X);
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(nrows), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        Y.col(j) = apply(X.col(j));
    return Y;
}

Eigen::MatrixXd MatvecOracle::transpose_times(const Eigen::MatrixXd& Y) const {
    if (apply_transpose_block)
        return apply_transpose_block(Y);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(ncols), Y.cols());
    for (Eigen::Index j = 0; j < Y.cols(); ++j)
        X.col(j) = apply_transpose(Y.col(j));
    return X;
}

MatvecOracle MatvecOracle::from_dense(Eigen::MatrixXd A) {
    auto shared = std::make_shared<const Eigen::MatrixXd>(std::move(A));
    MatvecOracle o;
    o.nrows = static_cast<std::size_t>(shared->rows());
    o.ncols = static_cast<std::size_t>(shared->cols());
    o.apply = [shared](const Eigen::VectorXd& x) -> Eigen::VectorXd { return *shared * x; };
    o.apply_transpose = [shared](const Eigen::VectorXd& y) -> Eigen::VectorXd {
        return shared->transpose() * y;
    };
    o.apply_block = [shared](const Eigen::MatrixXd& X) -> Eigen::MatrixXd { return *shared * X; };
    o.apply_transpose_block = [shared](const Eigen::MatrixXd& Y) -> Eigen::MatrixXd {
        return shared->transpose() * Y;
    };
    return o;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double unit_open(std::uint64_t bits) noexcept {
    // (0, 1]
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

Eigen::MatrixXd gaussian_matrix(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols, std::uint64_t stream) {
    Eigen::MatrixXd G(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            G(i, j) = counter_gaussian(seed ^ (stream * 0xD1B54A32D192ED03ull), std::uint64_t(i), std::uint64_t(j));
    return G;
}

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& Y) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
    return qr.householderQ() * Eigen::MatrixXd::Identity(Y.rows(), Y.cols());
}

std::size_t retained_rank(const Eigen::VectorXd& s, std::size_t max_rank, double rel_tol) {
    if (s.size() == 0 || !(s(0) > 0.0))
        return 0;
    const double cut = rel_tol * s(0);
    std::size_t r = 0;
    while (r < static_cast<std::size_t>(s.size()) && r < max_rank && s(Eigen::Index(r)) >= cut &&
           s(Eigen::Index(r)) > 0.0)
        ++r;
    return r;
}

Factorization assemble(const Eigen::MatrixXd& U, const Eigen::VectorXd& s, const Eigen::MatrixXd& V,
                       std::size_t r) {
    const auto k = static_cast<Eigen::Index>(r);
    Factorization f;
    f.singular_values = s.head(k);
    f.row_factor = U.leftCols(k) * s.head(k).asDiagonal();
    f.col_factor = V.leftCols(k);
    return f;
}

} // namespace

double counter_gaussian(std::uint64_t seed, std::uint64_t row, std::uint64_t col) noexcept {
    const std::uint64_t key = splitmix64(splitmix64(seed) ^ splitmix64(row * 0x632BE59BD9B4E019ull + col));
    const double u1 = unit_open(splitmix64(key));
    const double u2 = unit_open(splitmix64(key ^ 0xA0761D6478BD642Full));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double adjoint_mismatch(const MatvecOracle& oracle, std::uint64_t seed, int probes) {
    const auto m = static_cast<Eigen::Index>(oracle.nrows);
    const auto n = static_cast<Eigen::Index>(oracle.ncols);
    const Eigen::MatrixXd X = gaussian_matrix(seed, n, probes, 11);
    const Eigen::MatrixXd Y = gaussian_matrix(seed, m, probes, 12);
    const Eigen::MatrixXd AX = oracle.times(X);
    const Eigen::MatrixXd AtY = oracle.transpose_times(Y);
    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
        const double a = AX.col(p).dot(Y.col(p));
        const double b = X.col(p).dot(AtY.col(p));
        const double scale = std::max({std::abs(a), std::abs(b), AX.col(p).norm() * Y.col(p).norm(), 1e-300});
        worst = std::max(worst, std::abs(a - b) / scale);
    }
    return worst;
}

Eigen::MatrixXd Factorization::reconstruct() const {
    return row_factor * col_factor.transpose();
}

void TruncationPolicy::validate() const {
    if (max_rank < 1)
        throw UsageError("max_rank must be positive");
    if (!(rel_tol > 0.0 && rel_tol <= 1.0))
        throw UsageError("rel_tol must lie in (0, 1]");
    if (oversampling < 1)
        throw UsageError("oversampling must be positive");
    if (power_iterations < 0)
        throw UsageError("power_iterations must be non-negative");
}

Factorization truncate_svd(const Eigen::MatrixXd& A, std::size_t k) {
    if (k > static_cast<std::size_t>(std::min(A.rows(), A.cols())))
        throw UsageError("truncation rank exceeds matrix dimensions");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    std::size_t r = 0;
    while (r < k && s(Eigen::Index(r)) > 0.0)
        ++r;
    return assemble(svd.matrixU(), s, svd.matrixV(), r);
}

Factorization truncate_svd(const Eigen::MatrixXd& A, const TruncationPolicy& policy) {
    policy.validate();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const std::size_t r = retained_rank(svd.singularValues(), policy.max_rank, policy.rel_tol);
    return assemble(svd.matrixU(), svd.singularValues(), svd.matrixV(), r);
}

Factorization rsvd(const MatvecOracle& oracle, const TruncationPolicy& policy, std::uint64_t seed) {
    policy.validate();
    const std::size_t l = policy.max_rank + policy.oversampling;
    if (l > std::min(oracle.nrows, oracle.ncols))
        throw UsageError("max_rank + oversampling (" + std::to_string(l) + ") exceeds min(nrows, ncols)");
    if (policy.check_adjoint) {
        const double mismatch = adjoint_mismatch(oracle, seed ^ 0x5eedull);
        if (mismatch > 1e-10)
            throw NumericalError("oracle apply/apply_transpose are not adjoint (relative mismatch " +
                                 std::to_string(mismatch) + ")");
    }
    const auto n = static_cast<Eigen::Index>(oracle.ncols);
    const auto L = static_cast<Eigen::Index>(l);

    const Eigen::MatrixXd omega = gaussian_matrix(seed, n, L, 0);
    Eigen::MatrixXd Q = thin_q(oracle.times(omega));
    for (int q = 0; q < policy.power_iterations; ++q) {
        const Eigen::MatrixXd Z = thin_q(oracle.transpose_times(Q));
        Q = thin_q(oracle.times(Z));
    }
    const Eigen::MatrixXd Bt = oracle.transpose_times(Q); // n x l
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Bt, Eigen::ComputeThinU | Eigen::ComputeThinV);
    // Bt = V Σ Ũ^T
    const Eigen::MatrixXd U = Q * svd.matrixV();
    const std::size_t r = retained_rank(svd.singularValues(), policy.max_rank, policy.rel_tol);
    return assemble(U, svd.singularValues(), svd.matrixU(), r);
}

// ---------------------------------------------------------------------------

std::string to_string(Interpolation k) {
    return k == Interpolation::linear ? "linear" : "cubic";
}

Interpolation parse_interpolation(const std::string& s) {
    if (s == "linear")
        return Interpolation::linear;
    if (s == "cubic")
        return Interpolation::cubic;
    throw UsageError("unknown interpolation '" + s + "' (linear or cubic)");
}

InterpGeometry::InterpGeometry(std::vector<AxisSpec> axes, Interpolation kind)
    : axes_(std::move(axes)), count_(1), kind_(kind) {
    if (axes_.empty() || axes_.size() > 2)
        throw UsageError("interpolation geometry supports 1 or 2 axes");
    for (const auto& a : axes_)
        count_ *= a.count;
}

namespace {

struct AxisWeights {
    std::array<std::size_t, 4> index{};
    std::array<double, 4> weight{};
    int size = 0;
};

inline bool axis_stencil(const AxisSpec& a, double q, Interpolation kind, AxisWeights& w) noexcept {
    const double h = a.spacing();
    const bool periodic = a.boundary == Boundary::periodic;
    double s;
    std::size_t i;
    if (periodic) {
        s = (wrap_periodic(q, a) - a.min) / h;
        i = static_cast<std::size_t>(s);
        if (i >= a.count)
            i = a.count - 1;
    } else {
        if (!(q >= a.min && q <= a.max))
            return false;
        s = (q - a.min) / h;
        i = static_cast<std::size_t>(s);
        if (i > a.count - 2)
            i = a.count - 2;
    }
    if (kind == Interpolation::linear || a.count < 4) {
        const double t = s - static_cast<double>(i);
        w.size = 2;
        w.index = {i, periodic && i + 1 == a.count ? 0 : i + 1};
        w.weight = {1.0 - t, t};
        return true;
    }
    // nodes base .. base+3 around the cell; at bounded edges the window shifts inward
    std::ptrdiff_t base = std::ptrdiff_t(i) - 1;
    if (!periodic)
        base = std::clamp<std::ptrdiff_t>(base, 0, std::ptrdiff_t(a.count) - 4);
    const double u = s - static_cast<double>(base);
    w.size = 4;
    for (int j = 0; j < 4; ++j) {
        double l = 1.0;
        for (int m = 0; m < 4; ++m)
            if (m != j)
                l *= (u - m) / double(j - m);
        w.weight[j] = l;
        const std::ptrdiff_t n = std::ptrdiff_t(a.count);
        w.index[j] = std::size_t(((base + j) % n + n) % n);
    }
    return true;
}

} // namespace

bool InterpGeometry::stencil(const Coords& q, Stencil& out) const noexcept {
    AxisWeights a;
    if (!axis_stencil(axes_[0], q[0], kind_, a))
        return false;
    if (axes_.size() == 1) {
        out.size = a.size;
        for (int j = 0; j < a.size; ++j) {
            out.index[j] = a.index[j];
            out.weight[j] = a.weight[j];
        }
        return true;
    }
    AxisWeights b;
    if (!axis_stencil(axes_[1], q[1], kind_, b))
        return false;
    const std::size_t nx = axes_[0].count;
    out.size = 0;
    for (int jb = 0; jb < b.size; ++jb)
        for (int ja = 0; ja < a.size; ++ja) {
            out.index[out.size] = a.index[ja] + nx * b.index[jb];
            out.weight[out.size] = a.weight[ja] * b.weight[jb];
            ++out.size;
        }
    return true;
}

double eval_factored_point(const Factorization& f, const InterpGeometry& rows, const Coords& row_q,
                           const InterpGeometry& cols, const Coords& col_q) {
    Stencil rs, cs;
    if (!rows.stencil(row_q, rs) || !cols.stencil(col_q, cs))
        return 0.0;
    const auto k = f.row_factor.cols();
    const double* U = f.row_factor.data();
    const double* V = f.col_factor.data();
    double sum = 0.0;
    for (Eigen::Index r = 0; r < k; ++r) {
        double a = 0.0, b = 0.0;
        for (int s = 0; s < rs.size; ++s)
            a += rs.weight[s] * U[rs.index[s] * std::size_t(k) + std::size_t(r)];
        for (int s = 0; s < cs.size; ++s)
            b += cs.weight[s] * V[cs.index[s] * std::size_t(k) + std::size_t(r)];
        sum += a * b;
    }
    return sum;
}

} // namespace nufi
