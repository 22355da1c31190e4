#pragma once

#include "nufi/grid.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nufi {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Matrix-free access to A (m x n). The block forms are optional; when absent
/// they fall back to column-by-column calls of the vector forms.
struct MatvecOracle {
    std::size_t nrows = 0;
    std::size_t ncols = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> apply;           ///< x (n) -> A x (m)
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> apply_transpose; ///< y (m) -> A^T y (n)
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> apply_block;
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> apply_transpose_block;

    Eigen::MatrixXd times(const Eigen::MatrixXd& X) const;
    Eigen::MatrixXd transpose_times(const Eigen::MatrixXd& Y) const;

    static MatvecOracle from_dense(Eigen::MatrixXd A);
};

/// Largest relative violation of <A x, y> = <x, A^T y> over `probes` random pairs.
double adjoint_mismatch(const MatvecOracle& oracle, std::uint64_t seed, int probes = 4);

/// A ≈ row_factor * col_factor^T, with row_factor = U S and col_factor = V.
struct Factorization {
    RowMatrix row_factor;
    RowMatrix col_factor;
    Eigen::VectorXd singular_values;

    std::size_t rank() const noexcept { return static_cast<std::size_t>(singular_values.size()); }
    std::size_t nrows() const noexcept { return static_cast<std::size_t>(row_factor.rows()); }
    std::size_t ncols() const noexcept { return static_cast<std::size_t>(col_factor.rows()); }
    Eigen::MatrixXd reconstruct() const;
};

struct TruncationPolicy {
    std::size_t max_rank = 20;
    double rel_tol = 1e-3;      ///< drop σ_j < rel_tol σ_1
    std::size_t oversampling = 5;
    int power_iterations = 0;
    bool check_adjoint = false;

    void validate() const;
};

/// Best rank-k approximation via a dense SVD.
Factorization truncate_svd(const Eigen::MatrixXd& A, std::size_t k);
/// Dense SVD truncated by both the rank cap and the relative cutoff of `policy`.
Factorization truncate_svd(const Eigen::MatrixXd& A, const TruncationPolicy& policy);

/// Randomized SVD with lazy evaluation (transpose formulation):
/// sketch Y = A Ω, orthonormalize Y = Q R, form B^T = A^T Q column by column,
/// SVD B^T = V Σ Ũ^T, U = Q Ũ, then truncate by policy.
Factorization rsvd(const MatvecOracle& oracle, const TruncationPolicy& policy, std::uint64_t seed);

/// Standard normal sample addressed by (seed, row, col); independent of call order.
double counter_gaussian(std::uint64_t seed, std::uint64_t row, std::uint64_t col) noexcept;

/// Per-axis interpolation between grid nodes. cubic: 4-point Lagrange,
/// shifted one-sided at bounded edges; axes with fewer than 4 nodes stay linear.
enum class Interpolation { linear, cubic };

std::string to_string(Interpolation k);
Interpolation parse_interpolation(const std::string& s);

/// Tensor-product interpolation stencil over one side (rows or columns) of a
/// matricized grid. Periodic axes wrap; bounded axes reject outside queries.
struct Stencil {
    std::array<std::size_t, 16> index{};
    std::array<double, 16> weight{};
    int size = 0;
};

class InterpGeometry {
public:
    InterpGeometry() = default;
    explicit InterpGeometry(std::vector<AxisSpec> axes, Interpolation kind = Interpolation::linear);

    std::size_t count() const noexcept { return count_; }
    const std::vector<AxisSpec>& axes() const noexcept { return axes_; }
    Interpolation kind() const noexcept { return kind_; }
    /// False when q lies outside a bounded axis.
    bool stencil(const Coords& q, Stencil& out) const noexcept;

private:
    std::vector<AxisSpec> axes_;
    std::size_t count_ = 0;
    Interpolation kind_ = Interpolation::linear;
};

/// Σ_r interp_rows(row_factor[:, r], row_q) * interp_cols(col_factor[:, r], col_q).
/// Returns 0 outside the bounding box.
double eval_factored_point(const Factorization& f, const InterpGeometry& rows, const Coords& row_q,
                           const InterpGeometry& cols, const Coords& col_q);

} // namespace nufi
