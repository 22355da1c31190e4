#pragma once

#include "nufi/flow.hpp"
#include "nufi/lowrank.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace nufi {

/// How a snapshot stores f on its restart grid.
enum class Compression {
    randomized, ///< matrix-free rsvd through the backward flow
    dense_svd,  ///< assemble the full matrix, then truncate_svd
    none,       ///< keep the full matrix (untruncated)
};

struct RestartConfig {
    std::size_t period = 100; ///< steps between restarts
    PhaseSpaceGrid restart_grid;
    TruncationPolicy policy;
    Compression compression = Compression::randomized;
    Interpolation interpolation = Interpolation::linear; ///< between restart-grid nodes

    void validate() const;
};

/// True iff step is a positive multiple of the period.
bool should_restart(std::size_t step, const RestartConfig& cfg);

/// f at a restart step, stored as factors over the matricized restart grid
/// (rows: spatial nodes, x fastest; columns: velocity nodes, u fastest).
class LowRankSnapshot final : public GridDistribution {
public:
    LowRankSnapshot(Factorization f, PhaseSpaceGrid grid, std::size_t step, int species,
                    double velocity_support = std::numeric_limits<double>::infinity(),
                    Interpolation interpolation = Interpolation::linear);

    double eval(const Coords& x, const Coords& v) const override;
    std::size_t step() const override { return step_; }
    double velocity_support() const override { return support_; }

    const Factorization& factorization() const noexcept { return f_; }
    const PhaseSpaceGrid& grid() const noexcept { return grid_; }
    int species() const noexcept { return species_; }
    std::size_t rank() const noexcept { return f_.rank(); }
    double nodal(std::size_t row, std::size_t col) const;

private:
    Factorization f_;
    PhaseSpaceGrid grid_;
    InterpGeometry rows_, cols_;
    std::size_t step_;
    int species_;
    double support_;
};

/// Uncompressed counterpart used by the semi-Lagrangian modes.
class DenseSnapshot final : public GridDistribution {
public:
    DenseSnapshot(RowMatrix values, PhaseSpaceGrid grid, std::size_t step, int species,
                    double velocity_support = std::numeric_limits<double>::infinity(),
                    Interpolation interpolation = Interpolation::linear);

    double eval(const Coords& x, const Coords& v) const override;
    std::size_t step() const override { return step_; }
    double velocity_support() const override { return support_; }

    const RowMatrix& values() const noexcept { return values_; }
    const PhaseSpaceGrid& grid() const noexcept { return grid_; }
    int species() const noexcept { return species_; }

private:
    RowMatrix values_;
    PhaseSpaceGrid grid_;
    InterpGeometry rows_, cols_;
    std::size_t step_;
    int species_;
    double support_;
};

/// Value at (x, v): interpolation of the factors, 0 outside the
/// restart grid's velocity box (x wraps on periodic axes).
double snapshot_eval(const GridDistribution& s, const Coords& x, const Coords& v);

/// Everything the backward flow needs to know about one species.
struct SpeciesDynamics {
    int id = 0;
    double qm = -1.0;
    InflowProfile inflow;
    BoundaryConfig boundary;
};

struct SnapshotBuild {
    std::shared_ptr<const GridDistribution> snapshot;
    WorkCounter work;
};

/// Oracle for A_ij = f(t_step, x_i, v_j) on `grid`, evaluated through the
/// backward flow from `source`. apply works row by row (one x_i, all v_j);
/// apply_transpose column by column (one v_j, all x_i). `column_max`, if
/// given, receives max_i |A_ij| from every apply pass.
MatvecOracle flow_oracle(std::size_t step, const FieldHistory& history, const DistributionSource& source,
                         const SpeciesDynamics& species, const PhaseSpaceGrid& grid, WorkCounter* work,
                         std::vector<double>* column_max = nullptr, int threads = 0);

/// f at `step` on the full grid (rows: spatial, columns: velocity).
RowMatrix evaluate_on_grid(std::size_t step, const FieldHistory& history, const DistributionSource& source,
                           const SpeciesDynamics& species, const PhaseSpaceGrid& grid, WorkCounter* work,
                           int threads = 0);

/// Compresses f(t_step) into a snapshot according to cfg.compression.
SnapshotBuild build_snapshot(std::size_t step, const FieldHistory& history, const DistributionSource& current,
                             const SpeciesDynamics& species, const RestartConfig& cfg, std::uint64_t seed,
                             int threads = 0);

/// Largest |v_j| whose column carries more than `rel` of the global maximum.
double support_from_column_max(const PhaseSpaceGrid& grid, const std::vector<double>& column_max,
                               double rel = 1e-10);

/// Same, over the nodal values reconstructed from factors.
double factor_support(const Factorization& f, const PhaseSpaceGrid& grid);

} // namespace nufi
