#include "nufi/restart.hpp"

#include "nufi/error.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nufi {

namespace {

int thread_count(int requested) {
#ifdef _OPENMP
    return requested > 0 ? requested : omp_get_max_threads();
#else
    (void)requested;
    return 1;
#endif
}

std::vector<Coords> spatial_nodes(const PhaseSpaceGrid& g) {
    std::vector<Coords> out(g.spatial_count());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = g.spatial_node(i);
    return out;
}

std::vector<Coords> velocity_nodes(const PhaseSpaceGrid& g) {
    std::vector<Coords> out(g.velocity_count());
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = g.velocity_node(j);
    return out;
}

void check_geometry(const PhaseSpaceGrid& grid, std::size_t rows, std::size_t cols) {
    if (grid.spatial_count() != rows || grid.velocity_count() != cols)
        throw UsageError("snapshot data does not match the restart grid matricization");
}

void check_extent(const PhaseSpaceGrid& grid, const FieldHistory& history) {
    const auto& a = grid.spatial_axes();
    const auto& b = history.axes();
    bool ok = a.size() == b.size();
    for (std::size_t d = 0; ok && d < a.size(); ++d)
        ok = a[d].min == b[d].min && a[d].max == b[d].max && a[d].boundary == b[d].boundary;
    if (!ok)
        throw UsageError("restart grid must cover the same spatial domain as the field");
}

} // namespace

void RestartConfig::validate() const {
    if (period < 1)
        throw UsageError("restart period must be at least 1");
    if (restart_grid.dim() == 0)
        throw UsageError("restart grid is not set");
    if (compression != Compression::none)
        policy.validate();
    if (compression == Compression::randomized) {
        const std::size_t l = policy.max_rank + policy.oversampling;
        if (l > std::min(restart_grid.spatial_count(), restart_grid.velocity_count()))
            throw UsageError("max_rank + oversampling exceeds the restart grid dimensions");
    }
}

bool should_restart(std::size_t step, const RestartConfig& cfg) {
    if (cfg.period < 1)
        throw UsageError("restart period must be at least 1");
    return step >= 1 && step % cfg.period == 0;
}

// ---------------------------------------------------------------------------

LowRankSnapshot::LowRankSnapshot(Factorization f, PhaseSpaceGrid grid, std::size_t step, int species,
                                 double velocity_support, Interpolation interpolation)
    : f_(std::move(f)), grid_(std::move(grid)), rows_(grid_.spatial_axes(), interpolation),
      cols_(grid_.velocity_axes(), interpolation),
      step_(step), species_(species), support_(velocity_support) {
    check_geometry(grid_, f_.nrows(), f_.ncols());
}

double LowRankSnapshot::eval(const Coords& x, const Coords& v) const {
    return eval_factored_point(f_, rows_, x, cols_, v);
}

double LowRankSnapshot::nodal(std::size_t row, std::size_t col) const {
    return f_.row_factor.row(Eigen::Index(row)).dot(f_.col_factor.row(Eigen::Index(col)));
}

DenseSnapshot::DenseSnapshot(RowMatrix values, PhaseSpaceGrid grid, std::size_t step, int species,
                             double velocity_support, Interpolation interpolation)
    : values_(std::move(values)), grid_(std::move(grid)), rows_(grid_.spatial_axes(), interpolation),
      cols_(grid_.velocity_axes(), interpolation), step_(step), species_(species), support_(velocity_support) {
    check_geometry(grid_, std::size_t(values_.rows()), std::size_t(values_.cols()));
}

double DenseSnapshot::eval(const Coords& x, const Coords& v) const {
    Stencil rs, cs;
    if (!rows_.stencil(x, rs) || !cols_.stencil(v, cs))
        return 0.0;
    const std::size_t n = std::size_t(values_.cols());
    const double* a = values_.data();
    double sum = 0.0;
    for (int r = 0; r < rs.size; ++r) {
        double row = 0.0;
        for (int c = 0; c < cs.size; ++c)
            row += cs.weight[c] * a[rs.index[r] * n + cs.index[c]];
        sum += rs.weight[r] * row;
    }
    return sum;
}

double snapshot_eval(const GridDistribution& s, const Coords& x, const Coords& v) {
    return s.eval(x, v);
}

// ---------------------------------------------------------------------------

MatvecOracle flow_oracle(std::size_t step, const FieldHistory& history, const DistributionSource& source,
                         const SpeciesDynamics& species, const PhaseSpaceGrid& grid, WorkCounter* work,
                         std::vector<double>* column_max, int threads) {
    check_extent(grid, history);
    struct Ctx {
        std::size_t step;
        const FieldHistory* history;
        const DistributionSource* source;
        SpeciesDynamics species;
        std::vector<Coords> xs, vs;
        WorkCounter* work;
        std::vector<double>* column_max;
        int threads;
    };
    auto ctx = std::make_shared<Ctx>(
        Ctx{step, &history, &source, species, spatial_nodes(grid), velocity_nodes(grid), work, column_max,
            thread_count(threads)});
    const auto m = ctx->xs.size();
    const auto n = ctx->vs.size();

    MatvecOracle o;
    o.nrows = m;
    o.ncols = n;

    o.apply_block = [ctx, m, n](const Eigen::MatrixXd& X) -> Eigen::MatrixXd {
        if (std::size_t(X.rows()) != n)
            throw UsageError("oracle input has wrong length");
        Eigen::MatrixXd Y(Eigen::Index(m), X.cols());
        std::uint64_t steps = 0, evals = 0;
        std::vector<double> cmax(ctx->column_max ? n : 0, 0.0);
        const long long mm = static_cast<long long>(m);
#pragma omp parallel num_threads(ctx->threads) reduction(+ : steps, evals)
        {
            Eigen::VectorXd row(static_cast<Eigen::Index>(n));
            std::vector<double> local_max(cmax.size(), 0.0);
            WorkCounter wc;
#pragma omp for schedule(dynamic, 2)
            for (long long ii = 0; ii < mm; ++ii) {
                const auto i = std::size_t(ii);
                eval_f_batch(std::span<const Coords>(&ctx->xs[i], 1), ctx->vs, ctx->species.qm, ctx->step,
                             *ctx->history, *ctx->source, ctx->species.boundary, ctx->species.inflow, false,
                             std::span<double>(row.data(), n), wc);
                Y.row(Eigen::Index(i)) = row.transpose() * X;
                for (std::size_t j = 0; j < local_max.size(); ++j)
                    local_max[j] = std::max(local_max[j], std::abs(row[Eigen::Index(j)]));
            }
            steps += wc.verlet_micro_steps;
            evals += wc.f_evaluations;
            if (!cmax.empty()) {
#pragma omp critical(nufi_column_max)
                for (std::size_t j = 0; j < n; ++j)
                    cmax[j] = std::max(cmax[j], local_max[j]);
            }
        }
        if (ctx->work) {
            ctx->work->verlet_micro_steps += steps;
            ctx->work->f_evaluations += evals;
        }
        if (ctx->column_max)
            *ctx->column_max = std::move(cmax);
        return Y;
    };

    o.apply_transpose_block = [ctx, m, n](const Eigen::MatrixXd& Q) -> Eigen::MatrixXd {
        if (std::size_t(Q.rows()) != m)
            throw UsageError("oracle input has wrong length");
        Eigen::MatrixXd Bt(Eigen::Index(n), Q.cols());
        std::uint64_t steps = 0, evals = 0;
        const long long nn = static_cast<long long>(n);
#pragma omp parallel num_threads(ctx->threads) reduction(+ : steps, evals)
        {
            Eigen::VectorXd col(static_cast<Eigen::Index>(m));
            std::vector<Coords> vj(m);
            WorkCounter wc;
#pragma omp for schedule(dynamic, 2)
            for (long long jj = 0; jj < nn; ++jj) {
                const auto j = std::size_t(jj);
                std::fill(vj.begin(), vj.end(), ctx->vs[j]);
                eval_f_batch(ctx->xs, vj, ctx->species.qm, ctx->step, *ctx->history, *ctx->source,
                             ctx->species.boundary, ctx->species.inflow, false, std::span<double>(col.data(), m),
                             wc);
                Bt.row(Eigen::Index(j)) = col.transpose() * Q;
            }
            steps += wc.verlet_micro_steps;
            evals += wc.f_evaluations;
        }
        if (ctx->work) {
            ctx->work->verlet_micro_steps += steps;
            ctx->work->f_evaluations += evals;
        }
        return Bt;
    };

    o.apply = [blk = o.apply_block](const Eigen::VectorXd& x) -> Eigen::VectorXd { return blk(x); };
    o.apply_transpose = [blk = o.apply_transpose_block](const Eigen::VectorXd& y) -> Eigen::VectorXd {
        return blk(y);
    };
    return o;
}

RowMatrix evaluate_on_grid(std::size_t step, const FieldHistory& history, const DistributionSource& source,
                           const SpeciesDynamics& species, const PhaseSpaceGrid& grid, WorkCounter* work,
                           int threads) {
    check_extent(grid, history);
    const auto xs = spatial_nodes(grid);
    const auto vs = velocity_nodes(grid);
    const std::size_t m = xs.size(), n = vs.size();
    RowMatrix A(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    std::uint64_t steps = 0, evals = 0;
    const long long mm = static_cast<long long>(m);
#pragma omp parallel num_threads(thread_count(threads)) reduction(+ : steps, evals)
    {
        WorkCounter wc;
#pragma omp for schedule(dynamic, 2)
        for (long long ii = 0; ii < mm; ++ii) {
            const auto i = std::size_t(ii);
            eval_f_batch(std::span<const Coords>(&xs[i], 1), vs, species.qm, step, history, source,
                         species.boundary, species.inflow, false, std::span<double>(A.row(Eigen::Index(i)).data(), n),
                         wc);
        }
        steps += wc.verlet_micro_steps;
        evals += wc.f_evaluations;
    }
    if (work) {
        work->verlet_micro_steps += steps;
        work->f_evaluations += evals;
    }
    return A;
}

double support_from_column_max(const PhaseSpaceGrid& grid, const std::vector<double>& column_max, double rel) {
    if (column_max.size() != grid.velocity_count())
        throw UsageError("column maxima do not match the velocity grid");
    double top = 0.0;
    for (double c : column_max)
        top = std::max(top, c);
    double support = 0.0;
    if (!(top > 0.0))
        return support;
    for (std::size_t j = 0; j < column_max.size(); ++j) {
        if (column_max[j] > rel * top) {
            const Coords v = grid.velocity_node(j);
            for (int d = 0; d < grid.dim(); ++d)
                support = std::max(support, std::abs(v[std::size_t(d)]));
        }
    }
    return support;
}

double factor_support(const Factorization& f, const PhaseSpaceGrid& grid) {
    std::vector<double> cmax(f.ncols(), 0.0);
    const Eigen::Index rows = f.row_factor.rows();
    // fixed element budget per block, so the scan never holds anything phase-space sized
    const Eigen::Index block = std::max<Eigen::Index>(1, Eigen::Index(1 << 13) / std::max<Eigen::Index>(1, f.col_factor.rows()));
    for (Eigen::Index r0 = 0; r0 < rows; r0 += block) {
        const Eigen::Index nr = std::min(block, rows - r0);
        const Eigen::MatrixXd blk = f.row_factor.middleRows(r0, nr) * f.col_factor.transpose();
        for (Eigen::Index j = 0; j < blk.cols(); ++j)
            cmax[std::size_t(j)] = std::max(cmax[std::size_t(j)], blk.col(j).cwiseAbs().maxCoeff());
    }
    return support_from_column_max(grid, cmax);
}

SnapshotBuild build_snapshot(std::size_t step, const FieldHistory& history, const DistributionSource& current,
                             const SpeciesDynamics& species, const RestartConfig& cfg, std::uint64_t seed,
                             int threads) {
    cfg.validate();
    if (current.base_step() > step)
        throw UsageError("current source is newer than the restart step");
    if (step > current.base_step() && !history.has(step))
        throw UsageError("field history must be complete through the restart step");
    const PhaseSpaceGrid& grid = cfg.restart_grid;
    SnapshotBuild out;

    if (cfg.compression == Compression::randomized) {
        const auto oracle = flow_oracle(step, history, current, species, grid, &out.work, nullptr, threads);
        auto f = rsvd(oracle, cfg.policy, seed);
        const double support = factor_support(f, grid);
        out.snapshot = std::make_shared<LowRankSnapshot>(std::move(f), grid, step, species.id, support,
                                                         cfg.interpolation);
        return out;
    }

    RowMatrix A = evaluate_on_grid(step, history, current, species, grid, &out.work, threads);
    std::vector<double> cmax(std::size_t(A.cols()), 0.0);
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            cmax[std::size_t(j)] = std::max(cmax[std::size_t(j)], std::abs(A(i, j)));
    const double support = support_from_column_max(grid, cmax);
    if (cfg.compression == Compression::none) {
        out.snapshot = std::make_shared<DenseSnapshot>(std::move(A), grid, step, species.id, support,
                                                       cfg.interpolation);
        return out;
    }
    auto f = truncate_svd(Eigen::MatrixXd(A), cfg.policy);
    const double fsupport = factor_support(f, grid);
    out.snapshot = std::make_shared<LowRankSnapshot>(std::move(f), grid, step, species.id, fsupport,
                                                     cfg.interpolation);
    return out;
}

} // namespace nufi
