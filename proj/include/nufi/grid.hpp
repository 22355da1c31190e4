#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace nufi {

inline constexpr int kMaxDim = 2;

/// Fixed-capacity coordinate tuple; only the first `dim` entries are meaningful.
using Coords = std::array<double, kMaxDim>;

enum class Boundary { periodic, bounded };

/// One tensor-product axis.
///
/// Periodic axes hold `count` nodes at min + i*h with h = (max-min)/count; the
/// right endpoint is the image of node 0 and is not stored. Bounded axes hold
/// both endpoints, h = (max-min)/(count-1).
struct AxisSpec {
    double min = 0.0;
    double max = 1.0;
    std::size_t count = 2;
    Boundary boundary = Boundary::periodic;

    static AxisSpec periodic(double min, double max, std::size_t count);
    static AxisSpec bounded(double min, double max, std::size_t count);

    void validate() const;

    double length() const noexcept { return max - min; }
    double spacing() const noexcept {
        return boundary == Boundary::periodic ? (max - min) / static_cast<double>(count)
                                              : (max - min) / static_cast<double>(count - 1);
    }
    double node(std::size_t i) const noexcept { return min + static_cast<double>(i) * spacing(); }

    /// Index of the node closest to x (wrapped/clamped per boundary kind).
    std::size_t nearest_index(double x) const;

    bool operator==(const AxisSpec&) const = default;
};

/// Result in [axis.min, axis.max) and congruent to x modulo the axis length.
/// Values already inside the interval are returned unchanged.
double wrap_periodic(double x, const AxisSpec& axis);

enum class VelocityRule {
    trapezoid, ///< half weight at the two endpoints; sums to the interval measure
    uniform,   ///< bare h_v on every node
};

/// Tensor-product spatial x velocity grid, 1D1V or 2D2V.
class PhaseSpaceGrid {
public:
    PhaseSpaceGrid() = default;
    PhaseSpaceGrid(std::vector<AxisSpec> spatial, std::vector<AxisSpec> velocity);

    int dim() const noexcept { return static_cast<int>(spatial_.size()); }
    const std::vector<AxisSpec>& spatial_axes() const noexcept { return spatial_; }
    const std::vector<AxisSpec>& velocity_axes() const noexcept { return velocity_; }
    const AxisSpec& spatial(int d) const { return spatial_.at(static_cast<std::size_t>(d)); }
    const AxisSpec& velocity(int d) const { return velocity_.at(static_cast<std::size_t>(d)); }

    std::size_t spatial_count() const noexcept;
    std::size_t velocity_count() const noexcept;
    std::size_t total_count() const noexcept { return spatial_count() * velocity_count(); }

    /// Spatial node coordinates for a linear spatial index (x fastest).
    Coords spatial_node(std::size_t linear) const;
    /// Velocity node coordinates for a linear velocity index (u fastest).
    Coords velocity_node(std::size_t linear) const;

    /// (x..., v...) for a full multi-index (spatial indices first).
    std::vector<double> node_coordinate(std::span<const std::size_t> multi_index) const;

    /// Copy with new velocity axes (spatial axes kept).
    PhaseSpaceGrid with_velocity(std::vector<AxisSpec> velocity) const;

    bool operator==(const PhaseSpaceGrid&) const = default;

private:
    std::vector<AxisSpec> spatial_;
    std::vector<AxisSpec> velocity_;
};

/// Per-node weights over the flattened velocity grid (u fastest).
std::vector<double> velocity_quadrature_weights(const PhaseSpaceGrid& grid,
                                                VelocityRule rule = VelocityRule::trapezoid);

/// Per-node weights over the flattened spatial grid. Periodic axes get h,
/// bounded axes the trapezoid rule.
std::vector<double> spatial_quadrature_weights(const PhaseSpaceGrid& grid);

/// 1D weights for one axis (periodic: h, bounded: per rule).
std::vector<double> axis_weights(const AxisSpec& axis, VelocityRule rule = VelocityRule::trapezoid);

} // namespace nufi
