#include "nufi/grid.hpp"

#include "nufi/error.hpp"

#include <algorithm>
#include <string>

namespace nufi {

AxisSpec AxisSpec::periodic(double min, double max, std::size_t count) {
    AxisSpec a{min, max, count, Boundary::periodic};
    a.validate();
    return a;
}

AxisSpec AxisSpec::bounded(double min, double max, std::size_t count) {
    AxisSpec a{min, max, count, Boundary::bounded};
    a.validate();
    return a;
}

void AxisSpec::validate() const {
    if (!(max > min) || !std::isfinite(min) || !std::isfinite(max))
        throw UsageError("axis requires finite max > min");
    if (count < 2)
        throw UsageError("axis requires at least 2 nodes, got " + std::to_string(count));
}

std::size_t AxisSpec::nearest_index(double x) const {
    const double h = spacing();
    if (boundary == Boundary::periodic) {
        const double w = wrap_periodic(x, *this);
        auto i = static_cast<std::size_t>(std::llround((w - min) / h));
        return i % count;
    }
    const double t = std::clamp((x - min) / h, 0.0, static_cast<double>(count - 1));
    return static_cast<std::size_t>(std::llround(t));
}

double wrap_periodic(double x, const AxisSpec& axis) {
    if (x >= axis.min && x < axis.max)
        return x;
    const double len = axis.length();
    double r = std::fmod(x - axis.min, len);
    if (r < 0.0)
        r += len;
    double out = axis.min + r;
    // r + min can round onto the excluded right endpoint
    if (out >= axis.max || out < axis.min)
        out = axis.min;
    return out;
}

PhaseSpaceGrid::PhaseSpaceGrid(std::vector<AxisSpec> spatial, std::vector<AxisSpec> velocity)
    : spatial_(std::move(spatial)), velocity_(std::move(velocity)) {
    if (spatial_.empty() || spatial_.size() > static_cast<std::size_t>(kMaxDim))
        throw UsageError("only 1D1V and 2D2V grids are supported");
    if (spatial_.size() != velocity_.size())
        throw UsageError("spatial and velocity dimensionality must match");
    for (const auto& a : spatial_)
        a.validate();
    for (const auto& a : velocity_) {
        a.validate();
        if (a.boundary != Boundary::bounded)
            throw UsageError("velocity axes must be bounded");
    }
}

std::size_t PhaseSpaceGrid::spatial_count() const noexcept {
    std::size_t n = 1;
    for (const auto& a : spatial_)
        n *= a.count;
    return n;
}

std::size_t PhaseSpaceGrid::velocity_count() const noexcept {
    std::size_t n = 1;
    for (const auto& a : velocity_)
        n *= a.count;
    return n;
}

Coords PhaseSpaceGrid::spatial_node(std::size_t linear) const {
    Coords c{};
    for (std::size_t d = 0; d < spatial_.size(); ++d) {
        c[d] = spatial_[d].node(linear % spatial_[d].count);
        linear /= spatial_[d].count;
    }
    return c;
}

Coords PhaseSpaceGrid::velocity_node(std::size_t linear) const {
    Coords c{};
    for (std::size_t d = 0; d < velocity_.size(); ++d) {
        c[d] = velocity_[d].node(linear % velocity_[d].count);
        linear /= velocity_[d].count;
    }
    return c;
}

std::vector<double> PhaseSpaceGrid::node_coordinate(std::span<const std::size_t> multi_index) const {
    const std::size_t n = spatial_.size() + velocity_.size();
    if (multi_index.size() != n)
        throw UsageError("multi-index has " + std::to_string(multi_index.size()) + " entries, grid has " +
                         std::to_string(n) + " axes");
    std::vector<double> out(n);
    for (std::size_t d = 0; d < n; ++d) {
        const AxisSpec& a = d < spatial_.size() ? spatial_[d] : velocity_[d - spatial_.size()];
        if (multi_index[d] >= a.count)
            throw UsageError("index " + std::to_string(multi_index[d]) + " out of range for axis " +
                             std::to_string(d));
        out[d] = a.node(multi_index[d]);
    }
    return out;
}

PhaseSpaceGrid PhaseSpaceGrid::with_velocity(std::vector<AxisSpec> velocity) const {
    return PhaseSpaceGrid(spatial_, std::move(velocity));
}

std::vector<double> axis_weights(const AxisSpec& axis, VelocityRule rule) {
    const double h = axis.spacing();
    std::vector<double> w(axis.count, h);
    if (axis.boundary == Boundary::bounded && rule == VelocityRule::trapezoid) {
        w.front() = 0.5 * h;
        w.back() = 0.5 * h;
    }
    return w;
}

namespace {

std::vector<double> tensor_weights(const std::vector<AxisSpec>& axes, VelocityRule rule) {
    std::vector<double> out{1.0};
    for (const auto& a : axes) {
        const auto w = axis_weights(a, rule);
        std::vector<double> next;
        next.reserve(out.size() * w.size());
        // earlier axes vary fastest
        for (double wj : w)
            for (double wi : out)
                next.push_back(wi * wj);
        out = std::move(next);
    }
    return out;
}

} // namespace

std::vector<double> velocity_quadrature_weights(const PhaseSpaceGrid& grid, VelocityRule rule) {
    return tensor_weights(grid.velocity_axes(), rule);
}

std::vector<double> spatial_quadrature_weights(const PhaseSpaceGrid& grid) {
    return tensor_weights(grid.spatial_axes(), VelocityRule::trapezoid);
}

} // namespace nufi
