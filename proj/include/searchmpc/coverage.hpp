// Grid evaluation of the uncertainty volume covered by the union of visited disks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "searchmpc/gmm_map.hpp"
#include "searchmpc/types.hpp"

namespace searchmpc {

/// Uniform grid; cell (i, j) spans origin + [i, i+1) x [j, j+1) cells.
struct GridSpec {
    Vec2 origin{Vec2::Zero()};
    double cell_size{0.1};
    int width{1};
    int height{1};

    Vec2 cell_center(int i, int j) const {
        return origin + Vec2((i + 0.5) * cell_size, (j + 0.5) * cell_size);
    }
    std::size_t cell_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    void check() const {
        if (!(cell_size > 0.0) || !std::isfinite(cell_size))
            throw std::invalid_argument("grid cell_size must be > 0");
        if (width < 1 || height < 1) throw std::invalid_argument("grid extent must be positive");
    }
};

/// Grid covering the trajectory inflated by r and every component mean +- 4 sigma_max.
inline GridSpec covering_grid(const UncertaintyMap& map, std::span<const Vec2> trajectory, double r,
                              double cell_size) {
    if (!(cell_size > 0.0)) throw std::invalid_argument("grid cell_size must be > 0");
    const double reach = 4.0 * map.max_sigma();
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo;
    for (const auto& t : map.terms()) {
        lo = lo.cwiseMin(t.source.mean - Vec2::Constant(reach));
        hi = hi.cwiseMax(t.source.mean + Vec2::Constant(reach));
    }
    for (const auto& p : trajectory) {
        lo = lo.cwiseMin(p - Vec2::Constant(r));
        hi = hi.cwiseMax(p + Vec2::Constant(r));
    }
    lo -= Vec2::Constant(cell_size);
    hi += Vec2::Constant(cell_size);
    GridSpec g;
    g.origin = lo;
    g.cell_size = cell_size;
    g.width = static_cast<int>(std::ceil((hi.x() - lo.x()) / cell_size));
    g.height = static_cast<int>(std::ceil((hi.y() - lo.y()) / cell_size));
    return g;
}

/// Boolean raster; bits only go from false to true.
class CoverageMask {
public:
    explicit CoverageMask(GridSpec spec) : spec_(spec), bits_((spec.check(), spec.cell_count()), 0) {}

    const GridSpec& spec() const noexcept { return spec_; }
    bool covered(int i, int j) const { return bits_[index(i, j)] != 0; }
    std::size_t covered_count() const {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }
    std::span<const std::uint8_t> bits() const { return bits_; }

    /// Marks every cell whose center lies strictly within r of `center`.
    /// Returns false (and changes nothing) when the disk misses the grid.
    /// Indices of newly set cells are appended to `fresh` when given.
    bool stamp_disk(const Vec2& center, double r, std::vector<std::size_t>* fresh = nullptr) {
        const double c = spec_.cell_size;
        const Vec2 rel = (center - spec_.origin) / c;
        const double rc = r / c;
        const int i0 = std::max(0, static_cast<int>(std::floor(rel.x() - rc - 0.5)));
        const int i1 = std::min(spec_.width - 1, static_cast<int>(std::ceil(rel.x() + rc - 0.5)));
        const int j0 = std::max(0, static_cast<int>(std::floor(rel.y() - rc - 0.5)));
        const int j1 = std::min(spec_.height - 1, static_cast<int>(std::ceil(rel.y() + rc - 0.5)));
        if (i0 > i1 || j0 > j1) return false;
        const double r2 = r * r;
        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) {
                if ((spec_.cell_center(i, j) - center).squaredNorm() < r2) {
                    auto& b = bits_[index(i, j)];
                    if (!b) {
                        b = 1;
                        if (fresh) fresh->push_back(index(i, j));
                    }
                }
            }
        }
        return true;
    }

    Vec2 center_of(std::size_t idx) const {
        return spec_.cell_center(static_cast<int>(idx % spec_.width), static_cast<int>(idx / spec_.width));
    }

private:
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(spec_.width) +
               static_cast<std::size_t>(i);
    }

    GridSpec spec_;
    std::vector<std::uint8_t> bits_;
};

/// Sum of h(cell center) * cell area over covered cells, in row-major order.
inline double coverage_volume(const CoverageMask& mask, const UncertaintyMap& map) {
    const double area = mask.spec().cell_size * mask.spec().cell_size;
    double s = 0.0;
    const auto bits = mask.bits();
    for (std::size_t idx = 0; idx < bits.size(); ++idx)
        if (bits[idx]) s += map.eval_density(mask.center_of(idx));
    return s * area;
}

/// Prefix-union coverage H[k] for k = 0..K over the visited positions.
inline std::vector<double> coverage_series(std::span<const Vec2> positions, const UncertaintyMap& map,
                                           const GridSpec& grid, double r) {
    CoverageMask mask(grid);
    const double area = grid.cell_size * grid.cell_size;
    std::vector<double> series;
    series.reserve(positions.size());
    std::vector<std::size_t> fresh;
    double total = 0.0;
    for (const auto& p : positions) {
        fresh.clear();
        mask.stamp_disk(p, r, &fresh);
        std::sort(fresh.begin(), fresh.end());
        double added = 0.0;
        for (auto idx : fresh) added += map.eval_density(mask.center_of(idx));
        total += added * area;
        series.push_back(total);
    }
    return series;
}

}  // namespace searchmpc
