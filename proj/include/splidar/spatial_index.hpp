#pragma once

#include "splidar/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace splidar {

/// Uniform voxel grid over world coordinates with cell size equal to the
/// query radius: a radius query touches at most 3x3x3 cells, candidates are
/// then exact-distance filtered. Neighbour lists are returned in ascending
/// point-index order so reductions over them are scheduling-independent.
class SpatialIndex {
public:
    SpatialIndex(const PointCloud& cloud, double cell_size)
        : cloud_(&cloud), cell_(cell_size) {
        if (cell_size <= 0.0) throw std::invalid_argument("SpatialIndex: cell size must be positive");
        cells_.reserve(cloud.size());
        for (std::uint32_t n = 0; n < cloud.size(); ++n)
            cells_[key(cloud[n].position)].push_back(n);
    }

    double cell_size() const { return cell_; }

    /// Indices of points within `radius` of q (requires radius <= cell size).
    std::vector<std::uint32_t> query(const Vec3& q, double radius) const {
        if (radius > cell_ * (1.0 + 1e-12))
            throw std::invalid_argument("SpatialIndex: query radius exceeds cell size");
        std::vector<std::uint32_t> out;
        const double r2 = radius * radius;
        std::int64_t cx = coord(q.x()), cy = coord(q.y()), cz = coord(q.z());
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
                    if (it == cells_.end()) continue;
                    for (std::uint32_t n : it->second)
                        if (((*cloud_)[n].position - q).squaredNorm() <= r2) out.push_back(n);
                }
        std::sort(out.begin(), out.end());
        return out;
    }

    /// k nearest neighbours of q among points within `radius`, ordered by
    /// (distance, index). Returns fewer than k when the ball is sparse.
    std::vector<std::uint32_t> query_knn(const Vec3& q, std::size_t k, double radius) const {
        std::vector<std::uint32_t> ball = query(q, radius);
        std::vector<std::pair<double, std::uint32_t>> ranked;
        ranked.reserve(ball.size());
        for (std::uint32_t n : ball)
            ranked.emplace_back(((*cloud_)[n].position - q).squaredNorm(), n);
        std::size_t keep = std::min(k, ranked.size());
        std::partial_sort(ranked.begin(), ranked.begin() + keep, ranked.end());
        std::vector<std::uint32_t> out(keep);
        for (std::size_t m = 0; m < keep; ++m) out[m] = ranked[m].second;
        return out;
    }

private:
    std::int64_t coord(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }
    std::uint64_t key(const Vec3& p) const { return pack(coord(p.x()), coord(p.y()), coord(p.z())); }
    static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
        auto u = [](std::int64_t v) {
            return static_cast<std::uint64_t>(v + (1ll << 20)) & ((1ull << 21) - 1);
        };
        return (u(x) << 42) | (u(y) << 21) | u(z);
    }

    const PointCloud* cloud_;
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

}  // namespace splidar
