#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace splidar {

using Vec3 = Eigen::Vector3d;

enum PointFlags : std::uint8_t {
    kFlagIsolated = 1,    // too few neighbours for surface fitting
    kFlagOutOfGate = 2,   // IRF support entirely outside the time gate
    kFlagDegenerate = 4,  // surface fit unusable, point left in place
};

struct Point {
    Vec3 position = Vec3::Zero();  // world metres
    double intensity = 0.0;        // unnormalised reflectivity, >= 0
    int i = 0, j = 0;              // home coarse pixel
    int fi = 0, fj = 0;            // fine transverse index
    double t = 0.0;                // depth in bin units, sub-bin resolution
    std::uint8_t flags = 0;
};

struct PointCloud {
    std::vector<Point> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    Point& operator[](std::size_t n) { return points[n]; }
    const Point& operator[](std::size_t n) const { return points[n]; }
    auto begin() { return points.begin(); }
    auto end() { return points.end(); }
    auto begin() const { return points.begin(); }
    auto end() const { return points.end(); }
};

}  // namespace splidar
