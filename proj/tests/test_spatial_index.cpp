#include "splidar/rng.hpp"
#include "splidar/spatial_index.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

using namespace splidar;

namespace {

PointCloud random_cloud(std::uint64_t seed, int n, double extent) {
    CounterRng rng(seed);
    PointCloud cloud;
    for (int k = 0; k < n; ++k) {
        Point p;
        p.position = Vec3(rng.next_unit() * extent, rng.next_unit() * extent,
                          rng.next_unit() * extent);
        p.intensity = rng.next_unit();
        cloud.points.push_back(p);
    }
    return cloud;
}

std::vector<std::uint32_t> brute_ball(const PointCloud& cloud, const Vec3& q, double r) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t n = 0; n < cloud.size(); ++n)
        if ((cloud[n].position - q).squaredNorm() <= r * r) out.push_back(n);
    return out;
}

}  // namespace

TEST_CASE("radius query matches a brute-force scan", "[index]") {
    PointCloud cloud = random_cloud(5, 400, 1.0);
    double radius = 0.15;
    SpatialIndex index(cloud, radius);
    CounterRng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        Vec3 q(rng.next_unit(), rng.next_unit(), rng.next_unit());
        REQUIRE(index.query(q, radius) == brute_ball(cloud, q, radius));
    }
    // smaller radii than the cell size are allowed too
    REQUIRE(index.query(cloud[0].position, 0.07) == brute_ball(cloud, cloud[0].position, 0.07));
    REQUIRE_THROWS_AS(index.query(Vec3::Zero(), radius * 2), std::invalid_argument);
}

TEST_CASE("knn query returns nearest neighbours sorted by distance", "[index]") {
    PointCloud cloud = random_cloud(9, 300, 1.0);
    double radius = 0.3;
    SpatialIndex index(cloud, radius);
    for (std::uint32_t n = 0; n < 50; ++n) {
        auto got = index.query_knn(cloud[n].position, 7, radius);
        REQUIRE(!got.empty());
        REQUIRE(got.front() == n);  // self is its own nearest neighbour
        auto ball = brute_ball(cloud, cloud[n].position, radius);
        std::sort(ball.begin(), ball.end(), [&](std::uint32_t a, std::uint32_t b) {
            double da = (cloud[a].position - cloud[n].position).squaredNorm();
            double db = (cloud[b].position - cloud[n].position).squaredNorm();
            if (da != db) return da < db;
            return a < b;
        });
        ball.resize(std::min<std::size_t>(7, ball.size()));
        REQUIRE(got == ball);
    }
}

TEST_CASE("every point is indexed exactly once", "[index]") {
    PointCloud cloud = random_cloud(13, 200, 0.5);
    SpatialIndex index(cloud, 10.0);  // one cell holds everything
    auto all = index.query(Vec3(0.25, 0.25, 0.25), 10.0);
    REQUIRE(all.size() == cloud.size());
}
