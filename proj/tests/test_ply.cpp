#include "splidar/cloud.hpp"
#include "splidar/io.hpp"
#include "splidar/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace splidar;

TEST_CASE("empty cloud writes a valid PLY with zero vertices", "[ply]") {
    std::string text = encode_ply(PointCloud{});
    REQUIRE(text.find("element vertex 0") != std::string::npos);
    PlyCloud back = decode_ply(text);
    REQUIRE(back.cloud.empty());
}

TEST_CASE("single point becomes one vertex row", "[ply]") {
    PointCloud cloud;
    Point p;
    p.position = Vec3(1.0, 2.0, 3.0);
    p.intensity = 0.5;
    cloud.points.push_back(p);
    std::string text = encode_ply(cloud);
    REQUIRE(text.find("1 2 3 0.5\n") != std::string::npos);
}

TEST_CASE("header count matches the cloud and order is preserved", "[ply]") {
    CounterRng rng(11);
    PointCloud cloud;
    for (int n = 0; n < 257; ++n) {
        Point p;
        p.position = Vec3(rng.next_unit(), rng.next_unit(), rng.next_unit() * 10.0);
        p.intensity = rng.next_unit() * 5.0;
        cloud.points.push_back(p);
    }
    PlyCloud back = decode_ply(encode_ply(cloud, 0.25));
    REQUIRE(back.cloud.size() == cloud.size());
    REQUIRE(back.pixel_pitch.has_value());
    REQUIRE(*back.pixel_pitch == Catch::Approx(0.25));
    for (std::size_t n = 0; n < cloud.size(); ++n) {
        REQUIRE(back.cloud[n].position.x() == Catch::Approx(cloud[n].position.x()).epsilon(1e-6));
        REQUIRE(back.cloud[n].position.z() == Catch::Approx(cloud[n].position.z()).epsilon(1e-6));
        REQUIRE(back.cloud[n].intensity == Catch::Approx(cloud[n].intensity).epsilon(1e-6));
    }
}

TEST_CASE("malformed PLY inputs are rejected", "[ply]") {
    REQUIRE_THROWS_AS(decode_ply("nonsense"), FormatError);
    REQUIRE_THROWS_AS(decode_ply("ply\nformat binary_little_endian 1.0\nend_header\n"),
                      FormatError);
    REQUIRE_THROWS_AS(
        decode_ply("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\n"
                   "property float y\nproperty float z\nend_header\n0 0 0\n"),
        FormatError);  // short row count
    REQUIRE_THROWS_AS(
        decode_ply("ply\nformat ascii 1.0\nelement vertex 1\nproperty float y\n"
                   "property float z\nend_header\n0 0\n"),
        FormatError);  // missing x property
}

TEST_CASE("extra scalar properties are tolerated", "[ply]") {
    std::string text =
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
        "property float z\nproperty float nx\nproperty float intensity\nend_header\n"
        "1 2 3 0 0.75\n";
    PlyCloud back = decode_ply(text);
    REQUIRE(back.cloud.size() == 1);
    REQUIRE(back.cloud[0].intensity == Catch::Approx(0.75));
}
