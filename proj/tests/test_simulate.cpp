#include "splidar/io.hpp"
#include "splidar/parallel.hpp"
#include "splidar/reconstruct.hpp"
#include "splidar/simulate.hpp"
#include "splidar/sweep.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace splidar;

TEST_CASE("simulate: ambient-only scene hits the expected mean count", "[simulate]") {
    SceneSpec scene;
    scene.rows = 32;
    scene.cols = 32;
    scene.bins = 100;
    scene.ambient_per_bin = 2.0;
    SensorModel sensor = build_sensor(scene);
    auto [cube, sim] = simulate_cube(scene, sensor, 23);
    // per-pixel mean 200, sigma 200/sqrt(1024) over the average
    double mean = double(cube.total_count) / cube.n_pixels();
    REQUIRE(std::fabs(mean - 200.0) < 3.0 * std::sqrt(200.0 / cube.n_pixels()));
    REQUIRE(sim.truth.empty());
    REQUIRE(sim.signal_photons == 0);
}

TEST_CASE("simulate: zero reflectivity means zero signal photons", "[simulate]") {
    SceneSpec scene;
    scene.rows = 8;
    scene.cols = 8;
    scene.bins = 128;
    scene.ambient_per_bin = 0.5;
    SurfaceSpec plane;
    plane.depth_m = 0.5;
    plane.reflectivity = 0.0;
    scene.surfaces.push_back(plane);
    SensorModel sensor = build_sensor(scene);
    auto [cube, sim] = simulate_cube(scene, sensor, 29);
    REQUIRE(sim.signal_photons == 0);
    REQUIRE(cube.total_count == sim.background_photons);
}

TEST_CASE("simulate: two-surface pixels show two matched-filter modes", "[simulate]") {
    SceneSpec scene;
    scene.rows = 8;
    scene.cols = 8;
    scene.bins = 400;
    scene.bin_resolution_m = 0.01;
    scene.pixel_pitch_m = 0.02;
    scene.target_ppp = 80.0;
    scene.target_sbr = 40.0;
    SurfaceSpec near, far;
    near.depth_m = 1.0;
    far.depth_m = 3.0;
    scene.surfaces.push_back(near);
    scene.surfaces.push_back(far);
    SensorModel sensor = build_sensor(scene);
    auto [cube, sim] = simulate_cube(scene, sensor, 31);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            auto [eb, ee] = cube.pixel(i, j);
            auto peaks = detail::matched_filter_peaks(eb, ee, sensor.irf(i, j), 400, 2, 3.0, 20);
            REQUIRE(peaks.size() == 2);
            REQUIRE(std::fabs(peaks[0].t - 100.0) < 3.0);
            REQUIRE(std::fabs(peaks[1].t - 300.0) < 3.0);
        }
}

TEST_CASE("simulate: target ppp and sbr are realized", "[simulate]") {
    SceneSpec scene;
    scene.rows = 32;
    scene.cols = 32;
    scene.bins = 500;
    scene.bin_resolution_m = 0.01;
    scene.pixel_pitch_m = 0.02;
    scene.target_ppp = 3.0;
    scene.target_sbr = 13.0;
    SurfaceSpec back, net;
    back.depth_m = 4.0;
    net.depth_m = 2.0;
    net.region = {8, 8, 24, 24};
    scene.surfaces.push_back(back);
    scene.surfaces.push_back(net);
    SensorModel sensor = build_sensor(scene);
    auto [cube, sim] = simulate_cube(scene, sensor, 37);
    REQUIRE(sim.expected_signal_ppp == Catch::Approx(3.0));
    REQUIRE(sim.expected_sbr == Catch::Approx(13.0));
    REQUIRE(sim.realized_signal_ppp == Catch::Approx(3.0).margin(0.2));
    REQUIRE(sim.realized_sbr == Catch::Approx(13.0).margin(2.5));
}

TEST_CASE("simulate: identical seeds give bitwise identical cubes on any thread count",
          "[simulate]") {
    SceneSpec scene;
    scene.rows = 16;
    scene.cols = 16;
    scene.bins = 200;
    scene.ambient_per_bin = 0.05;
    SurfaceSpec plane;
    plane.depth_m = 1.0;
    plane.reflectivity = 4.0;
    scene.surfaces.push_back(plane);
    SensorModel sensor = build_sensor(scene);

    set_thread_count(1);
    auto [cube1, sim1] = simulate_cube(scene, sensor, 41);
    set_thread_count(3);
    auto [cube2, sim2] = simulate_cube(scene, sensor, 41);
    set_thread_count(0);
    REQUIRE(cube1 == cube2);
    REQUIRE(encode_cube(cube1) == encode_cube(cube2));
    auto [cube3, sim3] = simulate_cube(scene, sensor, 42);
    REQUIRE(cube1 != cube3);
}

TEST_CASE("simulate: dead pixels record nothing, hot pixels add background", "[simulate]") {
    SceneSpec scene;
    scene.rows = 4;
    scene.cols = 4;
    scene.bins = 100;
    scene.ambient_per_bin = 1.0;
    scene.dead_pixels = {{1, 1}};
    scene.hot_pixels = {{2, 2, 20.0}};
    SensorModel sensor = build_sensor(scene);
    auto [cube, sim] = simulate_cube(scene, sensor, 43);
    REQUIRE(cube.pixel_count(1, 1) == 0);
    REQUIRE(cube.pixel_count(2, 2) > 10 * cube.pixel_count(0, 0) / 3);
    REQUIRE(sim.background_truth(2, 2) == Catch::Approx(21.0));
}

TEST_CASE("simulate: per-bin counts match Poisson mean and variance", "[simulate]") {
    // one pixel, flat rate: every bin is an iid Poisson draw
    SceneSpec scene;
    scene.rows = 1;
    scene.cols = 1;
    scene.bins = 10000;
    scene.ambient_per_bin = 5.0;
    SensorModel sensor = build_sensor(scene);
    auto [cube, sim] = simulate_cube(scene, sensor, 47);
    std::vector<double> z(scene.bins, 0.0);
    auto [eb, ee] = cube.pixel(0, 0);
    for (auto e = eb; e != ee; ++e) z[e->bin] = double(e->count);
    double sum = 0.0, sum2 = 0.0;
    for (double v : z) {
        sum += v;
        sum2 += v * v;
    }
    double n = double(scene.bins);
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    REQUIRE(std::fabs(mean - 5.0) < 3.0 * std::sqrt(5.0 / n));
    REQUIRE(std::fabs(var - 5.0) < 3.0 * std::sqrt((5.0 + 50.0) / n));
}

TEST_CASE("sweep: one cell gives one row, recall rises with photons", "[simulate]") {
    SceneSpec scene;
    scene.rows = 12;
    scene.cols = 12;
    scene.bins = 250;
    scene.bin_resolution_m = 0.01;
    scene.pixel_pitch_m = 0.02;
    SurfaceSpec plane;
    plane.depth_m = 1.2;
    scene.surfaces.push_back(plane);

    ReconConfig cfg;
    cfg.max_iters = 6;
    cfg.apss.kernel_radius = 0.1;
    cfg.knn_k = 5;
    cfg.r_min = 0.2;
    cfg.init.max_returns = 2;

    auto one = sweep_operating_conditions(scene, cfg, {5.0}, {10.0}, 2, 0.04);
    REQUIRE(one.size() == 1);
    REQUIRE(one[0].seeds == 2);
    std::string csv = sweep_to_csv(one);
    REQUIRE(csv.find("ppp,sbr,seeds") == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 2);  // header + one row

    auto grid = sweep_operating_conditions(scene, cfg, {0.25, 8.0}, {10.0}, 3, 0.04);
    REQUIRE(grid.size() == 2);
    REQUIRE(grid[1].recall_mean >= grid[0].recall_mean);
}
