#pragma once

#include "splidar/eval.hpp"
#include "splidar/reconstruct.hpp"
#include "splidar/simulate.hpp"

#include <cstdint>
#include <vector>

namespace splidar {

/// Empirical operating-conditions study: reconstructs simulated cubes over a
/// grid of mean signal photons per pixel and SBR, averaging the metrics over
/// seeds. One output row per grid cell.
inline std::vector<SweepRow> sweep_operating_conditions(
    const SceneSpec& base_scene, const ReconConfig& cfg, const std::vector<double>& ppp_levels,
    const std::vector<double>& sbr_levels, int n_seeds, double tau,
    std::uint64_t seed0 = 1) {
    if (ppp_levels.empty() || sbr_levels.empty())
        throw std::invalid_argument("sweep: need at least one ppp and sbr level");
    if (n_seeds < 1) throw std::invalid_argument("sweep: n_seeds must be >= 1");

    std::vector<SweepRow> rows;
    for (double ppp : ppp_levels) {
        for (double sbr : sbr_levels) {
            SceneSpec scene = base_scene;
            scene.target_ppp = ppp;
            scene.target_sbr = sbr;
            SensorModel sensor = build_sensor(scene);
            SweepRow row;
            row.ppp = ppp;
            row.sbr = sbr;
            row.seeds = n_seeds;
            for (int s = 0; s < n_seeds; ++s) {
                auto [cube, sim] = simulate_cube(scene, sensor, seed0 + static_cast<std::uint64_t>(s));
                ReconResult rec = reconstruct(cube, sensor, cfg);
                EvalResult ev = evaluate(rec.cloud, sim.truth, tau, sensor.pixel_pitch);
                row.recall_mean += ev.recall;
                row.rmse_mean += ev.depth_rmse;
                row.false_rate_mean += ev.false_point_rate;
            }
            row.recall_mean /= n_seeds;
            row.rmse_mean /= n_seeds;
            row.false_rate_mean /= n_seeds;
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace splidar
