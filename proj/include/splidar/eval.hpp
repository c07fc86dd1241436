#pragma once

#include "splidar/cloud.hpp"
#include "splidar/cube.hpp"
#include "splidar/reconstruct.hpp"
#include "splidar/sensor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace splidar {

struct EvalResult {
    double recall = 0.0;            // truth points matched within tau
    double false_point_rate = 0.0;  // unmatched estimated / estimated total
    double depth_rmse = 0.0;        // metres, over matches
    double intensity_mae = 0.0;     // over matches
    std::size_t n_truth = 0;
    std::size_t n_est = 0;
    std::size_t n_matched = 0;
};

/// Recall within depth error tau: points are grouped into transverse pixel
/// columns of the given pitch, then matched one-to-one per column greedily
/// by increasing depth error; only pairs within tau count as found.
inline EvalResult evaluate(const PointCloud& est, const PointCloud& truth, double tau,
                           double pitch) {
    if (tau <= 0.0) throw std::invalid_argument("evaluate: tau must be positive");
    if (pitch <= 0.0) throw std::invalid_argument("evaluate: pitch must be positive");

    auto column = [&](const Point& p) {
        return std::pair<std::int64_t, std::int64_t>(
            static_cast<std::int64_t>(std::floor(p.position.x() / pitch)),
            static_cast<std::int64_t>(std::floor(p.position.y() / pitch)));
    };
    std::map<std::pair<std::int64_t, std::int64_t>,
             std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>>
        columns;
    for (std::uint32_t n = 0; n < est.size(); ++n) columns[column(est[n])].first.push_back(n);
    for (std::uint32_t n = 0; n < truth.size(); ++n) columns[column(truth[n])].second.push_back(n);

    EvalResult out;
    out.n_truth = truth.size();
    out.n_est = est.size();
    double sq_depth = 0.0, abs_intensity = 0.0;
    for (const auto& [key, lists] : columns) {
        const auto& [es, ts] = lists;
        struct Pair {
            double err;
            std::uint32_t e, t;
        };
        std::vector<Pair> pairs;
        for (std::uint32_t e : es)
            for (std::uint32_t t : ts) {
                double err = std::fabs(est[e].position.z() - truth[t].position.z());
                if (err <= tau) pairs.push_back({err, e, t});
            }
        std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
            if (a.err != b.err) return a.err < b.err;
            if (a.t != b.t) return a.t < b.t;
            return a.e < b.e;
        });
        std::vector<bool> e_used(es.size() ? est.size() : 0, false);
        std::vector<bool> t_used(ts.size() ? truth.size() : 0, false);
        for (const Pair& pr : pairs) {
            if (e_used[pr.e] || t_used[pr.t]) continue;
            e_used[pr.e] = true;
            t_used[pr.t] = true;
            ++out.n_matched;
            sq_depth += pr.err * pr.err;
            abs_intensity += std::fabs(est[pr.e].intensity - truth[pr.t].intensity);
        }
    }
    out.recall = out.n_truth ? double(out.n_matched) / double(out.n_truth) : 1.0;
    out.false_point_rate =
        out.n_est ? double(out.n_est - out.n_matched) / double(out.n_est) : 0.0;
    out.depth_rmse = out.n_matched ? std::sqrt(sq_depth / double(out.n_matched)) : 0.0;
    out.intensity_mae = out.n_matched ? abs_intensity / double(out.n_matched) : 0.0;
    return out;
}

/// Unregularised baseline: per-pixel matched-filter argmax, one point per
/// nonempty pixel, placed at the coarse pixel centre.
inline PointCloud baseline_xcorr(const PhotonCube& cube, const SensorModel& sensor) {
    if (sensor.n_rows != cube.n_rows || sensor.n_cols != cube.n_cols ||
        sensor.n_bins != cube.n_bins)
        throw std::invalid_argument("baseline_xcorr: sensor/cube dimension mismatch");
    const std::size_t n_pix = cube.n_pixels();
    std::vector<std::vector<Point>> per_pixel(n_pix);
    parallel_for(n_pix, [&](std::size_t p) {
        int i = static_cast<int>(p) / sensor.n_cols;
        int j = static_cast<int>(p) % sensor.n_cols;
        double g = sensor.effective_gain(i, j);
        if (g == 0.0) return;
        auto [eb, ee] = cube.pixel(i, j);
        if (eb == ee) return;
        const Irf& irf = sensor.irf(i, j);
        auto peaks = detail::matched_filter_peaks(eb, ee, irf, cube.n_bins, 1, 0.0, 1);
        if (peaks.empty()) return;
        const detail::Peak& peak = peaks.front();
        double irf_mass = irf.mass_in_gate(peak.t, cube.n_bins);
        if (irf_mass <= 0.0) return;
        Point pt;
        pt.i = i;
        pt.j = j;
        pt.fi = i * sensor.superres + sensor.superres / 2;
        pt.fj = j * sensor.superres + sensor.superres / 2;
        pt.t = peak.t;
        double coarse_pitch = sensor.pixel_pitch * sensor.superres;
        pt.position = Vec3((i + 0.5) * coarse_pitch, (j + 0.5) * coarse_pitch,
                           peak.t * sensor.bin_resolution);
        pt.intensity = peak.mass / (g * irf_mass);
        per_pixel[p].push_back(pt);
    });
    PointCloud cloud;
    for (auto& bucket : per_pixel)
        for (Point& pt : bucket) cloud.points.push_back(pt);
    return cloud;
}

/// Nearest-neighbour upsample of a coarse reconstruction onto the fine grid:
/// each point is replicated over the s x s fine cells of its coarse pixel.
inline PointCloud replicate_to_fine_grid(const PointCloud& coarse, double coarse_pitch, int s) {
    if (s < 1 || coarse_pitch <= 0.0)
        throw std::invalid_argument("replicate_to_fine_grid: bad arguments");
    double fine_pitch = coarse_pitch / s;
    PointCloud out;
    out.points.reserve(coarse.size() * static_cast<std::size_t>(s) * s);
    for (const Point& p : coarse) {
        auto ci = static_cast<std::int64_t>(std::floor(p.position.x() / coarse_pitch));
        auto cj = static_cast<std::int64_t>(std::floor(p.position.y() / coarse_pitch));
        for (int a = 0; a < s; ++a)
            for (int c = 0; c < s; ++c) {
                Point q = p;
                q.position.x() = (double(ci) * s + a + 0.5) * fine_pitch;
                q.position.y() = (double(cj) * s + c + 0.5) * fine_pitch;
                q.intensity = p.intensity / double(s * s);
                out.points.push_back(q);
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Runtime scaling benchmark
// ---------------------------------------------------------------------------

enum class BenchAxis { Pixels, ActiveBins };

struct BenchRow {
    int level = 1;
    std::size_t pixels = 0;
    double mean_active_bins = 0.0;
    double seconds = 0.0;
};

struct BenchResult {
    BenchAxis axis = BenchAxis::ActiveBins;
    std::vector<BenchRow> rows;
    double slope = 0.0;      // least-squares seconds per x
    double intercept = 0.0;
    double r_squared = 1.0;
};

/// Tiles the cube spatially by an integer side factor.
inline PhotonCube tile_pixels(const PhotonCube& base, int factor) {
    if (factor < 1) throw std::invalid_argument("tile_pixels: factor must be >= 1");
    std::vector<std::vector<Event>> pixels(base.n_pixels() * factor * factor);
    int rows = base.n_rows * factor, cols = base.n_cols * factor;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            auto [eb, ee] = base.pixel(i % base.n_rows, j % base.n_cols);
            pixels[static_cast<std::size_t>(i) * cols + j].assign(eb, ee);
        }
    return PhotonCube::from_pixel_events(rows, cols, base.n_bins, base.bin_width_s, pixels);
}

/// Multiplies the active bins per pixel by replicating each pixel's events
/// at shifted bins (counts merge on collision, so the realized mean is
/// reported alongside).
inline PhotonCube multiply_active_bins(const PhotonCube& base, int factor) {
    if (factor < 1) throw std::invalid_argument("multiply_active_bins: factor must be >= 1");
    std::vector<std::vector<Event>> pixels(base.n_pixels());
    int stride = std::max(1, base.n_bins / factor);
    for (std::size_t p = 0; p < base.n_pixels(); ++p) {
        std::map<std::uint32_t, std::uint32_t> bins;
        auto eb = base.events.data() + base.offsets[p];
        auto ee = base.events.data() + base.offsets[p + 1];
        for (int m = 0; m < factor; ++m)
            for (auto e = eb; e != ee; ++e)
                bins[(e->bin + static_cast<std::uint32_t>(m) * stride) %
                     static_cast<std::uint32_t>(base.n_bins)] += e->count;
        for (auto [bin, count] : bins) pixels[p].push_back({bin, count});
    }
    return PhotonCube::from_pixel_events(base.n_rows, base.n_cols, base.n_bins,
                                         base.bin_width_s, pixels);
}

/// Times reconstruct() at a fixed iteration budget across scaled copies of
/// the base cube; reports the median of `repeats` runs per level plus a
/// least-squares line over (x, seconds) where x is the scaled quantity.
inline BenchResult bench_scaling(const PhotonCube& base, const SensorModel& sensor,
                                 ReconConfig cfg, BenchAxis axis,
                                 const std::vector<int>& levels, int fixed_iters = 3,
                                 int repeats = 3) {
    if (levels.empty()) throw std::invalid_argument("bench_scaling: need at least one level");
    if (fixed_iters < 1 || repeats < 1)
        throw std::invalid_argument("bench_scaling: iters/repeats must be >= 1");
    cfg.max_iters = fixed_iters;
    cfg.stop_tol = 0.0;  // force the full budget

    BenchResult out;
    out.axis = axis;
    for (int level : levels) {
        PhotonCube scaled = axis == BenchAxis::Pixels ? tile_pixels(base, level)
                                                      : multiply_active_bins(base, level);
        SensorModel scaled_sensor(scaled.n_rows, scaled.n_cols, scaled.n_bins,
                                  sensor.irf_shared, sensor.superres, sensor.pixel_pitch,
                                  sensor.bin_resolution);
        std::vector<double> times;
        for (int rep = 0; rep < repeats; ++rep) {
            auto t0 = std::chrono::steady_clock::now();
            ReconResult result = reconstruct(scaled, scaled_sensor, cfg);
            auto t1 = std::chrono::steady_clock::now();
            (void)result;
            times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        std::sort(times.begin(), times.end());
        BenchRow row;
        row.level = level;
        row.pixels = scaled.n_pixels();
        row.mean_active_bins = scaled.mean_active_bins();
        row.seconds = times[times.size() / 2];
        out.rows.push_back(row);
    }

    // least-squares line over the chosen axis
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    const double n = static_cast<double>(out.rows.size());
    auto x_of = [&](const BenchRow& r) {
        return axis == BenchAxis::Pixels ? static_cast<double>(r.pixels) : r.mean_active_bins;
    };
    for (const BenchRow& r : out.rows) {
        double x = x_of(r), y = r.seconds;
        sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
    }
    double denom = n * sxx - sx * sx;
    if (denom > 0.0) {
        out.slope = (n * sxy - sx * sy) / denom;
        out.intercept = (sy - out.slope * sx) / n;
        double ss_tot = syy - sy * sy / n;
        double ss_res = 0.0;
        for (const BenchRow& r : out.rows) {
            double resid = r.seconds - (out.intercept + out.slope * x_of(r));
            ss_res += resid * resid;
        }
        out.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    }
    return out;
}

inline std::string bench_to_csv(const BenchResult& b) {
    std::ostringstream out;
    out << "axis,level,pixels,mean_active_bins,seconds\n";
    const char* axis = b.axis == BenchAxis::Pixels ? "pixels" : "active_bins";
    char buf[128];
    for (const BenchRow& r : b.rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%zu,%.6g,%.6g\n", axis, r.level, r.pixels,
                      r.mean_active_bins, r.seconds);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "# slope=%.6g intercept=%.6g r_squared=%.6g\n", b.slope,
                  b.intercept, b.r_squared);
    out << buf;
    return out.str();
}

// ---------------------------------------------------------------------------
// Operating-conditions sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    double ppp = 0.0;
    double sbr = 0.0;
    int seeds = 0;
    double recall_mean = 0.0;
    double rmse_mean = 0.0;
    double false_rate_mean = 0.0;
};

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "ppp,sbr,seeds,recall_mean,rmse_mean,false_rate_mean\n";
    char buf[160];
    for (const SweepRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6g,%.6g,%d,%.6g,%.6g,%.6g\n", r.ppp, r.sbr, r.seeds,
                      r.recall_mean, r.rmse_mean, r.false_rate_mean);
        out << buf;
    }
    return out.str();
}

}  // namespace splidar
