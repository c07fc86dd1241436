#pragma once

#include "splidar/cloud.hpp"
#include "splidar/cube.hpp"
#include "splidar/grid.hpp"
#include "splidar/parallel.hpp"
#include "splidar/sensor.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace splidar {

/// The estimate triple (t, r, b): point cloud, background image and the
/// sensor they are expressed against, with a per-pixel point bucketing that
/// must be refreshed after any cloud mutation.
struct SceneState {
    PointCloud cloud;
    BackgroundImage background;
    const SensorModel* sensor = nullptr;

    std::vector<std::uint32_t> bucket_offsets;  // size n_pixels + 1
    std::vector<std::uint32_t> bucket_points;   // point indices grouped by pixel

    SceneState() = default;
    SceneState(PointCloud c, BackgroundImage b, const SensorModel* s)
        : cloud(std::move(c)), background(std::move(b)), sensor(s) {
        if (!sensor) throw std::invalid_argument("SceneState: null sensor");
        if (background.rows != sensor->n_rows || background.cols != sensor->n_cols)
            throw std::invalid_argument("SceneState: background/sensor shape mismatch");
        refresh();
    }

    /// Rebuilds the pixel buckets; point order within a bucket follows cloud order.
    void refresh() {
        const std::size_t n_pix = static_cast<std::size_t>(sensor->n_rows) * sensor->n_cols;
        std::vector<std::uint32_t> counts(n_pix, 0);
        for (const Point& p : cloud) {
            if (p.i < 0 || p.i >= sensor->n_rows || p.j < 0 || p.j >= sensor->n_cols)
                throw std::invalid_argument("SceneState: point home pixel out of bounds");
            ++counts[static_cast<std::size_t>(p.i) * sensor->n_cols + p.j];
        }
        bucket_offsets.assign(n_pix + 1, 0);
        for (std::size_t p = 0; p < n_pix; ++p)
            bucket_offsets[p + 1] = bucket_offsets[p] + counts[p];
        bucket_points.resize(cloud.size());
        std::vector<std::uint32_t> cursor(bucket_offsets.begin(), bucket_offsets.end() - 1);
        for (std::uint32_t n = 0; n < cloud.size(); ++n) {
            std::size_t p = static_cast<std::size_t>(cloud[n].i) * sensor->n_cols + cloud[n].j;
            bucket_points[cursor[p]++] = n;
        }
    }

    std::pair<const std::uint32_t*, const std::uint32_t*> pixel_points(int i, int j) const {
        std::size_t p = static_cast<std::size_t>(i) * sensor->n_cols + j;
        return {bucket_points.data() + bucket_offsets[p],
                bucket_points.data() + bucket_offsets[p + 1]};
    }
};

/// lambda_{i,j,t}: expected counts, signal mixture plus background.
inline double rate(const SceneState& state, int i, int j, double t) {
    const SensorModel& sensor = *state.sensor;
    double g = sensor.effective_gain(i, j);
    if (g == 0.0) return 0.0;
    const Irf& irf = sensor.irf(i, j);
    double lam = state.background(i, j);
    auto [pb, pe] = state.pixel_points(i, j);
    for (; pb != pe; ++pb) {
        const Point& p = state.cloud[*pb];
        lam += p.intensity * irf.value(t - p.t);
    }
    return g * lam;
}

/// Whole-pixel rate profile; rate_profile(state,i,j)[t] == rate(state,i,j,t).
inline std::vector<double> rate_profile(const SceneState& state, int i, int j) {
    const SensorModel& sensor = *state.sensor;
    std::vector<double> lam(sensor.n_bins, 0.0);
    double g = sensor.effective_gain(i, j);
    if (g == 0.0) return lam;
    double bg = g * state.background(i, j);
    for (double& v : lam) v = bg;
    const Irf& irf = sensor.irf(i, j);
    auto [pb, pe] = state.pixel_points(i, j);
    for (; pb != pe; ++pb) {
        const Point& p = state.cloud[*pb];
        auto [lo, hi] = irf.support_bins(p.t, sensor.n_bins);
        for (int b = lo; b <= hi; ++b) lam[b] += g * p.intensity * irf.value(b - p.t);
    }
    return lam;
}

namespace detail {

/// lambda at each active bin of one pixel. Returns false for dead pixels.
inline bool active_rates(const SceneState& state, const PhotonCube& cube, int i, int j,
                         std::vector<double>& lam) {
    const SensorModel& sensor = *state.sensor;
    double g = sensor.effective_gain(i, j);
    auto [eb, ee] = cube.pixel(i, j);
    lam.assign(static_cast<std::size_t>(ee - eb), 0.0);
    if (g == 0.0) return false;
    double bg = state.background(i, j);
    for (double& v : lam) v = g * bg;
    const Irf& irf = sensor.irf(i, j);
    auto [pb, pe] = state.pixel_points(i, j);
    for (; pb != pe; ++pb) {
        const Point& p = state.cloud[*pb];
        auto [lo, hi] = irf.support_bins(p.t, sensor.n_bins);
        // Active bins are sorted; walk only those inside the support.
        const Event* e = eb;
        while (e != ee && e->bin < static_cast<std::uint32_t>(lo)) ++e;
        for (; e != ee && e->bin <= static_cast<std::uint32_t>(hi); ++e)
            lam[e - eb] += g * p.intensity * irf.value(double(e->bin) - p.t);
    }
    return true;
}

inline void check_dims(const SceneState& state, const PhotonCube& cube) {
    if (state.sensor->n_rows != cube.n_rows || state.sensor->n_cols != cube.n_cols ||
        state.sensor->n_bins != cube.n_bins)
        throw std::invalid_argument("likelihood: state/cube dimension mismatch");
}

}  // namespace detail

/// Poisson negative log-likelihood g(t, r, b), up to the data-only log(z!)
/// constant which is omitted. Conventions: 0*log(0) = 0; an active bin with
/// zero rate yields +infinity (infeasible state, still a valid value).
/// The rate mass term is summed in closed form over points and background,
/// so only active bins need a log evaluation.
inline double nll(const SceneState& state, const PhotonCube& cube) {
    detail::check_dims(state, cube);
    const SensorModel& sensor = *state.sensor;
    const std::size_t n_pix = cube.n_pixels();
    std::vector<double> partial(n_pix, 0.0);
    parallel_for(n_pix, [&](std::size_t p) {
        int i = static_cast<int>(p) / sensor.n_cols;
        int j = static_cast<int>(p) % sensor.n_cols;
        if (sensor.is_dead(i, j)) return;  // masked out of the likelihood
        double g = sensor.gain(i, j);
        const Irf& irf = sensor.irf(i, j);
        double mass = cube.n_bins * state.background(i, j);
        auto [pb, pe] = state.pixel_points(i, j);
        for (; pb != pe; ++pb) {
            const Point& pt = state.cloud[*pb];
            mass += pt.intensity * irf.mass_in_gate(pt.t, cube.n_bins);
        }
        double acc = g * mass;
        std::vector<double> lam;
        detail::active_rates(state, cube, i, j, lam);
        auto [eb, ee] = cube.pixel(i, j);
        for (const Event* e = eb; e != ee; ++e) {
            double l = lam[e - eb];
            if (l <= 0.0) {
                acc = std::numeric_limits<double>::infinity();
                break;
            }
            acc -= double(e->count) * std::log(l);
        }
        partial[p] = acc;
    });
    return pairwise_sum(partial);
}

struct DepthGradient {
    std::vector<double> value;                    // d nll / d t_n, per point
    std::vector<std::uint32_t> out_of_gate;       // points with no in-gate support
};

/// d g / d t_n. Visits only the IRF support of each point; active bins add
/// the z/lambda correction. Uses the exact derivative of the interpolated
/// IRF so finite differences of nll() reproduce it.
inline DepthGradient grad_depth(const SceneState& state, const PhotonCube& cube) {
    detail::check_dims(state, cube);
    const SensorModel& sensor = *state.sensor;
    DepthGradient out;
    out.value.assign(state.cloud.size(), 0.0);
    std::vector<std::uint8_t> oog(state.cloud.size(), 0);
    const std::size_t n_pix = cube.n_pixels();
    parallel_for(n_pix, [&](std::size_t p) {
        int i = static_cast<int>(p) / sensor.n_cols;
        int j = static_cast<int>(p) % sensor.n_cols;
        auto [pb, pe] = state.pixel_points(i, j);
        if (pb == pe) return;
        double g = sensor.effective_gain(i, j);
        if (g == 0.0) return;
        const Irf& irf = sensor.irf(i, j);
        std::vector<double> lam;
        detail::active_rates(state, cube, i, j, lam);
        auto [eb, ee] = cube.pixel(i, j);
        for (; pb != pe; ++pb) {
            const Point& pt = state.cloud[*pb];
            auto [lo, hi] = irf.support_bins(pt.t, cube.n_bins);
            if (lo > hi) {
                oog[*pb] = 1;
                continue;
            }
            if (pt.intensity == 0.0) continue;
            double acc = 0.0;
            for (int b = lo; b <= hi; ++b) acc -= irf.deriv(b - pt.t);
            const Event* e = eb;
            while (e != ee && e->bin < static_cast<std::uint32_t>(lo)) ++e;
            for (; e != ee && e->bin <= static_cast<std::uint32_t>(hi); ++e) {
                double l = lam[e - eb];
                if (l > 0.0)
                    acc += irf.deriv(double(e->bin) - pt.t) * double(e->count) / l;
            }
            out.value[*pb] = g * pt.intensity * acc;
        }
    });
    for (std::uint32_t n = 0; n < oog.size(); ++n)
        if (oog[n]) out.out_of_gate.push_back(n);
    return out;
}

/// d g / d r_n = sum_t g h(t - t_n) (1 - z/lambda) over the IRF support.
inline std::vector<double> grad_intensity(const SceneState& state, const PhotonCube& cube) {
    detail::check_dims(state, cube);
    const SensorModel& sensor = *state.sensor;
    std::vector<double> out(state.cloud.size(), 0.0);
    const std::size_t n_pix = cube.n_pixels();
    parallel_for(n_pix, [&](std::size_t p) {
        int i = static_cast<int>(p) / sensor.n_cols;
        int j = static_cast<int>(p) % sensor.n_cols;
        auto [pb, pe] = state.pixel_points(i, j);
        if (pb == pe) return;
        double g = sensor.effective_gain(i, j);
        if (g == 0.0) return;
        const Irf& irf = sensor.irf(i, j);
        std::vector<double> lam;
        detail::active_rates(state, cube, i, j, lam);
        auto [eb, ee] = cube.pixel(i, j);
        for (; pb != pe; ++pb) {
            const Point& pt = state.cloud[*pb];
            double acc = irf.mass_in_gate(pt.t, cube.n_bins);
            auto [lo, hi] = irf.support_bins(pt.t, cube.n_bins);
            const Event* e = eb;
            while (e != ee && e->bin < static_cast<std::uint32_t>(lo)) ++e;
            for (; e != ee && e->bin <= static_cast<std::uint32_t>(hi); ++e) {
                double l = lam[e - eb];
                if (l > 0.0)
                    acc -= irf.value(double(e->bin) - pt.t) * double(e->count) / l;
            }
            out[*pb] = g * acc;
        }
    });
    return out;
}

/// d g / d b_{i,j} = g T - g sum_{active} z/lambda; dead pixels give 0.
inline Grid2D<double> grad_background(const SceneState& state, const PhotonCube& cube) {
    detail::check_dims(state, cube);
    const SensorModel& sensor = *state.sensor;
    Grid2D<double> out(sensor.n_rows, sensor.n_cols, 0.0);
    const std::size_t n_pix = cube.n_pixels();
    parallel_for(n_pix, [&](std::size_t p) {
        int i = static_cast<int>(p) / sensor.n_cols;
        int j = static_cast<int>(p) % sensor.n_cols;
        double g = sensor.effective_gain(i, j);
        if (g == 0.0) return;
        std::vector<double> lam;
        detail::active_rates(state, cube, i, j, lam);
        auto [eb, ee] = cube.pixel(i, j);
        double acc = g * cube.n_bins;
        for (const Event* e = eb; e != ee; ++e) {
            double l = lam[e - eb];
            if (l > 0.0) acc -= g * double(e->count) / l;
        }
        out(i, j) = acc;
    });
    return out;
}

/// Gauss-Newton diagonal curvature of the nll at the current rates, used to
/// precondition "auto" gradient steps; the PALM loop safeguards the result
/// with backtracking so these are heuristics only.
struct BlockCurvatures {
    std::vector<double> depth;      // per point
    std::vector<double> intensity;  // per point
    Grid2D<double> background;      // per pixel
};

inline BlockCurvatures block_curvatures(const SceneState& state, const PhotonCube& cube) {
    detail::check_dims(state, cube);
    const SensorModel& sensor = *state.sensor;
    const std::size_t n_pix = cube.n_pixels();
    BlockCurvatures out;
    out.depth.assign(state.cloud.size(), 0.0);
    out.intensity.assign(state.cloud.size(), 0.0);
    out.background = Grid2D<double>(sensor.n_rows, sensor.n_cols, 0.0);
    parallel_for(n_pix, [&](std::size_t p) {
        int i = static_cast<int>(p) / sensor.n_cols;
        int j = static_cast<int>(p) % sensor.n_cols;
        double g = sensor.effective_gain(i, j);
        if (g == 0.0) return;
        const Irf& irf = sensor.irf(i, j);
        std::vector<double> lam;
        detail::active_rates(state, cube, i, j, lam);
        auto [eb, ee] = cube.pixel(i, j);
        double bsum = 0.0;
        for (const Event* e = eb; e != ee; ++e) {
            double l = lam[e - eb];
            if (l > 0.0) bsum += g * g * double(e->count) / (l * l);
        }
        out.background(i, j) = bsum;
        auto [pb, pe] = state.pixel_points(i, j);
        for (; pb != pe; ++pb) {
            const Point& pt = state.cloud[*pb];
            auto [lo, hi] = irf.support_bins(pt.t, cube.n_bins);
            double st = 0.0, sr = 0.0;
            const Event* e = eb;
            while (e != ee && e->bin < static_cast<std::uint32_t>(lo)) ++e;
            for (; e != ee && e->bin <= static_cast<std::uint32_t>(hi); ++e) {
                double l = lam[e - eb];
                if (l <= 0.0) continue;
                double tau = double(e->bin) - pt.t;
                double zl2 = double(e->count) / (l * l);
                double dh = g * pt.intensity * irf.deriv(tau);
                double h = g * irf.value(tau);
                st += dh * dh * zl2;
                sr += h * h * zl2;
            }
            out.depth[*pb] = st;
            out.intensity[*pb] = sr;
        }
    });
    return out;
}

}  // namespace splidar
