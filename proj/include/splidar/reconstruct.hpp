#pragma once

#include "splidar/cloud.hpp"
#include "splidar/config.hpp"
#include "splidar/cube.hpp"
#include "splidar/denoise.hpp"
#include "splidar/likelihood.hpp"
#include "splidar/parallel.hpp"
#include "splidar/sensor.hpp"
#include "splidar/spatial_index.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace splidar {

/// Background is floored here so log-rates stay finite for stray counts.
inline constexpr double kBackgroundFloor = 1e-6;

struct InitParams {
    int max_returns = 3;         // K: returns proposed per pixel
    double peak_threshold = 0.5; // photons of matched-filter response
    int min_separation = 3;      // bins between accepted peaks

    void validate() const {
        if (max_returns < 1) throw std::invalid_argument("InitParams: max_returns >= 1");
        if (min_separation < 1) throw std::invalid_argument("InitParams: min_separation >= 1");
        if (peak_threshold < 0.0) throw std::invalid_argument("InitParams: peak_threshold >= 0");
    }
};

/// Step size: fixed value or curvature-seeded ("auto"); both are safeguarded
/// by backtracking inside the PALM loop.
struct StepSize {
    bool automatic = true;
    double value = 1.0;

    static StepSize parse(const std::string& text) {
        if (text == "auto") return {};
        StepSize s;
        s.automatic = false;
        s.value = KeyValueFile::to_double(text, "step size");
        if (s.value <= 0.0) throw FormatError("step size must be positive or 'auto'");
        return s;
    }
    std::string str() const { return automatic ? "auto" : std::to_string(value); }
};

enum class BackgroundMode { Identity, Fft };

struct ReconConfig {
    int max_iters = 50;
    double stop_tol = 1e-4;    // relative nll change between iterations
    StepSize step_t, step_r, step_b;
    double backtrack_beta = 0.5;
    ApssParams apss;
    int knn_k = 9;
    double r_min = 0.0;
    BackgroundMode background_mode = BackgroundMode::Identity;
    double fft_cutoff = 0.5;
    InitParams init;

    void validate() const {
        if (max_iters < 1) throw std::invalid_argument("ReconConfig: max_iters >= 1");
        if (stop_tol < 0.0) throw std::invalid_argument("ReconConfig: stop_tol >= 0");
        if (backtrack_beta <= 0.0 || backtrack_beta >= 1.0)
            throw std::invalid_argument("ReconConfig: backtrack_beta in (0,1)");
        if (knn_k < 1) throw std::invalid_argument("ReconConfig: knn_k >= 1");
        if (r_min < 0.0) throw std::invalid_argument("ReconConfig: r_min >= 0");
        apss.validate();
        init.validate();
    }

    static ReconConfig from_kv(const KeyValueFile& kv) {
        ReconConfig c;
        c.max_iters = kv.get_int("max_iters", c.max_iters);
        c.stop_tol = kv.get_double("stop_tol", c.stop_tol);
        c.step_t = StepSize::parse(kv.get_string("step_t", "auto"));
        c.step_r = StepSize::parse(kv.get_string("step_r", "auto"));
        c.step_b = StepSize::parse(kv.get_string("step_b", "auto"));
        c.backtrack_beta = kv.get_double("backtrack_beta", c.backtrack_beta);
        c.apss.kernel_radius = kv.get_double("apss_radius", c.apss.kernel_radius);
        c.apss.min_neighbors = kv.get_int("apss_min_neighbors", c.apss.min_neighbors);
        c.apss.sphere_degeneracy_eps =
            kv.get_double("apss_degeneracy_eps", c.apss.sphere_degeneracy_eps);
        c.knn_k = kv.get_int("knn_k", c.knn_k);
        c.r_min = kv.get_double("r_min", c.r_min);
        std::string mode = kv.get_string("background_mode", "identity");
        if (mode == "identity") c.background_mode = BackgroundMode::Identity;
        else if (mode == "fft") c.background_mode = BackgroundMode::Fft;
        else throw FormatError("ReconConfig: background_mode must be identity or fft");
        c.fft_cutoff = kv.get_double("fft_cutoff", c.fft_cutoff);
        c.init.max_returns = kv.get_int("init_max_returns", c.init.max_returns);
        c.init.peak_threshold = kv.get_double("init_peak_threshold", c.init.peak_threshold);
        c.init.min_separation = kv.get_int("init_min_separation", c.init.min_separation);
        c.validate();
        return c;
    }
    static ReconConfig from_file(const std::string& path) {
        return from_kv(KeyValueFile::parse_file(path));
    }
};

namespace detail {

struct Peak {
    double t = 0.0;       // sub-bin refined position
    double response = 0.0;  // matched-filter response in photon units
    double mass = 0.0;    // photons in the IRF-support window
};

/// Sparse matched filter over one pixel's active bins: correlates the
/// histogram with the IRF, greedily keeps up to k maxima above threshold and
/// separated by min_sep bins, each refined by quadratic interpolation.
inline std::vector<Peak> matched_filter_peaks(const Event* eb, const Event* ee, const Irf& irf,
                                              int n_bins, int k, double threshold,
                                              int min_sep) {
    std::vector<Peak> out;
    if (eb == ee) return out;

    double h_max = 0.0;
    for (double s : irf.samples()) h_max = std::max(h_max, s);
    // response in photon units; only events inside the support window are read
    auto response = [&](double t0) {
        std::uint32_t first = static_cast<std::uint32_t>(
            std::max(0.0, std::ceil(t0 + irf.tau_min())));
        const Event* e = std::lower_bound(
            eb, ee, first, [](const Event& ev, std::uint32_t b) { return ev.bin < b; });
        double c = 0.0;
        for (; e != ee && double(e->bin) <= t0 + irf.tau_max(); ++e)
            c += double(e->count) * irf.value(double(e->bin) - t0);
        return c / h_max;
    };

    // candidate lags: integers whose support can reach an active bin
    std::vector<int> candidates;
    for (const Event* e = eb; e != ee; ++e) {
        int lo = std::max(0, static_cast<int>(std::ceil(double(e->bin) - irf.tau_max())));
        int hi = std::min(n_bins - 1, static_cast<int>(std::floor(double(e->bin) - irf.tau_min())));
        for (int t0 = lo; t0 <= hi; ++t0) candidates.push_back(t0);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    std::vector<double> resp(candidates.size());
    for (std::size_t m = 0; m < candidates.size(); ++m) resp[m] = response(candidates[m]);

    // rank by (response, lag) descending response, ascending lag for ties
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t m = 0; m < order.size(); ++m) order[m] = m;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (resp[a] != resp[b]) return resp[a] > resp[b];
        return candidates[a] < candidates[b];
    });

    std::vector<int> taken;
    for (std::size_t m : order) {
        if (static_cast<int>(out.size()) >= k) break;
        if (resp[m] < threshold) break;
        int t0 = candidates[m];
        bool clash = false;
        for (int prev : taken)
            if (std::abs(prev - t0) < min_sep) { clash = true; break; }
        if (clash) continue;
        taken.push_back(t0);

        Peak peak;
        peak.response = resp[m];
        double c0 = resp[m];
        double cm = t0 > 0 ? response(t0 - 1) : 0.0;
        double cp = t0 < n_bins - 1 ? response(t0 + 1) : 0.0;
        double denom = cm - 2.0 * c0 + cp;
        double delta = std::fabs(denom) > 1e-12 ? 0.5 * (cm - cp) / denom : 0.0;
        peak.t = t0 + std::clamp(delta, -0.5, 0.5);
        auto [wlo, whi] = irf.support_bins(peak.t, n_bins);
        for (const Event* e = eb; e != ee; ++e)
            if (e->bin >= static_cast<std::uint32_t>(wlo) &&
                e->bin <= static_cast<std::uint32_t>(whi))
                peak.mass += double(e->count);
        out.push_back(peak);
    }
    std::sort(out.begin(), out.end(), [](const Peak& a, const Peak& b) { return a.t < b.t; });
    return out;
}

}  // namespace detail

/// Cross-correlation initialisation: per-pixel matched filtering proposes up
/// to K returns; with super-resolution each return spawns the whole s x s
/// window of fine-grid points sharing the detected depth, intensity split
/// evenly. Background starts from the photon mass the peaks did not claim.
inline SceneState init_matched_filter(const PhotonCube& cube, const SensorModel& sensor,
                                      const InitParams& params) {
    params.validate();
    if (sensor.n_rows != cube.n_rows || sensor.n_cols != cube.n_cols ||
        sensor.n_bins != cube.n_bins)
        throw std::invalid_argument("init: sensor/cube dimension mismatch");

    const std::size_t n_pix = cube.n_pixels();
    const int s = sensor.superres;
    std::vector<std::vector<Point>> per_pixel(n_pix);
    BackgroundImage background(sensor.n_rows, sensor.n_cols, kBackgroundFloor);

    parallel_for(n_pix, [&](std::size_t p) {
        int i = static_cast<int>(p) / sensor.n_cols;
        int j = static_cast<int>(p) % sensor.n_cols;
        double g = sensor.effective_gain(i, j);
        if (g == 0.0) return;  // dead pixels spawn nothing
        auto [eb, ee] = cube.pixel(i, j);
        if (eb == ee) return;
        const Irf& irf = sensor.irf(i, j);
        auto peaks = detail::matched_filter_peaks(eb, ee, irf, cube.n_bins, params.max_returns,
                                                  params.peak_threshold, params.min_separation);
        double claimed = 0.0;
        for (const detail::Peak& peak : peaks) {
            double irf_mass = irf.mass_in_gate(peak.t, cube.n_bins);
            if (irf_mass <= 0.0) continue;
            double intensity = peak.mass / (g * irf_mass);
            claimed += peak.mass;
            for (int a = 0; a < s; ++a) {
                for (int c = 0; c < s; ++c) {
                    Point pt;
                    pt.fi = i * s + a;
                    pt.fj = j * s + c;
                    pt.i = i;
                    pt.j = j;
                    pt.t = peak.t;
                    pt.position = world_from_lidar(pt.fi, pt.fj, pt.t, sensor);
                    pt.intensity = intensity / double(s * s);
                    per_pixel[p].push_back(pt);
                }
            }
        }
        double total = 0.0;
        for (const Event* e = eb; e != ee; ++e) total += double(e->count);
        double residual = std::max(0.0, total - std::min(claimed, total));
        background(i, j) = std::max(kBackgroundFloor, residual / (g * cube.n_bins));
    });

    PointCloud cloud;
    for (auto& bucket : per_pixel)
        for (Point& pt : bucket) cloud.points.push_back(pt);
    return SceneState(std::move(cloud), std::move(background), &sensor);
}

struct BlockDiagnostics {
    double step_used = 0.0;
    int backtracks = 0;
    double nll_after_grad = 0.0;
    double nll_after_denoise = 0.0;
};

struct StepDiagnostics {
    double nll_before = 0.0;
    double nll_after = 0.0;
    std::size_t points_before = 0;
    std::size_t points_after = 0;
    BlockDiagnostics depth, intensity, background;
};

namespace detail {

inline constexpr int kMaxBacktracks = 30;

/// Backtracking template shared by the three blocks: apply(alpha) mutates
/// the state from the stored snapshot; the step is accepted only if the nll
/// does not increase, otherwise alpha shrinks by beta and finally drops to
/// an empty step. Returns the nll after the accepted step.
template <typename Apply, typename Restore>
double safeguarded_step(double& alpha, double beta, double nll_current,
                        const SceneState& state, const PhotonCube& cube, Apply&& apply,
                        Restore&& restore, int& backtracks) {
    if (alpha <= 0.0) {
        alpha = 0.0;
        return nll_current;
    }
    for (int attempt = 0; attempt < kMaxBacktracks; ++attempt) {
        apply(alpha);
        double candidate = nll(state, cube);
        if (candidate <= nll_current) return candidate;
        restore();
        alpha *= beta;
        ++backtracks;
    }
    alpha = 0.0;  // no decrease found: keep the block unchanged
    return nll_current;
}

}  // namespace detail

/// One PALM iteration over the blocks (depth -> intensity -> background):
/// each block takes a safeguarded gradient step on the likelihood, then its
/// plug-and-play denoiser. The gradient half-step never increases the nll;
/// the denoiser may, and both values are recorded.
inline StepDiagnostics palm_step(SceneState& state, const PhotonCube& cube,
                                 const ReconConfig& cfg) {
    cfg.validate();
    StepDiagnostics diag;
    diag.points_before = state.cloud.size();
    double current = nll(state, cube);
    diag.nll_before = current;

    // "auto" steps walk a diagonally preconditioned gradient (Newton-sized
    // per element) starting at unit scale; fixed steps use the raw gradient.
    // Poisson curvature spans orders of magnitude across points, so a single
    // per-block scale starves most of them.
    auto precondition = [](std::vector<double>& dir, const std::vector<double>& curv) {
        double cmax = 0.0;
        for (double c : curv) cmax = std::max(cmax, c);
        double floor = 1e-3 * cmax + 1e-30;
        for (std::size_t n = 0; n < dir.size(); ++n) dir[n] /= (curv[n] + floor);
    };

    // ---- depth block ----
    if (!state.cloud.empty()) {
        DepthGradient gt = grad_depth(state, cube);
        for (std::uint32_t n : gt.out_of_gate) state.cloud[n].flags |= kFlagOutOfGate;
        std::vector<double> dir = gt.value;
        double alpha = cfg.step_t.value;
        if (cfg.step_t.automatic) {
            precondition(dir, block_curvatures(state, cube).depth);
            alpha = 1.0;
        }
        std::vector<double> t_before(state.cloud.size());
        for (std::size_t n = 0; n < state.cloud.size(); ++n) t_before[n] = state.cloud[n].t;
        const double t_limit = double(cube.n_bins) * (1.0 - 1e-12);
        current = detail::safeguarded_step(
            alpha, cfg.backtrack_beta, current, state, cube,
            [&](double a) {
                for (std::size_t n = 0; n < state.cloud.size(); ++n) {
                    Point& pt = state.cloud[n];
                    pt.t = std::clamp(t_before[n] - a * dir[n], 0.0, t_limit);
                    pt.position.z() = pt.t * state.sensor->bin_resolution;
                }
            },
            [&] {
                for (std::size_t n = 0; n < state.cloud.size(); ++n) {
                    Point& pt = state.cloud[n];
                    pt.t = t_before[n];
                    pt.position.z() = pt.t * state.sensor->bin_resolution;
                }
            },
            diag.depth.backtracks);
        diag.depth.step_used = alpha;
        diag.depth.nll_after_grad = current;

        // APSS measures neighbourhoods in world coordinates, but the block
        // variable is t: only the depth component of the projection is kept
        // and each point stays pinned to its home fine-grid cell.
        SpatialIndex index(state.cloud, cfg.apss.kernel_radius);
        PointCloud projected = apss_project(state.cloud, cfg.apss, index);
        for (std::size_t n = 0; n < projected.size(); ++n) {
            Point& pt = projected[n];
            pt.t = std::clamp(pt.position.z() / state.sensor->bin_resolution, 0.0, t_limit);
            pt.position = world_from_lidar(pt.fi, pt.fj, pt.t, *state.sensor);
        }
        state.cloud = std::move(projected);
        state.refresh();
        current = nll(state, cube);
        diag.depth.nll_after_denoise = current;
    } else {
        diag.depth.nll_after_grad = diag.depth.nll_after_denoise = current;
    }

    // ---- intensity block ----
    if (!state.cloud.empty()) {
        std::vector<double> dir = grad_intensity(state, cube);
        double alpha = cfg.step_r.value;
        if (cfg.step_r.automatic) {
            precondition(dir, block_curvatures(state, cube).intensity);
            alpha = 1.0;
        }
        std::vector<double> r_before(state.cloud.size());
        for (std::size_t n = 0; n < state.cloud.size(); ++n) r_before[n] = state.cloud[n].intensity;
        current = detail::safeguarded_step(
            alpha, cfg.backtrack_beta, current, state, cube,
            [&](double a) {
                for (std::size_t n = 0; n < state.cloud.size(); ++n)
                    state.cloud[n].intensity = std::max(0.0, r_before[n] - a * dir[n]);
            },
            [&] {
                for (std::size_t n = 0; n < state.cloud.size(); ++n)
                    state.cloud[n].intensity = r_before[n];
            },
            diag.intensity.backtracks);
        diag.intensity.step_used = alpha;
        diag.intensity.nll_after_grad = current;

        SpatialIndex index(state.cloud, cfg.apss.kernel_radius);
        state.cloud = knn_intensity_filter(state.cloud, cfg.knn_k, index, cfg.apss.kernel_radius);
        state.cloud = prune(state.cloud, cfg.r_min);
        state.refresh();
        current = nll(state, cube);
        diag.intensity.nll_after_denoise = current;
    } else {
        diag.intensity.nll_after_grad = diag.intensity.nll_after_denoise = current;
    }

    // ---- background block ----
    {
        Grid2D<double> gb = grad_background(state, cube);
        std::vector<double> dir = gb.data;
        double alpha = cfg.step_b.value;
        if (cfg.step_b.automatic) {
            precondition(dir, block_curvatures(state, cube).background.data);
            alpha = 1.0;
        }
        BackgroundImage b_before = state.background;
        current = detail::safeguarded_step(
            alpha, cfg.backtrack_beta, current, state, cube,
            [&](double a) {
                for (std::size_t k = 0; k < dir.size(); ++k)
                    state.background.data[k] =
                        std::max(0.0, b_before.data[k] - a * dir[k]);
            },
            [&] { state.background = b_before; }, diag.background.backtracks);
        diag.background.step_used = alpha;
        diag.background.nll_after_grad = current;

        if (cfg.background_mode == BackgroundMode::Fft)
            state.background = fft_background_denoise(state.background, cfg.fft_cutoff);
        for (double& v : state.background.data) v = std::max(v, kBackgroundFloor);
        current = nll(state, cube);
        diag.background.nll_after_denoise = current;
    }

    diag.nll_after = current;
    diag.points_after = state.cloud.size();
    return diag;
}

struct ReconReport {
    int iterations = 0;
    double init_nll = 0.0;
    double final_nll = 0.0;
    std::size_t points = 0;
    std::vector<double> nll_trace;   // nll at init and after each iteration
    std::vector<StepDiagnostics> steps;
    double init_seconds = 0.0;
    double iterate_seconds = 0.0;
    double total_seconds = 0.0;
};

struct ReconResult {
    PointCloud cloud;
    BackgroundImage background;
    ReconReport report;
};

/// Full pipeline: matched-filter initialisation, then PALM iterations until
/// the relative nll change drops below stop_tol or max_iters is reached.
inline ReconResult reconstruct(const PhotonCube& cube, const SensorModel& sensor,
                               const ReconConfig& cfg) {
    cfg.validate();
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    SceneState state = init_matched_filter(cube, sensor, cfg.init);
    auto t1 = clock::now();

    ReconResult out;
    out.report.init_nll = nll(state, cube);
    out.report.nll_trace.push_back(out.report.init_nll);

    double previous = out.report.init_nll;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        StepDiagnostics diag = palm_step(state, cube, cfg);
        out.report.steps.push_back(diag);
        out.report.nll_trace.push_back(diag.nll_after);
        ++out.report.iterations;
        double rel = std::fabs(previous - diag.nll_after) / std::max(1.0, std::fabs(previous));
        previous = diag.nll_after;
        if (rel < cfg.stop_tol) break;
    }
    auto t2 = clock::now();

    out.report.final_nll = previous;
    out.report.points = state.cloud.size();
    out.report.init_seconds = std::chrono::duration<double>(t1 - t0).count();
    out.report.iterate_seconds = std::chrono::duration<double>(t2 - t1).count();
    out.report.total_seconds = std::chrono::duration<double>(t2 - t0).count();
    out.cloud = std::move(state.cloud);
    out.background = std::move(state.background);
    return out;
}

}  // namespace splidar
