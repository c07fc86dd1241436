#pragma once

#include "splidar/cloud.hpp"
#include "splidar/config.hpp"
#include "splidar/cube.hpp"
#include "splidar/likelihood.hpp"
#include "splidar/parallel.hpp"
#include "splidar/rng.hpp"
#include "splidar/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace splidar {

/// One parametric scene layer on the fine pixel grid.
struct SurfaceSpec {
    enum class Kind { Plane, Bump };
    Kind kind = Kind::Plane;
    double depth_m = 0.0;        // base depth
    double slope_x = 0.0;        // plane: z = depth + sx*x + sy*y
    double slope_y = 0.0;
    double bump_amp = 0.0;       // bump: z = depth + amp*exp(-(|p-c|^2)/(2 w^2))
    double bump_cx = 0.0, bump_cy = 0.0, bump_width = 1.0;
    double reflectivity = 1.0;
    double checker_contrast = 0.0;  // per-fine-cell +-contrast modulation
    int checker_period = 8;
    // fine-grid rectangles [x0,x1) x [y0,y1): where the surface exists, and
    // holes cut out of it ("camouflage net" masks)
    struct Rect { int x0 = 0, y0 = 0, x1 = 0, y1 = 0; };
    Rect region{0, 0, -1, -1};  // -1 means full grid
    std::vector<Rect> holes;

    double depth_at(double x, double y) const {
        if (kind == Kind::Plane) return depth_m + slope_x * x + slope_y * y;
        double dx = x - bump_cx, dy = y - bump_cy;
        return depth_m + bump_amp * std::exp(-(dx * dx + dy * dy) / (2.0 * bump_width * bump_width));
    }
};

/// Scene description: surfaces, ambient level, pixel grid and the
/// super-resolution factor; enough to build both the ground truth and the
/// sensor used to image it.
struct SceneSpec {
    int rows = 32, cols = 32, bins = 256;
    int superres = 1;
    double bin_resolution_m = 0.01;
    double pixel_pitch_m = 0.02;  // fine pitch
    double irf_sigma_bins = 1.5;
    double irf_support_sigmas = 4.0;
    double ambient_per_bin = 0.0;   // explicit background, pre-gain
    double target_ppp = -1.0;       // mean signal photons per coarse pixel; <0 keeps reflectivities
    double target_sbr = -1.0;       // signal/background; <0 keeps ambient_per_bin
    std::vector<SurfaceSpec> surfaces;
    std::vector<std::pair<int, int>> dead_pixels;
    std::vector<std::tuple<int, int, double>> hot_pixels;  // (i, j, extra b)

    static SceneSpec from_kv(const KeyValueFile& kv);
    static SceneSpec from_file(const std::string& path) {
        return from_kv(KeyValueFile::parse_file(path));
    }
};

inline SensorModel build_sensor(const SceneSpec& spec) {
    SensorModel sensor(spec.rows, spec.cols, spec.bins,
                       Irf::gaussian(spec.irf_sigma_bins, spec.irf_support_sigmas),
                       spec.superres, spec.pixel_pitch_m, spec.bin_resolution_m);
    for (auto [i, j] : spec.dead_pixels) {
        if (!sensor.dead.in_bounds(i, j))
            throw FormatError("scene: dead pixel out of bounds");
        sensor.dead(i, j) = 1;
    }
    return sensor;
}

struct SimReport {
    PointCloud truth;
    BackgroundImage background_truth;
    std::uint64_t signal_photons = 0;
    std::uint64_t background_photons = 0;
    double realized_signal_ppp = 0.0;
    double realized_total_ppp = 0.0;
    double realized_sbr = 0.0;   // signal / background, global
    double expected_signal_ppp = 0.0;
    double expected_sbr = 0.0;
};

namespace detail {

inline bool rect_contains(const SurfaceSpec::Rect& r, int x, int y) {
    return x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1;
}

inline PointCloud build_truth(const SceneSpec& spec, const SensorModel& sensor) {
    PointCloud truth;
    for (const SurfaceSpec& surf : spec.surfaces) {
        SurfaceSpec::Rect region = surf.region;
        if (region.x1 < 0) region = {0, 0, sensor.fine_rows(), sensor.fine_cols()};
        for (int fi = region.x0; fi < region.x1; ++fi) {
            for (int fj = region.y0; fj < region.y1; ++fj) {
                bool holed = false;
                for (const auto& h : surf.holes)
                    if (rect_contains(h, fi, fj)) { holed = true; break; }
                if (holed) continue;
                double x = (fi + 0.5) * sensor.pixel_pitch;
                double y = (fj + 0.5) * sensor.pixel_pitch;
                double z = surf.depth_at(x, y);
                Point p;
                p.position = Vec3(x, y, z);
                p.intensity = surf.reflectivity;
                if (surf.checker_contrast != 0.0) {
                    int par = (fi / surf.checker_period + fj / surf.checker_period) & 1;
                    p.intensity *= 1.0 + (par ? surf.checker_contrast : -surf.checker_contrast);
                }
                try {
                    LidarCoord c = map_world_to_lidar(p.position, sensor);
                    p.i = c.i; p.j = c.j; p.fi = c.fi; p.fj = c.fj; p.t = c.t;
                } catch (const std::out_of_range& e) {
                    throw std::invalid_argument(std::string("scene: surface leaves the gate: ") +
                                                e.what());
                }
                truth.points.push_back(p);
            }
        }
    }
    return truth;
}

}  // namespace detail

/// Draws a photon cube from the scene: rates come from the same likelihood
/// rate model used by reconstruction; every bin is sampled with a
/// counter-based stream keyed by (seed, pixel, bin), so cubes are bitwise
/// reproducible under any parallel schedule. Signal and background are
/// drawn separately to report the realized split.
inline std::pair<PhotonCube, SimReport> simulate_cube(const SceneSpec& spec,
                                                      const SensorModel& sensor,
                                                      std::uint64_t seed) {
    SimReport report;
    report.truth = detail::build_truth(spec, sensor);

    // scale reflectivities to the target mean signal photons per pixel
    double total_expected = 0.0;
    {
        SceneState probe(report.truth, BackgroundImage(sensor.n_rows, sensor.n_cols, 0.0), &sensor);
        for (const Point& p : probe.cloud)
            total_expected += sensor.effective_gain(p.i, p.j) * p.intensity *
                              sensor.irf(p.i, p.j).mass_in_gate(p.t, sensor.n_bins);
    }
    const double n_pix = static_cast<double>(sensor.n_rows) * sensor.n_cols;
    if (spec.target_ppp > 0.0 && total_expected > 0.0) {
        double scale = spec.target_ppp * n_pix / total_expected;
        for (Point& p : report.truth.points) p.intensity *= scale;
        total_expected *= scale;
    }
    report.expected_signal_ppp = total_expected / n_pix;

    double ambient = spec.ambient_per_bin;
    double gain_sum = 0.0;
    for (int i = 0; i < sensor.n_rows; ++i)
        for (int j = 0; j < sensor.n_cols; ++j) gain_sum += sensor.effective_gain(i, j);
    if (spec.target_sbr > 0.0) {
        double bg_total = total_expected / spec.target_sbr;
        ambient = bg_total / std::max(gain_sum * sensor.n_bins, 1e-300);
    }
    if (ambient < 0.0) throw std::invalid_argument("scene: negative ambient");
    report.expected_sbr =
        ambient > 0.0 ? total_expected / (ambient * gain_sum * sensor.n_bins) : 0.0;

    BackgroundImage b(sensor.n_rows, sensor.n_cols, ambient);
    for (auto [i, j, extra] : spec.hot_pixels) {
        if (!b.in_bounds(i, j)) throw FormatError("scene: hot pixel out of bounds");
        b(i, j) += extra;
    }
    report.background_truth = b;

    SceneState state(report.truth, b, &sensor);
    const int T = sensor.n_bins;
    const std::size_t n_pixels = static_cast<std::size_t>(sensor.n_rows) * sensor.n_cols;

    std::vector<std::vector<Event>> pixel_events(n_pixels);
    std::vector<std::uint64_t> sig_counts(n_pixels, 0), bg_counts(n_pixels, 0);
    parallel_for(n_pixels, [&](std::size_t p) {
        int i = static_cast<int>(p) / sensor.n_cols;
        int j = static_cast<int>(p) % sensor.n_cols;
        double g = sensor.effective_gain(i, j);
        if (g == 0.0) return;
        // signal-only rate profile: background removed from the shared model
        std::vector<double> lam = rate_profile(state, i, j);
        const double lam_bg = g * b(i, j);
        auto& events = pixel_events[p];
        for (int t = 0; t < T; ++t) {
            double lam_sig = std::max(0.0, lam[t] - lam_bg);
            CounterRng rs(seed, p, static_cast<std::uint64_t>(t), 1);
            CounterRng rb(seed, p, static_cast<std::uint64_t>(t), 2);
            std::uint32_t zs = lam_sig > 0.0 ? rs.next_poisson(lam_sig) : 0;
            std::uint32_t zb = lam_bg > 0.0 ? rb.next_poisson(lam_bg) : 0;
            sig_counts[p] += zs;
            bg_counts[p] += zb;
            if (zs + zb > 0) events.push_back({static_cast<std::uint32_t>(t), zs + zb});
        }
    });

    PhotonCube cube = PhotonCube::from_pixel_events(
        sensor.n_rows, sensor.n_cols, sensor.n_bins,
        2.0 * sensor.bin_resolution / kSpeedOfLight, pixel_events);

    for (std::size_t p = 0; p < n_pixels; ++p) {
        report.signal_photons += sig_counts[p];
        report.background_photons += bg_counts[p];
    }
    report.realized_signal_ppp = static_cast<double>(report.signal_photons) / n_pix;
    report.realized_total_ppp =
        static_cast<double>(report.signal_photons + report.background_photons) / n_pix;
    report.realized_sbr = report.background_photons
                              ? static_cast<double>(report.signal_photons) /
                                    static_cast<double>(report.background_photons)
                              : 0.0;
    return {std::move(cube), std::move(report)};
}

inline SceneSpec SceneSpec::from_kv(const KeyValueFile& kv) {
    SceneSpec s;
    s.rows = kv.get_int("rows", s.rows);
    s.cols = kv.get_int("cols", s.cols);
    s.bins = kv.get_int("bins", s.bins);
    s.superres = kv.get_int("superres", s.superres);
    s.bin_resolution_m = kv.get_double("bin_resolution_m", s.bin_resolution_m);
    s.pixel_pitch_m = kv.get_double("pixel_pitch_m", s.pixel_pitch_m);
    s.irf_sigma_bins = kv.get_double("irf_sigma_bins", s.irf_sigma_bins);
    s.irf_support_sigmas = kv.get_double("irf_support_sigmas", s.irf_support_sigmas);
    s.ambient_per_bin = kv.get_double("ambient_per_bin", s.ambient_per_bin);
    s.target_ppp = kv.get_double("target_ppp", s.target_ppp);
    s.target_sbr = kv.get_double("target_sbr", s.target_sbr);
    if (s.rows <= 0 || s.cols <= 0 || s.bins <= 0 || s.superres < 1)
        throw FormatError("scene: bad grid dimensions");

    auto parse_rect = [](const std::string& text, const std::string& key) {
        auto vals = KeyValueFile::to_double_list(text, key);
        if (vals.size() != 4) throw FormatError("scene: rect '" + key + "' needs x0,y0,x1,y1");
        SurfaceSpec::Rect r;
        r.x0 = static_cast<int>(vals[0]);
        r.y0 = static_cast<int>(vals[1]);
        r.x1 = static_cast<int>(vals[2]);
        r.y1 = static_cast<int>(vals[3]);
        return r;
    };

    for (const auto& sec : kv.sections()) {
        if (sec.name != "surface") throw FormatError("scene: unknown section [" + sec.name + "]");
        SurfaceSpec surf;
        std::string kind = KeyValueFile::value_string(sec, "type", "plane");
        if (kind == "plane") surf.kind = SurfaceSpec::Kind::Plane;
        else if (kind == "bump") surf.kind = SurfaceSpec::Kind::Bump;
        else throw FormatError("scene: unknown surface type '" + kind + "'");
        surf.depth_m = KeyValueFile::value_double(sec, "depth_m", 0.0);
        surf.slope_x = KeyValueFile::value_double(sec, "slope_x", 0.0);
        surf.slope_y = KeyValueFile::value_double(sec, "slope_y", 0.0);
        surf.bump_amp = KeyValueFile::value_double(sec, "bump_amp", 0.0);
        surf.bump_cx = KeyValueFile::value_double(sec, "bump_cx", 0.0);
        surf.bump_cy = KeyValueFile::value_double(sec, "bump_cy", 0.0);
        surf.bump_width = KeyValueFile::value_double(sec, "bump_width", 1.0);
        surf.reflectivity = KeyValueFile::value_double(sec, "reflectivity", 1.0);
        surf.checker_contrast = KeyValueFile::value_double(sec, "checker_contrast", 0.0);
        surf.checker_period =
            static_cast<int>(KeyValueFile::value_double(sec, "checker_period", 8));
        if (surf.reflectivity < 0.0) throw FormatError("scene: negative reflectivity");
        std::string region = KeyValueFile::value_string(sec, "region", "");
        if (!region.empty()) surf.region = parse_rect(region, "region");
        std::string holes = KeyValueFile::value_string(sec, "holes", "");
        if (!holes.empty()) {
            std::istringstream in(holes);
            std::string item;
            while (std::getline(in, item, ';')) {
                item = KeyValueFile::strip(item);
                if (!item.empty()) surf.holes.push_back(parse_rect(item, "holes"));
            }
        }
        s.surfaces.push_back(std::move(surf));
    }

    auto parse_pairs = [&](const std::string& key, auto&& consume) {
        std::istringstream in(kv.get_string(key, ""));
        std::string item;
        while (std::getline(in, item, ';')) {
            item = KeyValueFile::strip(item);
            if (!item.empty()) consume(KeyValueFile::to_double_list(item, key));
        }
    };
    parse_pairs("dead_pixels", [&](const std::vector<double>& v) {
        if (v.size() != 2) throw FormatError("scene: dead_pixels entries must be i,j");
        s.dead_pixels.emplace_back(static_cast<int>(v[0]), static_cast<int>(v[1]));
    });
    parse_pairs("hot_pixels", [&](const std::vector<double>& v) {
        if (v.size() != 3) throw FormatError("scene: hot_pixels entries must be i,j,rate");
        s.hot_pixels.emplace_back(static_cast<int>(v[0]), static_cast<int>(v[1]), v[2]);
    });
    return s;
}

}  // namespace splidar
