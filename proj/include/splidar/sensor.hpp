#pragma once

#include "splidar/cloud.hpp"
#include "splidar/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace splidar {

inline constexpr double kSpeedOfLight = 299792458.0;

/// Sampled instrumental response on a uniform grid over a compact support
/// [tau_min, tau_max], in bin units. Evaluation linearly interpolates the
/// samples; the derivative is the exact slope of that interpolant, so the
/// depth gradient differentiates exactly the function the likelihood uses.
class Irf {
public:
    Irf() = default;

    /// Samples are rescaled so the interpolant integrates to 1.
    Irf(double tau_min, double dtau, std::vector<double> samples)
        : tau_min_(tau_min), dtau_(dtau), samples_(std::move(samples)) {
        if (dtau_ <= 0.0) throw std::invalid_argument("Irf: dtau must be positive");
        if (samples_.size() < 2) throw std::invalid_argument("Irf: need >= 2 samples");
        for (double s : samples_)
            if (s < 0.0 || !std::isfinite(s))
                throw std::invalid_argument("Irf: samples must be finite and >= 0");
        double mass = 0.0;
        for (double s : samples_) mass += s;
        mass *= dtau_;
        if (mass <= 0.0) throw std::invalid_argument("Irf: zero mass");
        for (double& s : samples_) s /= mass;
        slopes_.resize(samples_.size() - 1);
        for (std::size_t k = 0; k + 1 < samples_.size(); ++k)
            slopes_[k] = (samples_[k + 1] - samples_[k]) / dtau_;
    }

    /// Truncated Gaussian pulse, sigma in bin units, support +-n_sigmas.
    /// Endpoint samples are zeroed so the derivative telescopes to zero.
    static Irf gaussian(double sigma_bins, double n_sigmas = 4.0, double dtau = 0.25) {
        if (sigma_bins <= 0.0) throw std::invalid_argument("Irf: sigma must be positive");
        double half = n_sigmas * sigma_bins;
        int n = std::max(2, static_cast<int>(std::ceil(2.0 * half / dtau))) + 1;
        std::vector<double> s(n);
        for (int k = 0; k < n; ++k) {
            double tau = -half + k * dtau;
            s[k] = std::exp(-0.5 * tau * tau / (sigma_bins * sigma_bins));
        }
        s.front() = 0.0;
        s.back() = 0.0;
        return Irf(-half, dtau, std::move(s));
    }

    /// Unit-mass single-bin pulse: h(0)=1, zero at |tau|>=1.
    static Irf delta() { return Irf(-1.0, 1.0, {0.0, 1.0, 0.0}); }

    double tau_min() const { return tau_min_; }
    double tau_max() const { return tau_min_ + dtau_ * (samples_.size() - 1); }
    double dtau() const { return dtau_; }
    const std::vector<double>& samples() const { return samples_; }
    /// Sampled derivative (per-segment slope of the interpolant).
    const std::vector<double>& deriv_samples() const { return slopes_; }

    double value(double tau) const {
        if (tau < tau_min_ || tau > tau_max()) return 0.0;
        double x = (tau - tau_min_) / dtau_;
        auto k = std::min<std::size_t>(static_cast<std::size_t>(x), samples_.size() - 2);
        double f = x - static_cast<double>(k);
        return samples_[k] + f * (samples_[k + 1] - samples_[k]);
    }

    double deriv(double tau) const {
        if (tau <= tau_min_ || tau >= tau_max()) return 0.0;
        double x = (tau - tau_min_) / dtau_;
        auto k = std::min<std::size_t>(static_cast<std::size_t>(x), slopes_.size() - 1);
        return slopes_[k];
    }

    /// Integer bins of [0, n_bins) touched by the support around depth t,
    /// returned as an inclusive range; empty when lo > hi.
    std::pair<int, int> support_bins(double t, int n_bins) const {
        int lo = std::max(0, static_cast<int>(std::ceil(t + tau_min_)));
        int hi = std::min(n_bins - 1, static_cast<int>(std::floor(t + tau_max())));
        return {lo, hi};
    }

    /// Sum of h(t_bin - t) over in-gate bins (gate-truncated IRF mass).
    double mass_in_gate(double t, int n_bins) const {
        auto [lo, hi] = support_bins(t, n_bins);
        double m = 0.0;
        for (int b = lo; b <= hi; ++b) m += value(b - t);
        return m;
    }

    /// d/dt of mass_in_gate (boundary-corrected mass derivative).
    double mass_deriv_in_gate(double t, int n_bins) const {
        auto [lo, hi] = support_bins(t, n_bins);
        double m = 0.0;
        for (int b = lo; b <= hi; ++b) m -= deriv(b - t);
        return m;
    }

    /// Checks normalisation of h and zero integral of h'.
    void validate(double tol = 1e-6) const {
        double mass = 0.0, dmass = 0.0;
        for (double s : samples_) mass += s;
        for (double d : slopes_) dmass += d;
        if (std::fabs(mass * dtau_ - 1.0) > tol)
            throw std::invalid_argument("Irf: not normalised");
        if (std::fabs(dmass * dtau_) > tol)
            throw std::invalid_argument("Irf: derivative does not integrate to 0");
    }

    bool operator==(const Irf&) const = default;

private:
    double tau_min_ = 0.0;
    double dtau_ = 1.0;
    std::vector<double> samples_;
    std::vector<double> slopes_;
};

/// Detector geometry and calibration: the mapping f(.) between world
/// coordinates and lidar cube coordinates, per-pixel gain and dead mask,
/// IRF (shared or per-pixel), and the super-resolution window.
struct SensorModel {
    int n_rows = 0;  // coarse pixel grid
    int n_cols = 0;
    int n_bins = 0;
    int superres = 1;            // fine-to-coarse window is superres x superres
    double pixel_pitch = 1.0;    // metres per fine pixel
    double bin_resolution = 1.0; // metres per histogram bin

    Irf irf_shared = Irf::delta();
    std::vector<Irf> irf_per_pixel;  // optional, row-major coarse grid
    Grid2D<double> gain;             // coarse grid, >= 0
    Grid2D<std::uint8_t> dead;       // coarse grid, nonzero = dead

    SensorModel() = default;
    SensorModel(int rows, int cols, int bins, Irf irf, int s = 1,
                double pitch = 1.0, double bin_res = 1.0)
        : n_rows(rows), n_cols(cols), n_bins(bins), superres(s),
          pixel_pitch(pitch), bin_resolution(bin_res), irf_shared(std::move(irf)),
          gain(rows, cols, 1.0), dead(rows, cols, 0) {
        if (rows <= 0 || cols <= 0 || bins <= 0)
            throw std::invalid_argument("SensorModel: dimensions must be positive");
        if (s < 1) throw std::invalid_argument("SensorModel: superres must be >= 1");
        if (pitch <= 0.0 || bin_res <= 0.0)
            throw std::invalid_argument("SensorModel: pitch/bin resolution must be positive");
    }

    int fine_rows() const { return n_rows * superres; }
    int fine_cols() const { return n_cols * superres; }

    const Irf& irf(int i, int j) const {
        if (!irf_per_pixel.empty())
            return irf_per_pixel[static_cast<std::size_t>(i) * n_cols + j];
        return irf_shared;
    }
    /// Gain with the dead mask folded in: dead pixels behave as gain 0.
    double effective_gain(int i, int j) const {
        return dead(i, j) ? 0.0 : gain(i, j);
    }
    bool is_dead(int i, int j) const { return dead(i, j) != 0; }
};

struct LidarCoord {
    int i = 0, j = 0;    // coarse pixel
    int fi = 0, fj = 0;  // fine pixel
    double t = 0.0;      // real-valued bin units
};

/// f(.): world position -> (coarse pixel, fine pixel, depth in bins).
/// Orthographic scaling: fine index = floor(coordinate / pitch), coarse
/// index = fine / superres, t = depth / bin_resolution (not rounded).
inline LidarCoord map_world_to_lidar(const Vec3& p, const SensorModel& sensor) {
    LidarCoord c;
    double fx = std::floor(p.x() / sensor.pixel_pitch);
    double fy = std::floor(p.y() / sensor.pixel_pitch);
    if (fx < 0 || fx >= sensor.fine_rows())
        throw std::out_of_range("map_world_to_lidar: x outside frustum");
    if (fy < 0 || fy >= sensor.fine_cols())
        throw std::out_of_range("map_world_to_lidar: y outside frustum");
    c.t = p.z() / sensor.bin_resolution;
    if (c.t < 0 || c.t >= sensor.n_bins)
        throw std::out_of_range("map_world_to_lidar: z outside depth gate");
    c.fi = static_cast<int>(fx);
    c.fj = static_cast<int>(fy);
    c.i = c.fi / sensor.superres;
    c.j = c.fj / sensor.superres;
    return c;
}

/// Centre of fine pixel (fi, fj) at depth t bins.
inline Vec3 world_from_lidar(int fi, int fj, double t, const SensorModel& sensor) {
    return Vec3((fi + 0.5) * sensor.pixel_pitch, (fj + 0.5) * sensor.pixel_pitch,
                t * sensor.bin_resolution);
}

/// Clamp a world position into the frustum and gate, then refresh the
/// point's lidar coordinates from it.
inline void rederive_mapping(Point& pt, const SensorModel& sensor) {
    const double eps = 1e-9;
    double xmax = sensor.fine_rows() * sensor.pixel_pitch;
    double ymax = sensor.fine_cols() * sensor.pixel_pitch;
    double zmax = sensor.n_bins * sensor.bin_resolution;
    pt.position.x() = std::clamp(pt.position.x(), 0.0, xmax * (1.0 - eps));
    pt.position.y() = std::clamp(pt.position.y(), 0.0, ymax * (1.0 - eps));
    pt.position.z() = std::clamp(pt.position.z(), 0.0, zmax * (1.0 - eps));
    LidarCoord c = map_world_to_lidar(pt.position, sensor);
    pt.i = c.i;
    pt.j = c.j;
    pt.fi = c.fi;
    pt.fj = c.fj;
    pt.t = c.t;
}

}  // namespace splidar
