#pragma once

#include "splidar/cloud.hpp"
#include "splidar/grid.hpp"
#include "splidar/parallel.hpp"
#include "splidar/spatial_index.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace splidar {

/// Parameters of the point-set-surface projection. The kernel is the
/// compactly supported quartic w(d) = (1 - (d/radius)^2)^4, whose radius
/// sets the degree of low-pass filtering of the surface.
struct ApssParams {
    double kernel_radius = 0.1;       // metres
    int min_neighbors = 6;            // >= 4, query point included
    double sphere_degeneracy_eps = 1e-3;  // |u_q| below this -> plane

    void validate() const {
        if (kernel_radius <= 0.0)
            throw std::invalid_argument("ApssParams: kernel_radius must be positive");
        if (min_neighbors < 4)
            throw std::invalid_argument("ApssParams: min_neighbors must be >= 4");
        if (sphere_degeneracy_eps < 0.0)
            throw std::invalid_argument("ApssParams: sphere_degeneracy_eps must be >= 0");
    }

    double weight(double dist) const {
        double x = dist / kernel_radius;
        if (x >= 1.0) return 0.0;
        double s = 1.0 - x * x;
        s *= s;  // ^2
        return s * s;  // ^4
    }
};

namespace detail {

/// Algebraic sphere u(x) = u0 + ul.x + uq |x|^2 in world coordinates.
struct AlgebraicSphere {
    double u0 = 0.0;
    Vec3 ul = Vec3::Zero();
    double uq = 0.0;
    bool valid = false;

    double eval(const Vec3& x) const { return u0 + ul.dot(x) + uq * x.squaredNorm(); }
    Vec3 gradient(const Vec3& x) const { return ul + 2.0 * uq * x; }
};

/// Weighted algebraic least-squares fit of the sphere scalar field with the
/// Pratt unit-gradient normalisation |ul|^2 - 4 u0 uq = 1, solved as the
/// generalised eigenproblem M u = eta N u restricted to the feasible cone.
/// Exact input data (points truly on a sphere or plane) is recovered
/// exactly: the true surface has zero algebraic residual. The sign of u is
/// oriented along the supplied normal.
inline AlgebraicSphere fit_algebraic_sphere(const std::vector<Vec3>& q,
                                            const std::vector<double>& w,
                                            const Vec3& centre,
                                            const Vec3& orient_normal) {
    using Matrix5d = Eigen::Matrix<double, 5, 5>;
    using Vector5d = Eigen::Matrix<double, 5, 1>;

    Matrix5d M = Matrix5d::Zero();
    for (std::size_t k = 0; k < q.size(); ++k) {
        if (w[k] <= 0.0) continue;
        Vec3 y = q[k] - centre;
        Vector5d d;
        d << 1.0, y.x(), y.y(), y.z(), y.squaredNorm();
        M.noalias() += w[k] * d * d.transpose();
    }

    Matrix5d N = Matrix5d::Zero();
    N(1, 1) = N(2, 2) = N(3, 3) = 1.0;
    N(0, 4) = N(4, 0) = -2.0;

    Eigen::GeneralizedEigenSolver<Matrix5d> ges;
    ges.compute(M, N, true);

    AlgebraicSphere best;
    double best_eta = std::numeric_limits<double>::infinity();
    const double scale = std::max(M.trace(), 1e-300);
    for (int k = 0; k < 5; ++k) {
        std::complex<double> alpha = ges.alphas()(k);
        double beta = ges.betas()(k);
        if (std::fabs(beta) <= 1e-14 * (std::abs(alpha) + std::fabs(beta)))
            continue;  // infinite eigenvalue
        std::complex<double> eta_c = alpha / beta;
        if (std::fabs(eta_c.imag()) > 1e-9 * (1.0 + std::fabs(eta_c.real()))) continue;
        double eta = eta_c.real();
        if (eta < -1e-9 * scale || eta >= best_eta) continue;
        Eigen::Matrix<std::complex<double>, 5, 1> vc = ges.eigenvectors().col(k);
        Vector5d v = vc.real();
        if (v.norm() < 1e-300) continue;
        double nrm = v(1) * v(1) + v(2) * v(2) + v(3) * v(3) - 4.0 * v(0) * v(4);
        if (nrm <= 1e-14 * v.squaredNorm()) continue;  // outside the feasible cone
        v /= std::sqrt(nrm);
        best_eta = eta;
        best.u0 = v(0);
        best.ul = Vec3(v(1), v(2), v(3));
        best.uq = v(4);
        best.valid = true;
    }
    if (!best.valid) return best;

    // Undo the centring: u(x) = u'(x - centre).
    best.u0 = best.u0 - best.ul.dot(centre) + best.uq * centre.squaredNorm();
    best.ul = best.ul - 2.0 * best.uq * centre;

    if (best.gradient(centre).dot(orient_normal) < 0.0) {
        best.u0 = -best.u0;
        best.ul = -best.ul;
        best.uq = -best.uq;
    }
    return best;
}

/// Closest point on the zero set of the fitted primitive.
inline bool project_onto_sphere(const AlgebraicSphere& s, double degeneracy_eps,
                                const Vec3& p, Vec3& out) {
    if (std::fabs(s.uq) < degeneracy_eps) {
        double g2 = s.ul.squaredNorm();
        if (g2 < 1e-20) return false;
        out = p - (s.eval(p) / g2) * s.ul;
        return true;
    }
    Vec3 c = -s.ul / (2.0 * s.uq);
    double disc = s.ul.squaredNorm() - 4.0 * s.u0 * s.uq;
    if (disc <= 0.0) {  // imaginary radius, treat the fit as a plane
        double g2 = s.ul.squaredNorm();
        if (g2 < 1e-20) return false;
        out = p - (s.eval(p) / g2) * s.ul;
        return true;
    }
    double radius = std::sqrt(disc) / (2.0 * std::fabs(s.uq));
    Vec3 d = p - c;
    double dn = d.norm();
    if (dn < 1e-14) return false;  // at the centre, projection undefined
    out = c + (radius / dn) * d;
    return true;
}

}  // namespace detail

/// APSS projection: every point is moved to the locally fitted algebraic
/// sphere (plane in the degenerate limit). Jacobi semantics: all fits read
/// the input snapshot, so the result is deterministic under any threading.
/// Points with fewer than min_neighbors in-radius neighbours are returned
/// unchanged and flagged isolated.
inline PointCloud apss_project(const PointCloud& cloud, const ApssParams& params,
                               const SpatialIndex& index) {
    params.validate();
    PointCloud out = cloud;
    parallel_for(cloud.size(), [&](std::size_t n) {
        const Point& pt = cloud[n];
        out[n].flags &= static_cast<std::uint8_t>(~(kFlagIsolated | kFlagDegenerate));
        std::vector<std::uint32_t> nbrs = index.query(pt.position, params.kernel_radius);
        if (nbrs.size() < static_cast<std::size_t>(params.min_neighbors)) {
            out[n].flags |= kFlagIsolated;
            return;
        }

        std::vector<Vec3> q(nbrs.size());
        std::vector<double> w(nbrs.size());
        double wsum = 0.0;
        Vec3 mean = Vec3::Zero();
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            q[k] = cloud[nbrs[k]].position;
            w[k] = params.weight((q[k] - pt.position).norm());
            wsum += w[k];
            mean += w[k] * q[k];
        }
        if (wsum <= 0.0) {
            out[n].flags |= kFlagDegenerate;
            return;
        }
        mean /= wsum;

        // Weighted PCA: smallest eigenvector of the covariance is the
        // normal estimate used to orient the fitted field.
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (std::size_t k = 0; k < q.size(); ++k) {
            Vec3 d = q[k] - mean;
            cov.noalias() += w[k] * d * d.transpose();
        }
        cov /= wsum;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
        Vec3 normal = eig.eigenvectors().col(0);
        double spread = eig.eigenvalues()(2);
        if (spread <= 0.0 || eig.eigenvalues()(1) <= 1e-12 * spread) {
            // collinear neighbourhood: no usable plane either
            out[n].flags |= kFlagDegenerate;
            return;
        }

        detail::AlgebraicSphere fit =
            detail::fit_algebraic_sphere(q, w, mean, normal);
        Vec3 projected;
        if (!fit.valid ||
            !detail::project_onto_sphere(fit, params.sphere_degeneracy_eps, pt.position,
                                         projected)) {
            out[n].flags |= kFlagDegenerate;
            return;
        }
        out[n].position = projected;
    });
    return out;
}

/// Manifold low-pass on intensity: each point's intensity becomes the
/// unweighted mean over its k nearest neighbours in 3D world distance
/// (self included), with the search capped at `radius` so that surfaces
/// farther apart than the cap never mix. Jacobi semantics.
inline PointCloud knn_intensity_filter(const PointCloud& cloud, int k,
                                       const SpatialIndex& index, double radius) {
    if (k < 1) throw std::invalid_argument("knn_intensity_filter: k must be >= 1");
    if (radius <= 0.0) throw std::invalid_argument("knn_intensity_filter: radius must be positive");
    PointCloud out = cloud;
    parallel_for(cloud.size(), [&](std::size_t n) {
        std::vector<std::uint32_t> nbrs =
            index.query_knn(cloud[n].position, static_cast<std::size_t>(k), radius);
        if (nbrs.empty()) return;  // cannot happen: the point finds itself
        double acc = 0.0;
        for (std::uint32_t m : nbrs) acc += cloud[m].intensity;
        out[n].intensity = acc / static_cast<double>(nbrs.size());
    });
    return out;
}

/// Reflectivity threshold: drops points with intensity < r_min, preserving
/// the order of survivors.
inline PointCloud prune(const PointCloud& cloud, double r_min) {
    if (r_min < 0.0) throw std::invalid_argument("prune: r_min must be >= 0");
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const Point& p : cloud)
        if (p.intensity >= r_min) out.points.push_back(p);
    return out;
}

namespace detail {

/// Radial raised-cosine low-pass response at normalised radial frequency
/// rho in [0, 1] (1 = the grid's corner frequency). cutoff = 1 is all-pass.
inline double lowpass_mask(double rho, double cutoff) {
    if (cutoff >= 1.0) return 1.0;
    double w = std::min(0.2 * cutoff, 1.0 - cutoff);
    double lo = cutoff - w;
    if (rho <= lo) return 1.0;
    if (rho >= cutoff) return 0.0;
    return 0.5 * (1.0 + std::cos(M_PI * (rho - lo) / w));
}

}  // namespace detail

/// Linear part of the FFT denoiser: 2D DFT, radial raised-cosine mask,
/// inverse DFT. No clamping, so the operator is exactly linear.
inline Grid2D<double> fft_lowpass_filter(const Grid2D<double>& img, double cutoff) {
    if (cutoff <= 0.0 || cutoff > 1.0)
        throw std::invalid_argument("fft_lowpass_filter: cutoff must be in (0, 1]");
    if (img.rows < 2 || img.cols < 2)
        throw std::invalid_argument("fft_lowpass_filter: image must be at least 2x2");
    const int nr = img.rows, nc = img.cols;
    const std::size_t total = static_cast<std::size_t>(nr) * nc;

    std::vector<std::complex<double>> buf(total), freq(total);
    for (std::size_t k = 0; k < total; ++k) buf[k] = img.data[k];

    fftw_plan fwd = fftw_plan_dft_2d(nr, nc,
                                     reinterpret_cast<fftw_complex*>(buf.data()),
                                     reinterpret_cast<fftw_complex*>(freq.data()),
                                     FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(fwd);
    fftw_destroy_plan(fwd);

    auto axis_freq = [](int k, int n) {
        int f = (k <= n / 2) ? k : k - n;
        return static_cast<double>(f) / n;
    };
    const double fmax_r = static_cast<double>(nr / 2) / nr;
    const double fmax_c = static_cast<double>(nc / 2) / nc;
    const double rho_max = std::sqrt(fmax_r * fmax_r + fmax_c * fmax_c);
    for (int a = 0; a < nr; ++a) {
        double fr = axis_freq(a, nr);
        for (int b = 0; b < nc; ++b) {
            double fc = axis_freq(b, nc);
            double rho = std::sqrt(fr * fr + fc * fc) / rho_max;
            freq[static_cast<std::size_t>(a) * nc + b] *= detail::lowpass_mask(rho, cutoff);
        }
    }

    fftw_plan bwd = fftw_plan_dft_2d(nr, nc,
                                     reinterpret_cast<fftw_complex*>(freq.data()),
                                     reinterpret_cast<fftw_complex*>(buf.data()),
                                     FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_execute(bwd);
    fftw_destroy_plan(bwd);

    Grid2D<double> out(nr, nc);
    for (std::size_t k = 0; k < total; ++k) out.data[k] = buf[k].real() / static_cast<double>(total);
    return out;
}

/// Background denoiser for array / monostatic systems: low-pass then clamp
/// negatives to zero (rates cannot be negative).
inline BackgroundImage fft_background_denoise(const BackgroundImage& b, double cutoff) {
    Grid2D<double> out = fft_lowpass_filter(b, cutoff);
    for (double& v : out.data) v = std::max(0.0, v);
    return out;
}

/// Bistatic systems carry no spatial background correlation; the proximal
/// step is a no-op.
inline BackgroundImage identity_background(const BackgroundImage& b) { return b; }

}  // namespace splidar
