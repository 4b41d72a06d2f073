#pragma once

// Deterministic anatomy phantom for registration tests: a soft-edged
// anisotropic ellipsoid with four Gaussian satellites of distinct
// brightness, riding a band-limited background texture. The texture matters:
// against a featureless background the mutual-information objective rewards
// shrinking the moving image (background over-matches background), while a
// textured background makes any misalignment cost information, so the score
// peaks at the true transform the way it does on real scans.
//
// The whole field is a closed-form function of world position, so target and
// atlas can be rendered on different grids, under different transforms, and
// still sample the same underlying scene. Atlas grids are padded and given a
// fractional origin offset: padding keeps candidate transforms sampling real
// data instead of fill, and the voxel-incommensurate origin keeps samples
// away from the lattice-aligned interpolation kinks that a shared grid
// produces at the optimum.

#include "scarline/transform.hpp"
#include "scarline/volume.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace scarline::testing {

/// Fixed-seed sum of random-direction cosines, band-limited to wavelengths
/// comparable with the anatomy so trilinear interpolation tracks it well.
class BandNoise {
public:
    BandNoise(std::uint64_t seed, int waves, double wl_min, double wl_max, double sigma)
        : sigma_(sigma) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        k_.reserve(waves);
        phase_.reserve(waves);
        for (int i = 0; i < waves; ++i) {
            double wl = wl_min + (wl_max - wl_min) * u(rng);
            double az = 2.0 * kPi * u(rng);
            double el = std::acos(2.0 * u(rng) - 1.0);
            double kk = 2.0 * kPi / wl;
            k_.push_back({kk * std::sin(el) * std::cos(az), kk * std::sin(el) * std::sin(az),
                          kk * std::cos(el)});
            phase_.push_back(2.0 * kPi * u(rng));
        }
    }

    double operator()(const Vec3& p) const {
        double v = 0;
        for (std::size_t i = 0; i < k_.size(); ++i) v += std::cos(dot(k_[i], p) + phase_[i]);
        return sigma_ * v / std::sqrt(0.5 * double(k_.size()));
    }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::vector<Vec3> k_;
    std::vector<double> phase_;
    double sigma_;
};

struct AnatomySatellite {
    Vec3 offset;  // of volume extent, relative to center
    double sigma; // of volume extent
    double amp;
};

/// Scene definition scaled to a dim-voxel cube at unit spacing.
class AnatomyWorld {
public:
    explicit AnatomyWorld(double dim)
        : dim_(dim), center_{0.5 * dim, 0.5 * dim, 0.5 * dim},
          noise_(202, 32, 6.0, 16.0, 12.0) {}

    double value(const Vec3& p) const {
        Vec3 d = p - center_;
        double rho = std::sqrt(sq(d[0] / (kRx * dim_)) + sq(d[1] / (kRy * dim_)) +
                               sq(d[2] / (kRz * dim_)));
        double v = 100.0 / (1.0 + std::exp((rho - 1.0) / 0.08));
        for (const auto& s : kSatellites) {
            Vec3 e = p - (center_ + dim_ * s.offset);
            v += s.amp * std::exp(-dot(e, e) / (2.0 * sq(s.sigma * dim_)));
        }
        return v + noise_(p);
    }

    /// Substructure id at a world point: 1 inside the ellipsoid, 2.. within
    /// 1.5 sigma of a satellite center, 0 elsewhere. Satellites win ties so
    /// every label marks a connected, roughly convex blob.
    std::uint16_t label(const Vec3& p) const {
        for (std::size_t i = 0; i < kSatellites.size(); ++i) {
            Vec3 e = p - (center_ + dim_ * kSatellites[i].offset);
            if (norm(e) <= 1.5 * kSatellites[i].sigma * dim_) return std::uint16_t(2 + i);
        }
        Vec3 d = p - center_;
        double rho = std::sqrt(sq(d[0] / (kRx * dim_)) + sq(d[1] / (kRy * dim_)) +
                               sq(d[2] / (kRz * dim_)));
        return rho <= 1.0 ? 1 : 0;
    }

    double dim() const { return dim_; }

private:
    static double sq(double x) { return x * x; }

    static constexpr double kRx = 0.22, kRy = 0.16, kRz = 0.12;
    static constexpr std::array<AnatomySatellite, 4> kSatellites{{
        {{0.18, 0.12, -0.05}, 0.050, 160.0},
        {{-0.15, 0.18, 0.10}, 0.060, 40.0},
        {{-0.10, -0.17, 0.14}, 0.045, 130.0},
        {{0.05, -0.10, -0.16}, 0.070, 70.0},
    }};

    double dim_;
    Vec3 center_;
    BandNoise noise_;
};

inline GridGeometry anatomy_target_geometry(int dim) {
    GridGeometry g;
    g.dims = {dim, dim, dim};
    return g;
}

/// Padded, voxel-incommensurate atlas grid covering the target with margin.
inline GridGeometry anatomy_atlas_geometry(int dim, int pad = 8) {
    GridGeometry g;
    g.dims = {dim + 2 * pad, dim + 2 * pad, dim + 2 * pad};
    g.origin = {-pad - 0.43, -pad - 0.51, -pad - 0.57};
    return g;
}

/// Renders the scene as seen through `to_world`: voxel at p stores the scene
/// value at to_world(p). Identity renders the scene in place.
template <typename MapFn>
ScalarVolume render_anatomy(const AnatomyWorld& world, const GridGeometry& g, MapFn&& to_world) {
    ScalarVolume v = ScalarVolume::zeros(g);
    std::size_t n = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                v.data[n++] = float(world.value(to_world(g.voxel_center(i, j, k))));
    return v;
}

inline ScalarVolume render_anatomy(const AnatomyWorld& world, const GridGeometry& g) {
    return render_anatomy(world, g, [](const Vec3& p) { return p; });
}

template <typename MapFn>
LabelVolume render_anatomy_labels(const AnatomyWorld& world, const GridGeometry& g,
                                  MapFn&& to_world) {
    LabelVolume v = LabelVolume::zeros(g);
    std::size_t n = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                v.data[n++] = world.label(to_world(g.voxel_center(i, j, k)));
    return v;
}

inline LabelVolume render_anatomy_labels(const AnatomyWorld& world, const GridGeometry& g) {
    return render_anatomy_labels(world, g, [](const Vec3& p) { return p; });
}

/// Geodesic angle in degrees between the rotation parts of two linear maps,
/// each taken through a polar decomposition (Newton iteration R <- (R+R^-T)/2)
/// so residual scale or shear in a recovered matrix cannot masquerade as a
/// rotation error.
inline double polar_rotation_error_deg(const std::array<double, 9>& found,
                                       const std::array<double, 9>& truth) {
    auto polar = [](std::array<double, 9> m) {
        for (int it = 0; it < 50; ++it) {
            const auto a = m;
            double det = a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
                         a[2] * (a[3] * a[7] - a[4] * a[6]);
            std::array<double, 9> inv = {
                (a[4] * a[8] - a[5] * a[7]) / det, (a[2] * a[7] - a[1] * a[8]) / det,
                (a[1] * a[5] - a[2] * a[4]) / det, (a[5] * a[6] - a[3] * a[8]) / det,
                (a[0] * a[8] - a[2] * a[6]) / det, (a[2] * a[3] - a[0] * a[5]) / det,
                (a[3] * a[7] - a[4] * a[6]) / det, (a[1] * a[6] - a[0] * a[7]) / det,
                (a[0] * a[4] - a[1] * a[3]) / det};
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) m[3 * r + c] = 0.5 * (a[3 * r + c] + inv[3 * c + r]);
        }
        return m;
    };
    auto rf = polar(found), rt = polar(truth);
    double tr = 0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) tr += rf[3 * r + c] * rt[3 * r + c];
    double cosang = std::min(1.0, std::max(-1.0, (tr - 1.0) / 2.0));
    return std::acos(cosang) * 180.0 / 3.14159265358979323846;
}

} // namespace scarline::testing
