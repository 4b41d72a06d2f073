#pragma once

#include "scarline/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace scarline {

/// y = M*p + t. Chains store the mapping from target-space physical points
/// into the source (atlas) space, so resampling never needs an inversion.
struct AffineTransform {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1}; // row-major
    Vec3 t{0, 0, 0};

    Vec3 apply(const Vec3& p) const {
        return {m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + t[0],
                m[3] * p[0] + m[4] * p[1] + m[5] * p[2] + t[1],
                m[6] * p[0] + m[7] * p[1] + m[8] * p[2] + t[2]};
    }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) -
               m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    /// Throws when |det| < 1e-9.
    AffineTransform inverse() const;

    static AffineTransform identity() { return {}; }
    static AffineTransform translation(const Vec3& t);
    /// Rotation by angle_rad about a unit axis through center, plus shift.
    static AffineTransform rigid(const Vec3& axis, double angle_rad, const Vec3& center, const Vec3& shift);
};

AffineTransform compose(const AffineTransform& outer, const AffineTransform& inner);

/// Cubic B-spline free-form deformation: a displacement field d(p) in mm
/// defined by control points on a regular grid covering the target domain.
struct FfdTransform {
    Index3 grid{0, 0, 0};     // control points per axis
    Vec3 grid_origin{0, 0, 0};
    Vec3 grid_spacing{1, 1, 1};
    std::vector<Vec3> disp;   // x-fastest, grid[0]*grid[1]*grid[2] entries

    Vec3 displacement(const Vec3& p) const;

    /// Control points influencing p with their basis weights (at most 64).
    struct Support {
        int count = 0;
        int index[64];
        double weight[64];
    };
    Support support(const Vec3& p) const;

    std::size_t control_count() const {
        return static_cast<std::size_t>(grid[0]) * grid[1] * grid[2];
    }

    /// Control lattice covering the domain [lo, hi] with one margin point on
    /// every side; displacements start at zero.
    static FfdTransform covering(const Vec3& lo, const Vec3& hi, double spacing_mm);

    void validate() const;
};

/// Local affine refinement attached to a substructure, blended by a Gaussian
/// of the distance to a ball approximating that substructure in target space.
struct LocalAffine {
    int label = 0;
    Vec3 center{0, 0, 0};
    double radius = 0;
    AffineTransform affine;
};

/// target point p  ->  q = p + ffd(p)  ->  blended affine applied to q.
/// Blend weights: w_k = exp(-max(0, |p-c_k| - r_k)^2 / (2 b^2)) for each local,
/// and 1 - max_k w_k for the global affine; evaluation is total over space.
struct TransformChain {
    AffineTransform global;
    std::vector<LocalAffine> locals;
    double blend_radius_mm = 8.0;
    std::optional<FfdTransform> ffd;

    Vec3 apply(const Vec3& p) const;

    /// Blended linear part at p (the matrix the FFD gradient sees).
    std::array<double, 9> blended_matrix(const Vec3& p) const;

    void validate() const;

    static TransformChain identity() { return {}; }
    static TransformChain from_affine(const AffineTransform& a);
};

void write_transform(const std::string& path, const TransformChain& chain);
TransformChain read_transform(const std::string& path);

} // namespace scarline
