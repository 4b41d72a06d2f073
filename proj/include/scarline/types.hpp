#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace scarline {

using Vec3 = std::array<double, 3>;
using Index3 = std::array<int, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Regular voxel grid in physical space. The origin is the physical
/// position of the center of voxel (0,0,0); spacing is in millimetres.
struct GridGeometry {
    Index3 dims{0, 0, 0};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }

    // x-fastest linear index
    std::size_t linear(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }

    bool contains(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }

    Vec3 voxel_center(int i, int j, int k) const {
        return {origin[0] + i * spacing[0], origin[1] + j * spacing[1], origin[2] + k * spacing[2]};
    }

    /// Physical point -> continuous voxel index.
    Vec3 continuous_index(const Vec3& p) const {
        return {(p[0] - origin[0]) / spacing[0], (p[1] - origin[1]) / spacing[1], (p[2] - origin[2]) / spacing[2]};
    }

    /// Physical extent (mm) spanned by voxel centers along each axis.
    Vec3 extent() const {
        return {(dims[0] - 1) * spacing[0], (dims[1] - 1) * spacing[1], (dims[2] - 1) * spacing[2]};
    }

    bool operator==(const GridGeometry& o) const {
        return dims == o.dims && spacing == o.spacing && origin == o.origin;
    }

    void validate() const {
        if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0)
            throw std::invalid_argument("grid dims must be positive");
        if (!(spacing[0] > 0.0) || !(spacing[1] > 0.0) || !(spacing[2] > 0.0))
            throw std::invalid_argument("grid spacing must be positive");
    }
};

} // namespace scarline
