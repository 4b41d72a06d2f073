#pragma once

#include "scarline/volume.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace scarline {

/// Concentric spherical shell: an interior (blood-pool) ball of radius_mm
/// wrapped by a wall band of thickness_mm. Intensities are offsets added to
/// the phantom background.
struct ShellSpec {
    Vec3 center_mm{0, 0, 0};
    double radius_mm = 0;
    double thickness_mm = 0;
    int interior_label = 1;
    int wall_label = 0;
    std::string name = "LA";
    float interior_offset = 0;
    float wall_offset = 0;
};

/// Azimuthal wedge of a shell's wall marked as enhanced tissue.
/// Angles are radians in [0, 2*pi), measured about the +z axis through the
/// shell center; theta1 < theta0 wraps through zero.
struct ScarArc {
    std::size_t shell = 0;
    double theta0 = 0;
    double theta1 = 0;
    float boost = 0;
    int label = 8;
};

struct PhantomSpec {
    GridGeometry geom;
    float background = 0;
    double noise_sigma = 0;
    std::uint64_t seed = 0;
    std::vector<ShellSpec> shells;
    std::vector<ScarArc> arcs;

    void validate() const;
};

struct Phantom {
    ScalarVolume image;
    LabelVolume labels;
};

/// Deterministic: a given spec (seed included) always produces bit-identical
/// volumes. Noise is hashed per voxel, independent of traversal order.
Phantom make_phantom(const PhantomSpec& spec);

PhantomSpec read_phantom_spec(const std::string& path);
void write_phantom_spec(const std::string& path, const PhantomSpec& spec);

} // namespace scarline
