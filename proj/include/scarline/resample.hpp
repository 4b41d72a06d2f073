#pragma once

#include "scarline/transform.hpp"
#include "scarline/volume.hpp"

namespace scarline {

/// Value and spatial gradient of the trilinear interpolant at a continuous
/// voxel index; `inside` is false when u falls outside [0, dims-1]^3.
struct TrilinearSample {
    double value = 0;
    Vec3 grad{0, 0, 0}; // d value / d continuous-index
    bool inside = false;
};

TrilinearSample sample_trilinear(const ScalarVolume& v, const Vec3& u);

/// Pull-back resampling: out(x) = src(chain(x_phys)) with trilinear
/// interpolation, `fill` outside the source domain.
ScalarVolume resample(const ScalarVolume& src, const TransformChain& chain,
                      const GridGeometry& target, float fill = 0.0f);

/// Nearest-neighbor label resampling; half-voxel ties round away from the
/// index origin. Voxels mapping outside the source become background (0).
LabelVolume resample_labels(const LabelVolume& src, const TransformChain& chain,
                            const GridGeometry& target);

/// 2x2x2 mean pooling; spacing doubles, origin shifts to the pooled centers.
ScalarVolume downsample2(const ScalarVolume& v);

} // namespace scarline
