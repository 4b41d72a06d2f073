#pragma once

#include "scarline/volume.hpp"

namespace scarline {

/// Exact squared Euclidean distance (mm^2) from every voxel center to the
/// nearest voxel center carrying `label`. Voxels holding the label get 0.
/// Infinite (std::numeric_limits<double>::infinity()) when the label is absent.
std::vector<double> squared_distance_field(const LabelVolume& mask, int label);

/// Morphological dilation by a metric ball of `radius_mm`: every voxel whose
/// center lies within radius_mm of the labelled set is set to `label`.
/// radius 0 is the identity. Output carries only {0, label}.
LabelVolume dilate_mm(const LabelVolume& mask, int label, double radius_mm);

/// Erosion: keeps the voxels whose distance to the complement of the labelled
/// set exceeds radius_mm. radius 0 is the identity. May produce an empty set.
LabelVolume erode_mm(const LabelVolume& mask, int label, double radius_mm);

} // namespace scarline
