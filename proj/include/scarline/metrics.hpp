#pragma once

#include "scarline/volume.hpp"

#include <vector>

namespace scarline {

/// Voxel-overlap agreement between an automatic mask M and a manual mask A
/// (non-zero voxels are "in"). Conventions for degenerate cases:
///  - both masks empty: dice = jaccard = precision = 1, flagged;
///  - only the reference empty: precision = 0;
///  - npv denominator zero (reference covers the grid): npv = 1 if the
///    union also covers it, else 0.
struct OverlapReport {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double dice = 0, jaccard = 0, precision = 0, npv = 0;
    bool both_empty = false;
};

OverlapReport overlap_metrics(const LabelVolume& auto_mask, const LabelVolume& manual_mask);

/// Centers (mm) of mask voxels with at least one of their 6 face neighbors
/// outside the mask (grid border counts as outside).
std::vector<Vec3> surface_points(const LabelVolume& mask);

/// max of the two directed sup-inf distances. Errors on empty sets.
double hausdorff_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// 0.5 * (mean_A min-dist-to-B + mean_B min-dist-to-A). Errors on empty sets.
double average_surface_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// Fibrosis extent: 100 * volume(scar within wall) / volume(wall), percent.
/// Errors when the wall is empty.
double fibrosis_extent_percent(const LabelVolume& scar, const LabelVolume& wall);

struct BlandAltman {
    double bias = 0;
    double sd = 0;       // sample standard deviation of the differences
    double lo = 0, hi = 0; // bias -/+ 1.96 sd
    std::vector<std::pair<double, double>> points; // (mean, difference)
};

/// Paired-method agreement for (a_i, b_i) measurements; needs >= 2 pairs.
BlandAltman bland_altman(const std::vector<double>& a, const std::vector<double>& b);

} // namespace scarline
