#pragma once

#include "scarline/volume.hpp"

#include <vector>

namespace scarline {

struct SlicParams {
    int grid_interval = 4;          // S, pixels between seeds
    double compactness = 4.0;       // m
    int iterations = 10;
    bool perturb_seeds = false;     // move seeds to the lowest-gradient 3x3 spot
    double min_region_fraction = 0.25; // orphans below fraction*S^2 get merged

    void validate() const;
};

struct SlicCluster {
    double x = 0, y = 0;      // centroid, pixel coordinates
    double intensity = 0;     // mean member intensity
    int count = 0;
};

/// Per-slice superpixel tessellation; labels are 0..K-1, every pixel assigned.
struct SuperpixelMap {
    int width = 0, height = 0;
    std::vector<int> labels; // x-fastest
    std::vector<SlicCluster> clusters;

    int label_at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Combined distance of Achanta's SLIC: sqrt(dc^2 + (ds/S)^2 m^2).
double slic_distance(double d_intensity, double dx, double dy, int S, double m);

std::vector<SlicCluster> slic_init_centers(const float* px, int w, int h, const SlicParams& p);

/// One assignment sweep: each pixel takes the best center whose (2S+1)-wide
/// window covers it (ties to the lowest center id); `current` (optional)
/// keeps a pixel's previous cluster in the candidate set.
std::vector<int> slic_assign(const float* px, int w, int h,
                             const std::vector<SlicCluster>& centers, const SlicParams& p,
                             const std::vector<int>* current = nullptr);

struct SlicTrace {
    std::vector<double> pre_assign_sum_d;  // sum of D before each assignment sweep
    std::vector<double> post_assign_sum_d; // after the sweep, same centers
    std::vector<double> energy_sq;         // sum of D^2 after the sweep
};

SuperpixelMap slic_segment(const float* px, int w, int h, const SlicParams& p,
                           SlicTrace* trace = nullptr);

/// Slice-wise tessellation of a volume. Global superpixel ids are
/// slice_offset[z] + local id + 1, so 0 stays free for background use.
struct SuperpixelVolume {
    GridGeometry geom;
    std::vector<SuperpixelMap> slices;
    std::vector<int> slice_offset;
    int total_clusters = 0;

    int global_id(int z, int local) const { return slice_offset[z] + local + 1; }
    LabelVolume to_labels() const;
};

SuperpixelVolume slic_volume(const ScalarVolume& v, const SlicParams& p);

/// Rebuild the per-slice maps from a stored label volume (centroids and mean
/// intensities recomputed; `image` must share the grid).
SuperpixelVolume superpixels_from_labels(const LabelVolume& ids, const ScalarVolume& image);

/// Union all superpixels whose overlap with `truth` is at least
/// `overlap_ratio` of their area, then Dice that union against the truth.
/// `truth` is a w*h bitmap; errors when it is empty.
double adherence_dice(const SuperpixelMap& sp, const std::vector<std::uint8_t>& truth,
                      double overlap_ratio);

} // namespace scarline
