#pragma once

#include "scarline/parzen.hpp"
#include "scarline/volume.hpp"

#include <vector>

namespace scarline {

/// Spatially encoded mutual information: the joint histogram of target and
/// warped atlas intensities is split into n_bands spatially weighted copies
/// and the per-band mutual informations are summed. Band weights form a
/// partition of unity, so total histogram mass over all bands equals the
/// voxel count.
struct SemiConfig {
    int n_bands = 8;
    int bins = 32;
    /// Cubic B-spline window scale in bin units. Per-voxel kernel mass is
    /// renormalized to 1, so width -> 0 degenerates to nearest-bin counting.
    double parzen_width = 1.0;
    /// Band Gaussian sigma as a multiple of the band center spacing.
    double band_sigma_factor = 1.0;

    void validate() const;
};

/// Per-voxel band weights, band-major; rows sum to 1 at every voxel.
/// Bands are Gaussians over the projection onto the principal axis of the
/// target foreground (non-zero voxels), centers evenly spaced across its
/// extent, normalized voxel-wise. A single band is constant 1.
struct SpatialBands {
    int n_bands = 1;
    std::size_t voxels = 0;
    std::vector<double> w; // [band * voxels + voxel]

    double at(int band, std::size_t voxel) const { return w[std::size_t(band) * voxels + voxel]; }
};

SpatialBands make_bands(const ScalarVolume& target, const SemiConfig& cfg);

struct JointHistogram {
    int bins = 0;
    std::vector<double> h; // row: target bin, col: atlas bin

    double& at(int i, int j) { return h[std::size_t(i) * bins + j]; }
    double at(int i, int j) const { return h[std::size_t(i) * bins + j]; }
    double total() const;
};

/// Spatially weighted Parzen joint histogram for one band. Intensity ranges
/// are passed in so they can stay frozen while the atlas warps.
JointHistogram spatial_joint_histogram(const ScalarVolume& target, const ScalarVolume& warped,
                                       const SpatialBands& bands, int band,
                                       const SemiConfig& cfg, IntensityBinRange target_range,
                                       IntensityBinRange atlas_range);

/// All band histograms in a single pass over the voxels.
std::vector<JointHistogram> spatial_joint_histograms(const ScalarVolume& target,
                                                     const ScalarVolume& warped,
                                                     const SpatialBands& bands,
                                                     const SemiConfig& cfg,
                                                     IntensityBinRange target_range,
                                                     IntensityBinRange atlas_range);

/// Mutual information of a normalized histogram, in nats; empty histogram
/// scores 0.
double mutual_information_nats(const JointHistogram& h);

/// Sum of per-band mutual informations.
double semi_score(const ScalarVolume& target, const ScalarVolume& warped,
                  const SpatialBands& bands, const SemiConfig& cfg,
                  IntensityBinRange target_range, IntensityBinRange atlas_range);

/// Convenience overload: bands from cfg, ranges from the inputs.
double semi_score(const ScalarVolume& target, const ScalarVolume& warped,
                  const SemiConfig& cfg);

/// Score plus the per-voxel derivative of the score with respect to the
/// warped intensity value, the seam registration optimizers chain through
/// the interpolated atlas gradient.
struct SemiValueGrad {
    double score = 0;
    std::vector<double> dvalue; // dScore / d warped(x), voxel-major
};

SemiValueGrad semi_value_grad(const ScalarVolume& target, const ScalarVolume& warped,
                              const SpatialBands& bands, const SemiConfig& cfg,
                              IntensityBinRange target_range, IntensityBinRange atlas_range);

} // namespace scarline
