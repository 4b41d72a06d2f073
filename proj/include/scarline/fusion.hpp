#pragma once

#include "scarline/parzen.hpp"
#include "scarline/volume.hpp"

#include <string>
#include <vector>

namespace scarline {

/// One atlas after propagation into the target frame: the warped intensity
/// image and its warped labels, sharing the target geometry.
struct WarpedAtlas {
    ScalarVolume intensity;
    LabelVolume labels;
    std::string source;
};

enum class FusionStrategy {
    MajorityVote,    // every atlas votes with weight 1
    LocalWeighted,   // Gaussian of the local mean squared intensity difference
    PatchFusion,     // conditional-probability patch similarity, raw scale only
    MultiScalePatch, // patch similarity summed over a Gaussian scale space
};

std::string to_string(FusionStrategy s);
FusionStrategy fusion_strategy_from_string(const std::string& name);

struct FusionConfig {
    FusionStrategy strategy = FusionStrategy::MultiScalePatch;
    int patch_radius = 2;               // voxels; radius 2 = 5^3 patch
    std::vector<double> scales = {0.0, 1.0, 2.0}; // Gaussian sigmas, voxels; 0 = raw image
    double sharpness = 2.0;             // vote weight = similarity ^ sharpness
    int prob_bins = 16;                 // patch joint histogram size
    double parzen_width = 1.0;          // kernel window in bin units, 0 = counting
    double lwv_sigma = 0.0;             // intensity units; <= 0 picks the target's std
    std::vector<int> labels;            // label set; empty = union found in the atlases

    void validate() const;
};

/// Separable Gaussian smoothing with reflective boundaries; sigma is in
/// voxel units and 0 returns the input unchanged.
ScalarVolume scale_space(const ScalarVolume& vol, double sigma);

/// Conditional probability p(target(x) | atlas(x)) estimated from the Parzen
/// joint histogram of the patch pair around x (clipped at the volume edge).
/// Zero marginal mass at the atlas value returns 0.
double local_similarity(const ScalarVolume& target_s, const ScalarVolume& atlas_s, int i, int j,
                        int k, const FusionConfig& cfg, IntensityBinRange target_range,
                        IntensityBinRange atlas_range);

/// local_similarity at every voxel in flat index order, computed with a
/// sliding patch histogram (one plane enters, one leaves per step). Agrees
/// with the naive per-voxel rebuild to ~1e-12; this is the path fuse() takes.
std::vector<double> similarity_map(const ScalarVolume& target_s, const ScalarVolume& atlas_s,
                                   const FusionConfig& cfg, IntensityBinRange target_range,
                                   IntensityBinRange atlas_range);

/// Sum of per-scale local similarities over precomputed scale-space pairs.
double msp_similarity(const std::vector<ScalarVolume>& target_scales,
                      const std::vector<ScalarVolume>& atlas_scales, int i, int j, int k,
                      const FusionConfig& cfg, const std::vector<IntensityBinRange>& target_ranges,
                      const std::vector<IntensityBinRange>& atlas_ranges);

/// Per-voxel weighted vote: label(x) = argmax over the label set of the
/// total weight of atlases carrying that label at x, ties to the lowest
/// label id. weights[a] holds one weight per voxel for atlas a.
LabelVolume fuse_with_weights(const std::vector<WarpedAtlas>& atlases,
                              const std::vector<std::vector<double>>& weights,
                              const std::vector<int>& labels = {});

/// Full fusion: computes the per-atlas weight field called for by
/// cfg.strategy and applies the weighted vote.
LabelVolume fuse(const ScalarVolume& target, const std::vector<WarpedAtlas>& atlases,
                 const FusionConfig& cfg);

struct FusionComparisonRow {
    std::string strategy;
    int label = 0;
    double dice = 0;
};

/// Dice of every strategy against the reference, one row per strategy and
/// label. Rows are ordered by the strategies argument, then by label id.
std::vector<FusionComparisonRow> compare_strategies(const ScalarVolume& target,
                                                    const LabelVolume& truth,
                                                    const std::vector<WarpedAtlas>& atlases,
                                                    const std::vector<FusionStrategy>& strategies,
                                                    const FusionConfig& cfg);

} // namespace scarline
