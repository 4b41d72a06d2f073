#pragma once

#include "scarline/resample.hpp"
#include "scarline/semi.hpp"

#include <string>
#include <vector>

namespace scarline {

/// Gradient-ascent settings shared by all registration stages. Parameters
/// are preconditioned by the per-block step scales, the line search is
/// Armijo backtracking, and a step is only ever accepted when it improves
/// the score, so every stage is monotone by construction.
struct OptimizerSettings {
    int pyramid_levels = 3;     // downsample-by-2 levels, coarse to fine
    int max_iterations = 60;    // per level
    double step_translation_mm = 2.0;
    double step_linear = 0.02;  // matrix entries, dimensionless
    double step_control_mm = 2.0;
    double armijo = 1e-4;
    double min_step_scale = 1e-4; // line search floor, fraction of the base step
    double min_gain = 1e-6;       // stop when an accepted step gains less

    void validate() const;
};

struct StageScore {
    std::string stage;
    double score = 0;
};

struct AffineResult {
    AffineTransform transform;
    double score = 0;
    int iterations = 0;
};

struct FfdResult {
    FfdTransform ffd;
    double score = 0;
    int iterations = 0;
};

/// Maximizes the spatially encoded mutual information between the target
/// and the atlas warped by a 12-parameter affine, coarse-to-fine. The
/// returned transform never scores below `init` on the full-resolution
/// objective, and its linear part keeps |det| > 1e-6.
AffineResult register_affine(const ScalarVolume& target, const ScalarVolume& atlas,
                             const AffineTransform& init, const SemiConfig& cfg,
                             const OptimizerSettings& opt);

/// Adds a free-form deformation on top of `init` (displacements start at
/// zero) and ascends all control displacements jointly with the analytic
/// gradient. grid_spacing_mm must cover at least two voxels.
FfdResult register_ffd(const ScalarVolume& target, const ScalarVolume& atlas,
                       const TransformChain& init, const SemiConfig& cfg,
                       double grid_spacing_mm, const OptimizerSettings& opt);

/// Objective value plus its gradient over the 12 affine parameters (matrix
/// row-major, then translation). This is the exact quantity the affine stage
/// ascends, exposed so it can be checked against finite differences of
/// semi_score over resampled volumes.
double affine_objective_gradient(const ScalarVolume& target, const ScalarVolume& atlas,
                                 const AffineTransform& T, const SemiConfig& cfg,
                                 std::array<double, 12>& grad);

/// Same seam for the deformable stage: gradient with respect to the control
/// displacements of chain.ffd (which must be present).
double ffd_objective_gradient(const ScalarVolume& target, const ScalarVolume& atlas,
                              const TransformChain& chain, const SemiConfig& cfg,
                              std::vector<Vec3>& grad);

struct HierarchicalSettings {
    bool global = true;
    bool local = true;
    bool ffd = true;
    double ffd_spacing_mm = 8.0;
    double blend_radius_mm = 8.0;
    int min_label_voxels = 8; // substructures smaller than this get no local affine
};

struct RegistrationResult {
    TransformChain chain;
    double score = 0;
    /// One entry per executed stage, "init" first; scores are non-decreasing.
    std::vector<StageScore> stages;
};

/// Three-stage pipeline: global affine, one local affine per substructure
/// in the atlas label volume (kept only when it improves the full-volume
/// score), then a free-form deformation.
RegistrationResult register_hierarchical(const ScalarVolume& target, const ScalarVolume& atlas,
                                         const LabelVolume& atlas_labels, const SemiConfig& cfg,
                                         const OptimizerSettings& opt,
                                         const HierarchicalSettings& stages = {});

} // namespace scarline
