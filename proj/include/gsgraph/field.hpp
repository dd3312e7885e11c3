#pragma once

#include <vector>

#include "gsgraph/associate.hpp"
#include "gsgraph/types.hpp"

namespace gsgraph {

/// Rendered instance-feature image for one view. The per-pixel feature is
/// the winning point's instance feature; pixels no point reached are
/// uncovered and contribute nothing to the losses.
struct RenderedFeatureMap {
    Grid<std::int32_t> winner;  // point index per pixel, -1 uncovered

    bool covered(int y, int x) const { return winner.at(y, x) >= 0; }
};

RenderedFeatureMap render_feature_map(const ScenePoints& scene, const CameraView& camera, double radius_px);

/// Per-mask coverage summary: how many pixels of mask `mask_id` each point
/// won. Losses and gradients are exact sums over these counts.
struct MaskPixelSummary {
    int mask_id = -1;
    double confidence = 1.0;
    std::int64_t covered_pixels = 0;
    std::vector<std::pair<int, std::int64_t>> point_counts;  // (point index, pixels won)

    VecX mean_feature(const ScenePoints& scene) const;
};

std::vector<MaskPixelSummary> summarize_masks(const RenderedFeatureMap& map, const ViewBundle& bundle);

/// Confidence-weighted intra-mask smoothing loss: for every mask, the sum
/// over its covered pixels of the squared deviation of the rendered feature
/// from the mask's mean rendered feature.
double loss_intra(const RenderedFeatureMap& map, const ScenePoints& scene, const ViewBundle& bundle);

/// Inter-mask contrastive loss over ordered mask pairs:
///   1/(m(m+1)) * sum_{i != j} (conf_i + conf_j) / (2 * max(||mean_i - mean_j||^2, eps_div)).
/// Returns 0 when fewer than two masks are covered.
double loss_contrast(const RenderedFeatureMap& map, const ScenePoints& scene, const ViewBundle& bundle,
                     double eps_div);

/// Analytic d(loss)/d(instance feature), accumulated into grad with the
/// given scale. grad must hold scene.size() vectors of the feature dim.
void add_loss_intra_gradient(const RenderedFeatureMap& map, const ScenePoints& scene, const ViewBundle& bundle,
                             double scale, std::vector<VecX>& grad);
void add_loss_contrast_gradient(const RenderedFeatureMap& map, const ScenePoints& scene, const ViewBundle& bundle,
                                double eps_div, double scale, std::vector<VecX>& grad);

/// Gradient-norm history for the stability window [k1, k2).
struct GradientTrace {
    int k1 = 0;
    int k2 = 0;
    std::vector<std::vector<float>> norms;  // per point, length k2 - k1

    int window() const { return k2 - k1; }
};

/// Point n is stable when its mean gradient norm over the window is
/// strictly below epsilon.
std::vector<int> select_stable_points(const GradientTrace& trace, double epsilon);

struct TrainConfig {
    double learning_rate = 1e-3;
    int iterations = 200;
    double lambda_s = 1.0;
    double lambda_c = 0.1;
    double eps_div = 1e-6;
    double radius_px = 2.0;
    double stability_window_fraction = 0.25;  // trailing share of iterations traced
    int feature_dim = 6;                      // used only when the scene carries no features
    unsigned init_seed = 0;
};

struct LossSample {
    int iteration = 0;
    double smoothing = 0.0;
    double contrastive = 0.0;
    double total = 0.0;
};

struct TrainResult {
    ScenePoints scene;
    GradientTrace trace;
    std::vector<LossSample> curve;
};

/// Plain constant-step gradient descent on lambda_s * L_s + lambda_c * L_c
/// summed over all views. Throws DivergenceError when the loss leaves the
/// finite range. The returned scene carries per-point stability scores
/// (mean traced gradient norm).
TrainResult train_instance_features(const ScenePoints& scene, const std::vector<ViewBundle>& bundles,
                                    const TrainConfig& config);

/// Per-point flag: did the point win at least one pixel in any view?
/// Only such points receive loss gradient.
std::vector<std::uint8_t> observed_points(const ScenePoints& scene, const std::vector<ViewBundle>& bundles,
                                          double radius_px);

/// Points no view ever rendered keep their initialization and would pollute
/// clustering; they inherit the instance feature of the nearest observed
/// point instead (ties toward the lower index). Returns the number of
/// points rewritten.
int propagate_unobserved_features(ScenePoints& scene, std::span<const std::uint8_t> observed);

}  // namespace gsgraph
