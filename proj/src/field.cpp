#include "gsgraph/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "gsgraph/errors.hpp"
#include "gsgraph/util.hpp"

namespace gsgraph {

RenderedFeatureMap render_feature_map(const ScenePoints& scene, const CameraView& camera, double radius_px) {
    RenderedFeatureMap map;
    map.winner = render_winner_map(scene.positions, camera, radius_px).winner;
    return map;
}

VecX MaskPixelSummary::mean_feature(const ScenePoints& scene) const {
    VecX sum = VecX::Zero(scene.feature_dim());
    for (const auto& [pt, count] : point_counts) {
        sum += static_cast<double>(count) * scene.instance_features[static_cast<std::size_t>(pt)];
    }
    return sum / static_cast<double>(covered_pixels);
}

std::vector<MaskPixelSummary> summarize_masks(const RenderedFeatureMap& map, const ViewBundle& bundle) {
    const SegGrid& seg = bundle.full_segmentation;
    if (!map.winner.same_shape(seg.height, seg.width)) {
        throw Error("summarize_masks: map and segmentation shapes differ");
    }
    // mask -> point -> pixel count
    std::map<int, std::map<int, std::int64_t>> counts;
    for (std::size_t i = 0; i < seg.data.size(); ++i) {
        const std::int32_t m = seg.data[i];
        const std::int32_t who = map.winner.data[i];
        if (m == kBackground || who < 0) continue;
        ++counts[m][who];
    }
    std::vector<MaskPixelSummary> out;
    out.reserve(counts.size());
    for (const auto& [mask, per_point] : counts) {
        MaskPixelSummary s;
        s.mask_id = mask;
        auto cit = bundle.mask_confidences.find(mask);
        s.confidence = cit == bundle.mask_confidences.end() ? 1.0 : cit->second;
        for (const auto& [pt, n] : per_point) {
            s.point_counts.emplace_back(pt, n);
            s.covered_pixels += n;
        }
        out.push_back(std::move(s));
    }
    return out;
}

double loss_intra(const RenderedFeatureMap& map, const ScenePoints& scene, const ViewBundle& bundle) {
    double total = 0.0;
    for (const MaskPixelSummary& s : summarize_masks(map, bundle)) {
        const VecX mean = s.mean_feature(scene);
        double mask_term = 0.0;
        for (const auto& [pt, count] : s.point_counts) {
            mask_term += static_cast<double>(count) *
                         (scene.instance_features[static_cast<std::size_t>(pt)] - mean).squaredNorm();
        }
        total += s.confidence * mask_term;
    }
    return total;
}

double loss_contrast(const RenderedFeatureMap& map, const ScenePoints& scene, const ViewBundle& bundle,
                     double eps_div) {
    const std::vector<MaskPixelSummary> masks = summarize_masks(map, bundle);
    const std::size_t m = masks.size();
    if (m < 2) return 0.0;
    std::vector<VecX> means(m);
    for (std::size_t i = 0; i < m; ++i) means[i] = masks[i].mean_feature(scene);

    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            const double d2 = std::max((means[i] - means[j]).squaredNorm(), eps_div);
            sum += (masks[i].confidence + masks[j].confidence) / (2.0 * d2);
        }
    }
    return sum / (static_cast<double>(m) * static_cast<double>(m + 1));
}

void add_loss_intra_gradient(const RenderedFeatureMap& map, const ScenePoints& scene, const ViewBundle& bundle,
                             double scale, std::vector<VecX>& grad) {
    for (const MaskPixelSummary& s : summarize_masks(map, bundle)) {
        const VecX mean = s.mean_feature(scene);
        // Deviations from the mask mean sum to zero, so the mean's own
        // dependence on each feature drops out of the gradient.
        for (const auto& [pt, count] : s.point_counts) {
            grad[static_cast<std::size_t>(pt)] +=
                scale * 2.0 * s.confidence * static_cast<double>(count) *
                (scene.instance_features[static_cast<std::size_t>(pt)] - mean);
        }
    }
}

void add_loss_contrast_gradient(const RenderedFeatureMap& map, const ScenePoints& scene, const ViewBundle& bundle,
                                double eps_div, double scale, std::vector<VecX>& grad) {
    const std::vector<MaskPixelSummary> masks = summarize_masks(map, bundle);
    const std::size_t m = masks.size();
    if (m < 2) return;
    std::vector<VecX> means(m);
    for (std::size_t i = 0; i < m; ++i) means[i] = masks[i].mean_feature(scene);

    const double norm = 1.0 / (static_cast<double>(m) * static_cast<double>(m + 1));
    // d/d(mean_i) accumulated first, then routed to points via their pixel shares.
    std::vector<VecX> mean_grad(m, VecX::Zero(scene.feature_dim()));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            const VecX diff = means[i] - means[j];
            const double d2 = diff.squaredNorm();
            if (d2 <= eps_div) continue;  // clamped branch is flat
            const double w = norm * (masks[i].confidence + masks[j].confidence) / 2.0;
            const VecX g = w * (-1.0 / (d2 * d2)) * 2.0 * diff;  // d/d(mean_i) of w/d2
            mean_grad[i] += g;
            mean_grad[j] -= g;
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double inv_total = 1.0 / static_cast<double>(masks[i].covered_pixels);
        for (const auto& [pt, count] : masks[i].point_counts) {
            grad[static_cast<std::size_t>(pt)] += scale * static_cast<double>(count) * inv_total * mean_grad[i];
        }
    }
}

std::vector<int> select_stable_points(const GradientTrace& trace, double epsilon) {
    std::vector<int> out;
    for (std::size_t n = 0; n < trace.norms.size(); ++n) {
        const auto& buf = trace.norms[n];
        if (static_cast<int>(buf.size()) != trace.window()) {
            throw Error("select_stable_points: incomplete trace window for point " + std::to_string(n));
        }
        double sum = 0.0;
        for (float v : buf) sum += v;
        if (trace.window() > 0 && sum / trace.window() < epsilon) out.push_back(static_cast<int>(n));
    }
    return out;
}

TrainResult train_instance_features(const ScenePoints& scene, const std::vector<ViewBundle>& bundles,
                                    const TrainConfig& config) {
    if (bundles.empty()) throw Error("train_instance_features: at least one view bundle required");

    TrainResult result;
    result.scene = scene;
    ScenePoints& work = result.scene;
    const std::size_t n_points = work.size();

    if (work.feature_dim() == 0) {
        std::mt19937_64 rng(config.init_seed);
        std::normal_distribution<double> dist(0.0, 0.1);
        work.instance_features.assign(n_points, VecX::Zero(config.feature_dim));
        for (auto& f : work.instance_features) {
            for (Eigen::Index k = 0; k < f.size(); ++k) f[k] = dist(rng);
        }
    }
    const int dim = work.feature_dim();

    // Positions never move during training, so the per-view rasterization
    // and mask summaries are computed once.
    std::vector<RenderedFeatureMap> maps(bundles.size());
    std::vector<std::vector<MaskPixelSummary>> summaries(bundles.size());
    parallel_for(bundles.size(), [&](std::size_t v) {
        maps[v] = render_feature_map(work, bundles[v].camera, config.radius_px);
        summaries[v] = summarize_masks(maps[v], bundles[v]);
    });

    const int iters = config.iterations;
    const int k1 = static_cast<int>(std::floor(iters * (1.0 - config.stability_window_fraction)));
    result.trace.k1 = k1;
    result.trace.k2 = iters;
    result.trace.norms.assign(n_points, {});
    for (auto& buf : result.trace.norms) buf.reserve(static_cast<std::size_t>(std::max(0, iters - k1)));

    std::vector<VecX> grad(n_points, VecX::Zero(dim));
    std::vector<std::vector<VecX>> view_grad(bundles.size());
    std::vector<double> view_ls(bundles.size()), view_lc(bundles.size());

    for (int iter = 0; iter < iters; ++iter) {
        parallel_for(bundles.size(), [&](std::size_t v) {
            view_grad[v].assign(n_points, VecX::Zero(dim));
            view_ls[v] = loss_intra(maps[v], work, bundles[v]);
            view_lc[v] = loss_contrast(maps[v], work, bundles[v], config.eps_div);
            add_loss_intra_gradient(maps[v], work, bundles[v], config.lambda_s, view_grad[v]);
            add_loss_contrast_gradient(maps[v], work, bundles[v], config.eps_div, config.lambda_c, view_grad[v]);
        });

        double total_s = 0.0, total_c = 0.0;
        for (auto& g : grad) g.setZero();
        for (std::size_t v = 0; v < bundles.size(); ++v) {  // ordered reduction
            total_s += view_ls[v];
            total_c += view_lc[v];
            for (std::size_t n = 0; n < n_points; ++n) grad[n] += view_grad[v][n];
        }
        const double total = config.lambda_s * total_s + config.lambda_c * total_c;
        if (!std::isfinite(total)) {
            throw DivergenceError("training loss became non-finite at iteration " + std::to_string(iter));
        }
        result.curve.push_back({iter, total_s, total_c, total});

        if (iter >= k1) {
            for (std::size_t n = 0; n < n_points; ++n) {
                result.trace.norms[n].push_back(static_cast<float>(grad[n].norm()));
            }
        }
        for (std::size_t n = 0; n < n_points; ++n) {
            work.instance_features[n] -= config.learning_rate * grad[n];
        }
    }

    work.stability.assign(n_points, 0.0);
    if (result.trace.window() > 0) {
        for (std::size_t n = 0; n < n_points; ++n) {
            double sum = 0.0;
            for (float v : result.trace.norms[n]) sum += v;
            work.stability[n] = sum / result.trace.window();
        }
    }
    return result;
}

std::vector<std::uint8_t> observed_points(const ScenePoints& scene, const std::vector<ViewBundle>& bundles,
                                          double radius_px) {
    std::vector<std::uint8_t> observed(scene.size(), 0);
    std::vector<WinnerMap> maps(bundles.size());
    parallel_for(bundles.size(), [&](std::size_t v) {
        maps[v] = render_winner_map(scene.positions, bundles[v].camera, radius_px);
    });
    for (const auto& map : maps) {
        for (std::int32_t w : map.winner.data) {
            if (w >= 0) observed[static_cast<std::size_t>(w)] = 1;
        }
    }
    return observed;
}

int propagate_unobserved_features(ScenePoints& scene, std::span<const std::uint8_t> observed) {
    if (observed.size() != scene.size()) throw Error("propagate_unobserved_features: flag length mismatch");
    std::vector<int> sources;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (observed[i]) sources.push_back(static_cast<int>(i));
    }
    if (sources.empty()) return 0;

    std::vector<int> donor(scene.size(), -1);
    parallel_for(scene.size(), [&](std::size_t i) {
        if (observed[i]) return;
        double best = std::numeric_limits<double>::infinity();
        int who = sources.front();
        for (int s : sources) {
            const double d = (scene.positions[static_cast<std::size_t>(s)] - scene.positions[i]).squaredNorm();
            if (d < best) {
                best = d;
                who = s;
            }
        }
        donor[i] = who;
    });
    int rewritten = 0;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (donor[i] >= 0) {
            scene.instance_features[i] = scene.instance_features[static_cast<std::size_t>(donor[i])];
            ++rewritten;
        }
    }
    return rewritten;
}

}  // namespace gsgraph
