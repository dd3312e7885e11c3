#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gsgraph/types.hpp"

namespace gsgraph {

/// 2D-extraction ingest options.
struct ExtractionConfig {
    double theta = 0.8;  // semantic-similarity threshold for pair candidacy
};

/// Matches a foreground mask against the full segmentation by IoU.
/// Returns the argmax mask index; ties break toward the lowest index.
/// Throws EmptyMaskError when the foreground has no set pixel and
/// NoOverlapError when the best IoU is zero.
int match_mask_index(const MaskGrid& foreground, const SegGrid& full_segmentation);

/// Object-pair candidates: (i, j) with i < j is emitted when the two
/// detections' mask features have cosine similarity above theta, or their
/// boxes intersect with positive area.
std::vector<std::pair<int, int>> candidate_pairs(const std::vector<Detection>& detections,
                                                 const std::map<int, VecX>& mask_features,
                                                 double theta);

// ---- on-disk formats (documented in FORMATS.md) ----

ScenePoints load_scene(const std::filesystem::path& path);
void save_scene(const std::filesystem::path& path, const ScenePoints& points);

std::vector<ViewBundle> load_views(const std::filesystem::path& dir);
void save_bundle(const std::filesystem::path& view_dir, const ViewBundle& bundle);

std::vector<int> load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const std::vector<int>& labels);

SceneGraph load_graph_json(const std::filesystem::path& path);
std::string graph_to_json(const SceneGraph& graph);
void save_graph_json(const std::filesystem::path& path, const SceneGraph& graph);

std::map<std::string, VecX> load_embeddings_json(const std::filesystem::path& path);
void save_embeddings_json(const std::filesystem::path& path, const std::map<std::string, VecX>& table);

}  // namespace gsgraph
