#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gsgraph/ground.hpp"
#include "gsgraph/types.hpp"

namespace gsgraph {

/// Maximum-weight assignment (Hungarian, O(n^3)) on a rows x cols integer
/// score matrix. Returns per-row matched column (-1 = unmatched) and the
/// optimal total. Among equally optimal assignments the lexicographically
/// smallest row->column vector is returned, so results are reproducible
/// and comparable against an enumerating oracle.
struct Assignment {
    std::vector<int> row_to_col;
    std::int64_t total = 0;
};

Assignment max_assignment(const std::vector<std::vector<std::int64_t>>& score);

struct SegmentationEval {
    double miou = 0.0;
    double macc = 0.0;
    std::map<int, double> per_class_iou;  // keyed by ground-truth class label
};

/// mIoU / mAcc of predicted cluster labels against ground-truth classes.
/// Clusters are unlabeled, so they are matched 1:1 to classes by optimal
/// assignment on the confusion matrix before the standard per-class IoU.
SegmentationEval evaluate_segmentation(const std::vector<int>& predicted, const std::vector<int>& ground_truth);

struct ObjectRelation {
    int subject = -1;
    std::string predicate;
    int object = -1;

    auto operator<=>(const ObjectRelation&) const = default;
};

struct RelationEval {
    double precision_pre = 0.0;
    double recall_pre = 0.0;
    double precision_post = 0.0;
    double recall_post = 0.0;
    double planted_false_kept = 0.0;  // share of planted-false relations surviving correction
};

/// Maps every cluster to the majority ground-truth object among its points
/// (ties toward the lower object id). Unlabeled points are ignored.
std::map<int, int> cluster_to_object(const std::vector<int>& cluster_labels, const std::vector<int>& object_labels);

/// Relation precision/recall before (all lifted edges) and after (kept
/// verdicts only) correction, against object-level ground truth.
RelationEval evaluate_relations(const SceneGraph& graph, const std::map<int, int>& cluster_object,
                                const std::vector<ObjectRelation>& true_relations,
                                const std::vector<ObjectRelation>& planted_false);

struct GroundingEval {
    double recall_at_1 = 0.0;
    double recall_at_3 = 0.0;
    double recall_at_5 = 0.0;
};

/// mR@k over ranked answers; `answers[i]` holds the expected cluster id.
GroundingEval evaluate_grounding(const std::vector<std::vector<int>>& ranked, const std::vector<int>& answers);

struct EvalReport {
    SegmentationEval segmentation;
    RelationEval relations;
    GroundingEval grounding;
};

std::string eval_report_to_json(const EvalReport& report);

}  // namespace gsgraph
