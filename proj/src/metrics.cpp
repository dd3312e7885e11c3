#include "gsgraph/metrics.hpp"

#include <algorithm>
#include <json.hpp>
#include <limits>
#include <set>

#include "gsgraph/errors.hpp"

namespace gsgraph {

namespace {

// Classic potentials-based Hungarian on a square cost matrix, minimizing.
// cost is n x n; returns column per row.
std::vector<int> hungarian_min(const std::vector<std::vector<std::int64_t>>& cost) {
    const int n = static_cast<int>(cost.size());
    const std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
    std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<std::int64_t> minv(n + 1, kInf);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            std::int64_t delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const std::int64_t cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j) {
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

std::int64_t best_total(const std::vector<std::vector<std::int64_t>>& score) {
    const std::size_t rows = score.size();
    const std::size_t cols = rows == 0 ? 0 : score[0].size();
    const std::size_t n = std::max(rows, cols);
    if (n == 0) return 0;
    std::int64_t top = 0;
    for (const auto& row : score) {
        for (std::int64_t v : row) top = std::max(top, v);
    }
    std::vector<std::vector<std::int64_t>> cost(n, std::vector<std::int64_t>(n, top));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) cost[r][c] = top - score[r][c];
    }
    const std::vector<int> match = hungarian_min(cost);
    std::int64_t total = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        const int c = match[r];
        if (c >= 0 && static_cast<std::size_t>(c) < cols) total += score[r][c];
    }
    return total;
}

}  // namespace

Assignment max_assignment(const std::vector<std::vector<std::int64_t>>& score) {
    Assignment out;
    const std::size_t rows = score.size();
    const std::size_t cols = rows == 0 ? 0 : score[0].size();
    out.row_to_col.assign(rows, -1);
    if (rows == 0 || cols == 0) return out;

    out.total = best_total(score);

    // Fix rows one by one to the smallest column that still allows the
    // optimum; this canonicalizes ties deterministically.
    std::vector<std::vector<std::int64_t>> work = score;
    std::int64_t fixed = 0;
    std::vector<char> col_used(cols, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        int chosen = -1;
        // Candidate columns in ascending order, then "unmatched".
        for (std::size_t c = 0; c <= cols; ++c) {
            const bool unmatched = c == cols;
            if (!unmatched && col_used[c]) continue;
            // Value of completing the assignment with this choice fixed.
            std::vector<std::vector<std::int64_t>> rest;
            for (std::size_t rr = r + 1; rr < rows; ++rr) {
                std::vector<std::int64_t> row;
                for (std::size_t cc = 0; cc < cols; ++cc) {
                    if (col_used[cc] || (!unmatched && cc == c)) continue;
                    row.push_back(score[rr][cc]);
                }
                rest.push_back(std::move(row));
            }
            const std::int64_t value = fixed + (unmatched ? 0 : score[r][c]) +
                                       (rest.empty() || rest[0].empty() ? 0 : best_total(rest));
            if (value == out.total) {
                chosen = unmatched ? -1 : static_cast<int>(c);
                break;
            }
        }
        out.row_to_col[r] = chosen;
        if (chosen >= 0) {
            col_used[static_cast<std::size_t>(chosen)] = 1;
            fixed += score[r][static_cast<std::size_t>(chosen)];
        }
    }
    return out;
}

SegmentationEval evaluate_segmentation(const std::vector<int>& predicted, const std::vector<int>& ground_truth) {
    if (predicted.size() != ground_truth.size()) {
        throw Error("evaluate_segmentation: label vectors differ in length");
    }
    SegmentationEval eval;
    const std::size_t n = predicted.size();
    if (n == 0) return eval;

    std::vector<int> clusters, classes;
    {
        std::set<int> cs(predicted.begin(), predicted.end());
        std::set<int> gs(ground_truth.begin(), ground_truth.end());
        cs.erase(kNoLabel);
        clusters.assign(cs.begin(), cs.end());
        classes.assign(gs.begin(), gs.end());
    }
    std::map<int, std::size_t> cluster_idx, class_idx;
    for (std::size_t i = 0; i < clusters.size(); ++i) cluster_idx[clusters[i]] = i;
    for (std::size_t i = 0; i < classes.size(); ++i) class_idx[classes[i]] = i;

    std::vector<std::vector<std::int64_t>> confusion(clusters.size(),
                                                     std::vector<std::int64_t>(classes.size(), 0));
    std::vector<std::int64_t> row_sum(clusters.size(), 0), col_sum(classes.size(), 0);
    std::int64_t counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (predicted[i] == kNoLabel) continue;
        const std::size_t r = cluster_idx.at(predicted[i]);
        const std::size_t c = class_idx.at(ground_truth[i]);
        ++confusion[r][c];
        ++row_sum[r];
        ++col_sum[c];
        ++counted;
    }

    const Assignment assign = max_assignment(confusion);

    std::vector<int> class_to_cluster(classes.size(), -1);
    for (std::size_t r = 0; r < clusters.size(); ++r) {
        if (assign.row_to_col[r] >= 0) class_to_cluster[static_cast<std::size_t>(assign.row_to_col[r])] = static_cast<int>(r);
    }

    double iou_sum = 0.0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        double iou = 0.0;
        const int r = class_to_cluster[c];
        if (r >= 0) {
            const std::int64_t tp = confusion[static_cast<std::size_t>(r)][c];
            const std::int64_t uni = row_sum[static_cast<std::size_t>(r)] + col_sum[c] - tp;
            iou = uni > 0 ? static_cast<double>(tp) / static_cast<double>(uni) : 0.0;
        }
        eval.per_class_iou[classes[c]] = iou;
        iou_sum += iou;
    }
    eval.miou = classes.empty() ? 0.0 : iou_sum / static_cast<double>(classes.size());

    eval.macc = counted == 0 ? 0.0 : static_cast<double>(assign.total) / static_cast<double>(counted);
    return eval;
}

std::map<int, int> cluster_to_object(const std::vector<int>& cluster_labels, const std::vector<int>& object_labels) {
    if (cluster_labels.size() != object_labels.size()) {
        throw Error("cluster_to_object: label vectors differ in length");
    }
    std::map<int, std::map<int, std::int64_t>> votes;
    for (std::size_t i = 0; i < cluster_labels.size(); ++i) {
        if (cluster_labels[i] == kNoLabel) continue;
        ++votes[cluster_labels[i]][object_labels[i]];
    }
    std::map<int, int> out;
    for (const auto& [cluster, tally] : votes) {
        int best_obj = -1;
        std::int64_t best = -1;
        for (const auto& [obj, count] : tally) {
            if (count > best) {  // map order makes ties resolve to the lowest object id
                best = count;
                best_obj = obj;
            }
        }
        out[cluster] = best_obj;
    }
    return out;
}

RelationEval evaluate_relations(const SceneGraph& graph, const std::map<int, int>& cluster_object,
                                const std::vector<ObjectRelation>& true_relations,
                                const std::vector<ObjectRelation>& planted_false) {
    std::set<ObjectRelation> truth(true_relations.begin(), true_relations.end());
    std::set<ObjectRelation> planted(planted_false.begin(), planted_false.end());

    std::set<ObjectRelation> pre, post;
    for (const auto& e : graph.edges) {
        auto s = cluster_object.find(e.subject);
        auto o = cluster_object.find(e.object);
        if (s == cluster_object.end() || o == cluster_object.end()) continue;
        const ObjectRelation rel{s->second, e.predicate, o->second};
        pre.insert(rel);
        if (e.verdict == Verdict::kKept) post.insert(rel);
    }

    auto prf = [&](const std::set<ObjectRelation>& predicted, double& precision, double& recall) {
        std::size_t hit = 0;
        for (const auto& r : predicted) hit += truth.count(r);
        precision = predicted.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(predicted.size());
        recall = truth.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(truth.size());
    };

    RelationEval eval;
    prf(pre, eval.precision_pre, eval.recall_pre);
    prf(post, eval.precision_post, eval.recall_post);

    if (!planted.empty()) {
        std::size_t kept = 0;
        for (const auto& r : planted) kept += post.count(r);
        eval.planted_false_kept = static_cast<double>(kept) / static_cast<double>(planted.size());
    }
    return eval;
}

GroundingEval evaluate_grounding(const std::vector<std::vector<int>>& ranked, const std::vector<int>& answers) {
    if (ranked.size() != answers.size()) throw Error("evaluate_grounding: sizes differ");
    GroundingEval eval;
    if (ranked.empty()) return eval;
    auto hit_within = [&](std::size_t i, std::size_t k) {
        const auto& r = ranked[i];
        for (std::size_t t = 0; t < std::min(k, r.size()); ++t) {
            if (r[t] == answers[i]) return true;
        }
        return false;
    };
    std::size_t h1 = 0, h3 = 0, h5 = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        h1 += hit_within(i, 1);
        h3 += hit_within(i, 3);
        h5 += hit_within(i, 5);
    }
    const double n = static_cast<double>(ranked.size());
    eval.recall_at_1 = h1 / n;
    eval.recall_at_3 = h3 / n;
    eval.recall_at_5 = h5 / n;
    return eval;
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["segmentation"]["miou"] = report.segmentation.miou;
    j["segmentation"]["macc"] = report.segmentation.macc;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [cls, iou] : report.segmentation.per_class_iou) per[std::to_string(cls)] = iou;
    j["segmentation"]["per_class_iou"] = per;
    j["relations"]["precision_pre"] = report.relations.precision_pre;
    j["relations"]["recall_pre"] = report.relations.recall_pre;
    j["relations"]["precision_post"] = report.relations.precision_post;
    j["relations"]["recall_post"] = report.relations.recall_post;
    j["relations"]["planted_false_kept"] = report.relations.planted_false_kept;
    j["grounding"]["recall_at_1"] = report.grounding.recall_at_1;
    j["grounding"]["recall_at_3"] = report.grounding.recall_at_3;
    j["grounding"]["recall_at_5"] = report.grounding.recall_at_5;
    return j.dump(2) + "\n";
}

}  // namespace gsgraph
