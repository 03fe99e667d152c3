#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <vector>

#include "detreg/geometry.hpp"
#include "detreg/taxonomy.hpp"

namespace detreg {

struct AmbiguousTargets : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct GroundTruthObject {
    BoundingBox box;
    int class_id = 0;
};

/// A final detection as the evaluator sees it.
struct PredictedDetection {
    BoundingBox box;
    int class_id = 0;
    double score = 0.0;
};

struct EvalConfig {
    double iou_threshold = 0.5;  // in (0,1]
    std::optional<std::vector<int>> parent_relabel_targets;
};

inline bool is_valid(const EvalConfig& c) {
    return c.iou_threshold > 0.0 && c.iou_threshold <= 1.0;
}

/// Per-false-positive diagnosis. The two flags are independent: a false
/// positive can be both (bad label and bad location) or neither (a pure
/// duplicate of an already-matched object).
struct FpDiagnosis {
    bool wrong_label = false;
    bool wrong_overlap = false;
};

struct MatchStats {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long fp_wrong_label = 0;
    long fp_wrong_overlap = 0;

    MatchStats& operator+=(const MatchStats& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        fp_wrong_label += o.fp_wrong_label;
        fp_wrong_overlap += o.fp_wrong_overlap;
        return *this;
    }
};

struct MatchResult {
    MatchStats stats;
    std::vector<FpDiagnosis> fp_diagnoses;  // in prediction processing order
};

struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double wrong_label_fraction = 0.0;
    double wrong_overlap_fraction = 0.0;
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

/// Harmonic mean of precision and recall; 0 when both are 0. Works the
/// same on fractions and on percentages.
inline double f1_score(double precision, double recall) {
    const double denom = precision + recall;
    if (denom <= 0.0) return 0.0;
    return 2.0 * precision * recall / denom;
}

/// Relabels each point to its nearest ancestor-or-self among the targets;
/// points with no target ancestor are dropped. Two targets on one ancestor
/// path make the mapping ambiguous and are rejected.
inline std::vector<PredictedDetection> relabel_to_parents(
    const std::vector<PredictedDetection>& points, const Taxonomy& taxonomy,
    const std::vector<int>& targets) {
    for (std::size_t i = 0; i < targets.size(); ++i)
        for (std::size_t j = i + 1; j < targets.size(); ++j)
            if (taxonomy.is_ancestor(targets[i], targets[j]) ||
                taxonomy.is_ancestor(targets[j], targets[i]))
                throw AmbiguousTargets("relabel targets " + std::to_string(targets[i]) + " and " +
                                       std::to_string(targets[j]) + " share an ancestor path");

    std::vector<PredictedDetection> out;
    for (const auto& p : points) {
        int node = p.class_id;
        int found = -1;
        while (true) {
            if (std::find(targets.begin(), targets.end(), node) != targets.end()) {
                found = node;
                break;
            }
            const auto& parent = taxonomy.node(node).parent;
            if (!parent) break;
            node = *parent;
        }
        if (found < 0) continue;
        PredictedDetection q = p;
        q.class_id = found;
        out.push_back(q);
    }
    return out;
}

/// Greedy score-ordered matching against ground truth. A prediction is a
/// true positive iff some still-unmatched object of the same class reaches
/// the IoU threshold (the best-IoU one is consumed). Every false positive
/// is diagnosed: wrong_label when it overlaps some object of a different
/// class at the threshold, wrong_overlap when no object of its own class
/// reaches the threshold. The sort key is independent of input order, so
/// permuting predictions cannot change the counts.
inline MatchResult match_detections(const std::vector<PredictedDetection>& predictions,
                                    const std::vector<GroundTruthObject>& ground_truth,
                                    const EvalConfig& cfg) {
    std::vector<const PredictedDetection*> order;
    order.reserve(predictions.size());
    for (const auto& p : predictions) order.push_back(&p);
    std::sort(order.begin(), order.end(),
              [](const PredictedDetection* a, const PredictedDetection* b) {
                  if (a->score != b->score) return a->score > b->score;
                  if (a->class_id != b->class_id) return a->class_id < b->class_id;
                  if (a->box.x_min != b->box.x_min) return a->box.x_min < b->box.x_min;
                  if (a->box.y_min != b->box.y_min) return a->box.y_min < b->box.y_min;
                  if (a->box.x_max != b->box.x_max) return a->box.x_max < b->box.x_max;
                  return a->box.y_max < b->box.y_max;
              });

    MatchResult result;
    std::vector<bool> gt_matched(ground_truth.size(), false);
    for (const PredictedDetection* p : order) {
        int best_gt = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < ground_truth.size(); ++g) {
            if (gt_matched[g] || ground_truth[g].class_id != p->class_id) continue;
            const double overlap = iou(p->box, ground_truth[g].box);
            if (overlap >= cfg.iou_threshold && overlap > best_iou) {
                best_iou = overlap;
                best_gt = static_cast<int>(g);
            }
        }
        if (best_gt >= 0) {
            gt_matched[static_cast<std::size_t>(best_gt)] = true;
            ++result.stats.tp;
            continue;
        }
        ++result.stats.fp;
        FpDiagnosis diag;
        bool own_class_reaches = false;
        for (const auto& gt : ground_truth) {
            const double overlap = iou(p->box, gt.box);
            if (overlap < cfg.iou_threshold) continue;
            if (gt.class_id != p->class_id) diag.wrong_label = true;
            if (gt.class_id == p->class_id) own_class_reaches = true;
        }
        diag.wrong_overlap = !own_class_reaches;
        if (diag.wrong_label) ++result.stats.fp_wrong_label;
        if (diag.wrong_overlap) ++result.stats.fp_wrong_overlap;
        result.fp_diagnoses.push_back(diag);
    }
    for (bool matched : gt_matched)
        if (!matched) ++result.stats.fn;
    return result;
}

inline EvalReport compute_report(const MatchStats& s) {
    EvalReport r;
    r.tp = s.tp;
    r.fp = s.fp;
    r.fn = s.fn;
    r.precision = (s.tp + s.fp) > 0 ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 0.0;
    r.recall = (s.tp + s.fn) > 0 ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 0.0;
    r.f1 = f1_score(r.precision, r.recall);
    r.wrong_label_fraction = s.fp > 0 ? static_cast<double>(s.fp_wrong_label) / static_cast<double>(s.fp) : 0.0;
    r.wrong_overlap_fraction = s.fp > 0 ? static_cast<double>(s.fp_wrong_overlap) / static_cast<double>(s.fp) : 0.0;
    return r;
}

}  // namespace detreg
