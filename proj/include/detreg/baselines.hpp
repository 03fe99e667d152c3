#pragma once

#include <algorithm>
#include <vector>

#include "detreg/candidates.hpp"
#include "detreg/geometry.hpp"

namespace detreg {

struct NmsParams {
    double iou_within = 0.5;  // within-class suppression threshold
    double iou_across = 0.3;  // across-class suppression threshold
};

inline bool is_valid(const NmsParams& p) {
    return p.iou_within >= 0.0 && p.iou_within <= 1.0 && p.iou_across >= 0.0 &&
           p.iou_across <= 1.0;
}

/// Greedy score-ordered suppression: a point survives iff no already-kept
/// point (same class when class_scoped) overlaps it with IoU strictly above
/// the threshold. Survivors come back in processing order (descending
/// score, ties to the lower point id).
inline std::vector<CandidatePoint> greedy_nms(const std::vector<CandidatePoint>& points,
                                              const std::vector<BoundingBox>& boxes,
                                              double threshold, bool class_scoped) {
    std::vector<const CandidatePoint*> order;
    order.reserve(points.size());
    for (const auto& p : points) order.push_back(&p);
    std::sort(order.begin(), order.end(), [](const CandidatePoint* a, const CandidatePoint* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->point_id < b->point_id;
    });

    std::vector<CandidatePoint> kept;
    for (const CandidatePoint* p : order) {
        bool suppressed = false;
        for (const auto& k : kept) {
            if (class_scoped && k.class_id != p->class_id) continue;
            if (iou(boxes[static_cast<std::size_t>(k.box_id)],
                    boxes[static_cast<std::size_t>(p->box_id)]) > threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(*p);
    }
    return kept;
}

inline std::vector<CandidatePoint> ac_nms(const std::vector<CandidatePoint>& points,
                                          const std::vector<BoundingBox>& boxes,
                                          double threshold) {
    return greedy_nms(points, boxes, threshold, /*class_scoped=*/false);
}

/// Within-class pass at iou_within, then across-class pass at iou_across
/// on the survivors.
inline std::vector<CandidatePoint> wc_ac_nms(const std::vector<CandidatePoint>& points,
                                             const std::vector<BoundingBox>& boxes,
                                             const NmsParams& params) {
    const auto within = greedy_nms(points, boxes, params.iou_within, /*class_scoped=*/true);
    return ac_nms(within, boxes, params.iou_across);
}

}  // namespace detreg
