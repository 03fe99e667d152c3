#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <vector>

#include "detreg/geometry.hpp"

namespace detreg {

/// One detector output: a box plus per-class confidence scores.
struct Detection {
    BoundingBox box;
    std::map<int, double> scores;  // class id -> score in [0,1]
};

/// A combined box-class data point, the unit clustering reasons over.
/// One box can spawn several points, one per surviving class label.
struct CandidatePoint {
    int point_id = 0;  // dense, 0-based
    int box_id = 0;
    int class_id = 0;
    double score = 0.0;
};

struct CandidateSet {
    std::vector<CandidatePoint> points;
    std::vector<BoundingBox> boxes;       // indexed by box_id; one per input detection
    std::size_t source_detections = 0;    // count before filtering

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

struct ExpansionLimits {
    int top_k = 5;    // labels kept per box
    int top_n = 100;  // global cap on points, applied after top_k
};

/// Expands detections into candidate points: per box, the top_k classes
/// scoring strictly above theta_bg survive; then the global top_n cap is
/// applied over all points. Point ids are dense in (box order, descending
/// score, ascending class id) order. An empty result means nothing
/// survived filtering; callers treat that as an empty outcome, not a
/// failure.
inline CandidateSet expand_detections(const std::vector<Detection>& dets,
                                      double theta_bg,
                                      const ExpansionLimits& limits = {}) {
    CandidateSet out;
    out.source_detections = dets.size();
    out.boxes.reserve(dets.size());

    for (std::size_t d = 0; d < dets.size(); ++d) {
        out.boxes.push_back(dets[d].box);
        std::vector<std::pair<int, double>> ranked;
        ranked.reserve(dets[d].scores.size());
        for (const auto& [cls, score] : dets[d].scores)
            if (score > theta_bg) ranked.emplace_back(cls, score);
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (static_cast<int>(ranked.size()) > limits.top_k)
            ranked.resize(static_cast<std::size_t>(limits.top_k));
        for (const auto& [cls, score] : ranked) {
            CandidatePoint p;
            p.box_id = static_cast<int>(d);
            p.class_id = cls;
            p.score = score;
            out.points.push_back(p);
        }
    }

    if (limits.top_n > 0 && static_cast<int>(out.points.size()) > limits.top_n) {
        std::vector<std::size_t> idx(out.points.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (out.points[a].score != out.points[b].score)
                return out.points[a].score > out.points[b].score;
            return a < b;
        });
        idx.resize(static_cast<std::size_t>(limits.top_n));
        std::sort(idx.begin(), idx.end());
        std::vector<CandidatePoint> kept;
        kept.reserve(idx.size());
        for (std::size_t i : idx) kept.push_back(out.points[i]);
        out.points = std::move(kept);
    }

    for (std::size_t i = 0; i < out.points.size(); ++i)
        out.points[i].point_id = static_cast<int>(i);
    return out;
}

}  // namespace detreg
