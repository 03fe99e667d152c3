#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "detreg/candidates.hpp"
#include "detreg/geometry.hpp"
#include "detreg/parallel.hpp"
#include "detreg/taxonomy.hpp"

namespace detreg {

struct ScoreBelowThreshold : std::logic_error {
    using std::logic_error::logic_error;
};

struct SimilarityParams {
    double lambda = 0.5;    // spatial vs semantic tradeoff, in [0,1]
    double theta_bg = 0.3;  // background threshold, in [0,1)
};

inline bool is_valid(const SimilarityParams& p) {
    return p.lambda >= 0.0 && p.lambda <= 1.0 && p.theta_bg >= 0.0 && p.theta_bg < 1.0;
}

/// s(i,j) = lambda * IoU(i,j) + (1-lambda) * lin(class_i, class_j).
inline double pair_similarity(const CandidatePoint& a, const CandidatePoint& b,
                              const std::vector<BoundingBox>& boxes,
                              const Taxonomy& taxonomy,
                              const SimilarityParams& params) {
    const double spatial = iou(boxes[static_cast<std::size_t>(a.box_id)],
                               boxes[static_cast<std::size_t>(b.box_id)]);
    const double semantic = taxonomy.lin_similarity(a.class_id, b.class_id);
    return params.lambda * spatial + (1.0 - params.lambda) * semantic;
}

/// s(i,i) = -1 / (score - theta_bg): strictly negative, increasing in score.
/// Requires score > theta_bg; a violation means upstream filtering is broken.
inline double self_similarity(double score, double theta_bg) {
    if (!(score > theta_bg))
        throw ScoreBelowThreshold("self_similarity: score " + std::to_string(score) +
                                  " not above threshold " + std::to_string(theta_bg));
    return -1.0 / (score - theta_bg);
}

/// Dense pairwise model over a candidate set: s(i,j), s(i,i), and the
/// repellence r(i,j) = -(s(i,j)+1) between would-be co-exemplars. Carries
/// the per-point box ids so constraint checks need no side lookup.
/// Immutable once built; construction may be parallel over rows without
/// changing any entry.
class SimilarityModel {
public:
    SimilarityModel() = default;

    static SimilarityModel build(const CandidateSet& cands, const Taxonomy& taxonomy,
                                 const SimilarityParams& params, unsigned threads = 1) {
        SimilarityModel m;
        const std::size_t n = cands.size();
        m.n_ = n;
        m.pair_.assign(n * n, 0.0);
        m.self_.resize(n);
        m.repel_.assign(n * n, 0.0);
        m.box_ids_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            m.self_[i] = self_similarity(cands.points[i].score, params.theta_bg);
            m.box_ids_[i] = cands.points[i].box_id;
        }
        parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double s = pair_similarity(cands.points[i], cands.points[j],
                                                     cands.boxes, taxonomy, params);
                    m.pair_[i * n + j] = s;
                    m.pair_[j * n + i] = s;
                    m.repel_[i * n + j] = -(s + 1.0);
                    m.repel_[j * n + i] = -(s + 1.0);
                }
            }
        });
        return m;
    }

    /// IoU-only model over a point subset: the single-class restriction.
    static SimilarityModel build_iou_only(const CandidateSet& cands,
                                          const std::vector<std::size_t>& subset,
                                          double theta_bg, unsigned threads = 1) {
        SimilarityModel m;
        const std::size_t n = subset.size();
        m.n_ = n;
        m.pair_.assign(n * n, 0.0);
        m.self_.resize(n);
        m.repel_.assign(n * n, 0.0);
        m.box_ids_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& p = cands.points[subset[i]];
            m.self_[i] = self_similarity(p.score, theta_bg);
            m.box_ids_[i] = p.box_id;
        }
        parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const auto& bi = cands.boxes[static_cast<std::size_t>(m.box_ids_[i])];
                for (std::size_t j = i + 1; j < n; ++j) {
                    const auto& bj = cands.boxes[static_cast<std::size_t>(m.box_ids_[j])];
                    const double s = iou(bi, bj);
                    m.pair_[i * n + j] = s;
                    m.pair_[j * n + i] = s;
                    m.repel_[i * n + j] = -(s + 1.0);
                    m.repel_[j * n + i] = -(s + 1.0);
                }
            }
        });
        return m;
    }

    std::size_t size() const { return n_; }
    double pair(std::size_t i, std::size_t j) const { return pair_[i * n_ + j]; }
    double self(std::size_t i) const { return self_[i]; }
    double repellence(std::size_t i, std::size_t j) const { return repel_[i * n_ + j]; }
    const std::vector<int>& box_ids() const { return box_ids_; }

private:
    std::size_t n_ = 0;
    std::vector<double> pair_;
    std::vector<double> self_;
    std::vector<double> repel_;
    std::vector<int> box_ids_;
};

inline SimilarityModel build_similarity_model(const CandidateSet& cands,
                                              const Taxonomy& taxonomy,
                                              const SimilarityParams& params,
                                              unsigned threads = 1) {
    return SimilarityModel::build(cands, taxonomy, params, threads);
}

}  // namespace detreg
