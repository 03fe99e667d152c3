#pragma once

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "detreg/candidates.hpp"
#include "detreg/io.hpp"
#include "detreg/rng.hpp"
#include "detreg/taxonomy.hpp"

namespace fixtures {

inline std::string data_path(const std::string& rel) {
    return std::string(DETREG_DATA_DIR) + "/" + rel;
}

inline detreg::Taxonomy bundled_taxonomy() {
    return detreg::io::read_taxonomy(data_path("fixture_taxonomy.json"));
}

// root(0) -> q(1) -> {leaf1(2), leaf2(3)}, root -> leaf3(4); freqs 1,1,2.
// p(q) = 0.5, p(leaf1) = p(leaf2) = 0.25, p(leaf3) = 0.5.
inline detreg::Taxonomy star_with_parent() {
    using detreg::ClassNode;
    return detreg::Taxonomy::from_nodes({
        ClassNode{0, "root", std::nullopt, 0.0},
        ClassNode{1, "q", 0, 0.0},
        ClassNode{2, "leaf1", 1, 1.0},
        ClassNode{3, "leaf2", 1, 1.0},
        ClassNode{4, "leaf3", 0, 2.0},
    });
}

// root(0) -> {leaf1(1), leaf2(2), leaf3(3)} with freqs 1, 1, 2.
inline detreg::Taxonomy flat_star() {
    using detreg::ClassNode;
    return detreg::Taxonomy::from_nodes({
        ClassNode{0, "root", std::nullopt, 0.0},
        ClassNode{1, "leaf1", 0, 1.0},
        ClassNode{2, "leaf2", 0, 1.0},
        ClassNode{3, "leaf3", 0, 2.0},
    });
}

inline detreg::CandidateSet make_candidates(const std::vector<detreg::BoundingBox>& boxes,
                                            const std::vector<std::tuple<int, int, double>>& pts) {
    detreg::CandidateSet set;
    set.boxes = boxes;
    set.source_detections = boxes.size();
    int id = 0;
    for (const auto& [box_id, class_id, score] : pts)
        set.points.push_back({id++, box_id, class_id, score});
    return set;
}

/// Random small instances over the bundled taxonomy for oracle / property
/// suites: a few boxes scattered with moderate overlap, leaf classes, and
/// scores above the background threshold.
struct RandomInstance {
    detreg::CandidateSet cands;
    double theta_bg = 0.3;
};

inline RandomInstance random_instance(detreg::Rng& rng, const detreg::Taxonomy& taxonomy,
                                      int n_points) {
    static const std::vector<std::string> leaf_names = {
        "beagle", "dachshund", "golden_retriever", "dalmatian", "poodle",
        "siamese_cat", "persian_cat", "tabby_cat", "sparrow", "eagle",
        "armchair", "rocking_chair", "office_chair", "settee", "couch",
        "suv", "sedan", "handbag", "backpack", "canoe"};
    RandomInstance inst;
    const int n_boxes = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_points)));
    for (int b = 0; b < n_boxes; ++b) {
        const double x = rng.next_in_range(0.0, 80.0);
        const double y = rng.next_in_range(0.0, 80.0);
        const double w = rng.next_in_range(10.0, 40.0);
        const double h = rng.next_in_range(10.0, 40.0);
        inst.cands.boxes.push_back({x, y, x + w, y + h});
    }
    inst.cands.source_detections = inst.cands.boxes.size();
    for (int i = 0; i < n_points; ++i) {
        detreg::CandidatePoint p;
        p.point_id = i;
        p.box_id = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_boxes)));
        // One box must not carry the same class twice (detections are maps):
        // step through the leaf pool from a random offset until free.
        std::size_t k = rng.next_below(leaf_names.size());
        for (std::size_t tries = 0; tries < leaf_names.size(); ++tries, k = (k + 1) % leaf_names.size()) {
            const int cls = taxonomy.id_of(leaf_names[k]);
            const bool taken = std::any_of(
                inst.cands.points.begin(), inst.cands.points.end(),
                [&](const detreg::CandidatePoint& q) {
                    return q.box_id == p.box_id && q.class_id == cls;
                });
            if (!taken) {
                p.class_id = cls;
                break;
            }
        }
        p.score = rng.next_in_range(inst.theta_bg + 0.05, 0.99);
        inst.cands.points.push_back(p);
    }
    return inst;
}

}  // namespace fixtures
