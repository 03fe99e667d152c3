#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "detreg/regularizers.hpp"
#include "detreg/rng.hpp"
#include "detreg/taxonomy.hpp"

namespace detreg {

struct SpecInvalid : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct GridTooLarge : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Detector noise model for synthetic scenes. Confusion mass is placed on
/// taxonomy siblings: fine-grained look-alikes are where multi-class
/// selection is hard, so proposals carry a competitive sibling label with
/// probability sibling_confusion. Clutter proposals are scattered boxes
/// that overlap nothing.
struct ScoreModel {
    double true_score_lo = 0.55;
    double true_score_hi = 0.95;
    double sibling_confusion = 0.4;
    double sibling_score_lo = 0.45;
    double sibling_score_hi = 0.9;
    double clutter_rate = 2.0;  // expected clutter proposals per scene
};

struct SceneSpec {
    int n_objects_min = 2;
    int n_objects_max = 4;
    double image_width = 640.0;
    double image_height = 480.0;
    std::vector<int> leaf_class_pool;  // sampled uniformly
    int proposals_min = 3;
    int proposals_max = 5;
    double center_jitter = 0.15;  // fraction of box size
    double scale_jitter = 0.15;
    ScoreModel score_model;
    std::uint64_t rng_seed = 0;
};

inline void validate(const SceneSpec& s) {
    auto fail = [](const std::string& msg) { throw SpecInvalid("scene spec: " + msg); };
    if (s.n_objects_min < 0 || s.n_objects_max < s.n_objects_min) fail("bad n_objects range");
    if (!(s.image_width > 0.0) || !(s.image_height > 0.0)) fail("bad image size");
    if (s.leaf_class_pool.empty()) fail("empty leaf_class_pool");
    if (s.proposals_min < 1 || s.proposals_max < s.proposals_min) fail("bad proposals range");
    if (s.center_jitter < 0.0 || s.scale_jitter < 0.0 || s.scale_jitter >= 1.0)
        fail("bad jitter fractions");
    const auto& m = s.score_model;
    for (double v : {m.true_score_lo, m.true_score_hi, m.sibling_score_lo, m.sibling_score_hi,
                     m.sibling_confusion})
        if (v < 0.0 || v > 1.0) fail("score model values must be in [0,1]");
    if (m.true_score_hi < m.true_score_lo || m.sibling_score_hi < m.sibling_score_lo)
        fail("bad score ranges");
    if (m.clutter_rate < 0.0) fail("negative clutter rate");
}

namespace detail {

inline BoundingBox clamp_to_image(BoundingBox b, double w, double h) {
    b.x_min = std::max(0.0, std::min(b.x_min, w - 2.0));
    b.y_min = std::max(0.0, std::min(b.y_min, h - 2.0));
    b.x_max = std::max(b.x_min + 1.0, std::min(b.x_max, w));
    b.y_max = std::max(b.y_min + 1.0, std::min(b.y_max, h));
    return b;
}

}  // namespace detail

/// Deterministic scene synthesis: plants ground-truth objects with leaf
/// classes, emits jittered proposals per object (true label always scored;
/// a sibling label competes with probability sibling_confusion), then adds
/// scattered clutter. Fully determined by spec.rng_seed.
inline Scene generate_scene(const SceneSpec& spec, const Taxonomy& taxonomy) {
    validate(spec);
    for (int cls : spec.leaf_class_pool) taxonomy.node(cls);  // id check

    Rng rng(spec.rng_seed);
    Scene scene;
    const double min_dim = std::min(spec.image_width, spec.image_height);

    const int n_objects =
        static_cast<int>(rng.next_in_range(static_cast<std::int64_t>(spec.n_objects_min),
                                           static_cast<std::int64_t>(spec.n_objects_max)));
    for (int obj = 0; obj < n_objects; ++obj) {
        const int cls = spec.leaf_class_pool[static_cast<std::size_t>(
            rng.next_below(spec.leaf_class_pool.size()))];
        const double side_w = rng.next_in_range(0.12, 0.35) * min_dim;
        const double side_h = rng.next_in_range(0.12, 0.35) * min_dim;
        const double cx = rng.next_in_range(side_w / 2.0, spec.image_width - side_w / 2.0);
        const double cy = rng.next_in_range(side_h / 2.0, spec.image_height - side_h / 2.0);
        const BoundingBox gt_box = detail::clamp_to_image(
            {cx - side_w / 2.0, cy - side_h / 2.0, cx + side_w / 2.0, cy + side_h / 2.0},
            spec.image_width, spec.image_height);
        scene.ground_truth.push_back({gt_box, cls});

        const int proposals =
            static_cast<int>(rng.next_in_range(static_cast<std::int64_t>(spec.proposals_min),
                                               static_cast<std::int64_t>(spec.proposals_max)));
        const auto sibs = taxonomy.siblings(cls);
        for (int p = 0; p < proposals; ++p) {
            const double dx = rng.next_in_range(-spec.center_jitter, spec.center_jitter) * side_w;
            const double dy = rng.next_in_range(-spec.center_jitter, spec.center_jitter) * side_h;
            const double sw = side_w * (1.0 + rng.next_in_range(-spec.scale_jitter, spec.scale_jitter));
            const double sh = side_h * (1.0 + rng.next_in_range(-spec.scale_jitter, spec.scale_jitter));
            Detection det;
            det.box = detail::clamp_to_image({cx + dx - sw / 2.0, cy + dy - sh / 2.0,
                                              cx + dx + sw / 2.0, cy + dy + sh / 2.0},
                                             spec.image_width, spec.image_height);
            const double true_score =
                rng.next_in_range(spec.score_model.true_score_lo, spec.score_model.true_score_hi);
            det.scores[cls] = true_score;
            const bool confuse = rng.next_bernoulli(spec.score_model.sibling_confusion);
            if (confuse && !sibs.empty()) {
                const int sib = sibs[static_cast<std::size_t>(rng.next_below(sibs.size()))];
                det.scores[sib] = rng.next_in_range(spec.score_model.sibling_score_lo,
                                                    spec.score_model.sibling_score_hi);
            }
            scene.detections.push_back(std::move(det));
        }
    }

    int n_clutter = static_cast<int>(std::floor(spec.score_model.clutter_rate));
    if (rng.next_bernoulli(spec.score_model.clutter_rate - std::floor(spec.score_model.clutter_rate)))
        ++n_clutter;
    for (int c = 0; c < n_clutter; ++c) {
        const int cls = spec.leaf_class_pool[static_cast<std::size_t>(
            rng.next_below(spec.leaf_class_pool.size()))];
        const double side_w = rng.next_in_range(0.06, 0.18) * min_dim;
        const double side_h = rng.next_in_range(0.06, 0.18) * min_dim;
        const double cx = rng.next_in_range(side_w / 2.0, spec.image_width - side_w / 2.0);
        const double cy = rng.next_in_range(side_h / 2.0, spec.image_height - side_h / 2.0);
        Detection det;
        det.box = detail::clamp_to_image({cx - side_w / 2.0, cy - side_h / 2.0,
                                          cx + side_w / 2.0, cy + side_h / 2.0},
                                         spec.image_width, spec.image_height);
        det.scores[cls] = rng.next_in_range(spec.score_model.sibling_score_lo,
                                            spec.score_model.sibling_score_hi);
        scene.detections.push_back(std::move(det));
    }
    return scene;
}

/// Convenience: a deterministic suite of scenes with seeds base, base+1, ...
inline std::vector<Scene> generate_scene_suite(SceneSpec spec, std::uint64_t base_seed,
                                               std::size_t count, const Taxonomy& taxonomy) {
    std::vector<Scene> scenes;
    scenes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        spec.rng_seed = base_seed + i;
        scenes.push_back(generate_scene(spec, taxonomy));
    }
    return scenes;
}

struct ParamGrid {
    std::map<std::string, std::vector<double>> axes;
    std::size_t max_configurations = 10000;
};

struct TuneObjective {
    enum class Kind { F1, PrecisionAtRecallFloor } kind = Kind::F1;
    double recall_floor = 0.0;
};

struct GridSearchRow {
    std::map<std::string, double> params;
    EvalReport report;
    double objective = 0.0;
};

struct GridSearchResult {
    std::map<std::string, double> best_params;
    double best_score = 0.0;
    std::vector<GridSearchRow> table;
};

/// Exhaustive grid search over the axes (ascending parameter-name order,
/// values in the given order), evaluating each configuration on all
/// training scenes with pooled metrics. Ties go to the lexicographically
/// smaller parameter vector, which is the earlier row by construction.
inline GridSearchResult grid_search(const ParamGrid& grid, const std::vector<Scene>& scenes,
                                    Method method, const TuneObjective& objective,
                                    const Taxonomy& taxonomy, const RunConfig& base,
                                    unsigned threads = 1) {
    if (grid.axes.empty()) throw GridTooLarge("grid has no axes");
    std::size_t total = 1;
    for (const auto& [name, values] : grid.axes) {
        if (values.empty()) throw GridTooLarge("grid axis " + name + " has no values");
        if (values.size() > grid.max_configurations / total)
            throw GridTooLarge("grid exceeds the configuration cap of " +
                               std::to_string(grid.max_configurations));
        total *= values.size();
    }

    std::vector<std::string> names;
    for (const auto& [name, values] : grid.axes) names.push_back(name);

    GridSearchResult result;
    result.table.resize(total);

    parallel_for(total, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t flat = begin; flat < end; ++flat) {
            GridSearchRow row;
            RunConfig cfg = base;
            std::size_t rem = flat;
            // Last axis varies fastest.
            for (std::size_t a = names.size(); a-- > 0;) {
                const auto& values = grid.axes.at(names[a]);
                const double v = values[rem % values.size()];
                rem /= values.size();
                row.params[names[a]] = v;
                apply_parameter(cfg, names[a], v);
            }
            validate(cfg);
            const EvalReport report = compute_report(evaluate_scenes(method, scenes, taxonomy, cfg, 1));
            row.report = report;
            switch (objective.kind) {
                case TuneObjective::Kind::F1:
                    row.objective = report.f1;
                    break;
                case TuneObjective::Kind::PrecisionAtRecallFloor:
                    row.objective = report.recall >= objective.recall_floor ? report.precision : -1.0;
                    break;
            }
            result.table[flat] = std::move(row);
        }
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < result.table.size(); ++i)
        if (result.table[i].objective > result.table[best].objective) best = i;
    result.best_params = result.table[best].params;
    result.best_score = result.table[best].objective;
    return result;
}

}  // namespace detreg
