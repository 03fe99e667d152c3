#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "detreg/baselines.hpp"
#include "detreg/candidates.hpp"
#include "detreg/evaluation.hpp"
#include "detreg/inference.hpp"
#include "detreg/parallel.hpp"
#include "detreg/similarity.hpp"
#include "detreg/taxonomy.hpp"

namespace detreg {

struct UnknownParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class Method { Mapc, Sapc, SapcAcNms, WcAcNms, AcNms };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::Mapc: return "mapc";
        case Method::Sapc: return "sapc";
        case Method::SapcAcNms: return "sapc+acnms";
        case Method::WcAcNms: return "wcacnms";
        case Method::AcNms: return "acnms";
    }
    return "?";
}

inline Method method_from_name(const std::string& name) {
    if (name == "mapc") return Method::Mapc;
    if (name == "sapc") return Method::Sapc;
    if (name == "sapc+acnms") return Method::SapcAcNms;
    if (name == "wcacnms") return Method::WcAcNms;
    if (name == "acnms") return Method::AcNms;
    throw ConfigError("unknown method: " + name +
                      " (expected mapc, sapc, sapc+acnms, wcacnms or acnms)");
}

/// Everything a regularisation run needs; validated before any work starts.
struct RunConfig {
    SimilarityParams similarity;
    ObjectiveWeights weights;
    InferenceConfig inference;
    NmsParams nms;
    ExpansionLimits expansion;
    EvalConfig eval;
};

inline void validate(const RunConfig& c) {
    if (!is_valid(c.similarity))
        throw ConfigError("similarity params out of range (lambda in [0,1], theta_bg in [0,1))");
    if (!is_valid(c.weights)) throw ConfigError("objective weights must be non-negative and finite");
    if (!is_valid(c.inference))
        throw ConfigError("inference config out of range (damping in [0,1), max_iterations >= 1, "
                          "convergence_window >= 1)");
    if (!is_valid(c.nms)) throw ConfigError("nms thresholds must be in [0,1]");
    if (!is_valid(c.eval)) throw ConfigError("eval iou_threshold must be in (0,1]");
    if (c.expansion.top_k < 1) throw ConfigError("expansion top_k must be >= 1");
}

/// One hard-selection run of a named method over already-expanded
/// candidates. For the clustering methods the result carries assignment,
/// cluster structure and trace; the NMS baselines fill only `selected`.
inline RegularizedResult run_regularizer(Method method, const CandidateSet& cands,
                                         const Taxonomy& taxonomy, const RunConfig& cfg,
                                         unsigned threads = 1) {
    RegularizedResult r;
    switch (method) {
        case Method::Mapc: {
            const SimilarityModel m = build_similarity_model(cands, taxonomy, cfg.similarity, threads);
            r = mapc_cluster(cands, m, cfg.weights, cfg.inference, threads);
            break;
        }
        case Method::Sapc:
            r = sapc_cluster(cands, cfg.similarity, cfg.weights, cfg.inference, threads);
            break;
        case Method::SapcAcNms: {
            r = sapc_cluster(cands, cfg.similarity, cfg.weights, cfg.inference, threads);
            std::vector<CandidatePoint> survivors;
            for (const auto& s : r.selected)
                survivors.push_back({s.point_id, s.box_id, s.class_id, s.score});
            const auto kept = ac_nms(survivors, cands.boxes, cfg.nms.iou_across);
            r.selected.clear();
            for (const auto& p : kept) r.selected.push_back({p.point_id, p.box_id, p.class_id, p.score});
            std::sort(r.selected.begin(), r.selected.end(),
                      [](const SelectedDetection& a, const SelectedDetection& b) {
                          return a.point_id < b.point_id;
                      });
            // Demoted exemplars and their members move to background.
            for (std::size_t i = 0; i < r.assignment.size(); ++i) {
                const int e = r.assignment.exemplar_of[i];
                if (e == kBackground) continue;
                const bool alive = std::any_of(r.selected.begin(), r.selected.end(),
                                               [&](const SelectedDetection& s) { return s.point_id == e; });
                if (!alive) r.assignment.exemplar_of[i] = kBackground;
            }
            break;
        }
        case Method::WcAcNms: {
            const auto kept = wc_ac_nms(cands.points, cands.boxes, cfg.nms);
            for (const auto& p : kept) r.selected.push_back({p.point_id, p.box_id, p.class_id, p.score});
            std::sort(r.selected.begin(), r.selected.end(),
                      [](const SelectedDetection& a, const SelectedDetection& b) {
                          return a.point_id < b.point_id;
                      });
            r.converged = true;
            break;
        }
        case Method::AcNms: {
            const auto kept = ac_nms(cands.points, cands.boxes, cfg.nms.iou_across);
            for (const auto& p : kept) r.selected.push_back({p.point_id, p.box_id, p.class_id, p.score});
            std::sort(r.selected.begin(), r.selected.end(),
                      [](const SelectedDetection& a, const SelectedDetection& b) {
                          return a.point_id < b.point_id;
                      });
            r.converged = true;
            break;
        }
    }
    return r;
}

struct Scene {
    std::vector<Detection> detections;
    std::vector<GroundTruthObject> ground_truth;
};

/// Full pipeline for one scene: expand, regularise, optionally relabel to
/// parent categories, and return the survivors as evaluator inputs.
inline std::vector<PredictedDetection> run_pipeline(Method method, const Scene& scene,
                                                    const Taxonomy& taxonomy, const RunConfig& cfg,
                                                    unsigned threads = 1) {
    const CandidateSet cands =
        expand_detections(scene.detections, cfg.similarity.theta_bg, cfg.expansion);
    const RegularizedResult r = run_regularizer(method, cands, taxonomy, cfg, threads);
    std::vector<PredictedDetection> preds;
    preds.reserve(r.selected.size());
    for (const auto& s : r.selected)
        preds.push_back({cands.boxes[static_cast<std::size_t>(s.box_id)], s.class_id, s.score});
    if (cfg.eval.parent_relabel_targets)
        preds = relabel_to_parents(preds, taxonomy, *cfg.eval.parent_relabel_targets);
    return preds;
}

/// Pooled (micro-averaged) evaluation of a method over a scene list.
/// Scenes are independent, so they may be evaluated in parallel; the
/// reduction is a fold in scene order.
inline MatchStats evaluate_scenes(Method method, const std::vector<Scene>& scenes,
                                  const Taxonomy& taxonomy, const RunConfig& cfg,
                                  unsigned threads = 1) {
    std::vector<MatchStats> per_scene(scenes.size());
    parallel_for(scenes.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            const auto preds = run_pipeline(method, scenes[s], taxonomy, cfg, 1);
            per_scene[s] = match_detections(preds, scenes[s].ground_truth, cfg.eval).stats;
        }
    });
    MatchStats pooled;
    for (const auto& st : per_scene) pooled += st;
    return pooled;
}

/// Applies a named tunable to a run config. The knob names double as the
/// sweep and grid-search axes.
inline void apply_parameter(RunConfig& cfg, const std::string& name, double value) {
    if (name == "lambda") cfg.similarity.lambda = value;
    else if (name == "theta_bg") cfg.similarity.theta_bg = value;
    else if (name == "w_a") cfg.weights.w_a = value;
    else if (name == "w_b") cfg.weights.w_b = value;
    else if (name == "w_c") cfg.weights.w_c = value;
    else if (name == "w_d") cfg.weights.w_d = value;
    else if (name == "w_e") cfg.weights.w_e = value;
    else if (name == "w_f") cfg.weights.w_f = value;
    else if (name == "damping") cfg.inference.damping = value;
    else if (name == "iou_within") cfg.nms.iou_within = value;
    else if (name == "iou_across") cfg.nms.iou_across = value;
    else throw UnknownParameter("unknown parameter: " + name);
}

/// One evaluation per parameter value over the same scenes.
inline std::vector<std::pair<double, EvalReport>> sweep(Method method,
                                                        const std::string& parameter,
                                                        const std::vector<double>& values,
                                                        const std::vector<Scene>& scenes,
                                                        const Taxonomy& taxonomy,
                                                        const RunConfig& base,
                                                        unsigned threads = 1) {
    if (parameter != "iou_across" && parameter != "w_a") {
        // Validate eagerly so misspelled knobs fail before any work.
        RunConfig probe = base;
        apply_parameter(probe, parameter, 0.0);
        throw UnknownParameter("sweep supports iou_across and w_a, got: " + parameter);
    }
    std::vector<std::pair<double, EvalReport>> out;
    out.reserve(values.size());
    for (double v : values) {
        RunConfig cfg = base;
        apply_parameter(cfg, parameter, v);
        validate(cfg);
        out.emplace_back(v, compute_report(evaluate_scenes(method, scenes, taxonomy, cfg, threads)));
    }
    return out;
}

}  // namespace detreg
