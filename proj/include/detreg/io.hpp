#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "detreg/evaluation.hpp"
#include "detreg/inference.hpp"
#include "detreg/oracle.hpp"
#include "detreg/regularizers.hpp"
#include "detreg/synthesis.hpp"
#include "detreg/taxonomy.hpp"

namespace detreg {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

namespace detail {

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline const json& require(const json& j, const char* key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(ctx + ": missing field '" + key + "'");
    return *it;
}

inline double require_number(const json& j, const char* key, const std::string& ctx) {
    const json& v = require(j, key, ctx);
    if (!v.is_number()) throw ParseError(ctx + ": field '" + key + "' must be a number");
    return v.get<double>();
}

inline void check_version(const json& j, const std::string& ctx) {
    if (j.contains("format_version") && j["format_version"].get<int>() != kFormatVersion)
        throw ParseError(ctx + ": unsupported format_version");
}

inline BoundingBox parse_box(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 4)
        throw ParseError(ctx + ": box must be [x_min, y_min, x_max, y_max]");
    BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    if (!is_valid(b))
        throw ParseError(ctx + ": degenerate or non-finite box [" + std::to_string(b.x_min) + ", " +
                         std::to_string(b.y_min) + ", " + std::to_string(b.x_max) + ", " +
                         std::to_string(b.y_max) + "]");
    return b;
}

inline json box_to_json(const BoundingBox& b) {
    return json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << content;
}

inline std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace detail

// ---- taxonomy ----

inline Taxonomy read_taxonomy(const std::string& path) {
    const json doc = detail::load_json_file(path);
    detail::check_version(doc, path);
    const json& nodes = detail::require(doc, "nodes", path);
    if (!nodes.is_array() || nodes.empty())
        throw ParseError(path + ": 'nodes' must be a non-empty array");
    std::vector<ClassNode> out;
    out.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string ctx = path + ": nodes[" + std::to_string(i) + "]";
        const json& n = nodes[i];
        ClassNode c;
        c.id = static_cast<int>(detail::require_number(n, "id", ctx));
        c.name = detail::require(n, "name", ctx).get<std::string>();
        if (n.contains("parent_id") && !n["parent_id"].is_null())
            c.parent = n["parent_id"].get<int>();
        c.frequency = detail::require_number(n, "frequency", ctx);
        out.push_back(std::move(c));
    }
    try {
        return Taxonomy::from_nodes(std::move(out));
    } catch (const MalformedTaxonomy& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_taxonomy(const std::string& path, const Taxonomy& t) {
    json nodes = json::array();
    for (std::size_t i = 0; i < t.size(); ++i) {
        const ClassNode& n = t.node(static_cast<int>(i));
        json jn{{"id", n.id}, {"name", n.name}, {"frequency", n.frequency}};
        if (n.parent) jn["parent_id"] = *n.parent;
        nodes.push_back(std::move(jn));
    }
    const json doc{{"format_version", kFormatVersion}, {"nodes", std::move(nodes)}};
    detail::write_text_file(path, doc.dump(2) + "\n");
}

// ---- detections / ground truth ----

struct DetectionsDoc {
    double image_width = 0.0;
    double image_height = 0.0;
    std::vector<Detection> detections;
};

inline DetectionsDoc parse_detections_json(const json& doc, const Taxonomy& taxonomy,
                                           const std::string& ctx) {
    detail::check_version(doc, ctx);
    DetectionsDoc out;
    const json& image = detail::require(doc, "image", ctx);
    out.image_width = detail::require_number(image, "width", ctx + ": image");
    out.image_height = detail::require_number(image, "height", ctx + ": image");
    const json& dets = detail::require(doc, "detections", ctx);
    if (!dets.is_array()) throw ParseError(ctx + ": 'detections' must be an array");
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const std::string dctx = ctx + ": detections[" + std::to_string(i) + "]";
        Detection d;
        d.box = detail::parse_box(detail::require(dets[i], "box", dctx), dctx);
        const json& scores = detail::require(dets[i], "scores", dctx);
        if (!scores.is_object() || scores.empty())
            throw ParseError(dctx + ": 'scores' must map at least one class name to a score");
        for (const auto& [name, value] : scores.items()) {
            if (!taxonomy.has_name(name))
                throw ParseError(dctx + ": unknown class name '" + name + "'");
            const double s = value.get<double>();
            if (!(s >= 0.0 && s <= 1.0))
                throw ParseError(dctx + ": score for '" + name + "' must be in [0,1]");
            d.scores[taxonomy.id_of(name)] = s;
        }
        out.detections.push_back(std::move(d));
    }
    return out;
}

inline DetectionsDoc read_detections(const std::string& path, const Taxonomy& taxonomy) {
    return parse_detections_json(detail::load_json_file(path), taxonomy, path);
}

inline json detections_to_json(const DetectionsDoc& doc, const Taxonomy& taxonomy) {
    json dets = json::array();
    for (const auto& d : doc.detections) {
        json scores = json::object();
        for (const auto& [cls, score] : d.scores) scores[taxonomy.node(cls).name] = score;
        dets.push_back(json{{"box", detail::box_to_json(d.box)}, {"scores", std::move(scores)}});
    }
    return json{{"format_version", kFormatVersion},
                {"image", {{"width", doc.image_width}, {"height", doc.image_height}}},
                {"detections", std::move(dets)}};
}

inline void write_detections(const std::string& path, const DetectionsDoc& doc,
                             const Taxonomy& taxonomy) {
    detail::write_text_file(path, detections_to_json(doc, taxonomy).dump(2) + "\n");
}

inline std::vector<GroundTruthObject> parse_ground_truth_json(const json& doc,
                                                              const Taxonomy& taxonomy,
                                                              const std::string& ctx) {
    detail::check_version(doc, ctx);
    const json& objects = detail::require(doc, "objects", ctx);
    if (!objects.is_array()) throw ParseError(ctx + ": 'objects' must be an array");
    std::vector<GroundTruthObject> out;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const std::string octx = ctx + ": objects[" + std::to_string(i) + "]";
        GroundTruthObject g;
        g.box = detail::parse_box(detail::require(objects[i], "box", octx), octx);
        const std::string name = detail::require(objects[i], "class_name", octx).get<std::string>();
        if (!taxonomy.has_name(name)) throw ParseError(octx + ": unknown class name '" + name + "'");
        g.class_id = taxonomy.id_of(name);
        out.push_back(g);
    }
    return out;
}

inline std::vector<GroundTruthObject> read_ground_truth(const std::string& path,
                                                        const Taxonomy& taxonomy) {
    return parse_ground_truth_json(detail::load_json_file(path), taxonomy, path);
}

inline json ground_truth_to_json(const std::vector<GroundTruthObject>& objects,
                                 const Taxonomy& taxonomy) {
    json arr = json::array();
    for (const auto& g : objects)
        arr.push_back(json{{"box", detail::box_to_json(g.box)},
                           {"class_name", taxonomy.node(g.class_id).name}});
    return json{{"format_version", kFormatVersion}, {"objects", std::move(arr)}};
}

inline void write_ground_truth(const std::string& path,
                               const std::vector<GroundTruthObject>& objects,
                               const Taxonomy& taxonomy) {
    detail::write_text_file(path, ground_truth_to_json(objects, taxonomy).dump(2) + "\n");
}

// ---- scene sets ----

struct SceneSet {
    double image_width = 0.0;
    double image_height = 0.0;
    std::vector<Scene> scenes;
};

inline SceneSet read_scene_set(const std::string& path, const Taxonomy& taxonomy) {
    const json doc = detail::load_json_file(path);
    detail::check_version(doc, path);
    const json& scenes = detail::require(doc, "scenes", path);
    if (!scenes.is_array()) throw ParseError(path + ": 'scenes' must be an array");
    SceneSet out;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const std::string ctx = path + ": scenes[" + std::to_string(i) + "]";
        Scene s;
        DetectionsDoc dets =
            parse_detections_json(detail::require(scenes[i], "detections", ctx), taxonomy, ctx);
        out.image_width = dets.image_width;
        out.image_height = dets.image_height;
        s.detections = std::move(dets.detections);
        s.ground_truth =
            parse_ground_truth_json(detail::require(scenes[i], "ground_truth", ctx), taxonomy, ctx);
        out.scenes.push_back(std::move(s));
    }
    return out;
}

inline void write_scene_set(const std::string& path, const SceneSet& set,
                            const Taxonomy& taxonomy) {
    json scenes = json::array();
    for (const auto& s : set.scenes) {
        DetectionsDoc doc{set.image_width, set.image_height, s.detections};
        scenes.push_back(json{{"detections", detections_to_json(doc, taxonomy)},
                              {"ground_truth", ground_truth_to_json(s.ground_truth, taxonomy)}});
    }
    const json doc{{"format_version", kFormatVersion}, {"scenes", std::move(scenes)}};
    detail::write_text_file(path, doc.dump(2) + "\n");
}

// ---- run config ----

inline RunConfig parse_run_config(const json& doc, const Taxonomy* taxonomy,
                                  const std::string& ctx) {
    detail::check_version(doc, ctx);
    RunConfig cfg;
    if (doc.contains("similarity")) {
        const json& s = doc["similarity"];
        if (s.contains("lambda")) cfg.similarity.lambda = s["lambda"].get<double>();
        if (s.contains("theta_bg")) cfg.similarity.theta_bg = s["theta_bg"].get<double>();
    }
    if (doc.contains("weights")) {
        const json& w = doc["weights"];
        if (w.contains("w_a")) cfg.weights.w_a = w["w_a"].get<double>();
        if (w.contains("w_b")) cfg.weights.w_b = w["w_b"].get<double>();
        if (w.contains("w_c")) cfg.weights.w_c = w["w_c"].get<double>();
        if (w.contains("w_d")) cfg.weights.w_d = w["w_d"].get<double>();
        if (w.contains("w_e")) cfg.weights.w_e = w["w_e"].get<double>();
        if (w.contains("w_f")) cfg.weights.w_f = w["w_f"].get<double>();
    }
    if (doc.contains("inference")) {
        const json& i = doc["inference"];
        if (i.contains("damping")) cfg.inference.damping = i["damping"].get<double>();
        if (i.contains("max_iterations")) cfg.inference.max_iterations = i["max_iterations"].get<int>();
        if (i.contains("convergence_window"))
            cfg.inference.convergence_window = i["convergence_window"].get<int>();
    }
    if (doc.contains("expansion")) {
        const json& e = doc["expansion"];
        if (e.contains("top_k")) cfg.expansion.top_k = e["top_k"].get<int>();
        if (e.contains("top_n")) cfg.expansion.top_n = e["top_n"].get<int>();
    }
    if (doc.contains("nms")) {
        const json& n = doc["nms"];
        if (n.contains("iou_within")) cfg.nms.iou_within = n["iou_within"].get<double>();
        if (n.contains("iou_across")) cfg.nms.iou_across = n["iou_across"].get<double>();
    }
    if (doc.contains("eval")) {
        const json& e = doc["eval"];
        if (e.contains("iou_threshold")) cfg.eval.iou_threshold = e["iou_threshold"].get<double>();
        if (e.contains("parent_relabel_targets")) {
            if (!taxonomy)
                throw ParseError(ctx + ": parent_relabel_targets requires a taxonomy");
            std::vector<int> targets;
            for (const auto& name : e["parent_relabel_targets"]) {
                const std::string n = name.get<std::string>();
                if (!taxonomy->has_name(n))
                    throw ParseError(ctx + ": unknown relabel target '" + n + "'");
                targets.push_back(taxonomy->id_of(n));
            }
            cfg.eval.parent_relabel_targets = std::move(targets);
        }
    }
    return cfg;
}

inline RunConfig read_run_config(const std::string& path, const Taxonomy* taxonomy = nullptr) {
    return parse_run_config(detail::load_json_file(path), taxonomy, path);
}

// ---- scene spec / parameter grid ----

inline SceneSpec read_scene_spec(const std::string& path, const Taxonomy& taxonomy) {
    const json doc = detail::load_json_file(path);
    detail::check_version(doc, path);
    SceneSpec spec;
    auto range_int = [&](const char* key, int& lo, int& hi) {
        if (!doc.contains(key)) return;
        const json& r = doc[key];
        if (!r.is_array() || r.size() != 2) throw ParseError(path + ": '" + key + "' must be [lo, hi]");
        lo = r[0].get<int>();
        hi = r[1].get<int>();
    };
    range_int("n_objects", spec.n_objects_min, spec.n_objects_max);
    range_int("proposals_per_object", spec.proposals_min, spec.proposals_max);
    if (doc.contains("image_size")) {
        const json& r = doc["image_size"];
        if (!r.is_array() || r.size() != 2)
            throw ParseError(path + ": 'image_size' must be [width, height]");
        spec.image_width = r[0].get<double>();
        spec.image_height = r[1].get<double>();
    }
    if (doc.contains("box_jitter")) {
        const json& r = doc["box_jitter"];
        if (!r.is_array() || r.size() != 2)
            throw ParseError(path + ": 'box_jitter' must be [center, scale]");
        spec.center_jitter = r[0].get<double>();
        spec.scale_jitter = r[1].get<double>();
    }
    const json& pool = detail::require(doc, "leaf_class_pool", path);
    for (const auto& name : pool) {
        const std::string n = name.get<std::string>();
        if (!taxonomy.has_name(n)) throw ParseError(path + ": unknown class name '" + n + "'");
        spec.leaf_class_pool.push_back(taxonomy.id_of(n));
    }
    if (doc.contains("score_model")) {
        const json& m = doc["score_model"];
        auto range_d = [&](const char* key, double& lo, double& hi) {
            if (!m.contains(key)) return;
            const json& r = m[key];
            if (!r.is_array() || r.size() != 2)
                throw ParseError(path + ": score_model '" + std::string(key) + "' must be [lo, hi]");
            lo = r[0].get<double>();
            hi = r[1].get<double>();
        };
        range_d("true_score", spec.score_model.true_score_lo, spec.score_model.true_score_hi);
        range_d("sibling_score", spec.score_model.sibling_score_lo, spec.score_model.sibling_score_hi);
        if (m.contains("sibling_confusion"))
            spec.score_model.sibling_confusion = m["sibling_confusion"].get<double>();
        if (m.contains("clutter_rate")) spec.score_model.clutter_rate = m["clutter_rate"].get<double>();
    }
    if (doc.contains("rng_seed")) spec.rng_seed = doc["rng_seed"].get<std::uint64_t>();
    try {
        validate(spec);
    } catch (const SpecInvalid& e) {
        throw ParseError(path + ": " + e.what());
    }
    return spec;
}

inline ParamGrid read_param_grid(const std::string& path) {
    const json doc = detail::load_json_file(path);
    detail::check_version(doc, path);
    ParamGrid grid;
    const json& axes = detail::require(doc, "axes", path);
    if (!axes.is_object() || axes.empty())
        throw ParseError(path + ": 'axes' must map parameter names to value lists");
    for (const auto& [name, values] : axes.items()) {
        if (!values.is_array() || values.empty())
            throw ParseError(path + ": axis '" + name + "' must be a non-empty array");
        std::vector<double> v;
        for (const auto& x : values) v.push_back(x.get<double>());
        grid.axes[name] = std::move(v);
    }
    if (doc.contains("max_configurations"))
        grid.max_configurations = doc["max_configurations"].get<std::size_t>();
    return grid;
}

// ---- result documents ----

/// Reads a results document (the regularize output schema) back as
/// evaluator inputs.
inline std::vector<PredictedDetection> read_predictions(const std::string& path,
                                                        const Taxonomy& taxonomy) {
    const json doc = detail::load_json_file(path);
    detail::check_version(doc, path);
    const json& selected = detail::require(doc, "selected", path);
    if (!selected.is_array()) throw ParseError(path + ": 'selected' must be an array");
    std::vector<PredictedDetection> out;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const std::string ctx = path + ": selected[" + std::to_string(i) + "]";
        PredictedDetection p;
        p.box = detail::parse_box(detail::require(selected[i], "box", ctx), ctx);
        const std::string name = detail::require(selected[i], "class_name", ctx).get<std::string>();
        if (!taxonomy.has_name(name)) throw ParseError(ctx + ": unknown class name '" + name + "'");
        p.class_id = taxonomy.id_of(name);
        p.score = detail::require_number(selected[i], "score", ctx);
        out.push_back(p);
    }
    return out;
}


inline json results_to_json(const RegularizedResult& r, const CandidateSet& cands,
                            const Taxonomy& taxonomy, Method method) {
    const bool clustering = method == Method::Mapc || method == Method::Sapc;
    json selected = json::array();
    for (const auto& s : r.selected) {
        json row{{"box", detail::box_to_json(cands.boxes[static_cast<std::size_t>(s.box_id)])},
                 {"class_name", taxonomy.node(s.class_id).name},
                 {"class_id", s.class_id},
                 {"score", s.score},
                 {"exemplar", true}};
        if (clustering) row["cluster_id"] = s.point_id;
        selected.push_back(std::move(row));
    }
    json doc{{"format_version", kFormatVersion},
             {"method", method_name(method)},
             {"selected", std::move(selected)}};
    if (clustering) {
        doc["iterations_run"] = r.iterations_run;
        doc["converged"] = r.converged;
        json assign = json::array();
        for (int e : r.assignment.exemplar_of) assign.push_back(e);
        doc["assignment"] = std::move(assign);
    }
    return doc;
}

inline void write_results(const std::string& path, const RegularizedResult& r,
                          const CandidateSet& cands, const Taxonomy& taxonomy, Method method) {
    detail::write_text_file(path, results_to_json(r, cands, taxonomy, method).dump(2) + "\n");
}

inline json report_to_json(const EvalReport& r) {
    return json{{"format_version", kFormatVersion},
                {"precision", r.precision},
                {"recall", r.recall},
                {"f1", r.f1},
                {"wrong_label_fraction", r.wrong_label_fraction},
                {"wrong_overlap_fraction", r.wrong_overlap_fraction},
                {"tp", r.tp},
                {"fp", r.fp},
                {"fn", r.fn}};
}

inline void write_report(const std::string& path, const EvalReport& r) {
    detail::write_text_file(path, report_to_json(r).dump(2) + "\n");
}

inline std::string report_table(const EvalReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%-12s %-12s %-12s %-12s %-12s\n"
                  "%-12.2f %-12.2f %-12.2f %-12.2f %-12.2f\n",
                  "Precision", "Recall", "WrongLabel", "WrongOverlap", "F1",
                  100.0 * r.precision, 100.0 * r.recall, 100.0 * r.wrong_label_fraction,
                  100.0 * r.wrong_overlap_fraction, 100.0 * r.f1);
    return buf;
}

inline void write_trace(const std::string& path, const RegularizedResult& r) {
    json snapshots = json::array();
    for (std::size_t t = 0; t < r.trace.size(); ++t) {
        json assign = json::array();
        for (int e : r.trace[t].exemplar_of) assign.push_back(e);
        snapshots.push_back(json{{"iteration", t}, {"assignment", std::move(assign)}});
    }
    const json doc{{"format_version", kFormatVersion},
                   {"n_points", r.assignment.size()},
                   {"background", kBackground},
                   {"snapshots", std::move(snapshots)}};
    detail::write_text_file(path, doc.dump(2) + "\n");
}

inline void write_curve_csv(const std::string& path, const std::string& parameter,
                            const std::vector<std::pair<double, EvalReport>>& rows) {
    std::string out = parameter + ",precision,recall,f1\n";
    for (const auto& [value, report] : rows) {
        out += detail::format_value(value);
        out += ",";
        out += detail::format_metric(report.precision);
        out += ",";
        out += detail::format_metric(report.recall);
        out += ",";
        out += detail::format_metric(report.f1);
        out += "\n";
    }
    detail::write_text_file(path, out);
}

inline void write_tune_result(const std::string& path, const GridSearchResult& result,
                              Method method) {
    json best = json::object();
    for (const auto& [name, value] : result.best_params) best[name] = value;
    json table = json::array();
    for (const auto& row : result.table) {
        json params = json::object();
        for (const auto& [name, value] : row.params) params[name] = value;
        table.push_back(json{{"params", std::move(params)},
                             {"precision", row.report.precision},
                             {"recall", row.report.recall},
                             {"f1", row.report.f1},
                             {"objective", row.objective}});
    }
    const json doc{{"format_version", kFormatVersion},
                   {"method", method_name(method)},
                   {"best_params", std::move(best)},
                   {"best_score", result.best_score},
                   {"table", std::move(table)}};
    detail::write_text_file(path, doc.dump(2) + "\n");
}

inline void write_oracle_result(const std::string& path, const OracleResult& r) {
    json assign = json::array();
    for (int e : r.best_assignment.exemplar_of) assign.push_back(e);
    const json doc{{"format_version", kFormatVersion},
                   {"best_assignment", std::move(assign)},
                   {"best_value", r.best_value},
                   {"enumerated_count", r.enumerated_count}};
    detail::write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace io
}  // namespace detreg
