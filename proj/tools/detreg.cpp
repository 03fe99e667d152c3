// detreg: spatial-semantic regularisation of multi-class object detections.
//
// Subcommands: regularize, eval, sweep, synth, tune, trace, oracle.
// Progress goes to stderr; stdout carries data. Exit codes: 0 success,
// 2 input format error, 3 configuration error, 4 internal error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "detreg/detreg.hpp"

namespace {

using namespace detreg;

struct CommonArgs {
    std::string taxonomy_path;
    std::string config_path;
    unsigned threads = default_thread_count();
};

RunConfig load_config(const CommonArgs& args, const Taxonomy* taxonomy) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = io::read_run_config(args.config_path, taxonomy);
    validate(cfg);
    return cfg;
}

std::vector<double> parse_value_list(const std::string& csv) {
    std::vector<double> values;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        values.push_back(std::stod(item));
    }
    if (values.empty()) throw ConfigError("--values must list at least one number");
    return values;
}

int cmd_regularize(const CommonArgs& common, const std::string& detections_path,
                   const std::string& method_name_arg, const std::string& out_path,
                   const std::string& trace_path) {
    const Taxonomy taxonomy = io::read_taxonomy(common.taxonomy_path);
    RunConfig cfg = load_config(common, &taxonomy);
    const Method method = method_from_name(method_name_arg);
    if (!trace_path.empty()) cfg.inference.trace_enabled = true;

    const io::DetectionsDoc doc = io::read_detections(detections_path, taxonomy);
    const CandidateSet cands =
        expand_detections(doc.detections, cfg.similarity.theta_bg, cfg.expansion);
    std::cerr << "detreg: " << doc.detections.size() << " detections -> " << cands.size()
              << " candidate points\n";
    const RegularizedResult result = run_regularizer(method, cands, taxonomy, cfg, common.threads);
    io::write_results(out_path, result, cands, taxonomy, method);
    if (!trace_path.empty()) io::write_trace(trace_path, result);
    std::cerr << "detreg: selected " << result.selected.size() << " detections\n";
    return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& predictions_path,
             const std::string& ground_truth_path, const std::string& out_path) {
    const Taxonomy taxonomy = io::read_taxonomy(common.taxonomy_path);
    const RunConfig cfg = load_config(common, &taxonomy);
    std::vector<PredictedDetection> preds = io::read_predictions(predictions_path, taxonomy);
    const auto gt = io::read_ground_truth(ground_truth_path, taxonomy);
    if (cfg.eval.parent_relabel_targets)
        preds = relabel_to_parents(preds, taxonomy, *cfg.eval.parent_relabel_targets);
    const MatchResult match = match_detections(preds, gt, cfg.eval);
    const EvalReport report = compute_report(match.stats);
    std::cout << io::report_table(report);
    if (!out_path.empty()) io::write_report(out_path, report);
    return 0;
}

int cmd_sweep(const CommonArgs& common, const std::string& scenes_path,
              const std::string& method_name_arg, const std::string& parameter,
              const std::string& values_csv, const std::string& out_path) {
    const Taxonomy taxonomy = io::read_taxonomy(common.taxonomy_path);
    const RunConfig cfg = load_config(common, &taxonomy);
    const Method method = method_from_name(method_name_arg);
    const io::SceneSet set = io::read_scene_set(scenes_path, taxonomy);
    const auto values = parse_value_list(values_csv);
    const auto curve = sweep(method, parameter, values, set.scenes, taxonomy, cfg, common.threads);
    io::write_curve_csv(out_path, parameter, curve);
    std::cerr << "detreg: swept " << values.size() << " values of " << parameter << " over "
              << set.scenes.size() << " scenes\n";
    return 0;
}

int cmd_synth(const CommonArgs& common, const std::string& spec_path,
              std::optional<std::uint64_t> seed, std::size_t count,
              const std::string& out_detections, const std::string& out_ground_truth,
              const std::string& out_scenes) {
    const Taxonomy taxonomy = io::read_taxonomy(common.taxonomy_path);
    SceneSpec spec = io::read_scene_spec(spec_path, taxonomy);
    if (seed) spec.rng_seed = *seed;

    if (!out_scenes.empty()) {
        io::SceneSet set;
        set.image_width = spec.image_width;
        set.image_height = spec.image_height;
        set.scenes = generate_scene_suite(spec, spec.rng_seed, count, taxonomy);
        io::write_scene_set(out_scenes, set, taxonomy);
        std::cerr << "detreg: wrote " << set.scenes.size() << " scenes\n";
        return 0;
    }
    const Scene scene = generate_scene(spec, taxonomy);
    io::DetectionsDoc doc{spec.image_width, spec.image_height, scene.detections};
    io::write_detections(out_detections, doc, taxonomy);
    io::write_ground_truth(out_ground_truth, scene.ground_truth, taxonomy);
    std::cerr << "detreg: wrote " << scene.detections.size() << " detections, "
              << scene.ground_truth.size() << " objects\n";
    return 0;
}

int cmd_tune(const CommonArgs& common, const std::string& grid_path,
             const std::string& scenes_path, const std::string& method_name_arg,
             const std::string& objective_arg, const std::string& out_path) {
    const Taxonomy taxonomy = io::read_taxonomy(common.taxonomy_path);
    const RunConfig cfg = load_config(common, &taxonomy);
    const Method method = method_from_name(method_name_arg);
    const ParamGrid grid = io::read_param_grid(grid_path);
    const io::SceneSet set = io::read_scene_set(scenes_path, taxonomy);

    TuneObjective objective;
    if (objective_arg == "f1") {
        objective.kind = TuneObjective::Kind::F1;
    } else if (objective_arg.rfind("precision@", 0) == 0) {
        objective.kind = TuneObjective::Kind::PrecisionAtRecallFloor;
        objective.recall_floor = std::stod(objective_arg.substr(10));
    } else {
        throw ConfigError("unknown objective: " + objective_arg + " (expected f1 or precision@R)");
    }

    const GridSearchResult result =
        grid_search(grid, set.scenes, method, objective, taxonomy, cfg, common.threads);
    io::write_tune_result(out_path, result, method);
    std::cerr << "detreg: evaluated " << result.table.size() << " configurations, best score "
              << result.best_score << "\n";
    return 0;
}

int cmd_trace(const CommonArgs& common, const std::string& detections_path,
              const std::string& out_path) {
    const Taxonomy taxonomy = io::read_taxonomy(common.taxonomy_path);
    RunConfig cfg = load_config(common, &taxonomy);
    cfg.inference.trace_enabled = true;
    const io::DetectionsDoc doc = io::read_detections(detections_path, taxonomy);
    const CandidateSet cands =
        expand_detections(doc.detections, cfg.similarity.theta_bg, cfg.expansion);
    const SimilarityModel m = build_similarity_model(cands, taxonomy, cfg.similarity, common.threads);
    const RegularizedResult result =
        mapc_cluster(cands, m, cfg.weights, cfg.inference, common.threads);
    io::write_trace(out_path, result);
    std::cerr << "detreg: " << result.trace.size() << " snapshots over " << result.iterations_run
              << " iterations\n";
    return 0;
}

int cmd_oracle(const CommonArgs& common, const std::string& detections_path,
               const std::string& out_path) {
    const Taxonomy taxonomy = io::read_taxonomy(common.taxonomy_path);
    const RunConfig cfg = load_config(common, &taxonomy);
    const io::DetectionsDoc doc = io::read_detections(detections_path, taxonomy);
    const CandidateSet cands =
        expand_detections(doc.detections, cfg.similarity.theta_bg, cfg.expansion);
    const SimilarityModel m = build_similarity_model(cands, taxonomy, cfg.similarity, common.threads);
    const OracleResult result = brute_force_regularize(cands, m, cfg.weights);
    io::write_oracle_result(out_path, result);
    std::cerr << "detreg: enumerated " << result.enumerated_count << " assignments, best value "
              << result.best_value << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial-semantic regularisation of multi-class object detections"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string detections_path, predictions_path, ground_truth_path, scenes_path;
    std::string method_arg = "mapc", parameter, values_csv, objective_arg = "f1";
    std::string grid_path, spec_path, out_path, trace_path;
    std::string out_detections, out_ground_truth, out_scenes;
    std::optional<std::uint64_t> seed;
    std::size_t count = 1;

    auto add_common = [&](CLI::App* sub, bool needs_config = true) {
        sub->add_option("--taxonomy", common.taxonomy_path, "Taxonomy JSON file")->required();
        if (needs_config) sub->add_option("--config", common.config_path, "Run config JSON file");
        sub->add_option("--threads", common.threads, "Worker thread cap (results do not depend on it)");
    };

    auto* reg = app.add_subcommand("regularize", "Select final detections with a named method");
    add_common(reg);
    reg->add_option("--detections", detections_path, "Detections JSON file")->required();
    reg->add_option("--method", method_arg, "mapc | sapc | sapc+acnms | wcacnms | acnms");
    reg->add_option("--out", out_path, "Output results JSON file")->required();
    reg->add_option("--trace", trace_path, "Also write per-iteration trace JSON here");

    auto* ev = app.add_subcommand("eval", "Evaluate predictions against ground truth");
    add_common(ev);
    ev->add_option("--predictions", predictions_path, "Results JSON file")->required();
    ev->add_option("--ground-truth", ground_truth_path, "Ground truth JSON file")->required();
    ev->add_option("--out", out_path, "Output report JSON file");

    auto* sw = app.add_subcommand("sweep", "Evaluate a method across parameter values");
    add_common(sw);
    sw->add_option("--scenes", scenes_path, "Scene set JSON file")->required();
    sw->add_option("--method", method_arg, "Method to sweep");
    sw->add_option("--parameter", parameter, "iou_across or w_a")->required();
    sw->add_option("--values", values_csv, "Comma-separated parameter values")->required();
    sw->add_option("--out", out_path, "Output curve CSV file")->required();

    auto* sy = app.add_subcommand("synth", "Generate synthetic scenes");
    add_common(sy, /*needs_config=*/false);
    sy->add_option("--spec", spec_path, "Scene spec JSON file")->required();
    sy->add_option("--seed", seed, "Override the spec rng_seed (base seed for --count > 1)");
    sy->add_option("--count", count, "Number of scenes (with --out-scenes)");
    sy->add_option("--out-detections", out_detections, "Detections output (single scene)");
    sy->add_option("--out-ground-truth", out_ground_truth, "Ground truth output (single scene)");
    sy->add_option("--out-scenes", out_scenes, "Scene set output (multi scene)");

    auto* tu = app.add_subcommand("tune", "Grid-search parameters for a method");
    add_common(tu);
    tu->add_option("--grid", grid_path, "Parameter grid JSON file")->required();
    tu->add_option("--scenes", scenes_path, "Training scene set JSON file")->required();
    tu->add_option("--method", method_arg, "Method to tune");
    tu->add_option("--objective", objective_arg, "f1 or precision@R (R = recall floor)");
    tu->add_option("--out", out_path, "Output best-params JSON file")->required();

    auto* tr = app.add_subcommand("trace", "Run mapc and record per-iteration assignments");
    add_common(tr);
    tr->add_option("--detections", detections_path, "Detections JSON file")->required();
    tr->add_option("--out", out_path, "Output trace JSON file")->required();

    auto* orc = app.add_subcommand("oracle", "Brute-force optimum for small inputs (n <= 10)");
    add_common(orc);
    orc->add_option("--detections", detections_path, "Detections JSON file")->required();
    orc->add_option("--out", out_path, "Output oracle JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 3;
    }

    try {
        if (common.threads == 0) common.threads = 1;
        if (reg->parsed())
            return cmd_regularize(common, detections_path, method_arg, out_path, trace_path);
        if (ev->parsed()) return cmd_eval(common, predictions_path, ground_truth_path, out_path);
        if (sw->parsed())
            return cmd_sweep(common, scenes_path, method_arg, parameter, values_csv, out_path);
        if (sy->parsed()) {
            if (out_scenes.empty() && (out_detections.empty() || out_ground_truth.empty()))
                throw ConfigError("synth needs --out-scenes or both --out-detections and "
                                  "--out-ground-truth");
            return cmd_synth(common, spec_path, seed, count, out_detections, out_ground_truth,
                             out_scenes);
        }
        if (tu->parsed())
            return cmd_tune(common, grid_path, scenes_path, method_arg, objective_arg, out_path);
        if (tr->parsed()) return cmd_trace(common, detections_path, out_path);
        if (orc->parsed()) return cmd_oracle(common, detections_path, out_path);
    } catch (const ParseError& e) {
        std::cerr << "detreg: input error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "detreg: config error: " << e.what() << "\n";
        return 3;
    } catch (const UnknownParameter& e) {
        std::cerr << "detreg: config error: " << e.what() << "\n";
        return 3;
    } catch (const SpecInvalid& e) {
        std::cerr << "detreg: config error: " << e.what() << "\n";
        return 3;
    } catch (const GridTooLarge& e) {
        std::cerr << "detreg: config error: " << e.what() << "\n";
        return 3;
    } catch (const InstanceTooLarge& e) {
        std::cerr << "detreg: config error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "detreg: internal error: " << e.what() << "\n";
        return 4;
    }
    return 4;
}
