#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "detreg/regularizers.hpp"
#include "support/fixtures.hpp"

using namespace detreg;

namespace {

Detection det(BoundingBox box, std::map<int, double> scores) {
    Detection d;
    d.box = box;
    d.scores = std::move(scores);
    return d;
}

}  // namespace

TEST_CASE("method names round-trip") {
    for (Method m : {Method::Mapc, Method::Sapc, Method::SapcAcNms, Method::WcAcNms, Method::AcNms})
        CHECK(method_from_name(method_name(m)) == m);
    CHECK_THROWS_AS(method_from_name("nms3000"), ConfigError);
}

TEST_CASE("config validation") {
    RunConfig cfg;
    CHECK_NOTHROW(validate(cfg));
    cfg.similarity.lambda = 1.5;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = RunConfig{};
    cfg.inference.damping = 1.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = RunConfig{};
    cfg.weights.w_d = -1.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = RunConfig{};
    cfg.expansion.top_k = 0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("wcacnms passes a single high-score detection through") {
    const auto t = fixtures::bundled_taxonomy();
    RunConfig cfg;
    Scene scene;
    scene.detections = {det({0, 0, 20, 20}, {{t.id_of("beagle"), 0.9}})};
    const auto preds = run_pipeline(Method::WcAcNms, scene, t, cfg);
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].class_id == t.id_of("beagle"));
}

TEST_CASE("sapc+acnms suppresses the weaker class on a shared region") {
    const auto t = fixtures::bundled_taxonomy();
    RunConfig cfg;
    cfg.similarity.theta_bg = 0.1;
    // Three proposals around one object, each scored for beagle and
    // siamese_cat; per-class SAPC elects one exemplar per class on nearly
    // identical boxes, and the across-class pass keeps only the stronger.
    Scene scene;
    for (double shift : {0.0, 1.0, 2.0})
        scene.detections.push_back(det({shift, 0, shift + 30, 30},
                                       {{t.id_of("beagle"), 0.9 - shift * 0.01},
                                        {t.id_of("siamese_cat"), 0.8 - shift * 0.01}}));
    const auto sapc_only = run_pipeline(Method::Sapc, scene, t, cfg);
    std::set<int> sapc_classes;
    for (const auto& p : sapc_only) sapc_classes.insert(p.class_id);
    CHECK(sapc_classes.size() == 2);

    const auto pruned = run_pipeline(Method::SapcAcNms, scene, t, cfg);
    REQUIRE(pruned.size() == 1);
    CHECK(pruned[0].class_id == t.id_of("beagle"));
}

TEST_CASE("mapc pipeline groups sibling proposals into one detection") {
    const auto t = fixtures::bundled_taxonomy();
    RunConfig cfg;
    cfg.similarity.theta_bg = 0.1;
    Scene scene;
    scene.detections = {
        det({10, 10, 50, 50}, {{t.id_of("beagle"), 0.95}}),
        det({12, 12, 52, 52}, {{t.id_of("dachshund"), 0.9}}),
        det({8, 11, 48, 51}, {{t.id_of("golden_retriever"), 0.85}}),
    };
    const auto preds = run_pipeline(Method::Mapc, scene, t, cfg);
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].class_id == t.id_of("beagle"));
}

TEST_CASE("pipeline with relabel targets maps leaves to parents") {
    const auto t = fixtures::bundled_taxonomy();
    RunConfig cfg;
    cfg.similarity.theta_bg = 0.1;
    cfg.eval.parent_relabel_targets = std::vector<int>{t.id_of("dog")};
    Scene scene;
    scene.detections = {
        det({10, 10, 50, 50}, {{t.id_of("beagle"), 0.95}}),
        det({12, 12, 52, 52}, {{t.id_of("dachshund"), 0.9}}),
        det({8, 11, 48, 51}, {{t.id_of("golden_retriever"), 0.85}}),
    };
    const auto preds = run_pipeline(Method::Mapc, scene, t, cfg);
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].class_id == t.id_of("dog"));
}

TEST_CASE("empty scenes evaluate to zero stats") {
    const auto t = fixtures::bundled_taxonomy();
    RunConfig cfg;
    Scene scene;  // no detections, no ground truth
    const auto stats = evaluate_scenes(Method::Mapc, {scene}, t, cfg);
    CHECK(stats.tp == 0);
    CHECK(stats.fp == 0);
    CHECK(stats.fn == 0);
}

TEST_CASE("sweep validates its parameter name") {
    const auto t = fixtures::bundled_taxonomy();
    RunConfig cfg;
    CHECK_THROWS_AS(sweep(Method::WcAcNms, "iou_sideways", {0.5}, {}, t, cfg), UnknownParameter);
    CHECK_THROWS_AS(sweep(Method::WcAcNms, "lambda", {0.5}, {}, t, cfg), UnknownParameter);
}

TEST_CASE("single-value sweep equals direct evaluation") {
    const auto t = fixtures::bundled_taxonomy();
    RunConfig cfg;
    cfg.similarity.theta_bg = 0.1;
    Scene scene;
    scene.detections = {det({0, 0, 20, 20}, {{t.id_of("beagle"), 0.9}})};
    scene.ground_truth = {{{0, 0, 20, 20}, t.id_of("beagle")}};
    const auto curve = sweep(Method::WcAcNms, "iou_across", {0.4}, {scene}, t, cfg);
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].first == 0.4);
    RunConfig direct = cfg;
    direct.nms.iou_across = 0.4;
    const auto report = compute_report(evaluate_scenes(Method::WcAcNms, {scene}, t, direct));
    CHECK(curve[0].second.f1 == report.f1);
}

TEST_CASE("iou_across at 1 keeps weakly more than at 0") {
    const auto t = fixtures::bundled_taxonomy();
    RunConfig cfg;
    cfg.similarity.theta_bg = 0.1;
    // Two slightly overlapping objects of different classes.
    Scene scene;
    scene.detections = {det({0, 0, 30, 30}, {{t.id_of("beagle"), 0.9}}),
                        det({25, 0, 55, 30}, {{t.id_of("settee"), 0.8}})};
    scene.ground_truth = {{{0, 0, 30, 30}, t.id_of("beagle")},
                          {{25, 0, 55, 30}, t.id_of("settee")}};
    const auto curve = sweep(Method::WcAcNms, "iou_across", {0.0, 1.0}, {scene}, t, cfg);
    REQUIRE(curve.size() == 2);
    CHECK(curve[1].second.recall >= curve[0].second.recall);
    CHECK(curve[1].second.recall == 1.0);
    CHECK(curve[0].second.recall == 0.5);
}

TEST_CASE("scene evaluation is thread-count invariant") {
    const auto t = fixtures::bundled_taxonomy();
    RunConfig cfg;
    cfg.similarity.theta_bg = 0.1;
    std::vector<Scene> scenes;
    Rng rng(55);
    for (int s = 0; s < 6; ++s) {
        Scene scene;
        for (int o = 0; o < 3; ++o) {
            const double x = rng.next_in_range(0.0, 200.0);
            const double y = rng.next_in_range(0.0, 200.0);
            const BoundingBox box{x, y, x + 40, y + 40};
            scene.ground_truth.push_back({box, t.id_of("beagle")});
            for (double shift : {0.0, 2.0, 4.0})
                scene.detections.push_back(det({x + shift, y, x + shift + 40, y + 40},
                                               {{t.id_of("beagle"), 0.9 - shift * 0.02}}));
        }
        scenes.push_back(std::move(scene));
    }
    const auto s1 = evaluate_scenes(Method::Mapc, scenes, t, cfg, 1);
    const auto s8 = evaluate_scenes(Method::Mapc, scenes, t, cfg, 8);
    CHECK(s1.tp == s8.tp);
    CHECK(s1.fp == s8.fp);
    CHECK(s1.fn == s8.fn);
}
