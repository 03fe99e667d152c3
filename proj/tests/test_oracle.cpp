#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "detreg/oracle.hpp"
#include "detreg/similarity.hpp"
#include "support/fixtures.hpp"

using namespace detreg;

namespace {

SimilarityModel model_for(const CandidateSet& cands, double theta_bg = 0.3) {
    const auto t = fixtures::bundled_taxonomy();
    return build_similarity_model(cands, t, {0.5, theta_bg});
}

}  // namespace

TEST_CASE("enumeration counts for tiny instances") {
    // One point on one box: self-exemplar or background.
    CHECK(enumerate_valid_assignments(1, {0}).size() == 2);
    // Two points on one box: each alone as exemplar (other joins or
    // backgrounds) plus all-background; both-exemplars violates the box
    // constraint.
    CHECK(enumerate_valid_assignments(2, {0, 0}).size() == 5);
    // Two points on distinct boxes additionally allow the both-exemplars
    // configuration. (Hand enumeration gives 6: each of the two singleton
    // exemplar sets contributes two member choices, plus all-background,
    // plus both-exemplars.)
    CHECK(enumerate_valid_assignments(2, {0, 1}).size() == 6);
}

TEST_CASE("enumerated assignments satisfy the constraint system exactly") {
    const std::vector<int> box_ids = {0, 0, 1, 2};
    const auto all = enumerate_valid_assignments(4, box_ids);
    for (const auto& a : all) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const int j = a.exemplar_of[i];
            if (j == kBackground) continue;
            CHECK(a.is_exemplar(static_cast<std::size_t>(j)));
        }
        CHECK_FALSE(detail::violates_box_uniqueness(a, box_ids));
    }
    // No duplicates.
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            CHECK_FALSE(all[i] == all[j]);
}

TEST_CASE("enumeration matches a direct count formula on distinct boxes") {
    // With all boxes distinct, every exemplar subset S is feasible and each
    // non-exemplar picks from |S|+1 options.
    for (int n = 1; n <= 6; ++n) {
        std::vector<int> box_ids(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) box_ids[static_cast<std::size_t>(i)] = i;
        std::size_t expected = 0;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            const int k = std::popcount(mask);
            expected += static_cast<std::size_t>(std::pow(k + 1, n - k));
        }
        CHECK(enumerate_valid_assignments(n, box_ids).size() == expected);
    }
}

TEST_CASE("instance cap") {
    CHECK_THROWS_AS(enumerate_valid_assignments(11, std::vector<int>(11, 0)), InstanceTooLarge);
}

TEST_CASE("single low-information point backgrounds itself") {
    // s(0,0) < 0 always, so background (value 0) beats self-exemplar.
    const auto cands = fixtures::make_candidates({{0, 0, 10, 10}}, {{0, 6, 0.9}});
    const auto m = model_for(cands);
    REQUIRE(m.self(0) < 0.0);
    const auto res = brute_force_regularize(cands, m, {});
    CHECK(res.best_value == 0.0);
    CHECK(res.best_assignment.exemplar_of == std::vector<int>{kBackground});
    CHECK(res.enumerated_count == 2);
}

TEST_CASE("with unit weights a single supporter cannot pay for an exemplar") {
    // s(i,i) <= -1/(1 - theta_bg) while a joiner adds at most w_b * 1, so a
    // two-point cluster stays below the background value of 0.
    const auto cands = fixtures::make_candidates({{0, 0, 10, 10}, {0.5, 0, 10.5, 10}},
                                                 {{0, 6, 0.95}, {1, 6, 0.9}});
    const auto m = model_for(cands);
    const auto res = brute_force_regularize(cands, m, {});
    CHECK(res.best_value == 0.0);
    CHECK(res.best_assignment.exemplar_of == std::vector<int>{kBackground, kBackground});
}

TEST_CASE("two supporters elect an exemplar at unit weights") {
    const auto cands = fixtures::make_candidates(
        {{0, 0, 10, 10}, {0.5, 0, 10.5, 10}, {0, 0.5, 10, 10.5}},
        {{0, 6, 0.95}, {1, 6, 0.9}, {2, 6, 0.9}});
    const auto m = model_for(cands, 0.0);
    const auto res = brute_force_regularize(cands, m, {});
    const double expected = m.self(0) + m.pair(1, 0) + m.pair(2, 0);
    REQUIRE(expected > 0.0);
    CHECK_THAT(res.best_value, Catch::Matchers::WithinAbs(expected, 1e-12));
    CHECK(res.best_assignment.exemplar_of == std::vector<int>{0, 0, 0});
}

TEST_CASE("one box, two sibling labels: exactly one is selected") {
    // beagle 0.9 and dachshund 0.85 on the same box. With w_a = 0.4 the
    // higher-scoring label becomes the exemplar and the other joins it; the
    // box constraint forbids selecting both.
    const auto t = fixtures::bundled_taxonomy();
    const auto cands = fixtures::make_candidates(
        {{0, 0, 10, 10}}, {{0, t.id_of("beagle"), 0.9}, {0, t.id_of("dachshund"), 0.85}});
    const auto m = build_similarity_model(cands, t, {0.5, 0.3});
    ObjectiveWeights w;
    w.w_a = 0.4;
    const auto res = brute_force_regularize(cands, m, w);
    CHECK(res.best_assignment.exemplar_of == std::vector<int>{0, 0});
    // Both-exemplars was never even enumerated (box constraint prunes it).
    CHECK(res.enumerated_count == 5);
}

TEST_CASE("oracle self-consistency: best dominates every enumerated value") {
    const auto t = fixtures::bundled_taxonomy();
    Rng rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = fixtures::random_instance(rng, t, 5);
        const auto m = build_similarity_model(inst.cands, t, {0.5, inst.theta_bg});
        const ObjectiveWeights w{1.0, 1.0, 1.0, 0.7, 1.0, 1.0};
        const auto res = brute_force_regularize(inst.cands, m, w);
        CHECK(std::isfinite(res.best_value));
        CHECK(res.best_value >= 0.0);  // all-background is always valid
        for (const auto& a :
             enumerate_valid_assignments(5, m.box_ids()))
            CHECK(res.best_value >= objective_value(a, m, w));
    }
}

TEST_CASE("oracle decode is invariant to scaling all weights") {
    const auto t = fixtures::bundled_taxonomy();
    Rng rng(808);
    for (int trial = 0; trial < 15; ++trial) {
        const auto inst = fixtures::random_instance(rng, t, 5);
        const auto m = build_similarity_model(inst.cands, t, {0.5, inst.theta_bg});
        const ObjectiveWeights w{1.0, 1.2, 1.0, 0.5, 1.0, 1.0};
        ObjectiveWeights scaled = w;
        const double c = 3.7;
        scaled.w_a *= c;
        scaled.w_b *= c;
        scaled.w_c *= c;
        scaled.w_d *= c;
        scaled.w_e *= c;
        scaled.w_f *= c;
        const auto res = brute_force_regularize(inst.cands, m, w);
        const auto res_scaled = brute_force_regularize(inst.cands, m, scaled);
        CHECK(res.best_assignment == res_scaled.best_assignment);
    }
}

TEST_CASE("oracle is invariant to point relabelling permutations") {
    const auto t = fixtures::bundled_taxonomy();
    Rng rng(550);
    const auto inst = fixtures::random_instance(rng, t, 5);
    const auto m = build_similarity_model(inst.cands, t, {0.5, inst.theta_bg});
    const ObjectiveWeights w;
    const auto base = brute_force_regularize(inst.cands, m, w);

    // Reverse the point order and compare optima through the permutation.
    CandidateSet reversed = inst.cands;
    std::reverse(reversed.points.begin(), reversed.points.end());
    for (std::size_t i = 0; i < reversed.points.size(); ++i)
        reversed.points[i].point_id = static_cast<int>(i);
    const auto m2 = build_similarity_model(reversed, t, {0.5, inst.theta_bg});
    const auto permuted = brute_force_regularize(reversed, m2, w);
    CHECK_THAT(permuted.best_value, Catch::Matchers::WithinAbs(base.best_value, 1e-12));
}

TEST_CASE("objective value spot checks") {
    // Two labels on one shared box.
    const auto cands = fixtures::make_candidates({{0, 0, 10, 10}},
                                                 {{0, 6, 0.9}, {0, 7, 0.8}});
    const auto m = model_for(cands);
    const ObjectiveWeights w;
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();

    SECTION("single self-assigned point on its own") {
        Assignment a{{0, kBackground}};
        CHECK_THAT(objective_value(a, m, w), Catch::Matchers::WithinAbs(w.w_a * m.self(0), 1e-12));
    }
    SECTION("joining a non-exemplar violates consistency") {
        Assignment a{{1, kBackground}};
        CHECK(objective_value(a, m, w) == neg_inf);
    }
    SECTION("two exemplars on one box violate the box constraint") {
        Assignment a{{0, 1}};
        CHECK(objective_value(a, m, w) == neg_inf);
    }
    SECTION("dimension mismatch throws") {
        Assignment a{{0}};
        CHECK_THROWS_AS(objective_value(a, m, w), DimensionMismatch);
    }
}

TEST_CASE("three-point objective matches a hand-computed weighted sum") {
    const auto t = fixtures::star_with_parent();
    const auto cands = fixtures::make_candidates(
        {{0, 0, 10, 10}, {5, 0, 15, 10}, {50, 50, 60, 60}},
        {{0, 2, 0.9}, {1, 3, 0.8}, {2, 4, 0.7}});
    const SimilarityParams params{0.6, 0.3};
    const auto m = build_similarity_model(cands, t, params);
    const ObjectiveWeights w{2.0, 1.5, 1.0, 0.5, 1.0, 1.0};

    // Points 0 and 2 exemplars, point 1 joins 0.
    Assignment a{{0, 0, 2}};
    // w_a*(s00 + s22) + w_b*s(1,0) + w_d*r(0,2)
    const double expected = 2.0 * (m.self(0) + m.self(2)) + 1.5 * m.pair(1, 0) +
                            0.5 * m.repellence(0, 2);
    CHECK_THAT(objective_value(a, m, w), Catch::Matchers::WithinAbs(expected, 1e-12));

    // Background contributes zero.
    Assignment b{{kBackground, kBackground, kBackground}};
    CHECK(objective_value(b, m, w) == 0.0);
}
