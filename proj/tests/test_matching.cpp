#include <doctest.h>

#include <Eigen/Dense>

#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "kgalign/embedding.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/matching.hpp"
#include "test_util.hpp"

using namespace kgalign;

namespace {

KgPair pair_of(KnowledgeGraph g1, KnowledgeGraph g2, int dim) {
  KgPair kg;
  kg.g1 = std::move(g1);
  kg.g2 = std::move(g2);
  kg.features = Eigen::MatrixXd::Zero(kg.total_entities(), dim);
  return kg;
}

std::vector<int> iota_ids(int n) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
  return ids;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("similarity is zero without aligned neighbors or matched relations") {
  SUBCASE("isolated entities on both sides") {
    const KgPair kg = pair_of(kgtest::make_graph(3, 1, {{0, 0, 1}}),
                              kgtest::make_graph(3, 1, {{0, 0, 1}}), 2);
    const AlignmentSet empty;
    CHECK(neighborhood_match_similarity(kg, empty, 2, 2) == 0.0);
  }
  SUBCASE("neighbors exist but none are aligned") {
    const KgPair kg = pair_of(kgtest::make_graph(2, 1, {{0, 0, 1}}),
                              kgtest::make_graph(2, 1, {{0, 0, 1}}), 2);
    AlignmentSet al;  // empty: no partner for any neighbor
    Eigen::MatrixXd rf(2, 4);
    rf << 0, 0, 0, 0, 9, 9, 9, 9;  // far apart, still mutual NN (only option)
    const SimilarityContext sim(kg, al, rf);
    CHECK(sim.score(0, 0) == 1.0);  // relation term only
  }
}

TEST_CASE("entity term counts aligned one-hop pairs; crossed relations drop") {
  // Chains 0-1-2 on both sides. Relation features are crossed so r0<->r1'
  // and r1<->r0' are the mutual nearest neighbors.
  const KgPair kg = pair_of(kgtest::make_graph(3, 2, {{0, 0, 1}, {1, 1, 2}}),
                            kgtest::make_graph(3, 2, {{0, 0, 1}, {1, 1, 2}}), 2);
  AlignmentSet al;
  al.prior = {{1, 1}};
  Eigen::MatrixXd rf(4, 2);
  rf << 0, 0, 10, 10, 10, 10, 0, 0;
  const SimilarityContext sim(kg, al, rf);
  CHECK(sim.relation_matches() == std::vector<int>{1, 0});

  // e1=0 touches only r0, e2=0 only r0': their match is crossed away.
  CHECK(sim.score(0, 0) == 1.0);  // s_ent = 2*1/(1+1), s_rel = 0
  // e1=1 touches both relations, both matches land inside R(e2=1).
  CHECK(sim.score(1, 1) == 1.0);  // s_ent = 0 (neighbors unaligned), s_rel = 1
}

TEST_CASE("similarity saturates at two on identical seeded neighborhoods") {
  const KgPair kg = pair_of(kgtest::make_graph(3, 1, {{0, 0, 1}, {0, 0, 2}}),
                            kgtest::make_graph(3, 1, {{0, 0, 1}, {0, 0, 2}}), 2);
  AlignmentSet al;
  al.prior = {{1, 1}, {2, 2}};
  CHECK(neighborhood_match_similarity(kg, al, 0, 0) == 2.0);
}

TEST_CASE("rectified distance") {
  CHECK(rectified_distance(5.0, 0.7, {.lambda = 0.0, .theta = 4.0}) == 5.0);
  CHECK(rectified_distance(5.0, 0.4, {.lambda = 10.0, .theta = 4.0}) == 1.0);
  CHECK(rectified_distance(0.0, 1.0, {.lambda = 10.0, .theta = 4.0}) == -10.0);
}

TEST_CASE("rectified distance matrix matches the per-entry formula") {
  const KgPair kg = pair_of(kgtest::make_graph(2, 1, {{0, 0, 1}}),
                            kgtest::make_graph(2, 1, {{0, 0, 1}}), 2);
  AlignmentSet al;
  al.prior = {{1, 1}};
  const SimilarityContext sim(kg, al, relation_features(kg));
  Eigen::MatrixXd emb(4, 2);
  emb << 0, 0, 1, 1, 0.5, 0, 2, 2;
  const RectifyConfig cfg{.lambda = 2.0, .theta = 4.0};

  const Eigen::MatrixXd costs =
      rectified_distance_matrix(emb, kg, {0, 1}, {0, 1}, sim, cfg);
  REQUIRE(costs.rows() == 2);
  REQUIRE(costs.cols() == 2);
  CHECK(costs(0, 0) == -3.5);  // d=0.5, s=2
  CHECK(costs(0, 1) == 2.0);   // d=4.0, s=1 (relation term only)
  CHECK(costs(1, 0) == -0.5);  // d=1.5, s=1
  CHECK(costs(1, 1) == 0.0);   // d=2.0, s=1

  SUBCASE("row subset keeps the id mapping") {
    const Eigen::MatrixXd sub =
        rectified_distance_matrix(emb, kg, {1}, {0, 1}, sim, cfg);
    CHECK(sub(0, 0) == costs(1, 0));
    CHECK(sub(0, 1) == costs(1, 1));
  }
  SUBCASE("worker count does not change the result") {
    const Eigen::MatrixXd par =
        rectified_distance_matrix(emb, kg, {0, 1}, {0, 1}, sim, cfg, 4);
    CHECK(par == costs);
  }
}

TEST_CASE("naive alignment picks the row minimum, ties to the left") {
  Eigen::MatrixXd costs(2, 3);
  costs << 3, 1, 2, 0, 5, 5;
  CHECK(naive_align(costs, 0) == 1);
  CHECK(naive_align(costs, 1) == 0);
  Eigen::MatrixXd tie(1, 2);
  tie << 1, 1;
  CHECK(naive_align(tie, 0) == 0);
  const Eigen::MatrixXd empty(1, 0);
  CHECK_THROWS_AS(naive_align(empty, 0), DataError);
}

TEST_CASE("candidate generation keeps pairs strictly below theta") {
  const RectifyConfig cfg{.lambda = 0.0, .theta = 4.0};
  Eigen::MatrixXd costs(2, 2);
  costs << 1, 5, 5, 1;
  const CandidateSet set = generate_candidates(costs, {10, 20}, {30, 40}, cfg);
  REQUIRE(set.pairs.size() == 2);
  CHECK(set.pairs[0].e1 == 10);
  CHECK(set.pairs[0].e2 == 30);
  CHECK(set.pairs[0].rectified_distance == 1.0);
  CHECK(set.pairs[1].e1 == 20);
  CHECK(set.pairs[1].e2 == 40);
  CHECK(set.e1_active == std::vector<int>{10, 20});
  CHECK(set.e2_active == std::vector<int>{30, 40});

  SUBCASE("the threshold itself is excluded") {
    Eigen::MatrixXd at(1, 1);
    at << 4.0;
    CHECK(generate_candidates(at, {0}, {0}, cfg).pairs.empty());
    at << 3.999;
    CHECK(generate_candidates(at, {0}, {0}, cfg).pairs.size() == 1);
  }
  SUBCASE("nothing below theta leaves every list empty") {
    Eigen::MatrixXd far(2, 2);
    far << 9, 9, 9, 9;
    const CandidateSet none = generate_candidates(far, {0, 1}, {0, 1}, cfg);
    CHECK(none.pairs.empty());
    CHECK(none.e1_active.empty());
    CHECK(none.e2_active.empty());
  }
}

TEST_CASE("greedy matching: conflict-free instance resolves in one round") {
  const RectifyConfig cfg{.lambda = 0.0, .theta = 4.0};
  Eigen::MatrixXd costs(2, 2);
  costs << 1.0, 2.0, 3.0, 0.5;
  const TransportPlan plan = greedy_ot_pseudo_label(costs, {0, 1}, {0, 1}, cfg);
  CHECK(plan.matches == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});
  CHECK(plan.total_cost == 1.5);
  CHECK(plan.conflicts.empty());
  CHECK(plan.rounds == 1);
  CHECK_FALSE(plan.round_cap_hit);

  SUBCASE("matches report the original ids") {
    const TransportPlan mapped =
        greedy_ot_pseudo_label(costs, {5, 7}, {2, 9}, cfg);
    CHECK(mapped.matches == std::vector<std::pair<int, int>>{{5, 2}, {7, 9}});
  }
}

TEST_CASE("greedy matching: contested target keeps the closer claimant") {
  const RectifyConfig cfg{.lambda = 0.0, .theta = 4.0};
  Eigen::MatrixXd costs(2, 2);
  costs << 1.0, 1.5, 1.2, 5.0;
  const TransportPlan plan = greedy_ot_pseudo_label(costs, {0, 1}, {0, 1}, cfg);
  // Both rows want column 0; row 0 wins at 1.0, row 1's only other option
  // is above theta, so it stays unmatched.
  CHECK(plan.matches == std::vector<std::pair<int, int>>{{0, 0}});
  CHECK(plan.total_cost == 1.0);
  CHECK(plan.conflicts ==
        std::vector<std::pair<double, double>>{{1.0, 1.2}});
  CHECK(plan.rounds == 1);
  CHECK_FALSE(plan.round_cap_hit);
}

TEST_CASE("greedy matching: the smaller active side claims") {
  // Column 2 is inactive, so round 1 has 3 active rows vs 2 active columns
  // and the columns act as sources; column 1 loses row 0 to column 0.
  const RectifyConfig cfg{.lambda = 0.0, .theta = 4.0};
  Eigen::MatrixXd costs(3, 3);
  costs << 1.0, 2.0, 10.0, 1.5, 10.0, 10.0, 10.0, 2.5, 10.0;
  const TransportPlan plan =
      greedy_ot_pseudo_label(costs, iota_ids(3), iota_ids(3), cfg);
  CHECK(plan.matches == std::vector<std::pair<int, int>>{{0, 0}, {2, 1}});
  CHECK(plan.total_cost == doctest::Approx(3.5));
  CHECK(plan.conflicts ==
        std::vector<std::pair<double, double>>{{1.0, 2.0}});
  CHECK(plan.rounds == 2);
}

TEST_CASE("greedy matching: claim ties keep the smaller source index") {
  const RectifyConfig cfg{.lambda = 0.0, .theta = 4.0};
  Eigen::MatrixXd costs(2, 3);
  costs << 1.0, 3.9, 5.0, 1.0, 5.0, 3.9;
  const TransportPlan plan =
      greedy_ot_pseudo_label(costs, iota_ids(2), iota_ids(3), cfg);
  CHECK(plan.matches == std::vector<std::pair<int, int>>{{0, 0}, {1, 2}});
  CHECK(plan.conflicts ==
        std::vector<std::pair<double, double>>{{1.0, 1.0}});
  CHECK(plan.rounds == 2);
}

TEST_CASE("greedy matching: nearest-target ties pick the smaller index") {
  const RectifyConfig cfg{.lambda = 0.0, .theta = 4.0};
  Eigen::MatrixXd costs(1, 2);
  costs << 1.0, 1.0;
  const TransportPlan plan =
      greedy_ot_pseudo_label(costs, {0}, {0, 1}, cfg);
  CHECK(plan.matches == std::vector<std::pair<int, int>>{{0, 0}});
  CHECK(plan.conflicts.empty());
}

TEST_CASE("greedy matching: empty sides terminate immediately") {
  const RectifyConfig cfg{.lambda = 0.0, .theta = 4.0};
  const Eigen::MatrixXd costs(0, 2);
  const TransportPlan plan = greedy_ot_pseudo_label(costs, {}, {0, 1}, cfg);
  CHECK(plan.matches.empty());
  CHECK(plan.rounds == 0);
  CHECK(plan.total_cost == 0.0);
}

TEST_CASE("naive labeling keeps the first claimant") {
  const RectifyConfig cfg{.lambda = 0.0, .theta = 4.0};
  Eigen::MatrixXd costs(2, 2);
  costs << 1.0, 5.0, 0.5, 5.0;
  const TransportPlan plan =
      naive_pseudo_label(costs, iota_ids(2), iota_ids(2), cfg);
  // Row 1 is closer (0.5 < 1.0) but arrives second and is discarded: the
  // defect the greedy matcher fixes.
  CHECK(plan.matches == std::vector<std::pair<int, int>>{{0, 0}});
  CHECK(plan.total_cost == 1.0);
  CHECK(plan.conflicts ==
        std::vector<std::pair<double, double>>{{1.0, 0.5}});
  CHECK(plan.rounds == 1);

  SUBCASE("rows above theta do not claim") {
    Eigen::MatrixXd far(1, 1);
    far << 9.0;
    CHECK(naive_pseudo_label(far, {0}, {0}, cfg).matches.empty());
  }
}

TEST_CASE("exact assignment oracle") {
  SUBCASE("single viable pair") {
    Eigen::MatrixXd costs(1, 1);
    costs << 0.5;
    const TransportPlan plan = exact_assignment_oracle(costs, 4.0);
    CHECK(plan.matches == std::vector<std::pair<int, int>>{{0, 0}});
    CHECK(plan.total_cost == 0.5);
  }
  SUBCASE("diagonal beats the anti-diagonal") {
    Eigen::MatrixXd costs(2, 2);
    costs << 1, 2, 3, 0.5;
    const TransportPlan plan = exact_assignment_oracle(costs, 4.0);
    CHECK(plan.matches == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});
    CHECK(plan.total_cost == 1.5);
  }
  SUBCASE("rows may stay unmatched") {
    Eigen::MatrixXd costs(2, 1);
    costs << 0.5, 0.9;
    const TransportPlan plan = exact_assignment_oracle(costs, 4.0);
    CHECK(plan.matches == std::vector<std::pair<int, int>>{{0, 0}});
  }
  SUBCASE("nothing below theta") {
    Eigen::MatrixXd costs(1, 1);
    costs << 9;
    CHECK(exact_assignment_oracle(costs, 4.0).matches.empty());
  }
  SUBCASE("rejects instances beyond brute-force scale") {
    const Eigen::MatrixXd costs = Eigen::MatrixXd::Zero(11, 1);
    CHECK_THROWS_AS(exact_assignment_oracle(costs, 4.0), DataError);
  }
}

TEST_CASE("greedy can be suboptimal but stays within half the oracle weight") {
  const RectifyConfig cfg{.lambda = 0.0, .theta = 4.0};
  Eigen::MatrixXd costs(2, 2);
  costs << 1.0, 1.1, 1.2, 100.0;
  const auto ids = iota_ids(2);
  const TransportPlan greedy = greedy_ot_pseudo_label(costs, ids, ids, cfg);
  CHECK(greedy.matches == std::vector<std::pair<int, int>>{{0, 0}});
  const TransportPlan oracle = exact_assignment_oracle(costs, cfg.theta);
  CHECK(oracle.matches == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
  const double gw = plan_weight(greedy, costs, ids, ids, cfg.theta);
  const double ow = plan_weight(oracle, costs, ids, ids, cfg.theta);
  CHECK(gw == 3.0);
  CHECK(ow == doctest::Approx(5.7));
  CHECK(gw >= 0.5 * ow);
}

TEST_CASE("greedy matching properties on random instances") {
  std::mt19937_64 rng(2024);
  const double theta = 2.0;
  const RectifyConfig cfg{.lambda = 0.0, .theta = theta};
  std::uniform_int_distribution<int> size(1, 8);
  std::uniform_real_distribution<double> cost(0.0, 2.0 * theta);

  for (int trial = 0; trial < 300; ++trial) {
    const int m = size(rng), n = size(rng);
    Eigen::MatrixXd costs(m, n);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < n; ++b) costs(a, b) = cost(rng);
    const auto ids1 = iota_ids(m), ids2 = iota_ids(n);
    CAPTURE(trial);

    const TransportPlan plan = greedy_ot_pseudo_label(costs, ids1, ids2, cfg);
    CHECK_FALSE(plan.round_cap_hit);

    std::set<int> used1, used2;
    double cost_sum = 0.0;
    for (const auto& [a, b] : plan.matches) {
      CHECK(used1.insert(a).second);  // one-to-one
      CHECK(used2.insert(b).second);
      CHECK(costs(a, b) < theta);
      cost_sum += costs(a, b);
    }
    CHECK(plan.total_cost == doctest::Approx(cost_sum));

    // Fixpoint: no feasible pair between unmatched entities remains.
    for (int a = 0; a < m; ++a) {
      if (used1.count(a)) continue;
      for (int b = 0; b < n; ++b)
        if (!used2.count(b)) CHECK(costs(a, b) >= theta);
    }

    for (const auto& [kept, dropped] : plan.conflicts) CHECK(kept <= dropped);

    // Half-approximation of the exhaustive optimum.
    const TransportPlan oracle = exact_assignment_oracle(costs, theta);
    const double gw = plan_weight(plan, costs, ids1, ids2, theta);
    const double ow = plan_weight(oracle, costs, ids1, ids2, theta);
    CHECK(gw >= 0.5 * ow - 1e-12);

    // Determinism.
    const TransportPlan again = greedy_ot_pseudo_label(costs, ids1, ids2, cfg);
    CHECK(again.matches == plan.matches);
    CHECK(again.conflicts == plan.conflicts);
    CHECK(again.rounds == plan.rounds);

    // The ablation matcher obeys the same feasibility rules.
    const TransportPlan naive = naive_pseudo_label(costs, ids1, ids2, cfg);
    std::set<int> n1, n2;
    for (const auto& [a, b] : naive.matches) {
      CHECK(n1.insert(a).second);
      CHECK(n2.insert(b).second);
      CHECK(costs(a, b) < theta);
    }
  }
}

TEST_CASE("plan weight maps ids through the pools and rejects strangers") {
  const RectifyConfig cfg{.lambda = 0.0, .theta = 4.0};
  Eigen::MatrixXd costs(2, 2);
  costs << 1.0, 2.0, 3.0, 0.5;
  const std::vector<int> e1{5, 7}, e2{2, 9};
  const TransportPlan plan = greedy_ot_pseudo_label(costs, e1, e2, cfg);
  CHECK(plan_weight(plan, costs, e1, e2, cfg.theta) ==
        doctest::Approx(2 * 4.0 - 1.5));

  TransportPlan stranger;
  stranger.matches = {{99, 2}};
  CHECK_THROWS_AS(plan_weight(stranger, costs, e1, e2, cfg.theta), DataError);
}

TEST_CASE("candidate and plan dumps are plain TSV") {
  kgtest::TempDir dir;
  const RectifyConfig cfg{.lambda = 0.0, .theta = 4.0};
  Eigen::MatrixXd costs(2, 2);
  costs << 1, 5, 5, 1;
  const std::vector<int> e1{10, 20}, e2{30, 40};

  const CandidateSet set = generate_candidates(costs, e1, e2, cfg);
  const auto cand_path = dir.file("cand.tsv");
  save_candidates(cand_path, set);
  CHECK(slurp(cand_path) == "10\t30\t1\n20\t40\t1\n");

  const TransportPlan plan = greedy_ot_pseudo_label(costs, e1, e2, cfg);
  const auto plan_path = dir.file("plan.tsv");
  save_plan(plan_path, plan, costs, e1, e2);
  CHECK(slurp(plan_path) == "10\t30\t1\n20\t40\t1\n");
}
