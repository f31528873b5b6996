#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "kgalign/kg.hpp"

namespace kgalign {

struct RectifyConfig {
  double lambda = 10.0;  // weight of the neighborhood-matching similarity
  double theta = 4.0;    // candidate distance threshold, > 0
};

struct CandidatePair {
  int e1 = 0;
  int e2 = 0;
  double rectified_distance = 0.0;
};

struct CandidateSet {
  std::vector<CandidatePair> pairs;  // all with rectified_distance < theta
  std::vector<int> e1_active;        // sorted, each appears in >= 1 pair
  std::vector<int> e2_active;
};

/// Conflict-free one-to-one matching between the two sides.
struct TransportPlan {
  std::vector<std::pair<int, int>> matches;  // (e1, e2)
  double total_cost = 0.0;
  /// Every resolved conflict as (surviving d~, eliminated d~).
  std::vector<std::pair<double, double>> conflicts;
  int rounds = 0;
  bool round_cap_hit = false;
};

/// Precomputed neighborhood structure for the matching similarity. Built from
/// one KgPair, the currently known alignment, and the relation feature rows;
/// score() is then cheap per entity pair.
class SimilarityContext {
 public:
  SimilarityContext(const KgPair& kg, const AlignmentSet& alignment,
                    const Eigen::MatrixXd& relation_feats);

  /// s = s_ent + s_rel in [0, 2]. s_ent counts one-hop neighbor pairs already
  /// aligned, s_rel counts incident relation pairs whose feature rows are
  /// mutual nearest neighbors across the two relation sets; each term is
  /// normalized by the summed neighborhood sizes.
  double score(int e1, int e2) const;

  /// G1 relation -> mutually-nearest G2 relation, or -1.
  const std::vector<int>& relation_matches() const { return rel_match1_; }

 private:
  std::vector<std::vector<int>> nbrs1_, nbrs2_;  // sorted distinct entities
  std::vector<std::vector<int>> rels1_, rels2_;  // sorted distinct relations
  std::vector<int> partner1_;                    // G1 -> aligned G2 or -1
  std::vector<int> rel_match1_;
};

/// Convenience wrapper around SimilarityContext for a single pair.
double neighborhood_match_similarity(const KgPair& kg,
                                     const AlignmentSet& alignment, int e1,
                                     int e2);

/// d~ = d - lambda * s. May be negative.
inline double rectified_distance(double embedding_dist, double similarity,
                                 const RectifyConfig& config) {
  return embedding_dist - config.lambda * similarity;
}

/// Dense rectified-distance matrix over the given unaligned entity subsets:
/// entry (a, b) = ||h_{e1[a]} - h_{e2[b]}||_1 - lambda * s(e1[a], e2[b]).
Eigen::MatrixXd rectified_distance_matrix(const Eigen::MatrixXd& embeddings,
                                          const KgPair& kg,
                                          const std::vector<int>& e1,
                                          const std::vector<int>& e2,
                                          const SimilarityContext& sim,
                                          const RectifyConfig& config,
                                          int workers = 1);

/// Column of the row-minimum, ties broken by smaller index. Throws DataError
/// when the matrix has no columns.
int naive_align(const Eigen::MatrixXd& costs, int row);

/// All pairs with d~ < theta plus the projections of the surviving pairs.
CandidateSet generate_candidates(const Eigen::MatrixXd& costs,
                                 const std::vector<int>& e1,
                                 const std::vector<int>& e2,
                                 const RectifyConfig& config);

/// Greedy one-to-one matching by the bounded-shortest-distance rule. Rounds
/// alternate: every remaining source picks its nearest target below theta,
/// each contested target keeps the closer claimant (ties: smaller source
/// index), matched entities leave both sides, repeat until a round adds
/// nothing. The smaller candidate-active side acts as the source each round.
/// costs(a, b) indexes positions in e1/e2; matches report the original ids.
TransportPlan greedy_ot_pseudo_label(const Eigen::MatrixXd& costs,
                                     const std::vector<int>& e1,
                                     const std::vector<int>& e2,
                                     const RectifyConfig& config);

/// Ablation matcher: a single pass where every source takes its nearest
/// target below theta and a contested target stays with the first claimant.
TransportPlan naive_pseudo_label(const Eigen::MatrixXd& costs,
                                 const std::vector<int>& e1,
                                 const std::vector<int>& e2,
                                 const RectifyConfig& config);

/// Exhaustive assignment maximizing total weight sum(theta - d~) over pairs
/// below theta; entities may stay unmatched. Test-scale only: throws when the
/// matrix has more than 10 rows.
TransportPlan exact_assignment_oracle(const Eigen::MatrixXd& costs,
                                      double theta);

/// Total weight sum(theta - d~) of a plan under position-indexed costs.
double plan_weight(const TransportPlan& plan, const Eigen::MatrixXd& costs,
                   const std::vector<int>& e1, const std::vector<int>& e2,
                   double theta);

/// TSV dump `e1<TAB>e2<TAB>d_tilde` of candidates or matched pairs.
void save_candidates(const std::string& path, const CandidateSet& candidates);
void save_plan(const std::string& path, const TransportPlan& plan,
               const Eigen::MatrixXd& costs, const std::vector<int>& e1,
               const std::vector<int>& e2);

}  // namespace kgalign
