#include "kgalign/matching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "kgalign/embedding.hpp"
#include "kgalign/parallel.hpp"

namespace kgalign {

namespace {

std::vector<std::vector<int>> sorted_unique_rows(
    std::vector<std::vector<int>> rows) {
  for (auto& row : rows) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return rows;
}

bool contains_sorted(const std::vector<int>& sorted, int value) {
  return std::binary_search(sorted.begin(), sorted.end(), value);
}

/// Index of the nearest L1 row of `others` to `query`, ties by smaller index.
int nearest_row(const Eigen::MatrixXd& feats, int query, int others_begin,
                int others_count) {
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int j = 0; j < others_count; ++j) {
    const double d =
        (feats.row(query) - feats.row(others_begin + j)).lpNorm<1>();
    if (d < best_dist) {
      best_dist = d;
      best = j;
    }
  }
  return best;
}

void write_pair_rows(
    std::ofstream& out,
    const std::vector<std::tuple<int, int, double>>& rows) {
  char buf[32];
  for (const auto& [a, b, d] : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", d);
    out << a << '\t' << b << '\t' << buf << '\n';
  }
}

std::unordered_map<int, int> position_index(const std::vector<int>& ids) {
  std::unordered_map<int, int> index;
  index.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    index.emplace(ids[i], static_cast<int>(i));
  return index;
}

}  // namespace

SimilarityContext::SimilarityContext(const KgPair& kg,
                                     const AlignmentSet& alignment,
                                     const Eigen::MatrixXd& relation_feats) {
  nbrs1_.resize(static_cast<std::size_t>(kg.g1.entity_count));
  rels1_.resize(static_cast<std::size_t>(kg.g1.entity_count));
  nbrs2_.resize(static_cast<std::size_t>(kg.g2.entity_count));
  rels2_.resize(static_cast<std::size_t>(kg.g2.entity_count));
  for (const Triplet& t : kg.g1.triplets) {
    nbrs1_[static_cast<std::size_t>(t.head)].push_back(t.tail);
    nbrs1_[static_cast<std::size_t>(t.tail)].push_back(t.head);
    rels1_[static_cast<std::size_t>(t.head)].push_back(t.relation);
    rels1_[static_cast<std::size_t>(t.tail)].push_back(t.relation);
  }
  for (const Triplet& t : kg.g2.triplets) {
    nbrs2_[static_cast<std::size_t>(t.head)].push_back(t.tail);
    nbrs2_[static_cast<std::size_t>(t.tail)].push_back(t.head);
    rels2_[static_cast<std::size_t>(t.head)].push_back(t.relation);
    rels2_[static_cast<std::size_t>(t.tail)].push_back(t.relation);
  }
  nbrs1_ = sorted_unique_rows(std::move(nbrs1_));
  nbrs2_ = sorted_unique_rows(std::move(nbrs2_));
  rels1_ = sorted_unique_rows(std::move(rels1_));
  rels2_ = sorted_unique_rows(std::move(rels2_));

  partner1_.assign(static_cast<std::size_t>(kg.g1.entity_count), -1);
  for (const auto& [e1, e2] : alignment.labeled_pairs())
    partner1_[static_cast<std::size_t>(e1)] = e2;

  const int r1 = kg.g1.relation_count;
  const int r2 = kg.g2.relation_count;
  rel_match1_.assign(static_cast<std::size_t>(r1), -1);
  if (r1 == 0 || r2 == 0) return;
  std::vector<int> nearest2(static_cast<std::size_t>(r2));
  for (int s = 0; s < r2; ++s)
    nearest2[static_cast<std::size_t>(s)] =
        nearest_row(relation_feats, r1 + s, 0, r1);
  for (int r = 0; r < r1; ++r) {
    const int s = nearest_row(relation_feats, r, r1, r2);
    if (s >= 0 && nearest2[static_cast<std::size_t>(s)] == r)
      rel_match1_[static_cast<std::size_t>(r)] = s;
  }
}

double SimilarityContext::score(int e1, int e2) const {
  const auto& n1 = nbrs1_[static_cast<std::size_t>(e1)];
  const auto& n2 = nbrs2_[static_cast<std::size_t>(e2)];
  double s = 0.0;
  if (!n1.empty() || !n2.empty()) {
    int aligned = 0;
    for (int a : n1) {
      const int b = partner1_[static_cast<std::size_t>(a)];
      if (b >= 0 && contains_sorted(n2, b)) ++aligned;
    }
    s += 2.0 * aligned / static_cast<double>(n1.size() + n2.size());
  }
  const auto& r1 = rels1_[static_cast<std::size_t>(e1)];
  const auto& r2 = rels2_[static_cast<std::size_t>(e2)];
  if (!r1.empty() || !r2.empty()) {
    int matched = 0;
    for (int r : r1) {
      const int partner = rel_match1_[static_cast<std::size_t>(r)];
      if (partner >= 0 && contains_sorted(r2, partner)) ++matched;
    }
    s += 2.0 * matched / static_cast<double>(r1.size() + r2.size());
  }
  return s;
}

double neighborhood_match_similarity(const KgPair& kg,
                                     const AlignmentSet& alignment, int e1,
                                     int e2) {
  return SimilarityContext(kg, alignment, relation_features(kg)).score(e1, e2);
}

Eigen::MatrixXd rectified_distance_matrix(const Eigen::MatrixXd& embeddings,
                                          const KgPair& kg,
                                          const std::vector<int>& e1,
                                          const std::vector<int>& e2,
                                          const SimilarityContext& sim,
                                          const RectifyConfig& config,
                                          int workers) {
  const int m = static_cast<int>(e1.size());
  const int n = static_cast<int>(e2.size());
  const int offset = kg.g1.entity_count;
  Eigen::MatrixXd costs(m, n);
  parallel_for(m, workers, [&](int begin, int end) {
    for (int a = begin; a < end; ++a) {
      const int id1 = e1[static_cast<std::size_t>(a)];
      const auto row = embeddings.row(id1);
      for (int b = 0; b < n; ++b) {
        const int id2 = e2[static_cast<std::size_t>(b)];
        const double dist = (row - embeddings.row(offset + id2)).lpNorm<1>();
        costs(a, b) = rectified_distance(dist, sim.score(id1, id2), config);
      }
    }
  });
  return costs;
}

int naive_align(const Eigen::MatrixXd& costs, int row) {
  if (costs.cols() == 0) throw DataError("alignment over an empty target set");
  int best = 0;
  for (int b = 1; b < costs.cols(); ++b)
    if (costs(row, b) < costs(row, best)) best = b;
  return best;
}

CandidateSet generate_candidates(const Eigen::MatrixXd& costs,
                                 const std::vector<int>& e1,
                                 const std::vector<int>& e2,
                                 const RectifyConfig& config) {
  CandidateSet set;
  std::vector<bool> row_hit(e1.size(), false), col_hit(e2.size(), false);
  for (int a = 0; a < costs.rows(); ++a)
    for (int b = 0; b < costs.cols(); ++b)
      if (costs(a, b) < config.theta) {
        set.pairs.push_back({e1[static_cast<std::size_t>(a)],
                             e2[static_cast<std::size_t>(b)], costs(a, b)});
        row_hit[static_cast<std::size_t>(a)] = true;
        col_hit[static_cast<std::size_t>(b)] = true;
      }
  for (std::size_t a = 0; a < e1.size(); ++a)
    if (row_hit[a]) set.e1_active.push_back(e1[a]);
  for (std::size_t b = 0; b < e2.size(); ++b)
    if (col_hit[b]) set.e2_active.push_back(e2[b]);
  std::sort(set.e1_active.begin(), set.e1_active.end());
  std::sort(set.e2_active.begin(), set.e2_active.end());
  return set;
}

TransportPlan greedy_ot_pseudo_label(const Eigen::MatrixXd& costs,
                                     const std::vector<int>& e1,
                                     const std::vector<int>& e2,
                                     const RectifyConfig& config) {
  constexpr int kRoundCap = 50;
  const int m = static_cast<int>(costs.rows());
  const int n = static_cast<int>(costs.cols());
  std::vector<bool> row_free(static_cast<std::size_t>(m), true);
  std::vector<bool> col_free(static_cast<std::size_t>(n), true);
  TransportPlan plan;
  std::vector<std::pair<int, int>> position_matches;

  while (true) {
    std::vector<int> rows_active, cols_active;
    for (int a = 0; a < m; ++a) {
      if (!row_free[static_cast<std::size_t>(a)]) continue;
      for (int b = 0; b < n; ++b)
        if (col_free[static_cast<std::size_t>(b)] &&
            costs(a, b) < config.theta) {
          rows_active.push_back(a);
          break;
        }
    }
    for (int b = 0; b < n; ++b) {
      if (!col_free[static_cast<std::size_t>(b)]) continue;
      for (int a = 0; a < m; ++a)
        if (row_free[static_cast<std::size_t>(a)] &&
            costs(a, b) < config.theta) {
          cols_active.push_back(b);
          break;
        }
    }
    if (rows_active.empty() || cols_active.empty()) break;
    if (plan.rounds == kRoundCap) {
      plan.round_cap_hit = true;
      break;
    }
    ++plan.rounds;

    const bool rows_source = rows_active.size() <= cols_active.size();
    const auto& sources = rows_source ? rows_active : cols_active;
    const auto& targets = rows_source ? cols_active : rows_active;
    const auto cost_at = [&](int s, int t) {
      return rows_source ? costs(s, t) : costs(t, s);
    };

    // target position -> (best cost, best source); later sources only
    // displace on strictly smaller cost, so ties keep the smaller source.
    std::unordered_map<int, std::pair<double, int>> claims;
    for (int s : sources) {
      int pick = -1;
      double pick_cost = std::numeric_limits<double>::infinity();
      for (int t : targets)
        if (cost_at(s, t) < config.theta && cost_at(s, t) < pick_cost) {
          pick_cost = cost_at(s, t);
          pick = t;
        }
      if (pick < 0) continue;
      auto [it, inserted] = claims.try_emplace(pick, pick_cost, s);
      if (!inserted) {
        if (pick_cost < it->second.first) {
          plan.conflicts.emplace_back(pick_cost, it->second.first);
          it->second = {pick_cost, s};
        } else {
          plan.conflicts.emplace_back(it->second.first, pick_cost);
        }
      }
    }
    std::vector<std::pair<int, int>> round_matches;  // (target, source)
    round_matches.reserve(claims.size());
    for (const auto& [t, claim] : claims) round_matches.emplace_back(t, claim.second);
    std::sort(round_matches.begin(), round_matches.end());
    for (const auto& [t, s] : round_matches) {
      const int a = rows_source ? s : t;
      const int b = rows_source ? t : s;
      row_free[static_cast<std::size_t>(a)] = false;
      col_free[static_cast<std::size_t>(b)] = false;
      position_matches.emplace_back(a, b);
      plan.total_cost += costs(a, b);
    }
    if (round_matches.empty()) break;
  }

  std::sort(position_matches.begin(), position_matches.end());
  plan.matches.reserve(position_matches.size());
  for (const auto& [a, b] : position_matches)
    plan.matches.emplace_back(e1[static_cast<std::size_t>(a)],
                              e2[static_cast<std::size_t>(b)]);
  return plan;
}

TransportPlan naive_pseudo_label(const Eigen::MatrixXd& costs,
                                 const std::vector<int>& e1,
                                 const std::vector<int>& e2,
                                 const RectifyConfig& config) {
  TransportPlan plan;
  if (costs.cols() == 0) return plan;
  std::vector<int> taken_by(static_cast<std::size_t>(costs.cols()), -1);
  for (int a = 0; a < costs.rows(); ++a) {
    const int b = naive_align(costs, a);
    if (costs(a, b) >= config.theta) continue;
    auto& owner = taken_by[static_cast<std::size_t>(b)];
    if (owner >= 0) {
      plan.conflicts.emplace_back(costs(owner, b), costs(a, b));
      continue;
    }
    owner = a;
    plan.matches.emplace_back(e1[static_cast<std::size_t>(a)],
                              e2[static_cast<std::size_t>(b)]);
    plan.total_cost += costs(a, b);
  }
  plan.rounds = 1;
  return plan;
}

TransportPlan exact_assignment_oracle(const Eigen::MatrixXd& costs,
                                      double theta) {
  const int m = static_cast<int>(costs.rows());
  const int n = static_cast<int>(costs.cols());
  if (m > 10)
    throw DataError("assignment oracle is limited to 10 rows, got " +
                    std::to_string(m));

  // Admissible bound: best possible weight from row r onward, ignoring
  // column occupancy.
  std::vector<double> suffix(static_cast<std::size_t>(m) + 1, 0.0);
  for (int r = m - 1; r >= 0; --r) {
    double best = 0.0;
    for (int c = 0; c < n; ++c)
      best = std::max(best, theta - costs(r, c));
    suffix[static_cast<std::size_t>(r)] =
        suffix[static_cast<std::size_t>(r) + 1] + best;
  }

  std::vector<int> assign(static_cast<std::size_t>(m), -1);
  std::vector<int> best_assign;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  double best_weight = 0.0;
  bool found = false;

  auto dfs = [&](auto&& self, int r, double weight) -> void {
    if (!found || weight > best_weight) {
      // Partial plans are valid: unmatched rows are allowed.
      best_weight = weight;
      best_assign.assign(assign.begin(),
                         assign.begin() + r);
      best_assign.resize(static_cast<std::size_t>(m), -1);
      found = true;
    }
    if (r == m) return;
    if (weight + suffix[static_cast<std::size_t>(r)] <= best_weight) return;
    for (int c = 0; c < n; ++c) {
      if (used[static_cast<std::size_t>(c)] || costs(r, c) >= theta) continue;
      used[static_cast<std::size_t>(c)] = true;
      assign[static_cast<std::size_t>(r)] = c;
      self(self, r + 1, weight + (theta - costs(r, c)));
      assign[static_cast<std::size_t>(r)] = -1;
      used[static_cast<std::size_t>(c)] = false;
    }
    self(self, r + 1, weight);
  };
  dfs(dfs, 0, 0.0);

  TransportPlan plan;
  for (int r = 0; r < m; ++r) {
    const int c = best_assign[static_cast<std::size_t>(r)];
    if (c < 0) continue;
    plan.matches.emplace_back(r, c);
    plan.total_cost += costs(r, c);
  }
  return plan;
}

double plan_weight(const TransportPlan& plan, const Eigen::MatrixXd& costs,
                   const std::vector<int>& e1, const std::vector<int>& e2,
                   double theta) {
  const auto pos1 = position_index(e1);
  const auto pos2 = position_index(e2);
  double weight = 0.0;
  for (const auto& [a, b] : plan.matches) {
    const auto it1 = pos1.find(a);
    const auto it2 = pos2.find(b);
    if (it1 == pos1.end() || it2 == pos2.end())
      throw DataError("plan references an entity outside the cost matrix");
    weight += theta - costs(it1->second, it2->second);
  }
  return weight;
}

void save_candidates(const std::string& path, const CandidateSet& candidates) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  std::vector<std::tuple<int, int, double>> rows;
  rows.reserve(candidates.pairs.size());
  for (const CandidatePair& p : candidates.pairs)
    rows.emplace_back(p.e1, p.e2, p.rectified_distance);
  write_pair_rows(out, rows);
}

void save_plan(const std::string& path, const TransportPlan& plan,
               const Eigen::MatrixXd& costs, const std::vector<int>& e1,
               const std::vector<int>& e2) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  const auto pos1 = position_index(e1);
  const auto pos2 = position_index(e2);
  std::vector<std::tuple<int, int, double>> rows;
  rows.reserve(plan.matches.size());
  for (const auto& [a, b] : plan.matches)
    rows.emplace_back(a, b, costs(pos1.at(a), pos2.at(b)));
  write_pair_rows(out, rows);
}

}  // namespace kgalign
