#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kgalign/kg.hpp"

namespace kgalign {

struct EvalReport {
  std::map<int, double> hit_at;  // k in {1, 10}
  double mrr = 0.0;
  std::vector<int> ranks;  // 1-based, one per test pair in input order

  double hit1() const { return hit_at.at(1); }
  double hit10() const { return hit_at.at(10); }
};

/// Ranks each test source against the candidate targets by L1 embedding
/// distance (ties by index). The default pool is the test-set targets; pass
/// an explicit pool of G2 entity ids to rank against something wider.
EvalReport evaluate(const Eigen::MatrixXd& embeddings, int n1,
                    const std::vector<std::pair<int, int>>& test_pairs,
                    const std::vector<int>& candidate_pool = {},
                    int workers = 1);

/// The report as one structured text record (stable field order).
std::string format_report(const EvalReport& report);

}  // namespace kgalign
