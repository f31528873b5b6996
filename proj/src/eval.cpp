#include "kgalign/eval.hpp"

#include <algorithm>
#include <cstdio>

#include "kgalign/parallel.hpp"

namespace kgalign {

EvalReport evaluate(const Eigen::MatrixXd& embeddings, int n1,
                    const std::vector<std::pair<int, int>>& test_pairs,
                    const std::vector<int>& candidate_pool, int workers) {
  if (test_pairs.empty()) throw DataError("evaluation needs test pairs");

  std::vector<int> pool = candidate_pool;
  if (pool.empty()) {
    pool.reserve(test_pairs.size());
    for (const auto& [e1, e2] : test_pairs) pool.push_back(e2);
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  }
  const int n2 = static_cast<int>(embeddings.rows()) - n1;
  for (int c : pool)
    if (c < 0 || c >= n2)
      throw DataError("candidate pool entity out of range: " +
                      std::to_string(c));
  std::vector<int> pool_sorted = pool;
  std::sort(pool_sorted.begin(), pool_sorted.end());
  for (const auto& [e1, e2] : test_pairs) {
    if (e1 < 0 || e1 >= n1)
      throw DataError("test source out of range: " + std::to_string(e1));
    if (!std::binary_search(pool_sorted.begin(), pool_sorted.end(), e2))
      throw DataError("test target missing from the candidate pool: " +
                      std::to_string(e2));
  }

  EvalReport report;
  report.ranks.assign(test_pairs.size(), 0);
  parallel_for(
      static_cast<int>(test_pairs.size()), workers, [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
          const auto& [e1, e2] = test_pairs[static_cast<std::size_t>(i)];
          const auto anchor = embeddings.row(e1);
          const double d_true = (anchor - embeddings.row(n1 + e2)).lpNorm<1>();
          int rank = 1;
          for (int c : pool) {
            if (c == e2) continue;
            const double d = (anchor - embeddings.row(n1 + c)).lpNorm<1>();
            if (d < d_true || (d == d_true && c < e2)) ++rank;
          }
          report.ranks[static_cast<std::size_t>(i)] = rank;
        }
      });

  const double n = static_cast<double>(report.ranks.size());
  for (int k : {1, 10}) {
    int hits = 0;
    for (int r : report.ranks)
      if (r <= k) ++hits;
    report.hit_at[k] = hits / n;
  }
  double recip = 0.0;
  for (int r : report.ranks) recip += 1.0 / r;
  report.mrr = recip / n;
  return report;
}

std::string format_report(const EvalReport& report) {
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof buf, "pairs %zu\n", report.ranks.size());
  out += buf;
  std::snprintf(buf, sizeof buf, "hit@1 %.4f\n", report.hit1());
  out += buf;
  std::snprintf(buf, sizeof buf, "hit@10 %.4f\n", report.hit10());
  out += buf;
  std::snprintf(buf, sizeof buf, "mrr %.4f\n", report.mrr);
  out += buf;
  return out;
}

}  // namespace kgalign
