#include "kgalign/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace kgalign {

void SynthSpec::validate() const {
  if (entity_count < 2) throw DataError("synthetic graphs need >= 2 entities");
  if (relation_count < 1) throw DataError("synthetic graphs need >= 1 relation");
  if (feature_dim < 1) throw DataError("feature dimension must be positive");
  if (triplet_count < 0) throw DataError("triplet count must be >= 0");
  const double capacity = static_cast<double>(entity_count) *
                          (entity_count - 1) * relation_count;
  if (static_cast<double>(triplet_count) > capacity)
    throw DataError("triplet count exceeds the number of distinct triplets");
  if (feature_noise_sigma < 0.0) throw DataError("noise sigma must be >= 0");
  if (edge_drop_rate < 0.0 || edge_drop_rate > 1.0)
    throw DataError("edge drop rate must lie in [0, 1]");
  if (seed_fraction < 0.0 || seed_fraction > 1.0)
    throw DataError("seed fraction must lie in [0, 1]");
  if (community_size < 1) throw DataError("community size must be >= 1");
  if (within_community_rate < 0.0 || within_community_rate > 1.0)
    throw DataError("within-community rate must lie in [0, 1]");
  if (feature_cluster_jitter < 0.0)
    throw DataError("feature cluster jitter must be >= 0");
  if (within_community_rate == 1.0) {
    // Tails never leave the head's community, so rejection sampling can only
    // terminate if the communities alone offer enough distinct triplets.
    double within_capacity = 0.0;
    for (int start = 0; start < entity_count; start += community_size) {
      const int size = std::min(community_size, entity_count - start);
      within_capacity += static_cast<double>(size) * (size - 1) * relation_count;
    }
    if (static_cast<double>(triplet_count) > within_capacity)
      throw DataError("triplet count exceeds within-community capacity");
  }
}

SynthData generate_synthetic_pair(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.rng_seed);
  const int n = spec.entity_count;
  const int d = spec.feature_dim;

  // Draw order is fixed so one seed always produces one dataset: triplets,
  // community centers, G1 features, permutation, edge drops, feature noise,
  // seed split.
  std::uniform_int_distribution<int> pick_entity(0, n - 1);
  std::uniform_int_distribution<int> pick_relation(0, spec.relation_count - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::set<Triplet> triplets;
  while (static_cast<int>(triplets.size()) < spec.triplet_count) {
    const int head = pick_entity(rng);
    const int relation = pick_relation(rng);
    int tail;
    if (unit(rng) < spec.within_community_rate) {
      const int start = (head / spec.community_size) * spec.community_size;
      const int size = std::min(spec.community_size, n - start);
      tail = start + std::uniform_int_distribution<int>(0, size - 1)(rng);
    } else {
      tail = pick_entity(rng);
    }
    if (head == tail) continue;
    triplets.insert({head, relation, tail});
  }

  SynthData data;
  data.kg.g1.entity_count = n;
  data.kg.g1.relation_count = spec.relation_count;
  data.kg.g1.triplets.assign(triplets.begin(), triplets.end());
  data.kg.g2.entity_count = n;
  data.kg.g2.relation_count = spec.relation_count;

  std::normal_distribution<double> unit_normal(0.0, 1.0);
  const int communities = (n + spec.community_size - 1) / spec.community_size;
  Eigen::MatrixXd centers(communities, d);
  for (int c = 0; c < communities; ++c) {
    for (int j = 0; j < d; ++j) centers(c, j) = unit_normal(rng);
    const double norm = centers.row(c).norm();
    if (norm > 0.0) centers.row(c) /= norm;
  }

  data.kg.features.resize(2 * n, d);
  for (int e = 0; e < n; ++e) {
    for (int j = 0; j < d; ++j)
      data.kg.features(e, j) = centers(e / spec.community_size, j) +
                               spec.feature_cluster_jitter * unit_normal(rng);
    const double norm = data.kg.features.row(e).norm();
    if (norm > 0.0) data.kg.features.row(e) /= norm;
  }

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  for (const Triplet& t : data.kg.g1.triplets) {
    const bool drop = unit(rng) < spec.edge_drop_rate;
    if (drop) continue;
    data.kg.g2.triplets.push_back({perm[static_cast<std::size_t>(t.head)],
                                   t.relation,
                                   perm[static_cast<std::size_t>(t.tail)]});
  }
  std::sort(data.kg.g2.triplets.begin(), data.kg.g2.triplets.end());

  std::normal_distribution<double> noise(0.0, spec.feature_noise_sigma);
  for (int e = 0; e < n; ++e) {
    const int twin = n + perm[static_cast<std::size_t>(e)];
    for (int j = 0; j < d; ++j)
      data.kg.features(twin, j) = data.kg.features(e, j) + noise(rng);
    const double norm = data.kg.features.row(twin).norm();
    if (norm > 0.0) data.kg.features.row(twin) /= norm;
  }

  data.truth.reserve(static_cast<std::size_t>(n));
  for (int e = 0; e < n; ++e)
    data.truth.emplace_back(e, perm[static_cast<std::size_t>(e)]);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int seed_count =
      static_cast<int>(std::lround(spec.seed_fraction * n));
  for (int i = 0; i < n; ++i) {
    const auto& pair = data.truth[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    (i < seed_count ? data.seeds : data.test).push_back(pair);
  }
  std::sort(data.seeds.begin(), data.seeds.end());
  std::sort(data.test.begin(), data.test.end());

  data.kg.validate();
  return data;
}

void write_dataset(const std::string& dir, const SynthData& data) {
  save_triplets(dir + "/triplets1.tsv", data.kg.g1);
  save_triplets(dir + "/triplets2.tsv", data.kg.g2);
  save_features(dir + "/features.tsv", data.kg.features);
  save_pairs(dir + "/seeds.tsv", data.seeds);
  save_pairs(dir + "/test.tsv", data.test);
}

}  // namespace kgalign
