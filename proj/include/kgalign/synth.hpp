#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kgalign/kg.hpp"

namespace kgalign {

/// Recipe for a synthetic bilingual KG pair with known ground truth.
///
/// Entities are grouped into consecutive communities of `community_size`.
/// Each triplet's tail is drawn from the head's community with probability
/// `within_community_rate` (uniform otherwise), and community members share a
/// feature cluster: each member is its community's unit center plus Gaussian
/// jitter of scale `feature_cluster_jitter`, renormalized. Near-duplicate
/// features inside a densely linked community make entities ambiguous to both
/// feature and neighborhood cues, so alignment has to rely on the joint
/// structure. `community_size = 1` (or `within_community_rate = 0` plus a
/// large jitter) degrades to unstructured uniform graphs.
struct SynthSpec {
  int entity_count = 500;  // per side
  int relation_count = 20;
  int triplet_count = 1500;
  int feature_dim = 16;
  double feature_noise_sigma = 0.05;
  double edge_drop_rate = 0.1;
  double seed_fraction = 0.3;
  int community_size = 5;
  double within_community_rate = 0.4;
  double feature_cluster_jitter = 0.02;
  std::uint64_t rng_seed = 7;

  void validate() const;
};

struct SynthData {
  KgPair kg;
  std::vector<std::pair<int, int>> truth;  // bijection over all entities
  std::vector<std::pair<int, int>> seeds;  // seed_fraction of truth
  std::vector<std::pair<int, int>> test;   // the rest
};

/// G1 is a random multigraph without self-loops or duplicate triplets whose
/// tails are community-biased per the recipe fields; G2 copies it, drops
/// each edge independently, and relabels entities by a random permutation. G1 features
/// are unit-normalized cluster centers plus jitter; G2 features add
/// per-coordinate Gaussian noise and renormalize.
SynthData generate_synthetic_pair(const SynthSpec& spec);

/// Writes triplets1/triplets2/features/seeds/test .tsv files into `dir` using
/// the standard file formats, so the pipeline consumes them unchanged.
void write_dataset(const std::string& dir, const SynthData& data);

}  // namespace kgalign
