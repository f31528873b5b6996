#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "kgalign/embedding.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/matching.hpp"

namespace kgalign {

struct LossConfig {
  double gamma = 1.0;        // hinge margin
  double w = 0.25;           // reliability lower-bound control, in (0, 1]
  int k_negatives = 125;     // negatives per positive
  int batch_size = 256;
  int epochs = 80;           // total epoch budget (outer_iterations * relabel_period)
  double learning_rate = 1e-3;
  int outer_iterations = 8;
  int relabel_period = 10;   // training epochs between labeling rounds
};

enum class MatcherKind { GreedyOt, Naive };

struct PipelineConfig {
  RectifyConfig rectify;
  LossConfig loss;
  MatcherKind matcher = MatcherKind::GreedyOt;
  int workers = 1;
  std::uint64_t rng_seed = 7;
};

/// Adam accumulators mirroring ModelParams.
struct AdamState {
  ModelParams m;
  ModelParams v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState zeros(int dim);
};

/// R = sigmoid(w * theta - d~) for an augmented pair. Prior pairs never pass
/// through here; their reliability is exactly 1.
double reliability_score(double rectified_dist, const LossConfig& loss,
                         const RectifyConfig& rectify);

/// One positive pair with its reliability and per-epoch negatives. Entity
/// indices are local; negatives live on the G2 side.
struct TrainExample {
  int e1 = 0;
  int e2 = 0;
  double reliability = 1.0;
  std::vector<int> negatives;
};

/// The K entities of e_j's graph nearest to e_i under L1 embedding distance,
/// excluding e_j itself; ties by index. Throws DataError when K >= |E2|.
std::vector<int> adaptive_negatives(const Eigen::MatrixXd& embeddings, int n1,
                                    int e1, int e2, int k);

/// L = sum_pos sum_neg R(pos) * max(0, d(pos) - d(neg) + gamma).
double alignment_loss(const Eigen::MatrixXd& embeddings, int n1,
                      const std::vector<TrainExample>& batch, double gamma);

/// Exact subgradients of the alignment loss with respect to every parameter
/// tensor, reusing the trace of the forward pass that produced the
/// embeddings. Reliabilities and negatives are constants of the batch.
/// Returns the batch loss.
double loss_gradients(const GraphContext& ctx, const ModelParams& params,
                      const ForwardTrace& trace,
                      const std::vector<TrainExample>& batch, double gamma,
                      ModelParams& grads);

/// Standard Adam update with bias correction; increments the step counter.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               double learning_rate);

struct HistoryRecord {
  int iteration = 0;
  int epoch = -1;        // -1 marks a labeling record
  double loss = 0.0;     // meaningful for epoch records only
  int pseudo_count = 0;
  std::optional<double> hit1;

  friend bool operator==(const HistoryRecord&, const HistoryRecord&) = default;
};

struct PipelineResult {
  Eigen::MatrixXd embeddings;  // final H^(3)
  AlignmentSet alignment;      // prior seeds plus the last pseudo-label set
  std::vector<HistoryRecord> history;
  bool greedy_round_cap_hit = false;
};

/// Alternates margin training and conflict-aware pseudo labeling. With no
/// prior seeds, a labeling round on the untrained embeddings runs first.
/// Pseudo labels are rebuilt from scratch every outer iteration; the loop
/// stops early once the pseudo pair set stops changing. Deterministic given
/// the config seed.
PipelineResult run_pipeline(const KgPair& kg,
                            const std::vector<std::pair<int, int>>& prior_seeds,
                            const PipelineConfig& config,
                            const std::vector<std::pair<int, int>>& test_pairs = {});

}  // namespace kgalign
