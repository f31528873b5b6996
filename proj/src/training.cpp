#include "kgalign/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kgalign/eval.hpp"

namespace kgalign {

namespace {

inline Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& z) {
  return (z.array() > 0.0).cast<double>().matrix();
}

template <typename Tensor>
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                 double lr, double beta1, double beta2, double epsilon,
                 double bias1, double bias2) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = (beta2 * v.array() + (1.0 - beta2) * grad.array().square()).matrix();
  param.array() -=
      lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + epsilon);
}

}  // namespace

AdamState AdamState::zeros(int dim) {
  AdamState s;
  s.m = ModelParams::zeros(dim);
  s.v = ModelParams::zeros(dim);
  return s;
}

double reliability_score(double rectified_dist, const LossConfig& loss,
                         const RectifyConfig& rectify) {
  return 1.0 / (1.0 + std::exp(-(loss.w * rectify.theta - rectified_dist)));
}

std::vector<int> adaptive_negatives(const Eigen::MatrixXd& embeddings, int n1,
                                    int e1, int e2, int k) {
  const int n2 = static_cast<int>(embeddings.rows()) - n1;
  if (k >= n2)
    throw DataError("need " + std::to_string(k) +
                    " negatives from a side of size " + std::to_string(n2));
  std::vector<std::pair<double, int>> dists;
  dists.reserve(static_cast<std::size_t>(n2) - 1);
  const auto anchor = embeddings.row(e1);
  for (int c = 0; c < n2; ++c) {
    if (c == e2) continue;
    dists.emplace_back((anchor - embeddings.row(n1 + c)).lpNorm<1>(), c);
  }
  std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
  std::vector<int> negatives(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    negatives[static_cast<std::size_t>(i)] =
        dists[static_cast<std::size_t>(i)].second;
  return negatives;
}

double alignment_loss(const Eigen::MatrixXd& embeddings, int n1,
                      const std::vector<TrainExample>& batch, double gamma) {
  double loss = 0.0;
  for (const TrainExample& ex : batch) {
    const double d_pos =
        (embeddings.row(ex.e1) - embeddings.row(n1 + ex.e2)).lpNorm<1>();
    for (int neg : ex.negatives) {
      const double d_neg =
          (embeddings.row(ex.e1) - embeddings.row(n1 + neg)).lpNorm<1>();
      loss += ex.reliability * std::max(0.0, d_pos - d_neg + gamma);
    }
  }
  return loss;
}

double loss_gradients(const GraphContext& ctx, const ModelParams& params,
                      const ForwardTrace& trace,
                      const std::vector<TrainExample>& batch, double gamma,
                      ModelParams& grads) {
  grads = ModelParams::zeros(ctx.dim);
  const Eigen::MatrixXd& h = trace.h_out[1];
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  double loss = 0.0;

  for (const TrainExample& ex : batch) {
    const int i = ex.e1;
    const int j = ctx.n1 + ex.e2;
    const Eigen::ArrayXXd diff_pos = (h.row(i) - h.row(j)).array();
    const double d_pos = diff_pos.abs().sum();
    const Eigen::ArrayXXd sign_pos = diff_pos.sign();
    for (int neg : ex.negatives) {
      const int jn = ctx.n1 + neg;
      const Eigen::ArrayXXd diff_neg = (h.row(i) - h.row(jn)).array();
      const double hinge = d_pos - diff_neg.abs().sum() + gamma;
      if (hinge <= 0.0) continue;  // subgradient 0 at the kink
      loss += ex.reliability * hinge;
      const Eigen::ArrayXXd sign_neg = diff_neg.sign();
      dh.row(i) += (ex.reliability * (sign_pos - sign_neg)).matrix();
      dh.row(j) -= (ex.reliability * sign_pos).matrix();
      dh.row(jn) += (ex.reliability * sign_neg).matrix();
    }
  }

  Eigen::MatrixXd dh_out = std::move(dh);
  for (int l = 1; l >= 0; --l) {
    const Eigen::MatrixXd& h_in = (l == 0) ? trace.h1 : trace.h_out[0];
    const Eigen::MatrixXd& gate = trace.gate[l];
    const Eigen::MatrixXd dgate =
        dh_out.cwiseProduct(trace.zt[l].cwiseMax(0.0) - h_in);
    const Eigen::MatrixXd dzt =
        dh_out.cwiseProduct(gate).cwiseProduct(relu_mask(trace.zt[l]));
    const Eigen::MatrixXd dzg =
        (dgate.array() * gate.array() * (1.0 - gate.array())).matrix();
    Eigen::MatrixXd dh_in =
        dh_out - dh_out.cwiseProduct(gate) + dzg * params.w_gate[l].transpose();
    // The normalized adjacency is symmetric, so its transpose is itself.
    dh_in += ctx.adjacency * (dzt * params.w_gcn[l].transpose());
    grads.w_gate[l] = h_in.transpose() * dzg;
    grads.b_gate[l] = dzg.colwise().sum().transpose();
    grads.w_gcn[l] = trace.ah[l].transpose() * dzt;
    dh_out = std::move(dh_in);
  }

  const Eigen::MatrixXd dz1 = dh_out.cwiseProduct(relu_mask(trace.z1));
  grads.w1 = dz1.transpose() * ctx.agg_input;
  grads.b1 = dz1.colwise().sum().transpose();
  return loss;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               double learning_rate) {
  ++state.step;
  const double bias1 = 1.0 - std::pow(state.beta1, state.step);
  const double bias2 = 1.0 - std::pow(state.beta2, state.step);
  adam_update(params.w1, grads.w1, state.m.w1, state.v.w1, learning_rate,
              state.beta1, state.beta2, state.epsilon, bias1, bias2);
  adam_update(params.b1, grads.b1, state.m.b1, state.v.b1, learning_rate,
              state.beta1, state.beta2, state.epsilon, bias1, bias2);
  for (int l = 0; l < 2; ++l) {
    adam_update(params.w_gcn[l], grads.w_gcn[l], state.m.w_gcn[l],
                state.v.w_gcn[l], learning_rate, state.beta1, state.beta2,
                state.epsilon, bias1, bias2);
    adam_update(params.w_gate[l], grads.w_gate[l], state.m.w_gate[l],
                state.v.w_gate[l], learning_rate, state.beta1, state.beta2,
                state.epsilon, bias1, bias2);
    adam_update(params.b_gate[l], grads.b_gate[l], state.m.b_gate[l],
                state.v.b_gate[l], learning_rate, state.beta1, state.beta2,
                state.epsilon, bias1, bias2);
  }
}

namespace {

std::vector<std::pair<int, int>> sorted_pairs(
    const std::vector<PseudoLabel>& labels) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(labels.size());
  for (const PseudoLabel& l : labels) pairs.emplace_back(l.e1, l.e2);
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

}  // namespace

PipelineResult run_pipeline(
    const KgPair& kg, const std::vector<std::pair<int, int>>& prior_seeds,
    const PipelineConfig& config,
    const std::vector<std::pair<int, int>>& test_pairs) {
  const GraphContext ctx = build_graph_context(kg);
  std::mt19937_64 rng(config.rng_seed);
  ModelParams params = init_params(ctx.dim, rng);
  AdamState adam = AdamState::zeros(ctx.dim);

  PipelineResult result;
  result.alignment.prior = prior_seeds;
  result.alignment.test = test_pairs;
  result.alignment.validate(ctx.n1, ctx.n2);

  // Only prior-seeded entities ever leave the matching pools.
  std::vector<bool> seeded1(static_cast<std::size_t>(ctx.n1), false);
  std::vector<bool> seeded2(static_cast<std::size_t>(ctx.n2), false);
  for (const auto& [a, b] : prior_seeds) {
    seeded1[static_cast<std::size_t>(a)] = true;
    seeded2[static_cast<std::size_t>(b)] = true;
  }
  std::vector<int> pool1, pool2;
  for (int e = 0; e < ctx.n1; ++e)
    if (!seeded1[static_cast<std::size_t>(e)]) pool1.push_back(e);
  for (int e = 0; e < ctx.n2; ++e)
    if (!seeded2[static_cast<std::size_t>(e)]) pool2.push_back(e);

  const auto relabel = [&](int iteration) {
    result.embeddings = forward(ctx, params).values;
    const SimilarityContext sim(kg, result.alignment, ctx.relation_feats);
    const Eigen::MatrixXd costs =
        rectified_distance_matrix(result.embeddings, kg, pool1, pool2, sim,
                                  config.rectify, config.workers);
    const TransportPlan plan =
        config.matcher == MatcherKind::GreedyOt
            ? greedy_ot_pseudo_label(costs, pool1, pool2, config.rectify)
            : naive_pseudo_label(costs, pool1, pool2, config.rectify);
    result.greedy_round_cap_hit |= plan.round_cap_hit;

    std::vector<int> pos1(static_cast<std::size_t>(ctx.n1), -1);
    std::vector<int> pos2(static_cast<std::size_t>(ctx.n2), -1);
    for (std::size_t i = 0; i < pool1.size(); ++i)
      pos1[static_cast<std::size_t>(pool1[i])] = static_cast<int>(i);
    for (std::size_t i = 0; i < pool2.size(); ++i)
      pos2[static_cast<std::size_t>(pool2[i])] = static_cast<int>(i);
    result.alignment.pseudo.clear();
    for (const auto& [a, b] : plan.matches) {
      const double dist = costs(pos1[static_cast<std::size_t>(a)],
                                pos2[static_cast<std::size_t>(b)]);
      result.alignment.pseudo.push_back(
          {a, b, reliability_score(dist, config.loss, config.rectify), dist});
    }

    HistoryRecord record;
    record.iteration = iteration;
    record.pseudo_count = static_cast<int>(result.alignment.pseudo.size());
    if (!test_pairs.empty())
      record.hit1 =
          evaluate(result.embeddings, ctx.n1, test_pairs, {}, config.workers)
              .hit1();
    result.history.push_back(record);
  };

  if (prior_seeds.empty()) relabel(0);
  std::vector<std::pair<int, int>> previous =
      sorted_pairs(result.alignment.pseudo);

  const int k_eff = std::min(config.loss.k_negatives, ctx.n2 - 1);
  ModelParams grads;
  for (int iteration = 1; iteration <= config.loss.outer_iterations;
       ++iteration) {
    for (int epoch = 1; epoch <= config.loss.relabel_period; ++epoch) {
      std::vector<TrainExample> examples;
      examples.reserve(prior_seeds.size() + result.alignment.pseudo.size());
      for (const auto& [a, b] : prior_seeds)
        examples.push_back({a, b, 1.0, {}});
      for (const PseudoLabel& l : result.alignment.pseudo)
        examples.push_back({l.e1, l.e2, l.reliability, {}});

      double epoch_loss = 0.0;
      if (!examples.empty() && k_eff > 0) {
        const Eigen::MatrixXd sampling = forward(ctx, params).values;
        for (TrainExample& ex : examples)
          ex.negatives =
              adaptive_negatives(sampling, ctx.n1, ex.e1, ex.e2, k_eff);
        std::shuffle(examples.begin(), examples.end(), rng);

        const std::size_t batch_size =
            static_cast<std::size_t>(std::max(1, config.loss.batch_size));
        for (std::size_t start = 0; start < examples.size();
             start += batch_size) {
          const std::size_t stop =
              std::min(examples.size(), start + batch_size);
          const std::vector<TrainExample> batch(examples.begin() + start,
                                                examples.begin() + stop);
          const ForwardTrace trace = forward_trace(ctx, params);
          epoch_loss += loss_gradients(ctx, params, trace, batch,
                                       config.loss.gamma, grads);
          adam_step(params, grads, adam, config.loss.learning_rate);
        }
      }

      HistoryRecord record;
      record.iteration = iteration;
      record.epoch = epoch;
      record.loss = epoch_loss;
      record.pseudo_count = static_cast<int>(result.alignment.pseudo.size());
      result.history.push_back(record);
    }

    relabel(iteration);
    std::vector<std::pair<int, int>> current =
        sorted_pairs(result.alignment.pseudo);
    if (current == previous) break;
    previous = std::move(current);
  }

  return result;
}

}  // namespace kgalign
