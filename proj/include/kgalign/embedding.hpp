#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <random>
#include <vector>

#include "kgalign/kg.hpp"

namespace kgalign {

/// Trainable tensors of the embedding forward pass: the relation-aggregation
/// transform plus two graph-convolution layers, each with a highway gate.
struct ModelParams {
  Eigen::MatrixXd w1;  // d x 3d
  Eigen::VectorXd b1;  // d
  std::array<Eigen::MatrixXd, 2> w_gcn;   // d x d per layer
  std::array<Eigen::MatrixXd, 2> w_gate;  // d x d per layer
  std::array<Eigen::VectorXd, 2> b_gate;  // d per layer

  static ModelParams zeros(int dim);
  void set_zero();
};

/// Glorot-uniform weights, zero biases, gate biases at -1 so early layers
/// favor carrying their input.
ModelParams init_params(int dim, std::mt19937_64& rng);

enum class Stage { RelationAggregated, Layer2, Final };

struct EmbeddingTable {
  Eigen::MatrixXd values;  // (|E1|+|E2|) x d
  Stage stage = Stage::Final;
};

/// Everything the forward pass needs that does not depend on the parameters:
/// the normalized adjacency and the relation-derived inputs. Built once per
/// KgPair and shared read-only.
struct GraphContext {
  int n1 = 0;
  int n2 = 0;
  int dim = 0;
  Eigen::SparseMatrix<double> adjacency;
  Eigen::MatrixXd features;         // n x d
  Eigen::MatrixXd relation_feats;   // (|R1|+|R2|) x 2d
  Eigen::MatrixXd entity_context;   // n x 2d
  Eigen::MatrixXd agg_input;        // n x 3d, rows [x_e || x_e_rels]
  std::vector<int> unused_relations;  // global relation ids with no triplet

  int total_entities() const { return n1 + n2; }
};

GraphContext build_graph_context(const KgPair& kg);

/// Per-relation feature rows: the mean of [x_head || x_tail] over the
/// relation's triplets. A relation with no triplet gets a zero row and is
/// reported through `unused` when given.
Eigen::MatrixXd relation_features(const KgPair& kg,
                                  std::vector<int>* unused = nullptr);

/// Signed occurrence-weighted average of neighboring relation features
/// (+1 when the entity is the head, -1 when it is the tail). Entities with
/// no relations get a zero row.
Eigen::MatrixXd entity_relation_context(const KgPair& kg,
                                        const Eigen::MatrixXd& relation_feats);

/// Row e = ReLU(W1 [x_e || ctx_e] + b1) + x_e.
Eigen::MatrixXd global_relation_aggregation(const Eigen::MatrixXd& features,
                                            const Eigen::MatrixXd& context,
                                            const ModelParams& params);

/// One GCN layer with a highway gate:
///   H~ = ReLU(A H W),  G = sigmoid(H Wg + bg),  out = G*H~ + (1-G)*H.
Eigen::MatrixXd gcn_highway_layer(const Eigen::MatrixXd& h_in,
                                  const Eigen::SparseMatrix<double>& adjacency,
                                  const Eigen::MatrixXd& w_gcn,
                                  const Eigen::MatrixXd& w_gate,
                                  const Eigen::VectorXd& b_gate);

/// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardTrace {
  Eigen::MatrixXd z1;  // pre-ReLU of the relation aggregation
  Eigen::MatrixXd h1;
  std::array<Eigen::MatrixXd, 2> ah;      // A * H_in
  std::array<Eigen::MatrixXd, 2> zt;      // A * H_in * W, pre-ReLU
  std::array<Eigen::MatrixXd, 2> gate;    // sigmoid(H_in * Wg + bg)
  std::array<Eigen::MatrixXd, 2> h_out;   // layer outputs; h_out[1] is final

  const Eigen::MatrixXd& final_embeddings() const { return h_out[1]; }
};

ForwardTrace forward_trace(const GraphContext& ctx, const ModelParams& params);

/// Final embeddings H^(3). Deterministic given (ctx, params).
EmbeddingTable forward(const GraphContext& ctx, const ModelParams& params);

/// L1 embedding distance.
inline double embedding_distance(const Eigen::RowVectorXd& a,
                                 const Eigen::RowVectorXd& b) {
  return (a - b).lpNorm<1>();
}

/// Debug dump: header `n1 n2 d`, then one `global_id v1 ... vd` row per
/// entity. Readable by load_embeddings.
void save_embeddings(const std::string& path, const Eigen::MatrixXd& values,
                     int n1, int n2);

struct LoadedEmbeddings {
  Eigen::MatrixXd values;
  int n1 = 0;
  int n2 = 0;
};

LoadedEmbeddings load_embeddings(const std::string& path);

}  // namespace kgalign
