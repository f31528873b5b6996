#include "kgalign/embedding.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kgalign {

namespace {

Eigen::MatrixXd glorot(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& m) {
  return m.cwiseMax(0.0);
}

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

}  // namespace

ModelParams ModelParams::zeros(int dim) {
  ModelParams p;
  p.w1 = Eigen::MatrixXd::Zero(dim, 3 * dim);
  p.b1 = Eigen::VectorXd::Zero(dim);
  for (int l = 0; l < 2; ++l) {
    p.w_gcn[l] = Eigen::MatrixXd::Zero(dim, dim);
    p.w_gate[l] = Eigen::MatrixXd::Zero(dim, dim);
    p.b_gate[l] = Eigen::VectorXd::Zero(dim);
  }
  return p;
}

void ModelParams::set_zero() {
  w1.setZero();
  b1.setZero();
  for (int l = 0; l < 2; ++l) {
    w_gcn[l].setZero();
    w_gate[l].setZero();
    b_gate[l].setZero();
  }
}

ModelParams init_params(int dim, std::mt19937_64& rng) {
  ModelParams p;
  p.w1 = glorot(dim, 3 * dim, rng);
  p.b1 = Eigen::VectorXd::Zero(dim);
  for (int l = 0; l < 2; ++l) {
    p.w_gcn[l] = glorot(dim, dim, rng);
    p.w_gate[l] = glorot(dim, dim, rng);
    p.b_gate[l] = Eigen::VectorXd::Constant(dim, -1.0);
  }
  return p;
}

Eigen::MatrixXd relation_features(const KgPair& kg, std::vector<int>* unused) {
  const int d = kg.feature_dim();
  const int r1 = kg.g1.relation_count;
  const int total = r1 + kg.g2.relation_count;
  Eigen::MatrixXd feats = Eigen::MatrixXd::Zero(total, 2 * d);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(total);

  auto accumulate = [&](const KnowledgeGraph& g, int rel_offset, int ent_offset) {
    for (const Triplet& t : g.triplets) {
      const int r = rel_offset + t.relation;
      feats.row(r).head(d) += kg.features.row(ent_offset + t.head);
      feats.row(r).tail(d) += kg.features.row(ent_offset + t.tail);
      counts(r) += 1.0;
    }
  };
  accumulate(kg.g1, 0, 0);
  accumulate(kg.g2, r1, kg.g1.entity_count);

  for (int r = 0; r < total; ++r) {
    if (counts(r) > 0.0) {
      feats.row(r) /= counts(r);
    } else if (unused) {
      unused->push_back(r);
    }
  }
  return feats;
}

Eigen::MatrixXd entity_relation_context(const KgPair& kg,
                                        const Eigen::MatrixXd& relation_feats) {
  const int n = kg.total_entities();
  Eigen::MatrixXd context = Eigen::MatrixXd::Zero(n, relation_feats.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);

  auto accumulate = [&](const KnowledgeGraph& g, int rel_offset, int ent_offset) {
    for (const Triplet& t : g.triplets) {
      const int r = rel_offset + t.relation;
      context.row(ent_offset + t.head) += relation_feats.row(r);
      counts(ent_offset + t.head) += 1.0;
      context.row(ent_offset + t.tail) -= relation_feats.row(r);
      counts(ent_offset + t.tail) += 1.0;
    }
  };
  accumulate(kg.g1, 0, 0);
  accumulate(kg.g2, kg.g1.relation_count, kg.g1.entity_count);

  for (int e = 0; e < n; ++e)
    if (counts(e) > 0.0) context.row(e) /= counts(e);
  return context;
}

Eigen::MatrixXd global_relation_aggregation(const Eigen::MatrixXd& features,
                                            const Eigen::MatrixXd& context,
                                            const ModelParams& params) {
  Eigen::MatrixXd input(features.rows(), features.cols() + context.cols());
  input << features, context;
  Eigen::MatrixXd z =
      (input * params.w1.transpose()).rowwise() + params.b1.transpose();
  return relu(z) + features;
}

Eigen::MatrixXd gcn_highway_layer(const Eigen::MatrixXd& h_in,
                                  const Eigen::SparseMatrix<double>& adjacency,
                                  const Eigen::MatrixXd& w_gcn,
                                  const Eigen::MatrixXd& w_gate,
                                  const Eigen::VectorXd& b_gate) {
  const Eigen::MatrixXd transformed = relu(adjacency * h_in * w_gcn);
  const Eigen::MatrixXd gate =
      sigmoid((h_in * w_gate).rowwise() + b_gate.transpose());
  return gate.cwiseProduct(transformed) +
         (Eigen::MatrixXd::Ones(h_in.rows(), h_in.cols()) - gate)
             .cwiseProduct(h_in);
}

GraphContext build_graph_context(const KgPair& kg) {
  kg.validate();
  GraphContext ctx;
  ctx.n1 = kg.g1.entity_count;
  ctx.n2 = kg.g2.entity_count;
  ctx.dim = kg.feature_dim();
  ctx.adjacency = normalized_adjacency(kg);
  ctx.features = kg.features;
  ctx.relation_feats = relation_features(kg, &ctx.unused_relations);
  ctx.entity_context = entity_relation_context(kg, ctx.relation_feats);
  ctx.agg_input.resize(ctx.features.rows(), 3 * ctx.dim);
  ctx.agg_input << ctx.features, ctx.entity_context;
  return ctx;
}

ForwardTrace forward_trace(const GraphContext& ctx, const ModelParams& params) {
  ForwardTrace t;
  t.z1 = (ctx.agg_input * params.w1.transpose()).rowwise() +
         params.b1.transpose();
  t.h1 = relu(t.z1) + ctx.features;

  const Eigen::MatrixXd* h_in = &t.h1;
  for (int l = 0; l < 2; ++l) {
    t.ah[l] = ctx.adjacency * (*h_in);
    t.zt[l] = t.ah[l] * params.w_gcn[l];
    t.gate[l] = sigmoid((*h_in * params.w_gate[l]).rowwise() +
                        params.b_gate[l].transpose());
    t.h_out[l] =
        t.gate[l].cwiseProduct(relu(t.zt[l])) +
        (Eigen::MatrixXd::Ones(h_in->rows(), h_in->cols()) - t.gate[l])
            .cwiseProduct(*h_in);
    h_in = &t.h_out[l];
  }
  return t;
}

EmbeddingTable forward(const GraphContext& ctx, const ModelParams& params) {
  return {forward_trace(ctx, params).final_embeddings(), Stage::Final};
}

void save_embeddings(const std::string& path, const Eigen::MatrixXd& values,
                     int n1, int n2) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << n1 << ' ' << n2 << ' ' << values.cols() << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", values(i, j));
      out << ' ' << buf;
    }
    out << '\n';
  }
}

LoadedEmbeddings load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path);
  std::string header;
  if (!std::getline(in, header))
    throw DataError("empty embeddings file: " + path);
  std::istringstream hs(header);
  LoadedEmbeddings loaded;
  int dim = 0;
  if (!(hs >> loaded.n1 >> loaded.n2 >> dim) || loaded.n1 < 0 ||
      loaded.n2 < 0 || dim <= 0)
    throw DataError(path + ": bad header, expected `n1 n2 dim`");

  const int n = loaded.n1 + loaded.n2;
  loaded.values.setZero(n, dim);
  std::vector<bool> filled(static_cast<std::size_t>(n), false);
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    int id;
    if (!(ls >> id)) continue;
    const std::string at = path + ":" + std::to_string(line_no) + ": ";
    if (id < 0 || id >= n)
      throw DataError(at + "entity id out of range: " + std::to_string(id));
    if (filled[static_cast<std::size_t>(id)])
      throw DataError(at + "duplicate row: " + std::to_string(id));
    filled[static_cast<std::size_t>(id)] = true;
    for (int j = 0; j < dim; ++j)
      if (!(ls >> loaded.values(id, j)))
        throw DataError(at + "expected " + std::to_string(dim) + " values");
    double extra;
    if (ls >> extra) throw DataError(at + "row longer than declared dimension");
  }
  for (int i = 0; i < n; ++i)
    if (!filled[static_cast<std::size_t>(i)])
      throw DataError(path + ": missing embedding row: " + std::to_string(i));
  return loaded;
}

}  // namespace kgalign
