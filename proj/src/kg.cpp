#include "kgalign/kg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace kgalign {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

bool parse_int(const std::string& tok, int& out) {
  const char* first = tok.data();
  const char* last = first + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && out >= 0;
}

bool parse_double(const std::string& tok, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(tok, &pos);
    return pos == tok.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  return out;
}

}  // namespace

void KgPair::validate() const {
  if (features.rows() != total_entities())
    throw DataError("feature row count " + std::to_string(features.rows()) +
                    " does not match entity count " +
                    std::to_string(total_entities()));
  if (!features.allFinite())
    throw DataError("feature matrix contains NaN or Inf");
  for (const KnowledgeGraph* g : {&g1, &g2}) {
    for (const Triplet& t : g->triplets) {
      if (t.head < 0 || t.head >= g->entity_count || t.tail < 0 ||
          t.tail >= g->entity_count)
        throw DataError("triplet entity index out of range");
      if (t.relation < 0 || t.relation >= g->relation_count)
        throw DataError("triplet relation index out of range");
    }
  }
}

std::vector<std::pair<int, int>> AlignmentSet::labeled_pairs() const {
  std::vector<std::pair<int, int>> out = prior;
  out.reserve(prior.size() + pseudo.size());
  for (const PseudoLabel& p : pseudo) out.emplace_back(p.e1, p.e2);
  return out;
}

double AlignmentSet::reliability(int e1, int e2) const {
  for (const auto& [a, b] : prior)
    if (a == e1 && b == e2) return 1.0;
  for (const PseudoLabel& p : pseudo)
    if (p.e1 == e1 && p.e2 == e2) return p.reliability;
  throw DataError("pair (" + std::to_string(e1) + ", " + std::to_string(e2) +
                  ") is not labeled");
}

void AlignmentSet::validate(int n1, int n2) const {
  std::unordered_set<int> used1, used2;
  std::set<std::pair<int, int>> prior_set(prior.begin(), prior.end());
  auto check_pair = [&](int e1, int e2) {
    if (e1 < 0 || e1 >= n1 || e2 < 0 || e2 >= n2)
      throw DataError("alignment pair out of range: (" + std::to_string(e1) +
                      ", " + std::to_string(e2) + ")");
    if (!used1.insert(e1).second)
      throw DataError("G1 entity " + std::to_string(e1) +
                      " aligned more than once");
    if (!used2.insert(e2).second)
      throw DataError("G2 entity " + std::to_string(e2) +
                      " aligned more than once");
  };
  for (const auto& [e1, e2] : prior) check_pair(e1, e2);
  for (const PseudoLabel& p : pseudo) {
    check_pair(p.e1, p.e2);
    if (prior_set.count({p.e1, p.e2}))
      throw DataError("pair is both prior and pseudo");
    if (!(p.reliability > 0.0 && p.reliability <= 1.0))
      throw DataError("pseudo reliability outside (0,1]");
  }
}

KnowledgeGraph load_triplets(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triplet file: " + path);

  std::vector<std::vector<std::string>> rows;
  std::string line;
  int line_no = 0;
  bool all_numeric = true;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;  // blank lines tolerated
    if (tokens.size() != 3)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected 3 fields, got " +
                      std::to_string(tokens.size()));
    int dummy;
    for (const auto& tok : tokens)
      if (!parse_int(tok, dummy)) all_numeric = false;
    rows.push_back(std::move(tokens));
  }
  if (rows.empty()) throw DataError("empty triplet file: " + path);

  KnowledgeGraph kg;
  std::set<Triplet> seen;
  if (all_numeric) {
    int max_entity = -1, max_relation = -1;
    for (const auto& row : rows) {
      Triplet t;
      parse_int(row[0], t.head);
      parse_int(row[1], t.relation);
      parse_int(row[2], t.tail);
      max_entity = std::max({max_entity, t.head, t.tail});
      max_relation = std::max(max_relation, t.relation);
      if (seen.insert(t).second) kg.triplets.push_back(t);
    }
    kg.entity_count = max_entity + 1;
    kg.relation_count = max_relation + 1;
  } else {
    std::unordered_map<std::string, int> entities, relations;
    auto intern = [](std::unordered_map<std::string, int>& table,
                     std::vector<std::string>& names, const std::string& key) {
      auto [it, inserted] = table.emplace(key, static_cast<int>(names.size()));
      if (inserted) names.push_back(key);
      return it->second;
    };
    for (const auto& row : rows) {
      Triplet t;
      t.head = intern(entities, kg.entity_names, row[0]);
      t.relation = intern(relations, kg.relation_names, row[1]);
      t.tail = intern(entities, kg.entity_names, row[2]);
      if (seen.insert(t).second) kg.triplets.push_back(t);
    }
    kg.entity_count = static_cast<int>(kg.entity_names.size());
    kg.relation_count = static_cast<int>(kg.relation_names.size());
  }
  return kg;
}

void save_triplets(const std::string& path, const KnowledgeGraph& kg) {
  auto out = open_out(path);
  const bool named = !kg.entity_names.empty();
  for (const Triplet& t : kg.triplets) {
    if (named)
      out << kg.entity_names[t.head] << '\t' << kg.relation_names[t.relation]
          << '\t' << kg.entity_names[t.tail] << '\n';
    else
      out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
  }
}

Eigen::MatrixXd load_features(const std::string& path, int total_entities) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file: " + path);

  Eigen::MatrixXd features;
  std::vector<bool> filled(static_cast<std::size_t>(total_entities), false);
  int dim = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string at = path + ":" + std::to_string(line_no) + ": ";
    int id;
    if (!parse_int(tokens[0], id))
      throw DataError(at + "bad entity id '" + tokens[0] + "'");
    if (id >= total_entities)
      throw DataError(at + "entity id " + std::to_string(id) +
                      " exceeds entity count " + std::to_string(total_entities));
    const int row_dim = static_cast<int>(tokens.size()) - 1;
    if (row_dim == 0) throw DataError(at + "row has no values");
    if (dim < 0) {
      dim = row_dim;
      features.setZero(total_entities, dim);
    } else if (row_dim != dim) {
      throw DataError(at + "dimension " + std::to_string(row_dim) +
                      " differs from " + std::to_string(dim));
    }
    if (filled[static_cast<std::size_t>(id)])
      throw DataError(at + "duplicate feature row: " + std::to_string(id));
    filled[static_cast<std::size_t>(id)] = true;
    for (int j = 0; j < dim; ++j) {
      double v;
      if (!parse_double(tokens[static_cast<std::size_t>(j) + 1], v))
        throw DataError(at + "bad value '" + tokens[static_cast<std::size_t>(j) + 1] + "'");
      features(id, j) = v;
    }
  }
  for (int i = 0; i < total_entities; ++i)
    if (!filled[static_cast<std::size_t>(i)])
      throw DataError(path + ": missing feature row: " + std::to_string(i));
  return features;
}

void save_features(const std::string& path, const Eigen::MatrixXd& features) {
  auto out = open_out(path);
  char buf[32];
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", features(i, j));
      out << ' ' << buf;
    }
    out << '\n';
  }
}

std::vector<std::pair<int, int>> load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open alignment file: " + path);
  std::vector<std::pair<int, int>> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string at = path + ":" + std::to_string(line_no) + ": ";
    if (tokens.size() != 2) throw DataError(at + "expected 2 fields");
    int a, b;
    if (!parse_int(tokens[0], a) || !parse_int(tokens[1], b))
      throw DataError(at + "bad entity id");
    pairs.emplace_back(a, b);
  }
  return pairs;
}

void save_pairs(const std::string& path,
                const std::vector<std::pair<int, int>>& pairs) {
  auto out = open_out(path);
  for (const auto& [a, b] : pairs) out << a << '\t' << b << '\n';
}

Eigen::SparseMatrix<double> normalized_adjacency(const KgPair& kg) {
  const int n = kg.total_entities();
  const int n1 = kg.g1.entity_count;

  std::set<std::pair<int, int>> edges;  // global, with i <= j
  auto add_edge = [&edges](int a, int b) {
    edges.emplace(std::min(a, b), std::max(a, b));
  };
  for (int i = 0; i < n; ++i) add_edge(i, i);  // self-loops
  for (const Triplet& t : kg.g1.triplets) add_edge(t.head, t.tail);
  for (const Triplet& t : kg.g2.triplets) add_edge(n1 + t.head, n1 + t.tail);

  Eigen::VectorXd degree = Eigen::VectorXd::Zero(n);
  for (const auto& [a, b] : edges) {
    degree(a) += 1.0;
    if (a != b) degree(b) += 1.0;
  }

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    const double v = 1.0 / std::sqrt(degree(a) * degree(b));
    entries.emplace_back(a, b, v);
    if (a != b) entries.emplace_back(b, a, v);
  }
  Eigen::SparseMatrix<double> adj(n, n);
  adj.setFromTriplets(entries.begin(), entries.end());
  adj.makeCompressed();
  return adj;
}

std::vector<RelationOccurrence> neighbor_relations(const KgPair& kg,
                                                   EntityRef entity) {
  const KnowledgeGraph& g = entity.side == Side::G1 ? kg.g1 : kg.g2;
  if (entity.index < 0 || entity.index >= g.entity_count)
    throw DataError("entity index out of range: " + std::to_string(entity.index));
  std::vector<RelationOccurrence> out;
  for (const Triplet& t : g.triplets) {
    if (t.head == entity.index) out.push_back({t.relation, +1});
    if (t.tail == entity.index) out.push_back({t.relation, -1});
  }
  return out;
}

}  // namespace kgalign
