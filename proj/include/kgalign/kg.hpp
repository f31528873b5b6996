#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kgalign {

/// Raised for malformed or inconsistent input data. The message names the
/// offending file and line where one is known.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

enum class Side { G1, G2 };

struct EntityRef {
  Side side = Side::G1;
  int index = 0;

  friend bool operator==(const EntityRef&, const EntityRef&) = default;
};

/// Directed (head, relation, tail) edge. Indices are local to one graph side.
struct Triplet {
  int head = 0;
  int relation = 0;
  int tail = 0;

  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct KnowledgeGraph {
  int entity_count = 0;
  int relation_count = 0;
  std::vector<Triplet> triplets;
  /// Present only when the source file used string identifiers.
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;
};

/// Two knowledge graphs plus the shared feature space. Feature rows are
/// ordered: all G1 entities first, then all G2 entities.
struct KgPair {
  KnowledgeGraph g1;
  KnowledgeGraph g2;
  Eigen::MatrixXd features;  // (|E1|+|E2|) x d

  int total_entities() const { return g1.entity_count + g2.entity_count; }
  int feature_dim() const { return static_cast<int>(features.cols()); }

  /// Global feature-row index of an entity.
  int global_index(EntityRef e) const {
    return e.side == Side::G1 ? e.index : g1.entity_count + e.index;
  }
  int global2(int e2_local) const { return g1.entity_count + e2_local; }

  /// Throws DataError if any structural invariant is violated.
  void validate() const;
};

/// A pseudo-labeled pair carries the rectified distance it was labeled at
/// and the reliability score derived from it.
struct PseudoLabel {
  int e1 = 0;  // local to G1
  int e2 = 0;  // local to G2
  double reliability = 0.0;
  double rectified_distance = 0.0;
};

struct AlignmentSet {
  std::vector<std::pair<int, int>> prior;  // reliability exactly 1
  std::vector<PseudoLabel> pseudo;
  std::vector<std::pair<int, int>> test;

  /// Prior and pseudo pairs combined, in that order.
  std::vector<std::pair<int, int>> labeled_pairs() const;

  /// Reliability of a labeled pair: 1 for prior, the stored score for pseudo.
  double reliability(int e1, int e2) const;

  /// Enforces: prior/pseudo disjoint, one-to-one across their union,
  /// reliabilities in (0,1], indices within range.
  void validate(int n1, int n2) const;
};

/// One occurrence of a relation next to an entity. direction is +1 when the
/// entity is the head (predecessor), -1 when it is the tail (successor).
struct RelationOccurrence {
  int relation = 0;  // local to the entity's graph side
  int direction = 0;
};

/// Parses a triplet file: one `head<TAB>relation<TAB>tail` per line (any
/// whitespace accepted). If every token is a non-negative integer the ids are
/// used directly as dense indices; otherwise names are interned in first-seen
/// order. Duplicate triplets are collapsed. Throws DataError on malformed
/// lines (with line number) or an empty file.
KnowledgeGraph load_triplets(const std::string& path);

/// Writes triplets back in the same format (numeric ids, or names when the
/// graph carries them).
void save_triplets(const std::string& path, const KnowledgeGraph& kg);

/// Parses a feature file: one `entity_id v1 ... vd` line per entity, ids in
/// global row order. Every row must appear exactly once with a consistent
/// dimension.
Eigen::MatrixXd load_features(const std::string& path, int total_entities);

void save_features(const std::string& path, const Eigen::MatrixXd& features);

/// Parses `e1<TAB>e2` alignment pairs (seeds or test splits).
std::vector<std::pair<int, int>> load_pairs(const std::string& path);

void save_pairs(const std::string& path,
                const std::vector<std::pair<int, int>>& pairs);

/// Symmetric normalized adjacency D^(-1/2) (A + I) D^(-1/2) over all
/// |E1|+|E2| entities. Every triplet contributes one undirected edge;
/// parallel edges are collapsed. Cross-graph blocks are zero.
Eigen::SparseMatrix<double> normalized_adjacency(const KgPair& kg);

/// One entry per occurrence of the entity as head (+1) or tail (-1), in
/// triplet order. An isolated entity yields an empty list.
std::vector<RelationOccurrence> neighbor_relations(const KgPair& kg,
                                                   EntityRef entity);

}  // namespace kgalign
