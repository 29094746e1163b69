#pragma once

#include "icdm/autodiff.hpp"
#include "icdm/graph.hpp"
#include "icdm/params.hpp"
#include "icdm/types.hpp"

#include <optional>
#include <random>
#include <span>
#include <vector>

namespace icdm {

struct AggregationConfig {
  int depth = 3;  // maximum hop depth K
  Scalar alpha = Scalar(0.1);
  Scalar beta = Scalar(0.2);
  enum class Aggregator { Mean } aggregator = Aggregator::Mean;
  bool training_mode = false;  // neighbor dropout applies only when set

  void validate() const;
};

/// Layer-wise neighbor dropout rate alpha + beta * k, clamped to [0, 1).
Scalar neighbor_dropout_rate(const AggregationConfig& cfg, int k);

/// Weight of the depth-k aggregate in the descending accumulation.
constexpr Scalar depth_weight(int k) { return Scalar(1) / Scalar(k + 1); }

/// Sorted node subset with a global-index -> compact-row lookup.
struct SubsetIndex {
  std::vector<int> items;  // sorted, unique global indices
  std::vector<int> pos;    // size = universe, -1 where absent

  static SubsetIndex of(int universe, std::vector<int> items);
  static SubsetIndex all(int universe);
  int size() const { return static_cast<int>(items.size()); }
  int at(int global) const;
};

struct EmbeddingLeaves {
  Var student, right, wrong, concepts;
};
EmbeddingLeaves make_embedding_leaves(Tape& tape, ParameterStore& store);

/// Accumulated per-relation views (Eqs of the aggregation step), one compact
/// row block per requested node. Row r of a student view corresponds to
/// students.items[r], and so on.
struct CagtViews {
  Var student_right, student_wrong, student_concept;
  Var right_student, right_concept;
  Var wrong_student, wrong_concept;
  Var concept_right, concept_wrong, concept_student;
};

/// Per-depth tables of one bipartite relation side, used when freezing a
/// snapshot: depths[k] holds the depth-k aggregates of that side's subset.
struct RelationDepths {
  std::vector<Var> student_side;  // here "student" means the left class
  std::vector<Var> other_side;
};

struct AggregateResult {
  CagtViews views;
  // Depth tables of the sides inductive inference consumes (k = 0..K):
  std::vector<Var> right_exercise_depths;    // E_R side of Right
  std::vector<Var> wrong_exercise_depths;    // E_W side of Wrong
  std::vector<Var> desired_concept_depths;   // C side of Desired
};

/// Depth-restricted aggregation over the SCG. Only nodes reachable within
/// cfg.depth hops of the requested subsets are touched; gradients flow only
/// to gathered embedding rows. `rng` drives neighbor dropout and must be
/// non-null when cfg.training_mode is set.
AggregateResult aggregate_views(Tape& tape, const EmbeddingLeaves& emb,
                                const StudentCenteredGraph& g,
                                const AggregationConfig& cfg,
                                const SubsetIndex& students,
                                const SubsetIndex& exercises,
                                const SubsetIndex& concepts,
                                std::mt19937_64* rng = nullptr);

struct CagtLatents {
  Var student, right, wrong, concepts;  // post-generation, width d
};

/// Attention-weighted view fusion (3 views for students and concepts, 2 for
/// each exercise class).
CagtLatents generate_latents(Tape& tape, const CagtViews& views,
                             ParameterStore& store);

/// Affine d -> Z projection of one node class.
Var transform_rows(Tape& tape, Var latent, TransformParams& params);

// ---------------------------------------------------------------------------
// Value-level pipeline (full graph, no gradients): the contract mirrored by
// snapshot freezing and unit tests.

struct ViewBundle {
  Matrix student_right, student_wrong, student_concept;  // N x d
  Matrix right_student, right_concept;                   // M x d
  Matrix wrong_student, wrong_concept;                   // M x d
  Matrix concept_right, concept_wrong, concept_student;  // Z x d
};

ViewBundle aggregate(const StudentCenteredGraph& g, ParameterStore& store,
                     const AggregationConfig& cfg,
                     std::mt19937_64* rng = nullptr);

struct GeneratedLatents {
  Matrix student, right, wrong, concepts;
};
GeneratedLatents generate(const ViewBundle& views, ParameterStore& store);

struct TransformedReps {
  Matrix student, exercise, concepts;  // width Z
};
TransformedReps transform(const Matrix& h_student, const Matrix& h_right,
                          const Matrix& h_wrong, const Matrix& h_concept,
                          ParameterStore& store);

}  // namespace icdm
