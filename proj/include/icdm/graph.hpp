#pragma once

#include "icdm/dataio.hpp"
#include "icdm/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace icdm {

/// Compressed sparse adjacency: neighbor lists of `targets` delimited by
/// `offsets` (size = node count + 1). Neighbor lists are sorted by index.
struct Adjacency {
  std::vector<int> offsets{0};
  std::vector<int> targets;

  int nodes() const { return static_cast<int>(offsets.size()) - 1; }
  int degree(int node) const { return offsets[node + 1] - offsets[node]; }
  std::span<const int> neighbors(int node) const {
    return {targets.data() + offsets[node],
            static_cast<size_t>(degree(node))};
  }

  static Adjacency from_pairs(int n_nodes, std::vector<std::pair<int, int>> edges);
};

enum class NodeClass { Student, RightExercise, WrongExercise, Concept };

enum class Relation { Right, Wrong, Related, Desired };

const char* to_string(NodeClass c);
const char* to_string(Relation r);

/// Binary student-by-concept matrix: 1 iff the student practiced at least one
/// exercise tagged with the concept.
BinaryMatrix build_involvement(const RatingMatrix& r, const QMatrix& q);

/// Heterogeneous graph over students, right-pattern exercise nodes,
/// wrong-pattern exercise nodes, and concepts. Immutable after construction;
/// adjacency is stored in both directions for every relation.
struct StudentCenteredGraph {
  int n_students = 0;
  int n_exercises = 0;
  int n_concepts = 0;

  Adjacency student_right;    // S -> E_R
  Adjacency right_student;    // E_R -> S
  Adjacency student_wrong;    // S -> E_W
  Adjacency wrong_student;    // E_W -> S
  Adjacency right_concept;    // E_R -> C
  Adjacency concept_right;    // C -> E_R
  Adjacency wrong_concept;    // E_W -> C
  Adjacency concept_wrong;    // C -> E_W
  Adjacency student_concept;  // S -> C
  Adjacency concept_student;  // C -> S

  std::int64_t right_edges() const { return static_cast<std::int64_t>(student_right.targets.size()); }
  std::int64_t wrong_edges() const { return static_cast<std::int64_t>(student_wrong.targets.size()); }
  std::int64_t desired_edges() const { return static_cast<std::int64_t>(student_concept.targets.size()); }
};

StudentCenteredGraph build_scg(const RatingMatrix& r, const QMatrix& q,
                               const BinaryMatrix& involvement);

/// Neighbor list of (`cls`, `index`) along `relation`; throws UsageError when
/// the relation does not apply to the node class.
std::span<const int> neighbors(const StudentCenteredGraph& g, NodeClass cls,
                               int index, Relation relation);

/// Student-exercise bipartite graph over all observed interactions regardless
/// of score; the substrate of the global-level interaction function.
struct BipartiteGraph {
  Adjacency student_exercise;
  Adjacency exercise_student;

  int student_degree(int s) const { return student_exercise.degree(s); }
  int exercise_degree(int e) const { return exercise_student.degree(e); }
};

BipartiteGraph build_bipartite(const RatingMatrix& r);

}  // namespace icdm
