#include "icdm/graph.hpp"

#include <algorithm>

namespace icdm {

Adjacency Adjacency::from_pairs(int n_nodes, std::vector<std::pair<int, int>> edges) {
  std::sort(edges.begin(), edges.end());
  Adjacency adj;
  adj.offsets.assign(n_nodes + 1, 0);
  adj.targets.reserve(edges.size());
  for (const auto& [src, dst] : edges) {
    ++adj.offsets[src + 1];
    adj.targets.push_back(dst);
  }
  for (int i = 0; i < n_nodes; ++i) adj.offsets[i + 1] += adj.offsets[i];
  return adj;
}

const char* to_string(NodeClass c) {
  switch (c) {
    case NodeClass::Student: return "student";
    case NodeClass::RightExercise: return "right_exercise";
    case NodeClass::WrongExercise: return "wrong_exercise";
    case NodeClass::Concept: return "concept";
  }
  return "?";
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::Right: return "right";
    case Relation::Wrong: return "wrong";
    case Relation::Related: return "related";
    case Relation::Desired: return "desired";
  }
  return "?";
}

BinaryMatrix build_involvement(const RatingMatrix& r, const QMatrix& q) {
  if (r.exercises() != q.exercises()) {
    throw ValidationError("rating matrix has " + std::to_string(r.exercises()) +
                          " exercises but Q-matrix has " +
                          std::to_string(q.exercises()));
  }
  BinaryMatrix inv = BinaryMatrix::Zero(r.students(), q.concepts());
  for (int i = 0; i < r.students(); ++i) {
    for (const auto& [j, _] : r.row(i)) {
      for (int z : q.concepts_of(j)) inv(i, z) = 1;
    }
  }
  return inv;
}

StudentCenteredGraph build_scg(const RatingMatrix& r, const QMatrix& q,
                               const BinaryMatrix& involvement) {
  if (r.exercises() != q.exercises()) {
    throw ValidationError("rating/Q shape mismatch in build_scg");
  }
  if (involvement.rows() != r.students() || involvement.cols() != q.concepts()) {
    throw ValidationError("involvement matrix shape mismatch in build_scg");
  }

  StudentCenteredGraph g;
  g.n_students = r.students();
  g.n_exercises = r.exercises();
  g.n_concepts = q.concepts();

  std::vector<std::pair<int, int>> right, wrong;
  for (int i = 0; i < r.students(); ++i) {
    for (const auto& [j, v] : r.row(i)) {
      (v > 0 ? right : wrong).push_back({i, j});
    }
  }
  auto flipped = [](const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::pair<int, int>> out;
    out.reserve(edges.size());
    for (const auto& [a, b] : edges) out.push_back({b, a});
    return out;
  };
  g.student_right = Adjacency::from_pairs(g.n_students, right);
  g.right_student = Adjacency::from_pairs(g.n_exercises, flipped(right));
  g.student_wrong = Adjacency::from_pairs(g.n_students, wrong);
  g.wrong_student = Adjacency::from_pairs(g.n_exercises, flipped(wrong));

  // Each Q association is duplicated across both exercise node classes.
  std::vector<std::pair<int, int>> related;
  for (int j = 0; j < q.exercises(); ++j) {
    for (int z : q.concepts_of(j)) related.push_back({j, z});
  }
  g.right_concept = Adjacency::from_pairs(g.n_exercises, related);
  g.concept_right = Adjacency::from_pairs(g.n_concepts, flipped(related));
  g.wrong_concept = g.right_concept;
  g.concept_wrong = g.concept_right;

  std::vector<std::pair<int, int>> desired;
  for (int i = 0; i < involvement.rows(); ++i) {
    for (int z = 0; z < involvement.cols(); ++z) {
      if (involvement(i, z)) desired.push_back({i, z});
    }
  }
  g.student_concept = Adjacency::from_pairs(g.n_students, desired);
  g.concept_student = Adjacency::from_pairs(g.n_concepts, flipped(desired));
  return g;
}

std::span<const int> neighbors(const StudentCenteredGraph& g, NodeClass cls,
                               int index, Relation relation) {
  auto bad = [&]() -> std::span<const int> {
    throw UsageError(std::string("relation `") + to_string(relation) +
                     "` does not apply to node class `" + to_string(cls) + "`");
  };
  switch (cls) {
    case NodeClass::Student:
      if (index < 0 || index >= g.n_students) throw UsageError("student index out of range");
      switch (relation) {
        case Relation::Right: return g.student_right.neighbors(index);
        case Relation::Wrong: return g.student_wrong.neighbors(index);
        case Relation::Desired: return g.student_concept.neighbors(index);
        default: return bad();
      }
    case NodeClass::RightExercise:
      if (index < 0 || index >= g.n_exercises) throw UsageError("exercise index out of range");
      switch (relation) {
        case Relation::Right: return g.right_student.neighbors(index);
        case Relation::Related: return g.right_concept.neighbors(index);
        default: return bad();
      }
    case NodeClass::WrongExercise:
      if (index < 0 || index >= g.n_exercises) throw UsageError("exercise index out of range");
      switch (relation) {
        case Relation::Wrong: return g.wrong_student.neighbors(index);
        case Relation::Related: return g.wrong_concept.neighbors(index);
        default: return bad();
      }
    case NodeClass::Concept:
      if (index < 0 || index >= g.n_concepts) throw UsageError("concept index out of range");
      switch (relation) {
        case Relation::Right: return g.concept_right.neighbors(index);
        case Relation::Wrong: return g.concept_wrong.neighbors(index);
        case Relation::Desired: return g.concept_student.neighbors(index);
        default: return bad();
      }
  }
  return bad();
}

BipartiteGraph build_bipartite(const RatingMatrix& r) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<size_t>(r.nnz()));
  for (int i = 0; i < r.students(); ++i) {
    for (const auto& [j, _] : r.row(i)) edges.push_back({i, j});
  }
  BipartiteGraph g;
  g.student_exercise = Adjacency::from_pairs(r.students(), edges);
  std::vector<std::pair<int, int>> flipped;
  flipped.reserve(edges.size());
  for (const auto& [i, j] : edges) flipped.push_back({j, i});
  g.exercise_student = Adjacency::from_pairs(r.exercises(), flipped);
  return g;
}

}  // namespace icdm
