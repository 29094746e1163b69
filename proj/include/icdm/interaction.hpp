#pragma once

#include "icdm/autodiff.hpp"
#include "icdm/cagt.hpp"
#include "icdm/graph.hpp"
#include "icdm/params.hpp"
#include "icdm/types.hpp"

#include <span>
#include <vector>

namespace icdm {

/// Per-student mastery over the Z concepts, entries in [0,1].
struct MasteryProfile {
  Matrix values;

  int students() const { return static_cast<int>(values.rows()); }
  int concepts() const { return static_cast<int>(values.cols()); }
};

/// Non-owning view over interaction-function parameter matrices, so snapshot
/// and live-store call sites share one prediction path.
class InteractionFunction {
 public:
  static InteractionFunction from(const ParameterStore& store);
  static InteractionFunction mirt(const Matrix& discrimination, const Matrix& bias);
  static InteractionFunction mono_mlp(const Matrix& w1, const Matrix& b1,
                                      const Matrix& w2, const Matrix& b2,
                                      const Matrix& w3, const Matrix& b3,
                                      IFKind kind = IFKind::MonoMlp);

  IFKind kind() const { return kind_; }

  /// Probability that the student answers the exercise right, from the
  /// masked mastery/difficulty difference. q_mask must select >= 1 concept.
  Scalar predict(const RowVector& mastery, const RowVector& difficulty,
                 const RowVector& q_mask) const;

 private:
  InteractionFunction() = default;
  IFKind kind_ = IFKind::Mirt;
  const Matrix* discrimination_ = nullptr;
  const Matrix* mirt_bias_ = nullptr;
  const Matrix *w1_ = nullptr, *b1_ = nullptr;
  const Matrix *w2_ = nullptr, *b2_ = nullptr;
  const Matrix *w3_ = nullptr, *b3_ = nullptr;
};

/// Tape-level batched prediction: rows of mastery/difficulty (B x Z) and the
/// matching q-mask rows produce B x 1 probabilities.
Var predict_batch(Tape& tape, ParameterStore& store, Var mastery_rows,
                  Var difficulty_rows, Var q_mask_rows);

/// Width-d global-level context: LightGCN-style propagated student/exercise
/// vectors and per-exercise averaged concept vectors.
struct GlifLift {
  Matrix propagated_student;   // rows follow the student latents
  Matrix propagated_exercise;  // rows follow the exercise latents
  Matrix concept_average;      // per exercise: mean of its concepts' latents
};

/// Value-level lift over the full bipartite graph (Eq.-level contract used by
/// tests and snapshot freezing).
GlifLift glif_lift(const BipartiteGraph& g_se, const Matrix& h_student,
                   const Matrix& h_exercise, const Matrix& h_concept,
                   const QMatrix& q);

/// Tape-level lift over compact subsets. Rows of `h_student` follow
/// students.items (likewise exercises/concepts). Propagated rows are produced
/// only for the request subsets; the latent subsets must cover one bipartite
/// hop around the requests (and the requests' tagged concepts).
struct GlifLiftVars {
  Var propagated_student;   // rows follow student_requests.items
  Var propagated_exercise;  // rows follow exercise_requests.items
  Var concept_average;      // rows follow exercise_requests.items
};
GlifLiftVars glif_lift_vars(Var h_student, Var h_exercise,
                            Var h_concept, const BipartiteGraph& g_se,
                            const QMatrix& q, const SubsetIndex& students,
                            const SubsetIndex& exercises,
                            const SubsetIndex& concepts,
                            const SubsetIndex& student_requests,
                            const SubsetIndex& exercise_requests);

}  // namespace icdm
