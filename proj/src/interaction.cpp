#include "icdm/interaction.hpp"
#include <algorithm>

#include <cmath>

namespace icdm {

namespace {

Scalar sigmoid_scalar(Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); }

RowVector affine_sigmoid(const RowVector& x, const Matrix& w, const Matrix& b) {
  RowVector y = x * w + b.row(0);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = sigmoid_scalar(y(i));
  return y;
}

}  // namespace

InteractionFunction InteractionFunction::from(const ParameterStore& store) {
  switch (store.if_kind) {
    case IFKind::Mirt:
      return mirt(store.mirt.discrimination.value, store.mirt.bias.value);
    case IFKind::MonoMlp:
    case IFKind::Glif:
      return mono_mlp(store.mlp.w1.value, store.mlp.b1.value, store.mlp.w2.value,
                      store.mlp.b2.value, store.mlp.w3.value, store.mlp.b3.value,
                      store.if_kind);
  }
  throw UsageError("unreachable interaction kind");
}

InteractionFunction InteractionFunction::mirt(const Matrix& discrimination,
                                              const Matrix& bias) {
  InteractionFunction f;
  f.kind_ = IFKind::Mirt;
  f.discrimination_ = &discrimination;
  f.mirt_bias_ = &bias;
  return f;
}

InteractionFunction InteractionFunction::mono_mlp(const Matrix& w1, const Matrix& b1,
                                                  const Matrix& w2, const Matrix& b2,
                                                  const Matrix& w3, const Matrix& b3,
                                                  IFKind kind) {
  InteractionFunction f;
  f.kind_ = kind;
  f.w1_ = &w1;
  f.b1_ = &b1;
  f.w2_ = &w2;
  f.b2_ = &b2;
  f.w3_ = &w3;
  f.b3_ = &b3;
  return f;
}

Scalar InteractionFunction::predict(const RowVector& mastery,
                                    const RowVector& difficulty,
                                    const RowVector& q_mask) const {
  if (mastery.size() != difficulty.size() || mastery.size() != q_mask.size()) {
    throw UsageError("predict: row widths differ");
  }
  if (q_mask.maxCoeff() <= Scalar(0)) {
    throw ValidationError("predict: q-mask selects no concept");
  }
  const RowVector masked = (mastery - difficulty).cwiseProduct(q_mask);
  Scalar z;
  if (kind_ == IFKind::Mirt) {
    z = (masked * (*discrimination_))(0) + (*mirt_bias_)(0, 0);
  } else {
    const RowVector h1 = affine_sigmoid(masked, *w1_, *b1_);
    const RowVector h2 = affine_sigmoid(h1, *w2_, *b2_);
    z = (h2 * (*w3_))(0) + (*b3_)(0, 0);
  }
  const Scalar p = sigmoid_scalar(z);
  if (!std::isfinite(p)) throw NumericError("non-finite output of op `predict`");
  // The sigmoid saturates to exactly 0/1 in floating point for |z| beyond
  // ~37; keep the documented open interval.
  return std::clamp(p, Scalar(1e-12), Scalar(1) - Scalar(1e-12));
}

Var predict_batch(Tape& tape, ParameterStore& store, Var mastery_rows,
                  Var difficulty_rows, Var q_mask_rows) {
  Var masked = hadamard(sub(mastery_rows, difficulty_rows), q_mask_rows);
  if (store.if_kind == IFKind::Mirt) {
    Var z = add_rowvec(matmul(masked, tape.leaf(store.mirt.discrimination)),
                       tape.leaf(store.mirt.bias));
    return sigmoid(z);
  }
  Var h1 = sigmoid(add_rowvec(matmul(masked, tape.leaf(store.mlp.w1)),
                              tape.leaf(store.mlp.b1)));
  Var h2 = sigmoid(add_rowvec(matmul(h1, tape.leaf(store.mlp.w2)),
                              tape.leaf(store.mlp.b2)));
  Var z = add_rowvec(matmul(h2, tape.leaf(store.mlp.w3)), tape.leaf(store.mlp.b3));
  return sigmoid(z);
}

GlifLift glif_lift(const BipartiteGraph& g_se, const Matrix& h_student,
                   const Matrix& h_exercise, const Matrix& h_concept,
                   const QMatrix& q) {
  const int n_students = g_se.student_exercise.nodes();
  const int n_exercises = g_se.exercise_student.nodes();
  if (h_student.rows() != n_students || h_exercise.rows() != n_exercises ||
      h_concept.rows() != q.concepts() || q.exercises() != n_exercises) {
    throw ValidationError("glif_lift: shape mismatch");
  }
  GlifLift out;
  out.concept_average = Matrix::Zero(n_exercises, h_concept.cols());
  for (int j = 0; j < n_exercises; ++j) {
    const auto& cs = q.concepts_of(j);
    for (int z : cs) out.concept_average.row(j) += h_concept.row(z);
    out.concept_average.row(j) /= Scalar(cs.size());
  }

  out.propagated_student = h_student;
  for (int i = 0; i < n_students; ++i) {
    const int deg_i = g_se.student_degree(i);
    for (int j : g_se.student_exercise.neighbors(i)) {
      const Scalar c = Scalar(1) / std::sqrt(Scalar(deg_i) * Scalar(g_se.exercise_degree(j)));
      out.propagated_student.row(i) += c * h_exercise.row(j);
    }
    out.propagated_student.row(i) *= Scalar(0.5);
  }

  out.propagated_exercise = h_exercise;
  for (int j = 0; j < n_exercises; ++j) {
    const int deg_j = g_se.exercise_degree(j);
    for (int i : g_se.exercise_student.neighbors(j)) {
      const Scalar c = Scalar(1) / std::sqrt(Scalar(deg_j) * Scalar(g_se.student_degree(i)));
      out.propagated_exercise.row(j) += c * h_student.row(i);
    }
    out.propagated_exercise.row(j) *= Scalar(0.5);
  }
  return out;
}

GlifLiftVars glif_lift_vars(Var h_student, Var h_exercise,
                            Var h_concept, const BipartiteGraph& g_se,
                            const QMatrix& q, const SubsetIndex& students,
                            const SubsetIndex& exercises,
                            const SubsetIndex& concepts,
                            const SubsetIndex& student_requests,
                            const SubsetIndex& exercise_requests) {
  GlifLiftVars out;
  {
    auto seg = std::make_shared<Segments>();
    for (int j : exercise_requests.items) {
      for (int z : q.concepts_of(j)) seg->sources.push_back(concepts.at(z));
      seg->offsets.push_back(static_cast<int>(seg->sources.size()));
    }
    out.concept_average = segment_mean(h_concept, std::move(seg));
  }
  {
    auto seg = std::make_shared<Segments>();
    std::vector<Scalar> w;
    std::vector<int> self_rows;
    for (int i : student_requests.items) {
      self_rows.push_back(students.at(i));
      const int deg_i = g_se.student_degree(i);
      for (int j : g_se.student_exercise.neighbors(i)) {
        seg->sources.push_back(exercises.at(j));
        w.push_back(Scalar(1) /
                    std::sqrt(Scalar(deg_i) * Scalar(g_se.exercise_degree(j))));
      }
      seg->offsets.push_back(static_cast<int>(seg->sources.size()));
    }
    Var sum = segment_weighted_sum(h_exercise, std::move(seg), std::move(w));
    Var self = row_gather(h_student, std::move(self_rows));
    out.propagated_student = scale(add(self, sum), Scalar(0.5));
  }
  {
    auto seg = std::make_shared<Segments>();
    std::vector<Scalar> w;
    std::vector<int> self_rows;
    for (int j : exercise_requests.items) {
      self_rows.push_back(exercises.at(j));
      const int deg_j = g_se.exercise_degree(j);
      for (int i : g_se.exercise_student.neighbors(j)) {
        seg->sources.push_back(students.at(i));
        w.push_back(Scalar(1) /
                    std::sqrt(Scalar(deg_j) * Scalar(g_se.student_degree(i))));
      }
      seg->offsets.push_back(static_cast<int>(seg->sources.size()));
    }
    Var sum = segment_weighted_sum(h_student, std::move(seg), std::move(w));
    Var self = row_gather(h_exercise, std::move(self_rows));
    out.propagated_exercise = scale(add(self, sum), Scalar(0.5));
  }
  return out;
}

}  // namespace icdm
