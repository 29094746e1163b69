#include "icdm/params.hpp"

#include "icdm/optim.hpp"

#include <cmath>

namespace icdm {

IFKind parse_if_kind(const std::string& name) {
  if (name == "mirt") return IFKind::Mirt;
  if (name == "mono_mlp") return IFKind::MonoMlp;
  if (name == "glif") return IFKind::Glif;
  throw ConfigError("unknown interaction function: " + name +
                    " (expected mirt|mono_mlp|glif)");
}

const char* to_string(IFKind kind) {
  switch (kind) {
    case IFKind::Mirt: return "mirt";
    case IFKind::MonoMlp: return "mono_mlp";
    case IFKind::Glif: return "glif";
  }
  return "?";
}

ParameterStore ParameterStore::init(int n_students, int n_exercises,
                                    int n_concepts, int dim, IFKind kind,
                                    int mlp_hidden1, int mlp_hidden2,
                                    std::uint64_t seed) {
  if (n_students < 0 || n_exercises <= 0 || n_concepts <= 0 || dim <= 0) {
    throw ConfigError("ParameterStore::init: non-positive dimensions");
  }
  ParameterStore s;
  s.n_students = n_students;
  s.n_exercises = n_exercises;
  s.n_concepts = n_concepts;
  s.dim = dim;
  s.if_kind = kind;

  std::uint64_t tick = 0;
  auto next = [&]() { return seed + 0x51ed2701ULL * ++tick; };
  auto xavier = [&](Eigen::Index r, Eigen::Index c) {
    return Tensor2(xavier_init(r, c, next()));
  };
  auto zeros = [](Eigen::Index r, Eigen::Index c) {
    return Tensor2(Matrix::Zero(r, c));
  };
  // Monotonicity-constrained tensors start inside the feasible orthant, with
  // the scale capped by the fan-in: all-positive weights accumulate rather
  // than cancel, and a plain Glorot draw saturates the wide sigmoid layers
  // before the first step.
  auto xavier_nonneg = [&](Eigen::Index r, Eigen::Index c) {
    const Scalar bound = std::min(std::sqrt(Scalar(6) / Scalar(r + c)),
                                  Scalar(4) / Scalar(r));
    Matrix m = xavier_init(r, c, next()).cwiseAbs();
    const Scalar xavier_bound = std::sqrt(Scalar(6) / Scalar(r + c));
    return Tensor2(m * (bound / xavier_bound));
  };

  // A zero-student store is legal (inductive-only contexts); Tensor2 still
  // needs a well-formed shape.
  s.h_student = n_students > 0 ? xavier(n_students, dim) : zeros(0, dim);
  s.h_right = xavier(n_exercises, dim);
  s.h_wrong = xavier(n_exercises, dim);
  s.h_concept = xavier(n_concepts, dim);

  for (GenerationParams* g : {&s.gen_student, &s.gen_right, &s.gen_wrong, &s.gen_concept}) {
    g->attention = xavier(dim, 1);
    g->weight = xavier(dim, dim);
    g->bias = zeros(1, dim);
  }
  for (TransformParams* t : {&s.tf_student, &s.tf_exercise, &s.tf_concept}) {
    t->weight = xavier(dim, n_concepts);
    t->bias = zeros(1, n_concepts);
  }

  switch (kind) {
    case IFKind::Mirt:
      s.mirt.discrimination = xavier_nonneg(n_concepts, 1);
      s.mirt.bias = zeros(1, 1);
      break;
    case IFKind::MonoMlp:
    case IFKind::Glif:
      if (mlp_hidden1 <= 0 || mlp_hidden2 <= 0) {
        throw ConfigError("MLP hidden widths must be positive");
      }
      s.mlp.hidden1 = mlp_hidden1;
      s.mlp.hidden2 = mlp_hidden2;
      s.mlp.w1 = xavier_nonneg(n_concepts, mlp_hidden1);
      s.mlp.b1 = zeros(1, mlp_hidden1);
      s.mlp.w2 = xavier_nonneg(mlp_hidden1, mlp_hidden2);
      s.mlp.b2 = zeros(1, mlp_hidden2);
      s.mlp.w3 = xavier_nonneg(mlp_hidden2, 1);
      s.mlp.b3 = zeros(1, 1);
      break;
  }
  return s;
}

std::vector<std::pair<std::string, Tensor2*>> ParameterStore::named_tensors() {
  std::vector<std::pair<std::string, Tensor2*>> out = {
      {"h_student", &h_student},
      {"h_right", &h_right},
      {"h_wrong", &h_wrong},
      {"h_concept", &h_concept},
  };
  auto add_gen = [&](const std::string& cls, GenerationParams& g) {
    out.push_back({"gen_" + cls + "_attention", &g.attention});
    out.push_back({"gen_" + cls + "_weight", &g.weight});
    out.push_back({"gen_" + cls + "_bias", &g.bias});
  };
  add_gen("student", gen_student);
  add_gen("right", gen_right);
  add_gen("wrong", gen_wrong);
  add_gen("concept", gen_concept);
  auto add_tf = [&](const std::string& cls, TransformParams& t) {
    out.push_back({"tf_" + cls + "_weight", &t.weight});
    out.push_back({"tf_" + cls + "_bias", &t.bias});
  };
  add_tf("student", tf_student);
  add_tf("exercise", tf_exercise);
  add_tf("concept", tf_concept);
  switch (if_kind) {
    case IFKind::Mirt:
      out.push_back({"if_mirt_discrimination", &mirt.discrimination});
      out.push_back({"if_mirt_bias", &mirt.bias});
      break;
    case IFKind::MonoMlp:
    case IFKind::Glif:
      out.push_back({"if_mlp_w1", &mlp.w1});
      out.push_back({"if_mlp_b1", &mlp.b1});
      out.push_back({"if_mlp_w2", &mlp.w2});
      out.push_back({"if_mlp_b2", &mlp.b2});
      out.push_back({"if_mlp_w3", &mlp.w3});
      out.push_back({"if_mlp_b3", &mlp.b3});
      break;
  }
  return out;
}

std::vector<Tensor2*> ParameterStore::tensors() {
  std::vector<Tensor2*> out;
  for (auto& [_, t] : named_tensors()) out.push_back(t);
  return out;
}

void ParameterStore::zero_grads() {
  for (Tensor2* t : tensors()) t->zero_grad();
}

void clamp_nonneg(ParameterStore& store) {
  switch (store.if_kind) {
    case IFKind::Mirt:
      store.mirt.discrimination.value = store.mirt.discrimination.value.cwiseMax(Scalar(0));
      break;
    case IFKind::MonoMlp:
    case IFKind::Glif:
      store.mlp.w1.value = store.mlp.w1.value.cwiseMax(Scalar(0));
      store.mlp.w2.value = store.mlp.w2.value.cwiseMax(Scalar(0));
      store.mlp.w3.value = store.mlp.w3.value.cwiseMax(Scalar(0));
      break;
  }
}

}  // namespace icdm
