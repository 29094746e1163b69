#pragma once

#include "icdm/autodiff.hpp"
#include "icdm/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace icdm {

enum class IFKind { Mirt, MonoMlp, Glif };

IFKind parse_if_kind(const std::string& name);
const char* to_string(IFKind kind);

/// View-fusion parameters of one node class: attention column (d x 1),
/// projection (d x d) and bias (1 x d).
struct GenerationParams {
  Tensor2 attention;
  Tensor2 weight;
  Tensor2 bias;
};

/// Affine d -> Z map of one node class.
struct TransformParams {
  Tensor2 weight;
  Tensor2 bias;
};

struct MirtParams {
  Tensor2 discrimination;  // Z x 1, kept non-negative
  Tensor2 bias;            // 1 x 1
};

struct MonoMlpParams {
  int hidden1 = 0;
  int hidden2 = 0;
  Tensor2 w1, b1, w2, b2, w3, b3;  // hidden weights kept non-negative
};

/// Every trainable tensor of the model: the four embedding tables, the
/// per-class generation and transformation parameters, and the parameters of
/// the configured interaction function.
struct ParameterStore {
  int n_students = 0;
  int n_exercises = 0;
  int n_concepts = 0;
  int dim = 0;
  IFKind if_kind = IFKind::Glif;

  Tensor2 h_student;  // N x d
  Tensor2 h_right;    // M x d
  Tensor2 h_wrong;    // M x d
  Tensor2 h_concept;  // Z x d

  GenerationParams gen_student, gen_right, gen_wrong, gen_concept;
  TransformParams tf_student, tf_exercise, tf_concept;

  MirtParams mirt;    // sized only for IFKind::Mirt
  MonoMlpParams mlp;  // sized for MonoMlp and Glif

  static ParameterStore init(int n_students, int n_exercises, int n_concepts,
                             int dim, IFKind kind, int mlp_hidden1,
                             int mlp_hidden2, std::uint64_t seed);

  /// Stable (name, tensor) listing; ordering defines optimizer-state and
  /// snapshot layout.
  std::vector<std::pair<std::string, Tensor2*>> named_tensors();
  std::vector<Tensor2*> tensors();
  void zero_grads();

  /// Rows of the concatenated embedding block H_s | H_r | H_w | H_c.
  std::int64_t embedding_rows() const {
    return std::int64_t(n_students) + 2 * std::int64_t(n_exercises) + n_concepts;
  }
};

/// Projects the monotonicity-constrained weights onto the non-negative
/// orthant: MLP layer weights (MonoMlp/Glif) and the MIRT discrimination.
/// Biases are untouched. Called after every optimizer step.
void clamp_nonneg(ParameterStore& store);

}  // namespace icdm
