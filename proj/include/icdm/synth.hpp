#pragma once

#include "icdm/config.hpp"
#include "icdm/dataio.hpp"
#include "icdm/types.hpp"

namespace icdm {

/// Ground-truth generator configuration: discrete mastery with guess/slip
/// response noise.
struct SynthConfig {
  int n_students = 100;
  int n_exercises = 20;
  int n_concepts = 5;
  double q_density = 2.0;  // mean concepts per exercise
  double guess = 0.0;
  double slip = 0.0;
  int logs_per_student = 10;
  std::uint64_t seed = 0;

  void validate() const;
  static SynthConfig from_config(const KeyValueConfig& kv);
};

struct SynthResult {
  Dataset dataset;
  BinaryMatrix true_mastery;  // students x concepts
};

/// Samples binary mastery (fair coin per student/concept), a Q-matrix with
/// `q_density` mean concepts per exercise, and per-student exercise samples
/// answered right with probability 1-slip when every tagged concept is
/// mastered, `guess` otherwise.
SynthResult generate(const SynthConfig& cfg);

void save_truth_csv(const SynthResult& result, const std::string& path);

}  // namespace icdm
