#pragma once

#include "icdm/cagt.hpp"
#include "icdm/dataio.hpp"
#include "icdm/graph.hpp"
#include "icdm/params.hpp"
#include "icdm/types.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace icdm {

/// Frozen model: every trained tensor plus the derived tables inductive
/// inference needs, the graph statistics, Q-matrix, id mapping and a config
/// echo. Self-contained: inference never rereads training logs.
///
/// Serialized as a little-endian binary blob with a JSON header (shapes,
/// names, counts); round-trips bit-exactly.
struct ModelSnapshot {
  int n_students = 0;
  int n_exercises = 0;
  int n_concepts = 0;
  int dim = 0;
  int depth = 0;
  Scalar alpha = 0;
  Scalar beta = 0;
  IFKind if_kind = IFKind::Glif;
  int mlp_hidden1 = 0;
  int mlp_hidden2 = 0;

  IdMap ids;
  QMatrix q;
  std::vector<int> student_degree;   // bipartite degrees over training logs
  std::vector<int> exercise_degree;
  std::map<std::string, std::string> config_echo;

  // Trained parameters plus derived tables, keyed by name. Derived keys:
  //   agg_right_exercise_<k>, agg_wrong_exercise_<k>, agg_desired_concept_<k>
  //     for k = 0..depth-1 (frozen per-depth aggregates consumed by new
  //     students' views),
  //   latent_exercise_d (h_r ⊙ h_w), mas_z, diff_z,
  //   glif_con, glif_prop_student, glif_prop_exercise (GLIF only).
  std::map<std::string, Matrix> tensors;

  const Matrix& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const { return tensors.count(name) != 0; }

  std::vector<std::uint8_t> serialize() const;
  static ModelSnapshot deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::string& path) const;
  static ModelSnapshot load(const std::string& path);

  /// FNV-1a over the serialized bytes; the immutability witness used by the
  /// inductive-inference guarantees.
  std::uint64_t content_hash() const;
};

/// Runs the dropout-free pipeline over the full training graph and packages
/// parameters, derived tables and metadata into a snapshot.
ModelSnapshot freeze(ParameterStore& store, const StudentCenteredGraph& g,
                     const BipartiteGraph& g_se, const Dataset& train_ds,
                     const AggregationConfig& agg,
                     const std::map<std::string, std::string>& config_echo);

/// Predictions for trained students straight from the frozen tables.
/// Targets are (dense student, dense exercise) pairs.
std::vector<Scalar> snapshot_predict(
    const ModelSnapshot& snap, const std::vector<std::pair<int, int>>& targets);

/// Reported mastery profile of the trained students: sigmoid of the frozen
/// Z-wide mastery rows.
Matrix snapshot_mastery(const ModelSnapshot& snap);

}  // namespace icdm
