#pragma once

#include "icdm/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace icdm {

/// One graded attempt: (student, exercise, binary score). Indices are dense
/// 0-based; raw file ids live in the owning Dataset's IdMap.
struct ResponseLog {
  int student = 0;
  int exercise = 0;
  std::int8_t score = 0;  // 0 or 1
};

/// Binary exercise-by-concept tagging matrix, stored as sorted concept lists
/// per exercise. Every exercise must be tagged with at least one concept.
class QMatrix {
 public:
  QMatrix() = default;
  QMatrix(int n_exercises, int n_concepts, std::vector<std::vector<int>> rows);

  int exercises() const { return n_exercises_; }
  int concepts() const { return n_concepts_; }
  const std::vector<int>& concepts_of(int exercise) const;
  bool relates(int exercise, int concept_id) const;
  std::int64_t nnz() const;

  /// Dense 0/1 view (exercises x concepts).
  Matrix dense() const;
  RowVector mask_row(int exercise) const;

 private:
  int n_exercises_ = 0;
  int n_concepts_ = 0;
  std::vector<std::vector<int>> rows_;
};

/// Ternary student-by-exercise interaction matrix: +1 right, -1 wrong,
/// 0 unobserved. Sparse row storage, entries sorted by exercise.
class RatingMatrix {
 public:
  RatingMatrix() = default;
  RatingMatrix(int n_students, int n_exercises);

  int students() const { return n_students_; }
  int exercises() const { return n_exercises_; }
  std::int64_t nnz() const { return nnz_; }

  void set(int student, int exercise, int value);  // value in {+1,-1}
  int entry(int student, int exercise) const;      // {+1,0,-1}
  const std::vector<std::pair<int, std::int8_t>>& row(int student) const;

 private:
  int n_students_ = 0;
  int n_exercises_ = 0;
  std::int64_t nnz_ = 0;
  std::vector<std::vector<std::pair<int, std::int8_t>>> rows_;
};

/// Raw-id <-> dense-index mapping. Dense indices are the rank of the raw id
/// in sorted order, so mappings are reproducible from the input files alone.
struct IdMap {
  std::vector<long long> student_raw;   // dense -> raw
  std::vector<long long> exercise_raw;
  std::vector<long long> concept_raw;

  std::unordered_map<long long, int> student_dense;
  std::unordered_map<long long, int> exercise_dense;
  std::unordered_map<long long, int> concept_dense;

  void rebuild_lookup();
};

struct DatasetStats {
  int students = 0;
  int exercises = 0;
  int concepts = 0;
  std::int64_t logs = 0;
  double sparsity = 0.0;          // |T| / (|S| * |E|); 0 when undefined
  double avg_correct_rate = 0.0;  // mean score; 0 when no logs
  double q_density = 0.0;         // nnz(Q) / |E|
};

/// The triplet store plus Q-matrix; the source of every graph.
struct Dataset {
  int n_students = 0;
  int n_exercises = 0;
  int n_concepts = 0;
  std::vector<ResponseLog> logs;
  QMatrix q;
  IdMap ids;

  DatasetStats stats() const;
  RatingMatrix rating_matrix() const;

  long long raw_student(int dense) const { return ids.student_raw[dense]; }
  long long raw_exercise(int dense) const { return ids.exercise_raw[dense]; }
  long long raw_concept(int dense) const { return ids.concept_raw[dense]; }
};

struct SplitSpec {
  enum class Mode { Transductive, Inductive };
  Mode mode = Mode::Transductive;
  double test_fraction = 0.2;
  double p_n = 0.2;  // fraction of students treated as unseen (inductive only)
  std::uint64_t seed = 0;
};

struct TransductiveSplit {
  Dataset train;
  Dataset test;
};

/// Student-level split: observed students' training logs, unseen students'
/// training logs (evidence for inference), and the untouched test logs.
/// `train_observed` and `train_unseen` carry compacted student index spaces;
/// `test` keeps the parent's. Raw ids are the cross-partition join key.
struct InductiveSplit {
  Dataset train_observed;
  Dataset train_unseen;
  Dataset test;
  std::vector<int> unseen_students;  // parent-dense indices of S^U
};

/// Parse logs + Q-matrix CSVs, validate, and remap ids densely.
/// Logs CSV: header `student_id,exercise_id,score`. Q CSV: header
/// `exercise_id,concept_id`, one row per association.
Dataset load_dataset(const std::string& logs_path, const std::string& q_path);

/// Raw triple as written in a logs CSV (no remapping).
struct RawLogTriple {
  long long student = 0;
  long long exercise = 0;
  int score = 0;
};

/// Parse a logs CSV without an id universe; used when logs reference an
/// already-trained snapshot's exercises.
std::vector<RawLogTriple> load_logs_csv(const std::string& path);

TransductiveSplit split_transductive(const Dataset& ds, const SplitSpec& spec);
InductiveSplit split_inductive(const Dataset& ds, const SplitSpec& spec);

void save_logs_csv(const Dataset& ds, const std::string& path);
void save_q_csv(const Dataset& ds, const std::string& path);

}  // namespace icdm
