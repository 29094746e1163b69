#pragma once

#include "icdm/dataio.hpp"
#include "icdm/interaction.hpp"
#include "icdm/snapshot.hpp"
#include "icdm/types.hpp"

#include <span>
#include <vector>

namespace icdm {

/// Response logs of students unseen during training, keyed to a snapshot's
/// exercise universe. Construction validates exercise ids and per-student
/// uniqueness; students appear in ascending raw-id order.
struct NewStudentBatch {
  std::vector<long long> raw_student_ids;
  // Per student, sorted by exercise: (dense exercise id, score).
  std::vector<std::vector<std::pair<int, std::int8_t>>> logs_by_student;

  int students() const { return static_cast<int>(raw_student_ids.size()); }
  std::int64_t total_logs() const;

  static NewStudentBatch from_raw(const ModelSnapshot& snap,
                                  std::span<const RawLogTriple> triples);
  /// Treats a dataset's raw student ids as new students.
  static NewStudentBatch from_dataset(const ModelSnapshot& snap, const Dataset& ds);
};

/// Mastery rows for every student in the batch, computed from their logs and
/// the snapshot's frozen tables alone; the snapshot is never written.
/// Row r corresponds to batch.raw_student_ids[r].
MasteryProfile infer_mastery(const ModelSnapshot& snap, const NewStudentBatch& batch);

/// Prediction target: (row into the batch, dense exercise id).
struct NewTarget {
  int batch_row = 0;
  int exercise = 0;
};

std::vector<Scalar> predict_new(const ModelSnapshot& snap,
                                const NewStudentBatch& batch,
                                std::span<const NewTarget> targets);

}  // namespace icdm
