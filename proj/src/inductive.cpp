#include "icdm/inductive.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace icdm {

std::int64_t NewStudentBatch::total_logs() const {
  std::int64_t n = 0;
  for (const auto& l : logs_by_student) n += static_cast<std::int64_t>(l.size());
  return n;
}

NewStudentBatch NewStudentBatch::from_raw(const ModelSnapshot& snap,
                                          std::span<const RawLogTriple> triples) {
  std::map<long long, std::vector<std::pair<int, std::int8_t>>> grouped;
  for (const auto& t : triples) {
    auto it = snap.ids.exercise_dense.find(t.exercise);
    if (it == snap.ids.exercise_dense.end()) {
      throw ValidationError("unknown exercise id " + std::to_string(t.exercise));
    }
    grouped[t.student].push_back({it->second, static_cast<std::int8_t>(t.score)});
  }
  NewStudentBatch batch;
  for (auto& [raw, logs] : grouped) {
    std::sort(logs.begin(), logs.end());
    for (size_t i = 1; i < logs.size(); ++i) {
      if (logs[i].first == logs[i - 1].first) {
        throw ValidationError("duplicate log for (student " + std::to_string(raw) +
                              ", exercise " +
                              std::to_string(snap.ids.exercise_raw[logs[i].first]) +
                              ")");
      }
    }
    batch.raw_student_ids.push_back(raw);
    batch.logs_by_student.push_back(std::move(logs));
  }
  return batch;
}

NewStudentBatch NewStudentBatch::from_dataset(const ModelSnapshot& snap,
                                              const Dataset& ds) {
  std::vector<RawLogTriple> triples;
  triples.reserve(ds.logs.size());
  for (const auto& l : ds.logs) {
    triples.push_back(
        {ds.raw_student(l.student), ds.raw_exercise(l.exercise), l.score});
  }
  return from_raw(snap, triples);
}

namespace {

/// Per-student state derived from the snapshot's frozen tables.
struct NewStudentState {
  RowVector latent;       // width d, post-generation
  RowVector propagated;   // width d (GLIF only)
  RowVector mastery_z;    // width Z, pre-sigmoid
};

/// Read-only lens over the snapshot tensors the inference loop touches.
struct FrozenModel {
  const ModelSnapshot& snap;
  std::vector<const Matrix*> right_depth;    // k = 0..K-1
  std::vector<const Matrix*> wrong_depth;
  std::vector<const Matrix*> desired_depth;
  const Matrix *gen_attention, *gen_weight, *gen_bias;
  const Matrix *tf_s_weight, *tf_s_bias;
  const Matrix *latent_exercise, *con, *diff_z;
  InteractionFunction fn;

  explicit FrozenModel(const ModelSnapshot& s)
      : snap(s),
        gen_attention(&s.tensor("gen_student_attention")),
        gen_weight(&s.tensor("gen_student_weight")),
        gen_bias(&s.tensor("gen_student_bias")),
        tf_s_weight(&s.tensor("tf_student_weight")),
        tf_s_bias(&s.tensor("tf_student_bias")),
        latent_exercise(&s.tensor("latent_exercise_d")),
        con(s.if_kind == IFKind::Glif ? &s.tensor("glif_con") : nullptr),
        diff_z(&s.tensor("diff_z")),
        fn(s.if_kind == IFKind::Mirt
               ? InteractionFunction::mirt(s.tensor("if_mirt_discrimination"),
                                           s.tensor("if_mirt_bias"))
               : InteractionFunction::mono_mlp(
                     s.tensor("if_mlp_w1"), s.tensor("if_mlp_b1"),
                     s.tensor("if_mlp_w2"), s.tensor("if_mlp_b2"),
                     s.tensor("if_mlp_w3"), s.tensor("if_mlp_b3"), s.if_kind)) {
    for (int k = 0; k < s.depth; ++k) {
      right_depth.push_back(&s.tensor("agg_right_exercise_" + std::to_string(k)));
      wrong_depth.push_back(&s.tensor("agg_wrong_exercise_" + std::to_string(k)));
      desired_depth.push_back(&s.tensor("agg_desired_concept_" + std::to_string(k)));
    }
  }

  /// Eq.-2 accumulation with a zero self term: depth-k evidence is the mean of
  /// the neighbors' frozen depth-(k-1) rows.
  RowVector accumulate(const std::vector<const Matrix*>& depth_tables,
                       std::span<const int> nbrs) const {
    RowVector acc = RowVector::Zero(snap.dim);
    if (nbrs.empty()) return acc;
    const Scalar inv = Scalar(1) / Scalar(nbrs.size());
    for (int k = 1; k <= snap.depth; ++k) {
      const Matrix& table = *depth_tables[k - 1];
      RowVector mean = RowVector::Zero(snap.dim);
      for (int j : nbrs) mean += table.row(j);
      acc += (inv / Scalar(k + 1)) * mean;
    }
    return acc;
  }

  NewStudentState infer_state(
      const std::vector<std::pair<int, std::int8_t>>& logs) const {
    if (logs.empty()) {
      throw ValidationError("no evidence: student has zero logs");
    }
    std::vector<int> right, wrong, all;
    std::set<int> desired;
    for (const auto& [j, score] : logs) {
      (score ? right : wrong).push_back(j);
      all.push_back(j);
      for (int z : snap.q.concepts_of(j)) desired.insert(z);
    }
    const std::vector<int> desired_list(desired.begin(), desired.end());

    RowVector views[3];
    views[0] = accumulate(right_depth, right);
    views[1] = accumulate(wrong_depth, wrong);
    views[2] = accumulate(desired_depth, desired_list);

    // Generation: softmax-normalized attention weights over the three views.
    Scalar raw[3];
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (int v = 0; v < 3; ++v) {
      const RowVector t = (views[v] * (*gen_weight) + gen_bias->row(0)).array().tanh();
      raw[v] = (t * (*gen_attention))(0);
      mx = std::max(mx, raw[v]);
    }
    Scalar denom = 0;
    for (int v = 0; v < 3; ++v) {
      raw[v] = std::exp(raw[v] - mx);
      denom += raw[v];
    }
    NewStudentState st;
    st.latent = RowVector::Zero(snap.dim);
    for (int v = 0; v < 3; ++v) st.latent += (raw[v] / denom) * views[v];

    if (snap.if_kind == IFKind::Glif) {
      RowVector sum = RowVector::Zero(snap.dim);
      const Scalar deg_u = Scalar(logs.size());
      for (int j : all) {
        const Scalar c =
            Scalar(1) / std::sqrt(deg_u * Scalar(snap.exercise_degree[j]));
        sum += c * latent_exercise->row(j);
      }
      st.propagated = Scalar(0.5) * (st.latent + sum);
      st.mastery_z = st.propagated * (*tf_s_weight) + tf_s_bias->row(0);
    } else {
      st.mastery_z = st.latent * (*tf_s_weight) + tf_s_bias->row(0);
    }
    return st;
  }

  Scalar predict(const NewStudentState& st, int exercise) const {
    RowVector mas_row;
    if (snap.if_kind == IFKind::Glif) {
      const RowVector lifted = st.propagated.cwiseProduct(con->row(exercise));
      mas_row = lifted * (*tf_s_weight) + tf_s_bias->row(0);
    } else {
      mas_row = st.mastery_z;
    }
    return fn.predict(mas_row, diff_z->row(exercise), snap.q.mask_row(exercise));
  }
};

}  // namespace

MasteryProfile infer_mastery(const ModelSnapshot& snap, const NewStudentBatch& batch) {
  const FrozenModel model(snap);
  MasteryProfile profile;
  profile.values.resize(batch.students(), snap.n_concepts);
  for (int r = 0; r < batch.students(); ++r) {
    const NewStudentState st = model.infer_state(batch.logs_by_student[r]);
    profile.values.row(r) =
        (Scalar(1) / (Scalar(1) + (-st.mastery_z.array()).exp())).matrix();
  }
  return profile;
}

std::vector<Scalar> predict_new(const ModelSnapshot& snap,
                                const NewStudentBatch& batch,
                                std::span<const NewTarget> targets) {
  const FrozenModel model(snap);
  std::vector<NewStudentState> states(batch.students());
  std::vector<char> ready(batch.students(), 0);
  std::vector<Scalar> out;
  out.reserve(targets.size());
  for (const auto& t : targets) {
    if (t.batch_row < 0 || t.batch_row >= batch.students()) {
      throw UsageError("predict_new: target row out of range");
    }
    if (t.exercise < 0 || t.exercise >= snap.n_exercises) {
      throw ValidationError("unknown exercise id " + std::to_string(t.exercise));
    }
    if (!ready[t.batch_row]) {
      states[t.batch_row] = model.infer_state(batch.logs_by_student[t.batch_row]);
      ready[t.batch_row] = 1;
    }
    out.push_back(model.predict(states[t.batch_row], t.exercise));
  }
  return out;
}

}  // namespace icdm
