#include "icdm/train.hpp"

#include "icdm/metrics.hpp"
#include "icdm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace icdm {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(lambda_reg >= 0 && lambda_reg <= 1)) {
    throw ConfigError("lambda_reg must lie in [0, 1]");
  }
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (patience < 0) throw ConfigError("patience must be >= 0");
  if (dim < 1) throw ConfigError("embedding width must be >= 1");
  if (!(valid_fraction >= 0 && valid_fraction < 1)) {
    throw ConfigError("valid_fraction must lie in [0, 1)");
  }
  aggregation(false).validate();
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  TrainConfig c;
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.learning_rate = static_cast<Scalar>(kv.get_real("lr", c.learning_rate));
  c.lambda_reg = static_cast<Scalar>(kv.get_real("lambda_reg", c.lambda_reg));
  c.patience = static_cast<int>(kv.get_int("patience", c.patience));
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.depth = static_cast<int>(kv.get_int("k", c.depth));
  c.alpha = static_cast<Scalar>(kv.get_real("alpha", c.alpha));
  c.beta = static_cast<Scalar>(kv.get_real("beta", c.beta));
  c.dim = static_cast<int>(kv.get_int("d", c.dim));
  c.if_kind = parse_if_kind(kv.get_string("if", to_string(c.if_kind)));
  c.mlp_hidden1 = static_cast<int>(kv.get_int("mlp_hidden1", c.mlp_hidden1));
  c.mlp_hidden2 = static_cast<int>(kv.get_int("mlp_hidden2", c.mlp_hidden2));
  c.valid_fraction = kv.get_real("valid_fraction", c.valid_fraction);
  const std::string agg = kv.get_string("aggregator", "mean");
  if (agg != "mean") {
    throw ConfigError("unsupported aggregator: " + agg + " (only `mean` is built)");
  }
  c.validate();
  return c;
}

std::map<std::string, std::string> TrainConfig::echo() const {
  auto num = [](auto v) { return std::to_string(v); };
  return {
      {"batch_size", num(batch_size)},
      {"epochs", num(epochs)},
      {"lr", num(learning_rate)},
      {"lambda_reg", num(lambda_reg)},
      {"patience", num(patience)},
      {"seed", num(seed)},
      {"k", num(depth)},
      {"alpha", num(alpha)},
      {"beta", num(beta)},
      {"d", num(dim)},
      {"if", to_string(if_kind)},
      {"mlp_hidden1", num(mlp_hidden1)},
      {"mlp_hidden2", num(mlp_hidden2)},
      {"valid_fraction", num(valid_fraction)},
      {"aggregator", "mean"},
  };
}

AggregationConfig TrainConfig::aggregation(bool training) const {
  AggregationConfig a;
  a.depth = depth;
  a.alpha = alpha;
  a.beta = beta;
  a.training_mode = training;
  return a;
}

Var embedding_penalty(const EmbeddingLeaves& emb, std::int64_t n_students,
                      std::int64_t n_exercises) {
  const Var parts[] = {emb.student, emb.right, emb.wrong, emb.concepts};
  Var h0 = concat_rows(parts);
  return scale(sq_norm(h0), Scalar(1) / Scalar(n_students + n_exercises));
}

Var training_loss(Var preds, const std::vector<std::int8_t>& labels,
                  const EmbeddingLeaves& emb, Scalar lambda_reg,
                  std::int64_t n_students, std::int64_t n_exercises) {
  Var bce = bce_loss(preds, labels);
  if (lambda_reg == Scalar(0)) return bce;
  return add(bce, scale(embedding_penalty(emb, n_students, n_exercises),
                        lambda_reg));
}

ForwardResult forward_logs(Tape& tape, ParameterStore& store,
                           const StudentCenteredGraph& g,
                           const BipartiteGraph& g_se, const QMatrix& q,
                           std::span<const ResponseLog> logs,
                           const AggregationConfig& cfg, std::mt19937_64* rng) {
  if (logs.empty()) throw UsageError("forward_logs: empty log list");

  std::vector<int> batch_students, batch_exercises;
  batch_students.reserve(logs.size());
  batch_exercises.reserve(logs.size());
  for (const auto& l : logs) {
    batch_students.push_back(l.student);
    batch_exercises.push_back(l.exercise);
  }
  SubsetIndex student_req = SubsetIndex::of(g.n_students, batch_students);
  SubsetIndex exercise_req = SubsetIndex::of(g.n_exercises, batch_exercises);

  const bool glif = store.if_kind == IFKind::Glif;
  std::vector<int> concept_items;
  SubsetIndex students = student_req;
  SubsetIndex exercises = exercise_req;
  if (glif) {
    // The lift reaches one bipartite hop beyond the batch.
    std::vector<int> s_items = student_req.items;
    for (int j : exercise_req.items) {
      auto nbrs = g_se.exercise_student.neighbors(j);
      s_items.insert(s_items.end(), nbrs.begin(), nbrs.end());
    }
    std::vector<int> e_items = exercise_req.items;
    for (int i : student_req.items) {
      auto nbrs = g_se.student_exercise.neighbors(i);
      e_items.insert(e_items.end(), nbrs.begin(), nbrs.end());
    }
    students = SubsetIndex::of(g.n_students, std::move(s_items));
    exercises = SubsetIndex::of(g.n_exercises, std::move(e_items));
    for (int j : exercise_req.items) {
      const auto& cs = q.concepts_of(j);
      concept_items.insert(concept_items.end(), cs.begin(), cs.end());
    }
  }
  SubsetIndex concepts = SubsetIndex::of(g.n_concepts, std::move(concept_items));

  EmbeddingLeaves emb = make_embedding_leaves(tape, store);
  AggregateResult agg =
      aggregate_views(tape, emb, g, cfg, students, exercises, concepts, rng);
  CagtLatents latents = generate_latents(tape, agg.views, store);
  Var exercise_d = hadamard(latents.right, latents.wrong);

  std::vector<int> student_rows, exercise_rows;
  student_rows.reserve(logs.size());
  exercise_rows.reserve(logs.size());

  Var mas_rows, diff_rows;
  if (glif) {
    GlifLiftVars lift =
        glif_lift_vars(latents.student, exercise_d, latents.concepts, g_se, q,
                       students, exercises, concepts, student_req, exercise_req);
    for (const auto& l : logs) {
      student_rows.push_back(student_req.at(l.student));
      exercise_rows.push_back(exercise_req.at(l.exercise));
    }
    Var con_per_log = row_gather(lift.concept_average, exercise_rows);
    Var mas_d = hadamard(row_gather(lift.propagated_student, student_rows),
                         con_per_log);
    Var diff_d = hadamard(row_gather(lift.propagated_exercise, exercise_rows),
                          con_per_log);
    mas_rows = transform_rows(tape, mas_d, store.tf_student);
    diff_rows = transform_rows(tape, diff_d, store.tf_exercise);
  } else {
    for (const auto& l : logs) {
      student_rows.push_back(students.at(l.student));
      exercise_rows.push_back(exercises.at(l.exercise));
    }
    mas_rows = transform_rows(tape, row_gather(latents.student, student_rows),
                              store.tf_student);
    diff_rows = transform_rows(tape, row_gather(exercise_d, exercise_rows),
                               store.tf_exercise);
  }

  Matrix q_rows(static_cast<Eigen::Index>(logs.size()), q.concepts());
  for (size_t r = 0; r < logs.size(); ++r) {
    q_rows.row(static_cast<Eigen::Index>(r)) = q.mask_row(logs[r].exercise);
  }
  Var preds = predict_batch(tape, store, mas_rows, diff_rows,
                            tape.constant(std::move(q_rows)));
  return {preds, emb};
}

std::vector<Scalar> predict_logs(ParameterStore& store,
                                 const StudentCenteredGraph& g,
                                 const BipartiteGraph& g_se, const QMatrix& q,
                                 std::span<const ResponseLog> logs,
                                 const AggregationConfig& cfg) {
  AggregationConfig eval_cfg = cfg;
  eval_cfg.training_mode = false;
  Tape tape;
  ForwardResult f = forward_logs(tape, store, g, g_se, q, logs, eval_cfg);
  const Matrix& p = tape.value(f.predictions);
  std::vector<Scalar> out(p.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i) out[static_cast<size_t>(i)] = p(i, 0);
  return out;
}

ModelSnapshot train(const Dataset& ds_train, const Dataset* ds_valid,
                    const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();

  Dataset train_part = ds_train;
  Dataset valid_part;
  bool has_valid = false;
  if (ds_valid != nullptr && !ds_valid->logs.empty()) {
    valid_part = *ds_valid;
    has_valid = true;
  } else if (cfg.valid_fraction > 0) {
    SplitSpec spec;
    spec.mode = SplitSpec::Mode::Transductive;
    spec.test_fraction = cfg.valid_fraction;
    spec.seed = cfg.seed ^ 0x9e3779b9ULL;
    TransductiveSplit s = split_transductive(ds_train, spec);
    train_part = std::move(s.train);
    valid_part = std::move(s.test);
    has_valid = !valid_part.logs.empty();
  }
  if (train_part.logs.empty()) throw ValidationError("no training logs");

  const RatingMatrix rating = train_part.rating_matrix();
  const BinaryMatrix involvement = build_involvement(rating, train_part.q);
  const StudentCenteredGraph g = build_scg(rating, train_part.q, involvement);
  const BipartiteGraph g_se = build_bipartite(rating);

  ParameterStore store = ParameterStore::init(
      train_part.n_students, train_part.n_exercises, train_part.n_concepts,
      cfg.dim, cfg.if_kind, cfg.mlp_hidden1, cfg.mlp_hidden2, cfg.seed);
  AdamOptimizer adam({cfg.learning_rate});
  const std::vector<Tensor2*> tensors = store.tensors();

  std::mt19937_64 rng(cfg.seed ^ 0x2545F4914F6CDD1DULL);
  const AggregationConfig train_agg = cfg.aggregation(true);
  const AggregationConfig eval_agg = cfg.aggregation(false);

  std::vector<int> order(train_part.logs.size());
  std::iota(order.begin(), order.end(), 0);

  double best_metric = std::numeric_limits<double>::quiet_NaN();
  std::vector<Matrix> best_values;
  int epochs_since_best = 0;

  auto snapshot_values = [&]() {
    std::vector<Matrix> vals;
    vals.reserve(tensors.size());
    for (Tensor2* t : tensors) vals.push_back(t->value);
    return vals;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    Scalar epoch_loss = 0;
    Scalar epoch_bce = 0;
    for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const size_t end = std::min(order.size(), at + cfg.batch_size);
      std::vector<ResponseLog> batch;
      batch.reserve(end - at);
      std::vector<std::int8_t> labels;
      labels.reserve(end - at);
      for (size_t i = at; i < end; ++i) {
        batch.push_back(train_part.logs[order[i]]);
        labels.push_back(batch.back().score);
      }
      try {
        Tape tape;
        ForwardResult f = forward_logs(tape, store, g, g_se, train_part.q, batch,
                                       train_agg, &rng);
        Var bce = bce_loss(f.predictions, labels);
        Var loss = cfg.lambda_reg == Scalar(0)
                       ? bce
                       : add(bce, scale(embedding_penalty(f.leaves,
                                                          store.n_students,
                                                          store.n_exercises),
                                        cfg.lambda_reg));
        epoch_bce += tape.value(bce)(0, 0);
        epoch_loss += tape.value(loss)(0, 0);
        tape.backward(loss);
      } catch (const NumericError& e) {
        throw NumericError("training aborted at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(at / cfg.batch_size) +
                           ": " + e.what());
      }
      adam.step(tensors);
      clamp_nonneg(store);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss;
    rec.train_bce = epoch_bce;
    rec.valid_auc = std::numeric_limits<double>::quiet_NaN();
    rec.valid_acc = std::numeric_limits<double>::quiet_NaN();
    rec.valid_rmse = std::numeric_limits<double>::quiet_NaN();

    if (has_valid) {
      std::vector<Scalar> preds = predict_logs(store, g, g_se, train_part.q,
                                               valid_part.logs, eval_agg);
      std::vector<std::int8_t> labels;
      labels.reserve(valid_part.logs.size());
      for (const auto& l : valid_part.logs) labels.push_back(l.score);
      rec.valid_acc = accuracy(preds, labels);
      rec.valid_rmse = rmse(preds, labels);
      try {
        rec.valid_auc = auc(preds, labels);
      } catch (const ValidationError&) {
        // single-class holdout; AUC undefined
      }
      const double metric =
          std::isnan(rec.valid_auc) ? -rec.valid_rmse : rec.valid_auc;
      if (std::isnan(best_metric) || metric > best_metric) {
        best_metric = metric;
        best_values = snapshot_values();
        epochs_since_best = 0;
      } else if (++epochs_since_best >= cfg.patience && cfg.patience > 0) {
        if (progress) progress(rec);
        break;
      }
    }
    if (progress) progress(rec);
  }

  if (has_valid && !best_values.empty()) {
    for (size_t k = 0; k < tensors.size(); ++k) tensors[k]->value = best_values[k];
  }
  return freeze(store, g, g_se, train_part, eval_agg, cfg.echo());
}

}  // namespace icdm
