#pragma once

#include "icdm/cagt.hpp"
#include "icdm/config.hpp"
#include "icdm/dataio.hpp"
#include "icdm/graph.hpp"
#include "icdm/interaction.hpp"
#include "icdm/params.hpp"
#include "icdm/snapshot.hpp"
#include "icdm/types.hpp"

#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>

namespace icdm {

struct TrainConfig {
  int batch_size = 128;
  int epochs = 60;
  Scalar learning_rate = Scalar(2e-3);
  Scalar lambda_reg = Scalar(1e-4);
  int patience = 10;
  std::uint64_t seed = 0;
  int depth = 3;  // K
  Scalar alpha = Scalar(0.1);
  Scalar beta = Scalar(0.2);
  int dim = 64;
  IFKind if_kind = IFKind::Glif;
  int mlp_hidden1 = 512;
  int mlp_hidden2 = 256;
  double valid_fraction = 0.1;  // carved from train when no valid set is given

  void validate() const;
  static TrainConfig from_config(const KeyValueConfig& kv);
  std::map<std::string, std::string> echo() const;
  AggregationConfig aggregation(bool training) const;
};

struct EpochRecord {
  int epoch = 0;
  Scalar train_loss = 0;  // summed BCE + regularization over the epoch
  Scalar train_bce = 0;
  double valid_auc = 0;   // NaN when undefined
  double valid_acc = 0;
  double valid_rmse = 0;
};
using ProgressFn = std::function<void(const EpochRecord&)>;

/// Ω(H⁰) = squared entry norm of the concatenated embedding block divided by
/// (students + exercises).
Var embedding_penalty(const EmbeddingLeaves& emb, std::int64_t n_students,
                      std::int64_t n_exercises);

/// Summed BCE plus lambda * Ω; the per-batch training objective.
Var training_loss(Var preds, const std::vector<std::int8_t>& labels,
                  const EmbeddingLeaves& emb, Scalar lambda_reg,
                  std::int64_t n_students, std::int64_t n_exercises);

/// Tape forward for one log list: restricted aggregation, generation,
/// transformation and the configured interaction function. Rows of the result
/// align with `logs`. `rng` is required in training mode (neighbor dropout).
struct ForwardResult {
  Var predictions;       // |logs| x 1
  EmbeddingLeaves leaves;
};
ForwardResult forward_logs(Tape& tape, ParameterStore& store,
                           const StudentCenteredGraph& g,
                           const BipartiteGraph& g_se, const QMatrix& q,
                           std::span<const ResponseLog> logs,
                           const AggregationConfig& cfg,
                           std::mt19937_64* rng = nullptr);

/// Dropout-free predictions for a log list under the current parameters.
std::vector<Scalar> predict_logs(ParameterStore& store,
                                 const StudentCenteredGraph& g,
                                 const BipartiteGraph& g_se, const QMatrix& q,
                                 std::span<const ResponseLog> logs,
                                 const AggregationConfig& cfg);

/// Mini-batch training over the SCG built from ds_train's logs. When
/// `ds_valid` is null and valid_fraction > 0, a holdout is carved from
/// ds_train first (the graph then excludes it). Keeps the best-by-AUC
/// parameters and stops after `patience` epochs without improvement.
ModelSnapshot train(const Dataset& ds_train, const Dataset* ds_valid,
                    const TrainConfig& cfg, const ProgressFn& progress = {});

}  // namespace icdm
