#pragma once

#include "icdm/dataio.hpp"
#include "icdm/interaction.hpp"
#include "icdm/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace icdm {

struct EvalReport {
  double auc = 0;
  double acc = 0;
  double rmse = 0;
  std::optional<double> doa;
  std::optional<double> doa_at_10;
  std::optional<double> inconsistency;
  std::int64_t n_predictions = 0;
};

/// Mann-Whitney rank statistic; ties between opposite classes count 1/2.
/// Throws ValidationError unless both classes are present.
double auc(std::span<const Scalar> preds, std::span<const std::int8_t> labels);

/// Fraction of predictions on the correct side of 0.5.
double accuracy(std::span<const Scalar> preds, std::span<const std::int8_t> labels);

/// Root mean squared error of raw probabilities against {0,1} labels.
double rmse(std::span<const Scalar> preds, std::span<const std::int8_t> labels);

/// Degree of agreement between mastery orderings and response outcomes,
/// averaged over `concepts`. For a concept, ordered student pairs with
/// strictly greater mastery contribute the fraction of commonly-answered
/// concept exercises where the higher-mastery student was right and the other
/// wrong, among those where their responses differ; pairs without such an
/// exercise are skipped. Concepts with no contributing pair are omitted;
/// throws when every listed concept is omitted. Mas rows are indexed by the
/// logs' dense student ids.
double doa(const Matrix& mastery, std::span<const ResponseLog> logs,
           const QMatrix& q, std::span<const int> concepts, int threads = 1);

/// doa restricted to the 10 concepts with the most associated logs
/// (ties break toward the lower concept index); uses all log-bearing concepts
/// when fewer than 10 exist.
double doa_at_10(const Matrix& mastery, std::span<const ResponseLog> logs,
                 const QMatrix& q, int threads = 1);

/// Mean L1 gap between each student's mastery row and that of their most
/// log-similar peer (cosine over rating rows, ties toward the lower index),
/// normalized by the concept count. Students with empty rating rows are
/// skipped and the mean renormalized.
double inconsistency(const Matrix& mastery, const RatingMatrix& ratings);

}  // namespace icdm
