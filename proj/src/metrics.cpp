#include "icdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace icdm {

namespace {

void check_lengths(std::span<const Scalar> preds, std::span<const std::int8_t> labels) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw UsageError("metric inputs must be equal-length and non-empty");
  }
}

}  // namespace

double auc(std::span<const Scalar> preds, std::span<const std::int8_t> labels) {
  check_lengths(preds, labels);
  const size_t n = preds.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return preds[a] < preds[b]; });

  // Average ranks across tied prediction values, then the rank-sum statistic.
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && preds[order[j + 1]] == preds[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }

  std::int64_t n_pos = 0;
  double rank_sum_pos = 0;
  for (size_t k = 0; k < n; ++k) {
    if (labels[k]) {
      ++n_pos;
      rank_sum_pos += rank[k];
    }
  }
  const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw ValidationError("AUC undefined: labels contain a single class");
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                      static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double accuracy(std::span<const Scalar> preds, std::span<const std::int8_t> labels) {
  check_lengths(preds, labels);
  std::int64_t hit = 0;
  for (size_t k = 0; k < preds.size(); ++k) {
    const int guess = preds[k] >= Scalar(0.5) ? 1 : 0;
    if (guess == labels[k]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double rmse(std::span<const Scalar> preds, std::span<const std::int8_t> labels) {
  check_lengths(preds, labels);
  double sum = 0;
  for (size_t k = 0; k < preds.size(); ++k) {
    const double d = static_cast<double>(preds[k]) - static_cast<double>(labels[k]);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(preds.size()));
}

namespace {

/// Dense response table: -1 unanswered, else the binary score.
std::vector<std::int8_t> response_table(std::span<const ResponseLog> logs,
                                        Eigen::Index n_students, int n_exercises) {
  std::vector<std::int8_t> table(static_cast<size_t>(n_students) * n_exercises, -1);
  for (const auto& l : logs) {
    if (l.student < 0 || l.student >= n_students) {
      throw UsageError("doa: log references a student without a mastery row");
    }
    table[static_cast<size_t>(l.student) * n_exercises + l.exercise] = l.score;
  }
  return table;
}

/// DOA of a single concept; NaN when no pair contributes.
double doa_for_concept(const Matrix& mastery, const std::vector<std::int8_t>& resp,
                       int n_exercises, const std::vector<int>& concept_exercises,
                       int k) {
  const Eigen::Index n = mastery.rows();
  double ratio_sum = 0;
  std::int64_t pair_count = 0;
  for (Eigen::Index a = 0; a < n; ++a) {
    const std::int8_t* ra = resp.data() + static_cast<size_t>(a) * n_exercises;
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a == b || !(mastery(a, k) > mastery(b, k))) continue;
      int num = 0, den = 0;
      const std::int8_t* rb = resp.data() + static_cast<size_t>(b) * n_exercises;
      for (int j : concept_exercises) {
        if (ra[j] < 0 || rb[j] < 0 || ra[j] == rb[j]) continue;
        ++den;
        if (ra[j] == 1) ++num;
      }
      if (den == 0) continue;
      ratio_sum += static_cast<double>(num) / den;
      ++pair_count;
    }
  }
  if (pair_count == 0) return std::numeric_limits<double>::quiet_NaN();
  return ratio_sum / static_cast<double>(pair_count);
}

}  // namespace

double doa(const Matrix& mastery, std::span<const ResponseLog> logs,
           const QMatrix& q, std::span<const int> concepts, int threads) {
  if (concepts.empty()) throw UsageError("doa: concept list is empty");
  if (mastery.cols() != q.concepts()) throw UsageError("doa: mastery width != Z");
  const auto resp = response_table(logs, mastery.rows(), q.exercises());

  std::vector<std::vector<int>> exercises_of(q.concepts());
  for (int j = 0; j < q.exercises(); ++j) {
    for (int z : q.concepts_of(j)) exercises_of[z].push_back(j);
  }

  std::vector<double> per_concept(concepts.size());
  auto run = [&](size_t from, size_t to) {
    for (size_t c = from; c < to; ++c) {
      per_concept[c] = doa_for_concept(mastery, resp, q.exercises(),
                                       exercises_of[concepts[c]], concepts[c]);
    }
  };
  if (threads <= 1 || concepts.size() < 2) {
    run(0, concepts.size());
  } else {
    const size_t n_workers = std::min<size_t>(threads, concepts.size());
    std::vector<std::thread> pool;
    const size_t chunk = (concepts.size() + n_workers - 1) / n_workers;
    for (size_t w = 0; w < n_workers; ++w) {
      const size_t from = w * chunk;
      const size_t to = std::min(concepts.size(), from + chunk);
      if (from < to) pool.emplace_back(run, from, to);
    }
    for (auto& th : pool) th.join();
  }

  double sum = 0;
  int counted = 0;
  for (double v : per_concept) {
    if (!std::isnan(v)) {
      sum += v;
      ++counted;
    }
  }
  if (counted == 0) {
    throw ValidationError("doa: no listed concept has a comparable student pair");
  }
  return sum / counted;
}

double doa_at_10(const Matrix& mastery, std::span<const ResponseLog> logs,
                 const QMatrix& q, int threads) {
  std::vector<std::int64_t> log_count(q.concepts(), 0);
  for (const auto& l : logs) {
    for (int z : q.concepts_of(l.exercise)) ++log_count[z];
  }
  std::vector<int> active;
  for (int z = 0; z < q.concepts(); ++z) {
    if (log_count[z] > 0) active.push_back(z);
  }
  std::stable_sort(active.begin(), active.end(), [&](int a, int b) {
    return log_count[a] > log_count[b];  // stable: ties keep the lower index
  });
  if (active.size() > 10) active.resize(10);
  if (active.empty()) throw ValidationError("doa_at_10: no concept has logs");
  return doa(mastery, logs, q, active, threads);
}

double inconsistency(const Matrix& mastery, const RatingMatrix& ratings) {
  const int n = ratings.students();
  if (n < 2) throw UsageError("inconsistency requires >= 2 students");
  if (mastery.rows() != n) throw UsageError("inconsistency: mastery rows != students");

  std::vector<double> norm(n, 0);
  for (int i = 0; i < n; ++i) {
    norm[i] = std::sqrt(static_cast<double>(ratings.row(i).size()));
  }
  auto cosine = [&](int a, int b) {
    const auto& ra = ratings.row(a);
    const auto& rb = ratings.row(b);
    double dot = 0;
    size_t ia = 0, ib = 0;
    while (ia < ra.size() && ib < rb.size()) {
      if (ra[ia].first < rb[ib].first) {
        ++ia;
      } else if (rb[ib].first < ra[ia].first) {
        ++ib;
      } else {
        dot += static_cast<double>(ra[ia].second) * rb[ib].second;
        ++ia;
        ++ib;
      }
    }
    return dot / (norm[a] * norm[b]);
  };

  double sum = 0;
  int counted = 0;
  for (int i = 0; i < n; ++i) {
    if (ratings.row(i).empty()) continue;  // cosine undefined
    int best = -1;
    double best_cos = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i || ratings.row(j).empty()) continue;
      const double c = cosine(i, j);
      if (c > best_cos) {
        best_cos = c;
        best = j;
      }
    }
    if (best < 0) continue;
    sum += (mastery.row(i) - mastery.row(best)).cwiseAbs().sum();
    ++counted;
  }
  if (counted == 0) throw ValidationError("inconsistency: no comparable students");
  return sum / (static_cast<double>(mastery.cols()) * counted);
}

}  // namespace icdm
