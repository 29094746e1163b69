#include "icdm/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

namespace icdm {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

long long parse_ll(const std::string& s, const std::string& file, int lineno) {
  long long out = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  while (p < e && (*p == ' ' || *p == '\t')) ++p;
  if (ec != std::errc() || p != e) {
    throw ParseError(file + ":" + std::to_string(lineno) +
                     ": expected integer, got `" + s + "`");
  }
  return out;
}

struct RawLog {
  long long student;
  long long exercise;
  int score;
};

}  // namespace

QMatrix::QMatrix(int n_exercises, int n_concepts, std::vector<std::vector<int>> rows)
    : n_exercises_(n_exercises), n_concepts_(n_concepts), rows_(std::move(rows)) {
  if (static_cast<int>(rows_.size()) != n_exercises_) {
    throw ValidationError("Q-matrix row count does not match exercise count");
  }
  for (int j = 0; j < n_exercises_; ++j) {
    auto& r = rows_[j];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    if (r.empty()) {
      throw ValidationError("exercise " + std::to_string(j) +
                            " is tagged with no concept");
    }
    if (r.front() < 0 || r.back() >= n_concepts_) {
      throw ValidationError("Q-matrix concept index out of range for exercise " +
                            std::to_string(j));
    }
  }
}

const std::vector<int>& QMatrix::concepts_of(int exercise) const {
  if (exercise < 0 || exercise >= n_exercises_) {
    throw UsageError("exercise index out of range: " + std::to_string(exercise));
  }
  return rows_[exercise];
}

bool QMatrix::relates(int exercise, int concept_id) const {
  const auto& r = concepts_of(exercise);
  return std::binary_search(r.begin(), r.end(), concept_id);
}

std::int64_t QMatrix::nnz() const {
  std::int64_t n = 0;
  for (const auto& r : rows_) n += static_cast<std::int64_t>(r.size());
  return n;
}

Matrix QMatrix::dense() const {
  Matrix m = Matrix::Zero(n_exercises_, n_concepts_);
  for (int j = 0; j < n_exercises_; ++j) {
    for (int z : rows_[j]) m(j, z) = Scalar(1);
  }
  return m;
}

RowVector QMatrix::mask_row(int exercise) const {
  RowVector v = RowVector::Zero(n_concepts_);
  for (int z : concepts_of(exercise)) v(z) = Scalar(1);
  return v;
}

RatingMatrix::RatingMatrix(int n_students, int n_exercises)
    : n_students_(n_students), n_exercises_(n_exercises), rows_(n_students) {}

void RatingMatrix::set(int student, int exercise, int value) {
  if (value != 1 && value != -1) throw UsageError("rating value must be +1 or -1");
  auto& row = rows_.at(student);
  auto it = std::lower_bound(row.begin(), row.end(), exercise,
                             [](const auto& p, int e) { return p.first < e; });
  if (it != row.end() && it->first == exercise) {
    throw ValidationError("duplicate rating entry (" + std::to_string(student) +
                          ", " + std::to_string(exercise) + ")");
  }
  row.insert(it, {exercise, static_cast<std::int8_t>(value)});
  ++nnz_;
}

int RatingMatrix::entry(int student, int exercise) const {
  const auto& row = rows_.at(student);
  auto it = std::lower_bound(row.begin(), row.end(), exercise,
                             [](const auto& p, int e) { return p.first < e; });
  if (it == row.end() || it->first != exercise) return 0;
  return it->second;
}

const std::vector<std::pair<int, std::int8_t>>& RatingMatrix::row(int student) const {
  return rows_.at(student);
}

void IdMap::rebuild_lookup() {
  student_dense.clear();
  exercise_dense.clear();
  concept_dense.clear();
  for (int i = 0; i < static_cast<int>(student_raw.size()); ++i)
    student_dense[student_raw[i]] = i;
  for (int j = 0; j < static_cast<int>(exercise_raw.size()); ++j)
    exercise_dense[exercise_raw[j]] = j;
  for (int z = 0; z < static_cast<int>(concept_raw.size()); ++z)
    concept_dense[concept_raw[z]] = z;
}

DatasetStats Dataset::stats() const {
  DatasetStats s;
  s.students = n_students;
  s.exercises = n_exercises;
  s.concepts = n_concepts;
  s.logs = static_cast<std::int64_t>(logs.size());
  const double cells = static_cast<double>(n_students) * n_exercises;
  s.sparsity = (cells > 0 && s.logs > 0) ? static_cast<double>(s.logs) / cells : 0.0;
  if (!logs.empty()) {
    double sum = 0;
    for (const auto& l : logs) sum += l.score;
    s.avg_correct_rate = sum / static_cast<double>(logs.size());
  }
  s.q_density = n_exercises > 0 ? static_cast<double>(q.nnz()) / n_exercises : 0.0;
  return s;
}

RatingMatrix Dataset::rating_matrix() const {
  RatingMatrix r(n_students, n_exercises);
  for (const auto& l : logs) r.set(l.student, l.exercise, l.score == 1 ? 1 : -1);
  return r;
}

Dataset load_dataset(const std::string& logs_path, const std::string& q_path) {
  namespace fs = std::filesystem;
  if (!fs::exists(logs_path)) throw ParseError("file not found: " + logs_path);
  if (!fs::exists(q_path)) throw ParseError("file not found: " + q_path);

  // Q-matrix first: it declares the exercise and concept universes.
  std::vector<std::pair<long long, long long>> q_pairs;
  {
    std::ifstream in(q_path);
    if (!in) throw ParseError("cannot open: " + q_path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      if (lineno == 1) {
        if (split_csv_line(line).size() != 2) {
          throw ParseError(q_path + ":1: expected header `exercise_id,concept_id`");
        }
        continue;
      }
      auto f = split_csv_line(line);
      if (f.size() != 2) {
        throw ParseError(q_path + ":" + std::to_string(lineno) +
                         ": expected 2 fields, got " + std::to_string(f.size()));
      }
      q_pairs.emplace_back(parse_ll(f[0], q_path, lineno),
                           parse_ll(f[1], q_path, lineno));
    }
  }
  if (q_pairs.empty()) throw ValidationError("Q-matrix file has no associations: " + q_path);

  std::vector<RawLog> raw_logs;
  {
    std::ifstream in(logs_path);
    if (!in) throw ParseError("cannot open: " + logs_path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      if (lineno == 1) {
        if (split_csv_line(line).size() != 3) {
          throw ParseError(logs_path +
                           ":1: expected header `student_id,exercise_id,score`");
        }
        continue;
      }
      auto f = split_csv_line(line);
      if (f.size() != 3) {
        throw ParseError(logs_path + ":" + std::to_string(lineno) +
                         ": expected 3 fields, got " + std::to_string(f.size()));
      }
      RawLog l{parse_ll(f[0], logs_path, lineno), parse_ll(f[1], logs_path, lineno),
               static_cast<int>(parse_ll(f[2], logs_path, lineno))};
      if (l.score != 0 && l.score != 1) {
        throw ParseError(logs_path + ":" + std::to_string(lineno) +
                         ": score must be 0 or 1, got " + std::to_string(l.score));
      }
      if (l.student < 0 || l.exercise < 0) {
        throw ParseError(logs_path + ":" + std::to_string(lineno) +
                         ": ids must be non-negative");
      }
      raw_logs.push_back(l);
    }
  }

  Dataset ds;
  {
    std::set<long long> ex_ids, concept_ids, student_ids;
    for (const auto& [e, c] : q_pairs) {
      ex_ids.insert(e);
      concept_ids.insert(c);
    }
    for (const auto& l : raw_logs) student_ids.insert(l.student);
    ds.ids.student_raw.assign(student_ids.begin(), student_ids.end());
    ds.ids.exercise_raw.assign(ex_ids.begin(), ex_ids.end());
    ds.ids.concept_raw.assign(concept_ids.begin(), concept_ids.end());
    ds.ids.rebuild_lookup();
  }
  ds.n_students = static_cast<int>(ds.ids.student_raw.size());
  ds.n_exercises = static_cast<int>(ds.ids.exercise_raw.size());
  ds.n_concepts = static_cast<int>(ds.ids.concept_raw.size());

  std::vector<std::vector<int>> q_rows(ds.n_exercises);
  for (const auto& [e, c] : q_pairs) {
    q_rows[ds.ids.exercise_dense.at(e)].push_back(ds.ids.concept_dense.at(c));
  }
  ds.q = QMatrix(ds.n_exercises, ds.n_concepts, std::move(q_rows));

  std::set<std::pair<int, int>> seen;
  ds.logs.reserve(raw_logs.size());
  for (const auto& l : raw_logs) {
    auto it = ds.ids.exercise_dense.find(l.exercise);
    if (it == ds.ids.exercise_dense.end()) {
      throw ValidationError("exercise " + std::to_string(l.exercise) +
                            " appears in logs but not in the Q-matrix");
    }
    ResponseLog dense{ds.ids.student_dense.at(l.student), it->second,
                      static_cast<std::int8_t>(l.score)};
    if (!seen.insert({dense.student, dense.exercise}).second) {
      throw ValidationError("duplicate log for (student " + std::to_string(l.student) +
                            ", exercise " + std::to_string(l.exercise) + ")");
    }
    ds.logs.push_back(dense);
  }
  return ds;
}

std::vector<RawLogTriple> load_logs_csv(const std::string& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw ParseError("file not found: " + path);
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  std::vector<RawLogTriple> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (lineno == 1) continue;  // header
    auto f = split_csv_line(line);
    if (f.size() != 3) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected 3 fields, got " + std::to_string(f.size()));
    }
    RawLogTriple t{parse_ll(f[0], path, lineno), parse_ll(f[1], path, lineno),
                   static_cast<int>(parse_ll(f[2], path, lineno))};
    if (t.score != 0 && t.score != 1) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": score must be 0 or 1, got " + std::to_string(t.score));
    }
    out.push_back(t);
  }
  return out;
}

namespace {

Dataset subset_logs(const Dataset& parent, const std::vector<ResponseLog>& logs) {
  Dataset out;
  out.n_students = parent.n_students;
  out.n_exercises = parent.n_exercises;
  out.n_concepts = parent.n_concepts;
  out.q = parent.q;
  out.ids = parent.ids;
  out.logs = logs;
  return out;
}

/// Compact the student index space to exactly the given students (sorted by
/// parent-dense index); exercises and concepts are left untouched.
Dataset compact_students(const Dataset& parent, const std::vector<int>& students,
                         const std::vector<ResponseLog>& logs) {
  Dataset out;
  out.n_students = static_cast<int>(students.size());
  out.n_exercises = parent.n_exercises;
  out.n_concepts = parent.n_concepts;
  out.q = parent.q;
  out.ids.exercise_raw = parent.ids.exercise_raw;
  out.ids.concept_raw = parent.ids.concept_raw;
  std::unordered_map<int, int> remap;
  out.ids.student_raw.reserve(students.size());
  for (int i = 0; i < static_cast<int>(students.size()); ++i) {
    remap[students[i]] = i;
    out.ids.student_raw.push_back(parent.ids.student_raw[students[i]]);
  }
  out.ids.rebuild_lookup();
  out.logs.reserve(logs.size());
  for (const auto& l : logs) {
    out.logs.push_back({remap.at(l.student), l.exercise, l.score});
  }
  return out;
}

}  // namespace

TransductiveSplit split_transductive(const Dataset& ds, const SplitSpec& spec) {
  if (spec.mode != SplitSpec::Mode::Transductive) {
    throw ConfigError("split_transductive requires mode=transductive");
  }
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie strictly inside (0,1)");
  }

  const auto n = static_cast<std::int64_t>(ds.logs.size());
  const auto quota = static_cast<std::int64_t>(spec.test_fraction * static_cast<double>(n));

  std::vector<int> order(ds.logs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<int> train_count(ds.n_students, 0);
  for (const auto& l : ds.logs) ++train_count[l.student];

  std::vector<char> in_test(ds.logs.size(), 0);
  std::int64_t assigned = 0;
  // A log may move to test only while its student keeps >=1 training log.
  for (int idx : order) {
    if (assigned >= quota) break;
    const int s = ds.logs[idx].student;
    if (train_count[s] <= 1) continue;
    in_test[idx] = 1;
    --train_count[s];
    ++assigned;
  }

  std::vector<ResponseLog> train_logs, test_logs;
  train_logs.reserve(ds.logs.size() - assigned);
  test_logs.reserve(assigned);
  for (size_t i = 0; i < ds.logs.size(); ++i) {
    (in_test[i] ? test_logs : train_logs).push_back(ds.logs[i]);
  }
  return {subset_logs(ds, train_logs), subset_logs(ds, test_logs)};
}

InductiveSplit split_inductive(const Dataset& ds, const SplitSpec& spec) {
  if (spec.mode != SplitSpec::Mode::Inductive) {
    throw ConfigError("split_inductive requires mode=inductive");
  }
  if (!(spec.p_n > 0.0 && spec.p_n < 1.0)) {
    throw ConfigError("p_n must lie strictly inside (0,1)");
  }
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie strictly inside (0,1)");
  }

  // Hold the test logs out first, then partition the remaining training logs
  // by student membership.
  SplitSpec inner = spec;
  inner.mode = SplitSpec::Mode::Transductive;
  TransductiveSplit base = split_transductive(ds, inner);

  std::vector<int> students(ds.n_students);
  std::iota(students.begin(), students.end(), 0);
  std::mt19937_64 rng(spec.seed + 0x9e3779b97f4a7c15ULL);
  std::shuffle(students.begin(), students.end(), rng);

  const int n_unseen = static_cast<int>(spec.p_n * ds.n_students);
  std::vector<int> unseen(students.begin(), students.begin() + n_unseen);
  std::sort(unseen.begin(), unseen.end());
  std::vector<char> is_unseen(ds.n_students, 0);
  for (int s : unseen) is_unseen[s] = 1;

  std::vector<int> observed;
  observed.reserve(ds.n_students - n_unseen);
  for (int s = 0; s < ds.n_students; ++s) {
    if (!is_unseen[s]) observed.push_back(s);
  }

  std::vector<ResponseLog> obs_logs, uns_logs;
  for (const auto& l : base.train.logs) {
    (is_unseen[l.student] ? uns_logs : obs_logs).push_back(l);
  }

  InductiveSplit out;
  out.train_observed = compact_students(ds, observed, obs_logs);
  out.train_unseen = compact_students(ds, unseen, uns_logs);
  out.test = base.test;
  out.unseen_students = std::move(unseen);
  return out;
}

void save_logs_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write: " + path);
  out << "student_id,exercise_id,score\n";
  for (const auto& l : ds.logs) {
    out << ds.raw_student(l.student) << ',' << ds.raw_exercise(l.exercise) << ','
        << static_cast<int>(l.score) << '\n';
  }
}

void save_q_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write: " + path);
  out << "exercise_id,concept_id\n";
  for (int j = 0; j < ds.n_exercises; ++j) {
    for (int z : ds.q.concepts_of(j)) {
      out << ds.raw_exercise(j) << ',' << ds.raw_concept(z) << '\n';
    }
  }
}

}  // namespace icdm
