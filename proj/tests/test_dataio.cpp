#include "icdm/dataio.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

using namespace icdm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("icdm_dataio_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
};

const char* kToyQ =
    "exercise_id,concept_id\n"
    "0,0\n"
    "1,0\n"
    "1,1\n";

}  // namespace

TEST_CASE("load_dataset computes the documented statistics") {
  TempDir dir;
  // 3 logs among 2 students x 2 exercises: sparsity 3/4, mean score 2/3.
  const std::string logs = dir.file("logs.csv",
                                    "student_id,exercise_id,score\n"
                                    "5,0,1\n"
                                    "5,1,0\n"
                                    "9,1,1\n");
  const std::string q = dir.file("q.csv", kToyQ);
  Dataset ds = load_dataset(logs, q);
  DatasetStats s = ds.stats();
  CHECK(s.students == 2);
  CHECK(s.exercises == 2);
  CHECK(s.concepts == 2);
  CHECK(s.logs == 3);
  CHECK(s.sparsity == doctest::Approx(0.75));
  CHECK(s.avg_correct_rate == doctest::Approx(2.0 / 3));
  CHECK(s.q_density == doctest::Approx(1.5));
}

TEST_CASE("empty log file with a valid Q-matrix") {
  TempDir dir;
  const std::string logs = dir.file("logs.csv", "student_id,exercise_id,score\n");
  const std::string q = dir.file("q.csv", kToyQ);
  Dataset ds = load_dataset(logs, q);
  CHECK(ds.n_students == 0);
  CHECK(ds.logs.empty());
  CHECK(ds.stats().sparsity == 0.0);
  CHECK(ds.stats().avg_correct_rate == 0.0);
}

TEST_CASE("parse and validation errors carry context") {
  TempDir dir;
  const std::string q = dir.file("q.csv", kToyQ);

  SUBCASE("malformed row reports the line number") {
    const std::string logs = dir.file("bad.csv",
                                      "student_id,exercise_id,score\n"
                                      "1,0,1\n"
                                      "2,zero,1\n");
    try {
      load_dataset(logs, q);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
  }
  SUBCASE("duplicate (student, exercise) pair") {
    const std::string logs = dir.file("dup.csv",
                                      "student_id,exercise_id,score\n"
                                      "1,0,1\n"
                                      "1,0,0\n");
    CHECK_THROWS_AS(load_dataset(logs, q), ValidationError);
  }
  SUBCASE("exercise missing from the Q-matrix") {
    const std::string logs = dir.file("unknown.csv",
                                      "student_id,exercise_id,score\n"
                                      "1,7,1\n");
    CHECK_THROWS_AS(load_dataset(logs, q), ValidationError);
  }
  SUBCASE("score outside {0,1}") {
    const std::string logs = dir.file("score.csv",
                                      "student_id,exercise_id,score\n"
                                      "1,0,2\n");
    CHECK_THROWS_AS(load_dataset(logs, q), ParseError);
  }
  SUBCASE("missing file names the path") {
    try {
      load_dataset(dir.path / "absent.csv", q);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("absent.csv") != std::string::npos);
    }
  }
}

TEST_CASE("rating matrix encodes right as +1 and wrong as -1") {
  Dataset ds = icdm::testing::toy_dataset();
  RatingMatrix r = ds.rating_matrix();
  CHECK(r.nnz() == static_cast<std::int64_t>(ds.logs.size()));
  for (const auto& l : ds.logs) {
    CHECK(r.entry(l.student, l.exercise) == (l.score ? 1 : -1));
  }
  CHECK(r.entry(0, 2) == 0);  // never attempted
}

TEST_CASE("dataset round-trips through CSV") {
  TempDir dir;
  Dataset ds = icdm::testing::toy_dataset();
  save_logs_csv(ds, (dir.path / "logs.csv").string());
  save_q_csv(ds, (dir.path / "q.csv").string());
  Dataset back = load_dataset((dir.path / "logs.csv").string(),
                              (dir.path / "q.csv").string());
  REQUIRE(back.n_students == ds.n_students);
  REQUIRE(back.n_exercises == ds.n_exercises);
  RatingMatrix a = ds.rating_matrix();
  RatingMatrix b = back.rating_matrix();
  for (int i = 0; i < ds.n_students; ++i) {
    for (int j = 0; j < ds.n_exercises; ++j) {
      CHECK(a.entry(i, j) == b.entry(i, j));
    }
  }
}

TEST_CASE("transductive split") {
  // Mirror of the densest public benchmark's shape: 536 x 20, fully observed.
  Dataset ds = icdm::testing::random_dataset(536, 20, 8, 1.01, 99);
  REQUIRE(ds.logs.size() == 536 * 20);
  SplitSpec spec;
  spec.test_fraction = 0.2;
  spec.seed = 5;

  TransductiveSplit split = split_transductive(ds, spec);
  SUBCASE("test size is the exact floor") {
    CHECK(split.test.logs.size() == 2144);
    CHECK(split.train.logs.size() == ds.logs.size() - 2144);
  }
  SUBCASE("partition is exact: disjoint and exhaustive") {
    std::set<std::pair<int, int>> train_keys, test_keys;
    for (const auto& l : split.train.logs) train_keys.insert({l.student, l.exercise});
    for (const auto& l : split.test.logs) test_keys.insert({l.student, l.exercise});
    CHECK(train_keys.size() + test_keys.size() == ds.logs.size());
    for (const auto& k : test_keys) CHECK(train_keys.count(k) == 0);
  }
  SUBCASE("same seed reproduces the split") {
    TransductiveSplit again = split_transductive(ds, spec);
    CHECK(again.test.logs.size() == split.test.logs.size());
    for (size_t i = 0; i < split.test.logs.size(); ++i) {
      CHECK(again.test.logs[i].student == split.test.logs[i].student);
      CHECK(again.test.logs[i].exercise == split.test.logs[i].exercise);
    }
  }
  SUBCASE("fraction bounds are enforced") {
    spec.test_fraction = 1.0;
    CHECK_THROWS_AS(split_transductive(ds, spec), ConfigError);
    spec.test_fraction = 0.0;
    CHECK_THROWS_AS(split_transductive(ds, spec), ConfigError);
  }
}

TEST_CASE("a student with a single log keeps it in train") {
  Dataset ds = icdm::testing::toy_dataset();
  ds.logs.push_back({0, 2, 1});  // student 0 now has 3 logs
  // Student 3 gets trimmed to one log.
  std::vector<ResponseLog> kept;
  for (const auto& l : ds.logs) {
    if (l.student != 3 || l.exercise == 2) kept.push_back(l);
  }
  ds.logs = kept;
  SplitSpec spec;
  spec.test_fraction = 0.4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    spec.seed = seed;
    TransductiveSplit split = split_transductive(ds, spec);
    bool found = false;
    for (const auto& l : split.train.logs) {
      if (l.student == 3) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("inductive split partitions students") {
  Dataset ds = icdm::testing::random_dataset(100, 12, 4, 0.5, 3);
  SplitSpec spec;
  spec.mode = SplitSpec::Mode::Inductive;
  spec.test_fraction = 0.2;
  spec.p_n = 0.2;
  spec.seed = 17;

  InductiveSplit split = split_inductive(ds, spec);
  CHECK(split.unseen_students.size() == 20);
  CHECK(split.train_unseen.n_students == 20);
  CHECK(split.train_observed.n_students == 80);

  SUBCASE("observed and unseen raw ids are disjoint") {
    std::set<long long> obs(split.train_observed.ids.student_raw.begin(),
                            split.train_observed.ids.student_raw.end());
    for (long long raw : split.train_unseen.ids.student_raw) {
      CHECK(obs.count(raw) == 0);
    }
  }
  SUBCASE("unseen size follows the floor rule") {
    Dataset big = icdm::testing::random_dataset(536, 10, 4, 0.4, 4);
    InductiveSplit s2 = split_inductive(big, spec);
    CHECK(s2.unseen_students.size() == 107);  // floor(0.2 * 536)
  }
  SUBCASE("membership is reproducible") {
    InductiveSplit again = split_inductive(ds, spec);
    CHECK(again.unseen_students == split.unseen_students);
  }
  SUBCASE("log routing follows membership") {
    std::set<long long> unseen(split.train_unseen.ids.student_raw.begin(),
                               split.train_unseen.ids.student_raw.end());
    size_t train_total =
        split.train_observed.logs.size() + split.train_unseen.logs.size();
    CHECK(train_total + split.test.logs.size() == ds.logs.size());
    for (const auto& l : split.train_observed.logs) {
      CHECK(unseen.count(split.train_observed.raw_student(l.student)) == 0);
    }
    for (const auto& l : split.train_unseen.logs) {
      CHECK(unseen.count(split.train_unseen.raw_student(l.student)) == 1);
    }
  }
  SUBCASE("p_n bounds are enforced") {
    spec.p_n = 0.0;
    CHECK_THROWS_AS(split_inductive(ds, spec), ConfigError);
  }
}

TEST_CASE("q-matrix invariants") {
  CHECK_THROWS_AS(QMatrix(2, 2, {{0}, {}}), ValidationError);    // empty row
  CHECK_THROWS_AS(QMatrix(2, 2, {{0}, {2}}), ValidationError);   // out of range
  QMatrix q(2, 3, {{2, 0, 2}, {1}});
  CHECK(q.nnz() == 3);  // duplicates collapse
  CHECK(q.concepts_of(0) == std::vector<int>{0, 2});
  CHECK(q.relates(1, 1));
  CHECK_FALSE(q.relates(1, 0));
}
