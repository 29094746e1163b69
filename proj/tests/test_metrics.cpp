#include "icdm/metrics.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <random>

using namespace icdm;
using icdm::testing::auc_pair_oracle;
using icdm::testing::doa_brute_force;

TEST_CASE("auc on the documented examples") {
  SUBCASE("perfectly separated") {
    std::vector<Scalar> p = {0.9, 0.1};
    std::vector<std::int8_t> y = {1, 0};
    CHECK(auc(p, y) == doctest::Approx(1.0));
    CHECK(accuracy(p, y) == doctest::Approx(1.0));
  }
  SUBCASE("ties count one half") {
    std::vector<Scalar> p = {0.5, 0.5};
    std::vector<std::int8_t> y = {1, 0};
    CHECK(auc(p, y) == doctest::Approx(0.5));
  }
  SUBCASE("three-point pair enumeration") {
    std::vector<Scalar> p = {0.8, 0.6, 0.4};
    std::vector<std::int8_t> y = {1, 0, 1};
    CHECK(auc(p, y) == doctest::Approx(0.5));
  }
  SUBCASE("single-class labels are rejected") {
    std::vector<Scalar> p = {0.8, 0.6};
    std::vector<std::int8_t> y = {1, 1};
    CHECK_THROWS_AS(auc(p, y), ValidationError);
    CHECK(accuracy(p, y) == doctest::Approx(1.0));  // still defined
    CHECK(rmse(p, y) == doctest::Approx(std::sqrt((0.04 + 0.16) / 2)));
  }
}

TEST_CASE("auc matches exhaustive pair enumeration on random instances") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<Scalar> d(0, 1);
  std::uniform_int_distribution<int> len(2, 40);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = len(rng);
    std::vector<Scalar> p(n);
    std::vector<std::int8_t> y(n);
    bool pos = false, neg = false;
    for (int i = 0; i < n; ++i) {
      // Coarse grid so ties actually occur.
      p[i] = std::round(d(rng) * 8) / 8;
      y[i] = d(rng) < 0.5;
      (y[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    CHECK(auc(p, y) == doctest::Approx(auc_pair_oracle(p, y)).epsilon(1e-12));
  }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<Scalar> d(0, 1);
  std::vector<Scalar> p(30);
  std::vector<std::int8_t> y(30);
  for (size_t i = 0; i < p.size(); ++i) {
    p[i] = d(rng);
    y[i] = d(rng) < 0.4;
  }
  y[0] = 1;
  y[1] = 0;
  std::vector<Scalar> q(p.size());
  for (size_t i = 0; i < p.size(); ++i) q[i] = std::tanh(3 * p[i]) + 2;
  CHECK(auc(p, y) == doctest::Approx(auc(q, y)).epsilon(1e-12));
}

TEST_CASE("doa on a single ordered pair") {
  QMatrix q(1, 1, {{0}});
  std::vector<ResponseLog> logs = {{0, 0, 1}, {1, 0, 0}};
  Matrix mas(2, 1);

  SUBCASE("agreement") {
    mas << 0.9, 0.2;
    std::vector<int> ks = {0};
    CHECK(doa(mas, logs, q, ks) == doctest::Approx(1.0));
  }
  SUBCASE("disagreement") {
    mas << 0.2, 0.9;
    std::vector<int> ks = {0};
    CHECK(doa(mas, logs, q, ks) == doctest::Approx(0.0));
  }
  SUBCASE("equal mastery contributes no pair and errors out") {
    mas << 0.5, 0.5;
    std::vector<int> ks = {0};
    CHECK_THROWS_AS(doa(mas, logs, q, ks), ValidationError);
  }
}

TEST_CASE("doa equals the brute-force oracle on random instances") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<Scalar> d(0, 1);
  int compared = 0;
  for (int trial = 0; trial < 60; ++trial) {
    Dataset ds = icdm::testing::random_dataset(2 + static_cast<int>(rng() % 7),
                                               1 + static_cast<int>(rng() % 6),
                                               1 + static_cast<int>(rng() % 3),
                                               0.6, 1000 + trial);
    Matrix mas(ds.n_students, ds.n_concepts);
    for (Eigen::Index i = 0; i < mas.size(); ++i) {
      *(mas.data() + i) = std::round(d(rng) * 4) / 4;  // force mastery ties too
    }
    std::vector<int> ks(ds.n_concepts);
    std::iota(ks.begin(), ks.end(), 0);
    const double expect = doa_brute_force(mas, ds.logs, ds.q, ks);
    if (std::isnan(expect)) {
      CHECK_THROWS_AS(doa(mas, ds.logs, ds.q, ks), ValidationError);
      continue;
    }
    CHECK(doa(mas, ds.logs, ds.q, ks) == doctest::Approx(expect).epsilon(1e-12));
    ++compared;
  }
  CHECK(compared > 30);
}

TEST_CASE("doa is invariant under increasing transforms of mastery columns") {
  Dataset ds = icdm::testing::random_dataset(8, 6, 3, 0.6, 4);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<Scalar> d(0, 1);
  Matrix mas(8, 3);
  for (Eigen::Index i = 0; i < mas.size(); ++i) *(mas.data() + i) = d(rng);
  std::vector<int> ks = {0, 1, 2};
  const double base = doa(mas, ds.logs, ds.q, ks);
  Matrix warped = (mas.array() * 3).exp();
  CHECK(doa(warped, ds.logs, ds.q, ks) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("doa parallel execution matches serial") {
  Dataset ds = icdm::testing::random_dataset(20, 10, 6, 0.5, 6);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<Scalar> d(0, 1);
  Matrix mas(20, 6);
  for (Eigen::Index i = 0; i < mas.size(); ++i) *(mas.data() + i) = d(rng);
  std::vector<int> ks = {0, 1, 2, 3, 4, 5};
  CHECK(doa(mas, ds.logs, ds.q, ks, 1) ==
        doctest::Approx(doa(mas, ds.logs, ds.q, ks, 4)).epsilon(1e-15));
}

TEST_CASE("doa_at_10 selects the most practiced concepts") {
  SUBCASE("exactly ten active concepts") {
    Dataset ds = icdm::testing::random_dataset(10, 12, 10, 0.7, 8);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<Scalar> d(0, 1);
    Matrix mas(10, 10);
    for (Eigen::Index i = 0; i < mas.size(); ++i) *(mas.data() + i) = d(rng);
    std::vector<int> all(10);
    std::iota(all.begin(), all.end(), 0);
    CHECK(doa_at_10(mas, ds.logs, ds.q) ==
          doctest::Approx(doa(mas, ds.logs, ds.q, all)).epsilon(1e-12));
  }
  SUBCASE("concepts without logs are never selected") {
    // 12 concepts; exercises only cover concepts 0..9, so 10 and 11 have no
    // logs. doa_at_10 must equal doa over the ten covered concepts.
    std::vector<std::vector<int>> q_rows;
    for (int j = 0; j < 10; ++j) q_rows.push_back({j});
    QMatrix q(10, 12, q_rows);
    std::vector<ResponseLog> logs;
    std::mt19937_64 rng(10);
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 10; ++j) {
        logs.push_back({i, j, static_cast<std::int8_t>(rng() % 2)});
      }
    }
    std::uniform_real_distribution<Scalar> d(0, 1);
    Matrix mas(8, 12);
    for (Eigen::Index i = 0; i < mas.size(); ++i) *(mas.data() + i) = d(rng);
    std::vector<int> covered(10);
    std::iota(covered.begin(), covered.end(), 0);
    CHECK(doa_at_10(mas, logs, q) ==
          doctest::Approx(doa(mas, logs, q, covered)).epsilon(1e-12));
  }
  SUBCASE("selection matches a hand-sorted log count table") {
    // 20 concepts, one exercise per concept; concept k receives k logs, so
    // the top 10 are concepts 19..10.
    std::vector<std::vector<int>> q_rows;
    for (int k = 0; k < 20; ++k) q_rows.push_back({k});
    QMatrix q(20, 20, q_rows);
    std::vector<ResponseLog> logs;
    const int n_students = 20;
    for (int k = 1; k < 20; ++k) {
      for (int s = 0; s < k; ++s) {
        logs.push_back({s, k, static_cast<std::int8_t>((s + k) % 2)});
      }
    }
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<Scalar> d(0, 1);
    Matrix mas(n_students, 20);
    for (Eigen::Index i = 0; i < mas.size(); ++i) *(mas.data() + i) = d(rng);
    std::vector<int> expect = {19, 18, 17, 16, 15, 14, 13, 12, 11, 10};
    CHECK(doa_at_10(mas, logs, q) ==
          doctest::Approx(doa(mas, logs, q, expect)).epsilon(1e-12));
  }
}

TEST_CASE("inconsistency") {
  SUBCASE("identical logs and identical mastery give zero") {
    RatingMatrix r(2, 3);
    r.set(0, 0, 1);
    r.set(0, 1, -1);
    r.set(1, 0, 1);
    r.set(1, 1, -1);
    Matrix mas(2, 2);
    mas << 0.7, 0.3, 0.7, 0.3;
    CHECK(inconsistency(mas, r) == doctest::Approx(0.0));
  }
  SUBCASE("two-student hand computation") {
    // Mutually nearest; Mas rows (1,0) and (0,1):
    // (1/Z)(1/N) * (2 + 2) = (1/2)(1/2)*4 = 1.
    RatingMatrix r(2, 2);
    r.set(0, 0, 1);
    r.set(1, 0, 1);
    Matrix mas(2, 2);
    mas << 1, 0, 0, 1;
    CHECK(inconsistency(mas, r) == doctest::Approx(1.0));
  }
  SUBCASE("students with empty rating rows are skipped") {
    RatingMatrix r(3, 2);
    r.set(0, 0, 1);
    r.set(1, 0, 1);
    Matrix mas(3, 2);
    mas << 1, 0, 0, 1, 0.5, 0.5;  // row 2 has no ratings
    CHECK(inconsistency(mas, r) == doctest::Approx(1.0));
  }
  SUBCASE("nearest-neighbor ties resolve to the lowest index") {
    // Students 1 and 2 both identical to 0; student 0 must pair with 1.
    RatingMatrix r(3, 2);
    for (int i = 0; i < 3; ++i) r.set(i, 0, 1);
    Matrix mas(3, 1);
    mas << 0.0, 0.25, 1.0;
    // i=0 -> j=1 gap .25; i=1 -> j=0 gap .25; i=2 -> j=0 gap 1.
    CHECK(inconsistency(mas, r) == doctest::Approx((0.25 + 0.25 + 1.0) / 3));
  }
}
