#include "icdm/interaction.hpp"

#include "icdm/optim.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <random>

using namespace icdm;

namespace {

ParameterStore mlp_store(int n_concepts, std::uint64_t seed,
                         IFKind kind = IFKind::MonoMlp) {
  return ParameterStore::init(2, 2, n_concepts, 4, kind, 8, 4, seed);
}

RowVector random_row(int n, std::mt19937_64& rng, Scalar lo = -1, Scalar hi = 1) {
  std::uniform_real_distribution<Scalar> d(lo, hi);
  RowVector v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

RowVector random_mask(int n, std::mt19937_64& rng) {
  RowVector m = RowVector::Zero(n);
  std::uniform_int_distribution<int> pick(0, n - 1);
  m(pick(rng)) = 1;  // at least one concept
  std::uniform_real_distribution<Scalar> coin(0, 1);
  for (int i = 0; i < n; ++i) {
    if (coin(rng) < 0.4) m(i) = 1;
  }
  return m;
}

}  // namespace

TEST_CASE("a zeroed monotonic MLP predicts one half at mastery == difficulty") {
  ParameterStore store = mlp_store(3, 1);
  store.mlp.w1.value.setZero();
  store.mlp.w2.value.setZero();
  store.mlp.w3.value.setZero();
  InteractionFunction fn = InteractionFunction::from(store);
  RowVector row = (RowVector(3) << 0.3, -0.2, 0.9).finished();
  RowVector mask = (RowVector(3) << 1, 1, 0).finished();
  CHECK(fn.predict(row, row, mask) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("mastery == difficulty gives an input-independent constant") {
  ParameterStore store = mlp_store(4, 2);
  InteractionFunction fn = InteractionFunction::from(store);
  RowVector mask = (RowVector(4) << 1, 0, 1, 1).finished();
  std::mt19937_64 rng(3);
  const Scalar first = fn.predict(RowVector::Zero(4), RowVector::Zero(4), mask);
  for (int trial = 0; trial < 5; ++trial) {
    RowVector row = random_row(4, rng);
    CHECK(fn.predict(row, row, mask) == doctest::Approx(first).epsilon(1e-15));
  }
}

TEST_CASE("mirt with unit discrimination reduces to a sigmoid of the masked sum") {
  ParameterStore store = ParameterStore::init(1, 1, 2, 4, IFKind::Mirt, 0, 0, 4);
  store.mirt.discrimination.value.setOnes();
  store.mirt.bias.value.setZero();
  InteractionFunction fn = InteractionFunction::from(store);
  RowVector mas = (RowVector(2) << 0.2, -0.1).finished();
  RowVector diff = RowVector::Zero(2);
  RowVector mask = RowVector::Ones(2);
  // masked sum = 0.1
  CHECK(fn.predict(mas, diff, mask) == doctest::Approx(0.52497918747894).epsilon(1e-10));
}

TEST_CASE("predictions stay strictly inside (0,1)") {
  std::mt19937_64 rng(5);
  for (IFKind kind : {IFKind::Mirt, IFKind::MonoMlp}) {
    ParameterStore store = mlp_store(5, 6, kind);
    InteractionFunction fn = InteractionFunction::from(store);
    for (int trial = 0; trial < 50; ++trial) {
      RowVector mas = random_row(5, rng, -30, 30);
      RowVector diff = random_row(5, rng, -30, 30);
      RowVector mask = random_mask(5, rng);
      const Scalar p = fn.predict(mas, diff, mask);
      CHECK(p > 0);
      CHECK(p < 1);
    }
  }
}

TEST_CASE("all-zero q mask is rejected") {
  ParameterStore store = mlp_store(3, 7);
  InteractionFunction fn = InteractionFunction::from(store);
  CHECK_THROWS_AS(fn.predict(RowVector::Ones(3), RowVector::Zero(3), RowVector::Zero(3)),
                  ValidationError);
}

TEST_CASE("monotonicity: raising masked mastery never lowers the prediction") {
  std::mt19937_64 rng(8);
  for (IFKind kind : {IFKind::MonoMlp, IFKind::Glif, IFKind::Mirt}) {
    ParameterStore store = mlp_store(6, 9, kind);
    clamp_nonneg(store);
    InteractionFunction fn = InteractionFunction::from(store);
    std::uniform_int_distribution<int> pick(0, 5);
    std::uniform_real_distribution<Scalar> delta(Scalar(1e-4), Scalar(2));
    for (int probe = 0; probe < 300; ++probe) {
      RowVector mas = random_row(6, rng);
      RowVector diff = random_row(6, rng);
      RowVector mask = random_mask(6, rng);
      int z = pick(rng);
      while (mask(z) == 0) z = pick(rng);
      const Scalar before = fn.predict(mas, diff, mask);
      RowVector bumped = mas;
      bumped(z) += delta(rng);
      CHECK(fn.predict(bumped, diff, mask) >= before);
    }
  }
}

TEST_CASE("clamp_nonneg projects hidden weights onto the feasible orthant") {
  ParameterStore store = mlp_store(3, 10);
  store.mlp.w1.value(0, 0) = Scalar(-0.3);
  store.mlp.w2.value(0, 0) = Scalar(0.7);
  store.mlp.b1.value(0, 0) = Scalar(-0.4);
  clamp_nonneg(store);
  CHECK(store.mlp.w1.value(0, 0) == 0);
  CHECK(store.mlp.w2.value(0, 0) == Scalar(0.7));
  CHECK(store.mlp.w1.value.minCoeff() >= 0);
  CHECK(store.mlp.b1.value(0, 0) == Scalar(-0.4));  // biases untouched
}

TEST_CASE("tape-level batched predictions match the scalar path") {
  std::mt19937_64 rng(11);
  for (IFKind kind : {IFKind::Mirt, IFKind::MonoMlp}) {
    ParameterStore store = mlp_store(4, 12, kind);
    InteractionFunction fn = InteractionFunction::from(store);
    const int batch = 9;
    Matrix mas(batch, 4), diff(batch, 4), mask(batch, 4);
    for (int i = 0; i < batch; ++i) {
      mas.row(i) = random_row(4, rng);
      diff.row(i) = random_row(4, rng);
      mask.row(i) = random_mask(4, rng);
    }
    Tape tape;
    Var preds = predict_batch(tape, store, tape.constant(mas),
                              tape.constant(diff), tape.constant(mask));
    for (int i = 0; i < batch; ++i) {
      CHECK(tape.value(preds)(i, 0) ==
            doctest::Approx(fn.predict(mas.row(i), diff.row(i), mask.row(i)))
                .epsilon(1e-14));
    }
  }
}

TEST_CASE("glif lift: degree-one propagation has unit coefficient") {
  // Single student, single exercise: prop = (h + 1/sqrt(1*1) * other) / 2.
  RatingMatrix r(1, 1);
  r.set(0, 0, 1);
  BipartiteGraph g = build_bipartite(r);
  QMatrix q(1, 2, {{0, 1}});
  Matrix hs = xavier_init(1, 4, 1);
  Matrix he = xavier_init(1, 4, 2);
  Matrix hc = xavier_init(2, 4, 3);
  GlifLift lift = glif_lift(g, hs, he, hc, q);
  CHECK((lift.propagated_student.row(0) - Scalar(0.5) * (hs.row(0) + he.row(0)))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  CHECK((lift.propagated_exercise.row(0) - Scalar(0.5) * (he.row(0) + hs.row(0)))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  CHECK((lift.concept_average.row(0) - (hc.row(0) + hc.row(1)) / 2)
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}

TEST_CASE("glif lift on a 2x2 graph matches hand-computed propagation") {
  // Edges: s0-e0, s0-e1, s1-e1. Degrees: s0=2, s1=1, e0=1, e1=2.
  RatingMatrix r(2, 2);
  r.set(0, 0, 1);
  r.set(0, 1, -1);
  r.set(1, 1, 1);
  BipartiteGraph g = build_bipartite(r);
  QMatrix q(2, 1, {{0}, {0}});
  Matrix hs = xavier_init(2, 3, 4);
  Matrix he = xavier_init(2, 3, 5);
  Matrix hc = xavier_init(1, 3, 6);
  GlifLift lift = glif_lift(g, hs, he, hc, q);

  RowVector p_s0 = Scalar(0.5) * (hs.row(0) +
                                  he.row(0) / std::sqrt(Scalar(2) * 1) +
                                  he.row(1) / std::sqrt(Scalar(2) * 2));
  RowVector p_e1 = Scalar(0.5) * (he.row(1) +
                                  hs.row(0) / std::sqrt(Scalar(2) * 2) +
                                  hs.row(1) / std::sqrt(Scalar(2) * 1));
  CHECK((lift.propagated_student.row(0) - p_s0).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((lift.propagated_exercise.row(1) - p_e1).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("glif lift is linear in the student and exercise latents") {
  Dataset ds = icdm::testing::random_dataset(8, 5, 3, 0.6, 13);
  RatingMatrix r = ds.rating_matrix();
  BipartiteGraph g = build_bipartite(r);
  Matrix hs = xavier_init(8, 4, 7);
  Matrix he = xavier_init(5, 4, 8);
  Matrix hc = xavier_init(3, 4, 9);
  GlifLift base = glif_lift(g, hs, he, hc, ds.q);
  GlifLift doubled = glif_lift(g, 2 * hs, 2 * he, hc, ds.q);
  CHECK((doubled.propagated_student - 2 * base.propagated_student)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((doubled.propagated_exercise - 2 * base.propagated_exercise)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((doubled.concept_average - base.concept_average).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("tape-level glif lift agrees with the value-level lift") {
  Dataset ds = icdm::testing::random_dataset(7, 4, 3, 0.6, 14);
  RatingMatrix r = ds.rating_matrix();
  BipartiteGraph g = build_bipartite(r);
  Matrix hs = xavier_init(7, 4, 10);
  Matrix he = xavier_init(4, 4, 11);
  Matrix hc = xavier_init(3, 4, 12);
  GlifLift expect = glif_lift(g, hs, he, hc, ds.q);

  Tape tape;
  SubsetIndex all_s = SubsetIndex::all(7);
  SubsetIndex all_e = SubsetIndex::all(4);
  SubsetIndex all_c = SubsetIndex::all(3);
  GlifLiftVars vars =
      glif_lift_vars(tape.constant(hs), tape.constant(he), tape.constant(hc), g,
                     ds.q, all_s, all_e, all_c, all_s, all_e);
  CHECK((tape.value(vars.propagated_student) - expect.propagated_student)
            .cwiseAbs()
            .maxCoeff() < 1e-13);
  CHECK((tape.value(vars.propagated_exercise) - expect.propagated_exercise)
            .cwiseAbs()
            .maxCoeff() < 1e-13);
  CHECK((tape.value(vars.concept_average) - expect.concept_average)
            .cwiseAbs()
            .maxCoeff() < 1e-13);
}
