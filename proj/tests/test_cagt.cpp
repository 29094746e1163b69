#include "icdm/cagt.hpp"

#include "icdm/optim.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

using namespace icdm;
using icdm::testing::random_dataset;
using icdm::testing::toy_dataset;

namespace {

StudentCenteredGraph graph_of(const Dataset& ds) {
  RatingMatrix r = ds.rating_matrix();
  return build_scg(r, ds.q, build_involvement(r, ds.q));
}

ParameterStore store_of(const Dataset& ds, int dim, std::uint64_t seed,
                        IFKind kind = IFKind::Glif) {
  return ParameterStore::init(ds.n_students, ds.n_exercises, ds.n_concepts, dim,
                              kind, 8, 4, seed);
}

}  // namespace

TEST_CASE("layer-wise dropout rate follows alpha + beta * k") {
  AggregationConfig cfg;
  cfg.alpha = Scalar(0.1);
  cfg.beta = Scalar(0.2);
  CHECK(neighbor_dropout_rate(cfg, 0) == doctest::Approx(0.1));
  CHECK(neighbor_dropout_rate(cfg, 1) == doctest::Approx(0.3));
  CHECK(neighbor_dropout_rate(cfg, 2) == doctest::Approx(0.5));
  cfg.beta = Scalar(0.5);
  CHECK(neighbor_dropout_rate(cfg, 4) < 1.0);  // clamped below 1
  CHECK(neighbor_dropout_rate(cfg, 4) >= 0.999);
}

TEST_CASE("descending accumulation weights for K = 3") {
  CHECK(depth_weight(0) == Scalar(1));
  CHECK(depth_weight(1) == Scalar(1) / 2);
  CHECK(depth_weight(2) == Scalar(1) / 3);
  CHECK(depth_weight(3) == Scalar(1) / 4);
}

TEST_CASE("single student with two right exercises, K = 1") {
  // View must equal the base embedding plus half the mean of the two
  // exercise embeddings.
  Dataset ds;
  ds.n_students = 1;
  ds.n_exercises = 2;
  ds.n_concepts = 1;
  ds.q = QMatrix(2, 1, {{0}, {0}});
  ds.logs = {{0, 0, 1}, {0, 1, 1}};
  StudentCenteredGraph g = graph_of(ds);

  ParameterStore store = store_of(ds, 4, 3);
  AggregationConfig cfg;
  cfg.depth = 1;
  ViewBundle views = aggregate(g, store, cfg);

  RowVector expected = store.h_student.value.row(0) +
                       Scalar(0.5) * (store.h_right.value.row(0) +
                                      store.h_right.value.row(1)) / 2;
  CHECK((views.student_right.row(0) - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("depth accumulation composes alternating hops") {
  // One student, one exercise, single Right edge. Depth tables alternate
  // between the two base embeddings, so for K = 2 the student view is
  // a + b/2 + a/3 and the exercise view is b + a/2 + b/3.
  Dataset ds;
  ds.n_students = 1;
  ds.n_exercises = 1;
  ds.n_concepts = 1;
  ds.q = QMatrix(1, 1, {{0}});
  ds.logs = {{0, 0, 1}};
  StudentCenteredGraph g = graph_of(ds);

  ParameterStore store = store_of(ds, 3, 4);
  AggregationConfig cfg;
  cfg.depth = 2;
  ViewBundle views = aggregate(g, store, cfg);

  const RowVector a = store.h_student.value.row(0);
  const RowVector b = store.h_right.value.row(0);
  CHECK((views.student_right.row(0) - (a + b / 2 + a / 3)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((views.right_student.row(0) - (b + a / 2 + b / 3)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("empty neighborhood leaves only the self term") {
  // The student answered nothing wrong: the W->S view reduces to h^0.
  Dataset ds;
  ds.n_students = 1;
  ds.n_exercises = 2;
  ds.n_concepts = 1;
  ds.q = QMatrix(2, 1, {{0}, {0}});
  ds.logs = {{0, 0, 1}};
  StudentCenteredGraph g = graph_of(ds);
  ParameterStore store = store_of(ds, 4, 5);
  AggregationConfig cfg;
  cfg.depth = 3;
  ViewBundle views = aggregate(g, store, cfg);
  CHECK((views.student_wrong.row(0) - store.h_student.value.row(0))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}

TEST_CASE("aggregation is deterministic with dropout off") {
  Dataset ds = random_dataset(12, 6, 3, 0.5, 6);
  StudentCenteredGraph g = graph_of(ds);
  ParameterStore store = store_of(ds, 8, 7);
  AggregationConfig cfg;
  ViewBundle a = aggregate(g, store, cfg);
  ViewBundle b = aggregate(g, store, cfg);
  CHECK(a.student_right == b.student_right);
  CHECK(a.concept_student == b.concept_student);
  CHECK(a.wrong_concept == b.wrong_concept);
}

TEST_CASE("mean aggregation is linear in the embeddings") {
  Dataset ds = random_dataset(10, 5, 3, 0.5, 8);
  StudentCenteredGraph g = graph_of(ds);
  ParameterStore store = store_of(ds, 6, 9);
  AggregationConfig cfg;
  ViewBundle base = aggregate(g, store, cfg);

  const Scalar c = Scalar(2.5);
  store.h_student.value *= c;
  store.h_right.value *= c;
  store.h_wrong.value *= c;
  store.h_concept.value *= c;
  ViewBundle scaled = aggregate(g, store, cfg);

  CHECK((scaled.student_right - c * base.student_right).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((scaled.right_concept - c * base.right_concept).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((scaled.concept_wrong - c * base.concept_wrong).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("training-mode dropout needs an RNG and perturbs views") {
  Dataset ds = random_dataset(10, 5, 3, 0.7, 10);
  StudentCenteredGraph g = graph_of(ds);
  ParameterStore store = store_of(ds, 6, 11);
  AggregationConfig cfg;
  cfg.training_mode = true;
  CHECK_THROWS_AS(aggregate(g, store, cfg), UsageError);

  std::mt19937_64 rng(12);
  ViewBundle dropped = aggregate(g, store, cfg, &rng);
  cfg.training_mode = false;
  ViewBundle clean = aggregate(g, store, cfg);
  CHECK((dropped.student_right - clean.student_right).cwiseAbs().maxCoeff() > 0);
}

TEST_CASE("generation with zero attention parameters averages the views") {
  Dataset ds = toy_dataset();
  StudentCenteredGraph g = graph_of(ds);
  ParameterStore store = store_of(ds, 4, 13);
  for (GenerationParams* gp :
       {&store.gen_student, &store.gen_right, &store.gen_wrong, &store.gen_concept}) {
    gp->attention.value.setZero();
    gp->weight.value.setZero();
    gp->bias.value.setZero();
  }
  AggregationConfig cfg;
  ViewBundle views = aggregate(g, store, cfg);
  GeneratedLatents latents = generate(views, store);

  Matrix student_mean =
      (views.student_right + views.student_wrong + views.student_concept) / 3;
  Matrix right_mean = (views.right_student + views.right_concept) / 2;
  CHECK((latents.student - student_mean).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((latents.right - right_mean).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("transform is the documented affine map") {
  Dataset ds = toy_dataset();
  ParameterStore store = store_of(ds, 4, 14);
  const int n = 5;
  Matrix hs = xavier_init(n, 4, 21);
  Matrix hr = xavier_init(ds.n_exercises, 4, 22);
  Matrix hw = xavier_init(ds.n_exercises, 4, 23);
  Matrix hc = xavier_init(ds.n_concepts, 4, 24);

  SUBCASE("zero weight yields the constant bias row") {
    store.tf_student.weight.value.setZero();
    store.tf_student.bias.value.setConstant(Scalar(0.7));
    TransformedReps reps = transform(hs, hr, hw, hc, store);
    for (int i = 0; i < n; ++i) {
      CHECK((reps.student.row(i).array() - Scalar(0.7)).abs().maxCoeff() < 1e-14);
    }
  }
  SUBCASE("zero right latent collapses the exercise to its bias") {
    TransformedReps reps = transform(hs, Matrix::Zero(ds.n_exercises, 4), hw, hc, store);
    for (int j = 0; j < ds.n_exercises; ++j) {
      CHECK((reps.exercise.row(j) - store.tf_exercise.bias.value.row(0))
                .cwiseAbs()
                .maxCoeff() < 1e-14);
    }
  }
  SUBCASE("random instance matches a direct evaluation") {
    TransformedReps reps = transform(hs, hr, hw, hc, store);
    Matrix expect_s = hs * store.tf_student.weight.value;
    expect_s.rowwise() += store.tf_student.bias.value.row(0);
    Matrix expect_e = hr.cwiseProduct(hw) * store.tf_exercise.weight.value;
    expect_e.rowwise() += store.tf_exercise.bias.value.row(0);
    Matrix expect_c = hc * store.tf_concept.weight.value;
    expect_c.rowwise() += store.tf_concept.bias.value.row(0);
    CHECK((reps.student - expect_s).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((reps.exercise - expect_e).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((reps.concepts - expect_c).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("gradients flow through aggregate-generate-transform") {
  Dataset ds = toy_dataset();
  StudentCenteredGraph g = graph_of(ds);
  ParameterStore store = store_of(ds, 3, 15);
  AggregationConfig cfg;
  cfg.depth = 2;

  std::vector<Tensor2*> tensors = store.tensors();
  auto eval = [&](bool with_grad) -> Scalar {
    Tape tape;
    EmbeddingLeaves emb = make_embedding_leaves(tape, store);
    AggregateResult agg = aggregate_views(
        tape, emb, g, cfg, SubsetIndex::all(g.n_students),
        SubsetIndex::all(g.n_exercises), SubsetIndex::all(g.n_concepts));
    CagtLatents latents = generate_latents(tape, agg.views, store);
    Var s = transform_rows(tape, latents.student, store.tf_student);
    Var e = transform_rows(tape, hadamard(latents.right, latents.wrong),
                           store.tf_exercise);
    Var c = transform_rows(tape, latents.concepts, store.tf_concept);
    Var loss = add(add(sq_norm(s), sq_norm(e)), sq_norm(c));
    if (with_grad) tape.backward(loss);
    return tape.value(loss)(0, 0);
  };
  CHECK(grad_check(tensors, eval, 60, 16) < 1e-3);
}

TEST_CASE("restricted aggregation agrees with the full graph") {
  Dataset ds = random_dataset(14, 7, 4, 0.5, 17);
  StudentCenteredGraph g = graph_of(ds);
  ParameterStore store = store_of(ds, 5, 18);
  AggregationConfig cfg;

  ViewBundle full = aggregate(g, store, cfg);

  Tape tape;
  EmbeddingLeaves emb = make_embedding_leaves(tape, store);
  SubsetIndex students = SubsetIndex::of(g.n_students, {3, 8});
  SubsetIndex exercises = SubsetIndex::of(g.n_exercises, {1, 5});
  SubsetIndex concepts = SubsetIndex::of(g.n_concepts, {0});
  AggregateResult r =
      aggregate_views(tape, emb, g, cfg, students, exercises, concepts);

  CHECK((tape.value(r.views.student_right).row(0) - full.student_right.row(3))
            .cwiseAbs()
            .maxCoeff() < 1e-13);
  CHECK((tape.value(r.views.student_right).row(1) - full.student_right.row(8))
            .cwiseAbs()
            .maxCoeff() < 1e-13);
  CHECK((tape.value(r.views.wrong_concept).row(1) - full.wrong_concept.row(5))
            .cwiseAbs()
            .maxCoeff() < 1e-13);
  CHECK((tape.value(r.views.concept_student).row(0) - full.concept_student.row(0))
            .cwiseAbs()
            .maxCoeff() < 1e-13);
}
