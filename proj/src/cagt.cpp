#include "icdm/cagt.hpp"

#include <algorithm>
#include <cmath>

namespace icdm {

void AggregationConfig::validate() const {
  if (depth < 1) throw ConfigError("aggregation depth must be >= 1");
  if (!(alpha >= 0 && alpha < 1)) throw ConfigError("dropout alpha must lie in [0,1)");
  if (!(beta >= 0)) throw ConfigError("dropout beta must be non-negative");
}

Scalar neighbor_dropout_rate(const AggregationConfig& cfg, int k) {
  const Scalar p = cfg.alpha + cfg.beta * Scalar(k);
  return std::clamp(p, Scalar(0), Scalar(1) - Scalar(1e-9));
}

SubsetIndex SubsetIndex::of(int universe, std::vector<int> items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  if (!items.empty() && (items.front() < 0 || items.back() >= universe)) {
    throw UsageError("SubsetIndex: node index out of range");
  }
  SubsetIndex s;
  s.pos.assign(universe, -1);
  for (int i = 0; i < static_cast<int>(items.size()); ++i) s.pos[items[i]] = i;
  s.items = std::move(items);
  return s;
}

SubsetIndex SubsetIndex::all(int universe) {
  std::vector<int> items(universe);
  for (int i = 0; i < universe; ++i) items[i] = i;
  return of(universe, std::move(items));
}

int SubsetIndex::at(int global) const {
  const int p = pos[global];
  if (p < 0) throw UsageError("SubsetIndex: node not in subset");
  return p;
}

EmbeddingLeaves make_embedding_leaves(Tape& tape, ParameterStore& store) {
  return {tape.leaf(store.h_student), tape.leaf(store.h_right),
          tape.leaf(store.h_wrong), tape.leaf(store.h_concept)};
}

namespace {

std::vector<int> expand(const std::vector<int>& base, const std::vector<int>& frontier,
                        const Adjacency& frontier_to_side) {
  std::vector<int> out = base;
  for (int node : frontier) {
    auto nbrs = frontier_to_side.neighbors(node);
    out.insert(out.end(), nbrs.begin(), nbrs.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Segments that realize one mean-aggregation hop: group g collects the
/// (surviving) neighbors of need_dst[g], remapped into compact rows of the
/// previous depth's source block. Mean over survivors renormalizes dropout.
std::shared_ptr<Segments> hop_segments(const std::vector<int>& need_dst,
                                       const Adjacency& dst_to_src,
                                       const std::vector<int>& src_pos,
                                       Scalar drop_rate, std::mt19937_64* rng) {
  auto seg = std::make_shared<Segments>();
  seg->offsets.reserve(need_dst.size() + 1);
  for (int node : need_dst) {
    for (int nbr : dst_to_src.neighbors(node)) {
      if (drop_rate > 0) {
        std::uniform_real_distribution<Scalar> u(Scalar(0), Scalar(1));
        if (u(*rng) < drop_rate) continue;
      }
      seg->sources.push_back(src_pos[nbr]);
    }
    seg->offsets.push_back(static_cast<int>(seg->sources.size()));
  }
  return seg;
}

struct RelationOut {
  Var a_view, b_view;
  std::vector<Var> a_depths, b_depths;  // rows follow the per-depth need sets
};

/// Alternating bipartite aggregation of one relation, restricted to the nodes
/// reachable from the requested subsets within cfg.depth hops.
/// Alternating bipartite aggregation of one relation. `self_depth_a` gives
/// the first depth entering side A's accumulated view: 1 for the student
/// class, whose own embedding is withheld from its views so that a student's
/// representation is a pure function of its neighborhood (trained and unseen
/// students then share one inference regime); 0 elsewhere. The depth ladder
/// itself always starts from the real embeddings.
RelationOut aggregate_relation(Var emb_a, Var emb_b,
                               const Adjacency& a_to_b, const Adjacency& b_to_a,
                               const SubsetIndex& request_a,
                               const SubsetIndex& request_b,
                               const AggregationConfig& cfg,
                               std::mt19937_64* rng, int self_depth_a,
                               int self_depth_b) {
  const int depth = cfg.depth;
  std::vector<std::vector<int>> need_a(depth + 1), need_b(depth + 1);
  need_a[depth] = request_a.items;
  need_b[depth] = request_b.items;
  for (int k = depth - 1; k >= 0; --k) {
    need_a[k] = expand(request_a.items, need_b[k + 1], b_to_a);
    need_b[k] = expand(request_b.items, need_a[k + 1], a_to_b);
  }

  const int n_a = a_to_b.nodes();
  const int n_b = b_to_a.nodes();
  std::vector<int> pos_a(n_a, -1), pos_b(n_b, -1);
  auto fill_pos = [](std::vector<int>& pos, const std::vector<int>& items) {
    std::fill(pos.begin(), pos.end(), -1);
    for (int i = 0; i < static_cast<int>(items.size()); ++i) pos[items[i]] = i;
  };

  RelationOut out;
  out.a_depths.push_back(row_gather(emb_a, need_a[0]));
  out.b_depths.push_back(row_gather(emb_b, need_b[0]));
  for (int k = 1; k <= depth; ++k) {
    const Scalar rate =
        cfg.training_mode ? neighbor_dropout_rate(cfg, k - 1) : Scalar(0);
    if (rate > 0 && rng == nullptr) {
      throw UsageError("aggregation in training mode requires an RNG");
    }
    fill_pos(pos_b, need_b[k - 1]);
    out.a_depths.push_back(segment_mean(
        out.b_depths[k - 1], hop_segments(need_a[k], a_to_b, pos_b, rate, rng)));
    fill_pos(pos_a, need_a[k - 1]);
    out.b_depths.push_back(segment_mean(
        out.a_depths[k - 1], hop_segments(need_b[k], b_to_a, pos_a, rate, rng)));
  }

  auto accumulate = [&](const std::vector<Var>& depths,
                        const std::vector<std::vector<int>>& need,
                        const std::vector<int>& request, int from_depth) {
    Var acc;
    bool first = true;
    for (int k = from_depth; k <= depth; ++k) {
      // need[k] contains every requested node by construction.
      std::vector<int> rows(request.size());
      for (size_t i = 0; i < request.size(); ++i) {
        auto it = std::lower_bound(need[k].begin(), need[k].end(), request[i]);
        rows[i] = static_cast<int>(it - need[k].begin());
      }
      Var term = scale(row_gather(depths[k], std::move(rows)), depth_weight(k));
      acc = first ? term : add(acc, term);
      first = false;
    }
    return acc;
  };
  out.a_view = accumulate(out.a_depths, need_a, request_a.items, self_depth_a);
  out.b_view = accumulate(out.b_depths, need_b, request_b.items, self_depth_b);
  return out;
}

}  // namespace

AggregateResult aggregate_views(Tape& tape, const EmbeddingLeaves& emb,
                                const StudentCenteredGraph& g,
                                const AggregationConfig& cfg,
                                const SubsetIndex& students,
                                const SubsetIndex& exercises,
                                const SubsetIndex& concepts,
                                std::mt19937_64* rng) {
  cfg.validate();
  AggregateResult out;

  RelationOut right = aggregate_relation(emb.student, emb.right,
                                         g.student_right, g.right_student,
                                         students, exercises, cfg, rng, 1, 0);
  out.views.student_right = right.a_view;
  out.views.right_student = right.b_view;
  out.right_exercise_depths = std::move(right.b_depths);

  RelationOut wrong = aggregate_relation(emb.student, emb.wrong,
                                         g.student_wrong, g.wrong_student,
                                         students, exercises, cfg, rng, 1, 0);
  out.views.student_wrong = wrong.a_view;
  out.views.wrong_student = wrong.b_view;
  out.wrong_exercise_depths = std::move(wrong.b_depths);

  RelationOut related_r = aggregate_relation(emb.right, emb.concepts,
                                             g.right_concept, g.concept_right,
                                             exercises, concepts, cfg, rng, 0, 0);
  out.views.right_concept = related_r.a_view;
  out.views.concept_right = related_r.b_view;

  RelationOut related_w = aggregate_relation(emb.wrong, emb.concepts,
                                             g.wrong_concept, g.concept_wrong,
                                             exercises, concepts, cfg, rng, 0, 0);
  out.views.wrong_concept = related_w.a_view;
  out.views.concept_wrong = related_w.b_view;

  RelationOut desired = aggregate_relation(emb.student, emb.concepts,
                                           g.student_concept, g.concept_student,
                                           students, concepts, cfg, rng, 1, 0);
  out.views.student_concept = desired.a_view;
  out.views.concept_student = desired.b_view;
  out.desired_concept_depths = std::move(desired.b_depths);

  return out;
}

namespace {

Var generate_class(Tape& tape, std::span<const Var> views, GenerationParams& p) {
  Var weight = tape.leaf(p.weight);
  Var bias = tape.leaf(p.bias);
  Var attention = tape.leaf(p.attention);
  std::vector<Var> raw;
  raw.reserve(views.size());
  for (Var v : views) {
    raw.push_back(matmul(tanh(add_rowvec(matmul(v, weight), bias)), attention));
  }
  Var weights = softmax_over_fixed_arity(raw);
  Var fused;
  for (size_t v = 0; v < views.size(); ++v) {
    Var term = scale_rows(views[v], col_slice(weights, static_cast<int>(v)));
    fused = (v == 0) ? term : add(fused, term);
  }
  return fused;
}

}  // namespace

CagtLatents generate_latents(Tape& tape, const CagtViews& views,
                             ParameterStore& store) {
  CagtLatents out;
  {
    const Var v[] = {views.student_right, views.student_wrong, views.student_concept};
    out.student = generate_class(tape, v, store.gen_student);
  }
  {
    const Var v[] = {views.right_student, views.right_concept};
    out.right = generate_class(tape, v, store.gen_right);
  }
  {
    const Var v[] = {views.wrong_student, views.wrong_concept};
    out.wrong = generate_class(tape, v, store.gen_wrong);
  }
  {
    const Var v[] = {views.concept_right, views.concept_wrong, views.concept_student};
    out.concepts = generate_class(tape, v, store.gen_concept);
  }
  return out;
}

Var transform_rows(Tape& tape, Var latent, TransformParams& params) {
  return add_rowvec(matmul(latent, tape.leaf(params.weight)), tape.leaf(params.bias));
}

ViewBundle aggregate(const StudentCenteredGraph& g, ParameterStore& store,
                     const AggregationConfig& cfg, std::mt19937_64* rng) {
  Tape tape;
  EmbeddingLeaves emb = make_embedding_leaves(tape, store);
  AggregateResult r = aggregate_views(
      tape, emb, g, cfg, SubsetIndex::all(g.n_students),
      SubsetIndex::all(g.n_exercises), SubsetIndex::all(g.n_concepts), rng);
  ViewBundle out;
  out.student_right = tape.value(r.views.student_right);
  out.student_wrong = tape.value(r.views.student_wrong);
  out.student_concept = tape.value(r.views.student_concept);
  out.right_student = tape.value(r.views.right_student);
  out.right_concept = tape.value(r.views.right_concept);
  out.wrong_student = tape.value(r.views.wrong_student);
  out.wrong_concept = tape.value(r.views.wrong_concept);
  out.concept_right = tape.value(r.views.concept_right);
  out.concept_wrong = tape.value(r.views.concept_wrong);
  out.concept_student = tape.value(r.views.concept_student);
  return out;
}

GeneratedLatents generate(const ViewBundle& views, ParameterStore& store) {
  Tape tape;
  CagtViews v;
  v.student_right = tape.constant(views.student_right);
  v.student_wrong = tape.constant(views.student_wrong);
  v.student_concept = tape.constant(views.student_concept);
  v.right_student = tape.constant(views.right_student);
  v.right_concept = tape.constant(views.right_concept);
  v.wrong_student = tape.constant(views.wrong_student);
  v.wrong_concept = tape.constant(views.wrong_concept);
  v.concept_right = tape.constant(views.concept_right);
  v.concept_wrong = tape.constant(views.concept_wrong);
  v.concept_student = tape.constant(views.concept_student);
  CagtLatents latents = generate_latents(tape, v, store);
  return {tape.value(latents.student), tape.value(latents.right),
          tape.value(latents.wrong), tape.value(latents.concepts)};
}

TransformedReps transform(const Matrix& h_student, const Matrix& h_right,
                          const Matrix& h_wrong, const Matrix& h_concept,
                          ParameterStore& store) {
  Tape tape;
  Var s = transform_rows(tape, tape.constant(h_student), store.tf_student);
  Var e = transform_rows(
      tape, hadamard(tape.constant(h_right), tape.constant(h_wrong)),
      store.tf_exercise);
  Var c = transform_rows(tape, tape.constant(h_concept), store.tf_concept);
  return {tape.value(s), tape.value(e), tape.value(c)};
}

}  // namespace icdm
