#include "icdm/snapshot.hpp"

#include "icdm/interaction.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "snapshot serialization assumes a little-endian host");

namespace icdm {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'I', 'C', 'D', 'M', 'S', 'N', 'P', '1'};

}  // namespace

const Matrix& ModelSnapshot::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw ValidationError("snapshot is missing tensor `" + name + "`");
  }
  return it->second;
}

std::vector<std::uint8_t> ModelSnapshot::serialize() const {
  json header;
  header["version"] = 1;
  header["scalar_bytes"] = static_cast<int>(sizeof(Scalar));
  header["n_students"] = n_students;
  header["n_exercises"] = n_exercises;
  header["n_concepts"] = n_concepts;
  header["dim"] = dim;
  header["depth"] = depth;
  header["alpha"] = static_cast<double>(alpha);
  header["beta"] = static_cast<double>(beta);
  header["if"] = to_string(if_kind);
  header["mlp_hidden1"] = mlp_hidden1;
  header["mlp_hidden2"] = mlp_hidden2;
  header["ids"]["students"] = ids.student_raw;
  header["ids"]["exercises"] = ids.exercise_raw;
  header["ids"]["concepts"] = ids.concept_raw;
  {
    std::vector<std::vector<int>> q_rows;
    q_rows.reserve(q.exercises());
    for (int j = 0; j < q.exercises(); ++j) q_rows.push_back(q.concepts_of(j));
    header["q"] = q_rows;
  }
  header["degrees"]["student"] = student_degree;
  header["degrees"]["exercise"] = exercise_degree;
  header["config"] = config_echo;

  json manifest = json::array();
  std::size_t blob_bytes = 0;
  for (const auto& [name, m] : tensors) {
    manifest.push_back({{"name", name},
                        {"rows", static_cast<std::int64_t>(m.rows())},
                        {"cols", static_cast<std::int64_t>(m.cols())}});
    blob_bytes += sizeof(Scalar) * static_cast<std::size_t>(m.size());
  }
  header["tensors"] = manifest;

  const std::string header_str = header.dump();
  std::vector<std::uint8_t> out;
  out.reserve(sizeof(kMagic) + 8 + header_str.size() + blob_bytes);
  out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
  const std::uint64_t hlen = header_str.size();
  const auto* hp = reinterpret_cast<const std::uint8_t*>(&hlen);
  out.insert(out.end(), hp, hp + 8);
  out.insert(out.end(), header_str.begin(), header_str.end());
  for (const auto& [name, m] : tensors) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(m.data());
    out.insert(out.end(), bytes, bytes + sizeof(Scalar) * m.size());
  }
  return out;
}

ModelSnapshot ModelSnapshot::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not a model snapshot (bad magic)");
  }
  std::uint64_t hlen = 0;
  std::memcpy(&hlen, bytes.data() + sizeof(kMagic), 8);
  const std::size_t header_at = sizeof(kMagic) + 8;
  if (bytes.size() < header_at + hlen) throw ParseError("truncated snapshot header");
  json header;
  try {
    header = json::parse(bytes.begin() + header_at, bytes.begin() + header_at + hlen);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad snapshot header: ") + e.what());
  }
  if (header.at("scalar_bytes").get<int>() != static_cast<int>(sizeof(Scalar))) {
    throw ValidationError("snapshot scalar width does not match this build");
  }

  ModelSnapshot s;
  s.n_students = header.at("n_students").get<int>();
  s.n_exercises = header.at("n_exercises").get<int>();
  s.n_concepts = header.at("n_concepts").get<int>();
  s.dim = header.at("dim").get<int>();
  s.depth = header.at("depth").get<int>();
  s.alpha = static_cast<Scalar>(header.at("alpha").get<double>());
  s.beta = static_cast<Scalar>(header.at("beta").get<double>());
  s.if_kind = parse_if_kind(header.at("if").get<std::string>());
  s.mlp_hidden1 = header.at("mlp_hidden1").get<int>();
  s.mlp_hidden2 = header.at("mlp_hidden2").get<int>();
  s.ids.student_raw = header.at("ids").at("students").get<std::vector<long long>>();
  s.ids.exercise_raw = header.at("ids").at("exercises").get<std::vector<long long>>();
  s.ids.concept_raw = header.at("ids").at("concepts").get<std::vector<long long>>();
  s.ids.rebuild_lookup();
  s.q = QMatrix(s.n_exercises, s.n_concepts,
                header.at("q").get<std::vector<std::vector<int>>>());
  s.student_degree = header.at("degrees").at("student").get<std::vector<int>>();
  s.exercise_degree = header.at("degrees").at("exercise").get<std::vector<int>>();
  s.config_echo = header.at("config").get<std::map<std::string, std::string>>();

  std::size_t at = header_at + hlen;
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<std::int64_t>();
    const auto cols = entry.at("cols").get<std::int64_t>();
    const std::size_t n_bytes = sizeof(Scalar) * static_cast<std::size_t>(rows * cols);
    if (bytes.size() < at + n_bytes) throw ParseError("truncated snapshot blob");
    Matrix m(rows, cols);
    std::memcpy(m.data(), bytes.data() + at, n_bytes);
    at += n_bytes;
    s.tensors.emplace(name, std::move(m));
  }
  if (at != bytes.size()) throw ParseError("trailing bytes after snapshot blob");
  return s;
}

void ModelSnapshot::save(const std::string& path) const {
  namespace fs = std::filesystem;
  const std::vector<std::uint8_t> bytes = serialize();
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ParseError("short write: " + tmp.string());
  }
  fs::rename(tmp, target);
}

ModelSnapshot ModelSnapshot::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open snapshot: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::uint64_t ModelSnapshot::content_hash() const {
  const std::vector<std::uint8_t> bytes = serialize();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<Scalar> snapshot_predict(
    const ModelSnapshot& snap, const std::vector<std::pair<int, int>>& targets) {
  const Matrix& mas = snap.tensor("mas_z");
  const Matrix& diff = snap.tensor("diff_z");
  InteractionFunction fn =
      snap.if_kind == IFKind::Mirt
          ? InteractionFunction::mirt(snap.tensor("if_mirt_discrimination"),
                                      snap.tensor("if_mirt_bias"))
          : InteractionFunction::mono_mlp(
                snap.tensor("if_mlp_w1"), snap.tensor("if_mlp_b1"),
                snap.tensor("if_mlp_w2"), snap.tensor("if_mlp_b2"),
                snap.tensor("if_mlp_w3"), snap.tensor("if_mlp_b3"), snap.if_kind);

  const bool glif = snap.if_kind == IFKind::Glif;
  const Matrix* prop_s = glif ? &snap.tensor("glif_prop_student") : nullptr;
  const Matrix* con = glif ? &snap.tensor("glif_con") : nullptr;
  const Matrix* tf_w = glif ? &snap.tensor("tf_student_weight") : nullptr;
  const Matrix* tf_b = glif ? &snap.tensor("tf_student_bias") : nullptr;

  std::vector<Scalar> out;
  out.reserve(targets.size());
  for (const auto& [s, e] : targets) {
    if (s < 0 || s >= snap.n_students || e < 0 || e >= snap.n_exercises) {
      throw UsageError("snapshot_predict: target out of range");
    }
    RowVector mas_row;
    if (glif) {
      mas_row = prop_s->row(s).cwiseProduct(con->row(e)) * (*tf_w) + tf_b->row(0);
    } else {
      mas_row = mas.row(s);
    }
    out.push_back(fn.predict(mas_row, diff.row(e), snap.q.mask_row(e)));
  }
  return out;
}

Matrix snapshot_mastery(const ModelSnapshot& snap) {
  return (Scalar(1) / (Scalar(1) + (-snap.tensor("mas_z").array()).exp())).matrix();
}

ModelSnapshot freeze(ParameterStore& store, const StudentCenteredGraph& g,
                     const BipartiteGraph& g_se, const Dataset& train_ds,
                     const AggregationConfig& agg,
                     const std::map<std::string, std::string>& config_echo) {
  AggregationConfig eval_cfg = agg;
  eval_cfg.training_mode = false;

  ModelSnapshot s;
  s.n_students = store.n_students;
  s.n_exercises = store.n_exercises;
  s.n_concepts = store.n_concepts;
  s.dim = store.dim;
  s.depth = eval_cfg.depth;
  s.alpha = eval_cfg.alpha;
  s.beta = eval_cfg.beta;
  s.if_kind = store.if_kind;
  s.mlp_hidden1 = store.mlp.hidden1;
  s.mlp_hidden2 = store.mlp.hidden2;
  s.ids = train_ds.ids;
  s.q = train_ds.q;
  s.config_echo = config_echo;

  s.student_degree.resize(g_se.student_exercise.nodes());
  for (int i = 0; i < g_se.student_exercise.nodes(); ++i) {
    s.student_degree[i] = g_se.student_degree(i);
  }
  s.exercise_degree.resize(g_se.exercise_student.nodes());
  for (int j = 0; j < g_se.exercise_student.nodes(); ++j) {
    s.exercise_degree[j] = g_se.exercise_degree(j);
  }

  for (auto& [name, t] : store.named_tensors()) s.tensors[name] = t->value;

  Tape tape;
  EmbeddingLeaves emb = make_embedding_leaves(tape, store);
  const SubsetIndex all_s = SubsetIndex::all(g.n_students);
  const SubsetIndex all_e = SubsetIndex::all(g.n_exercises);
  const SubsetIndex all_c = SubsetIndex::all(g.n_concepts);
  AggregateResult r =
      aggregate_views(tape, emb, g, eval_cfg, all_s, all_e, all_c, nullptr);

  for (int k = 0; k < eval_cfg.depth; ++k) {
    s.tensors["agg_right_exercise_" + std::to_string(k)] =
        tape.value(r.right_exercise_depths[k]);
    s.tensors["agg_wrong_exercise_" + std::to_string(k)] =
        tape.value(r.wrong_exercise_depths[k]);
    s.tensors["agg_desired_concept_" + std::to_string(k)] =
        tape.value(r.desired_concept_depths[k]);
  }

  CagtLatents latents = generate_latents(tape, r.views, store);
  Var exercise_d = hadamard(latents.right, latents.wrong);
  s.tensors["latent_exercise_d"] = tape.value(exercise_d);

  if (store.if_kind == IFKind::Glif) {
    GlifLiftVars lift =
        glif_lift_vars(latents.student, exercise_d, latents.concepts, g_se,
                       train_ds.q, all_s, all_e, all_c, all_s, all_e);
    s.tensors["glif_con"] = tape.value(lift.concept_average);
    s.tensors["glif_prop_student"] = tape.value(lift.propagated_student);
    s.tensors["glif_prop_exercise"] = tape.value(lift.propagated_exercise);
    Var mas = transform_rows(tape, lift.propagated_student, store.tf_student);
    Var diff = transform_rows(
        tape, hadamard(lift.propagated_exercise, lift.concept_average),
        store.tf_exercise);
    s.tensors["mas_z"] = tape.value(mas);
    s.tensors["diff_z"] = tape.value(diff);
  } else {
    Var mas = transform_rows(tape, latents.student, store.tf_student);
    Var diff = transform_rows(tape, exercise_d, store.tf_exercise);
    s.tensors["mas_z"] = tape.value(mas);
    s.tensors["diff_z"] = tape.value(diff);
  }
  return s;
}

}  // namespace icdm
