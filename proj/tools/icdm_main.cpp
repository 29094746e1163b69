// icdm: train, evaluate and run inductive inference for the student-centered
// cognitive diagnosis model. One binary, one flat key=value config format.

#include "icdm/dataio.hpp"
#include "icdm/graph.hpp"
#include "icdm/inductive.hpp"
#include "icdm/metrics.hpp"
#include "icdm/snapshot.hpp"
#include "icdm/synth.hpp"
#include "icdm/train.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <unordered_map>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace icdm;

namespace {

struct GlobalFlags {
  long long seed = -1;  // <0: keep config/default seeds
  int threads = 1;
  bool quiet = false;
};

void write_text_atomic(const std::string& path, const std::string& content) {
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write: " + tmp.string());
    out << content;
    if (!out) throw ParseError("short write: " + tmp.string());
  }
  fs::rename(tmp, target);
}

void emit_report(const json& report, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << report.dump() << "\n";
  } else {
    write_text_atomic(out_path, report.dump(2) + "\n");
  }
}

json stats_json(const DatasetStats& s) {
  return {{"students", s.students},
          {"exercises", s.exercises},
          {"concepts", s.concepts},
          {"logs", s.logs},
          {"sparsity", s.sparsity},
          {"avg_correct_rate", s.avg_correct_rate},
          {"q_density", s.q_density}};
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percentile_of(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double idx = p * (v.size() - 1);
  const size_t lo = static_cast<size_t>(idx);
  const size_t hi = std::min(v.size() - 1, lo + 1);
  const double frac = idx - lo;
  return v[lo] * (1 - frac) + v[hi] * frac;
}

int run_stats(const std::string& logs_path, const std::string& q_path,
              const std::string& out) {
  Dataset ds = load_dataset(logs_path, q_path);
  emit_report(stats_json(ds.stats()), out);
  return 0;
}

int run_synth(const std::string& config_path, const std::string& out_logs,
              const std::string& out_q, const std::string& out_truth,
              const GlobalFlags& g) {
  KeyValueConfig kv = KeyValueConfig::from_file(config_path);
  SynthConfig cfg = SynthConfig::from_config(kv);
  if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);
  SynthResult result = generate(cfg);

  // Writes go through temporaries so a failure never leaves partial files.
  {
    fs::path tmp_logs = fs::path(out_logs).concat(".tmp");
    fs::path tmp_q = fs::path(out_q).concat(".tmp");
    save_logs_csv(result.dataset, tmp_logs.string());
    save_q_csv(result.dataset, tmp_q.string());
    fs::rename(tmp_logs, out_logs);
    fs::rename(tmp_q, out_q);
  }
  if (!out_truth.empty()) {
    fs::path tmp = fs::path(out_truth).concat(".tmp");
    save_truth_csv(result, tmp.string());
    fs::rename(tmp, out_truth);
  }
  if (!g.quiet) emit_report(stats_json(result.dataset.stats()), "");
  return 0;
}

int run_train(const std::string& logs_path, const std::string& q_path,
              const std::string& config_path, const std::string& out,
              const std::string& valid_logs_path, const GlobalFlags& g) {
  Dataset ds = load_dataset(logs_path, q_path);
  TrainConfig cfg = config_path.empty()
                        ? TrainConfig{}
                        : TrainConfig::from_config(KeyValueConfig::from_file(config_path));
  if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);

  Dataset valid;
  const Dataset* valid_ptr = nullptr;
  if (!valid_logs_path.empty()) {
    valid = load_dataset(valid_logs_path, q_path);
    valid_ptr = &valid;
  }

  ProgressFn progress;
  if (!g.quiet) {
    progress = [](const EpochRecord& r) {
      json line = {{"epoch", r.epoch},
                   {"train_loss", r.train_loss},
                   {"valid_auc", r.valid_auc},
                   {"valid_acc", r.valid_acc},
                   {"valid_rmse", r.valid_rmse}};
      std::cout << line.dump() << "\n";
    };
  }
  ModelSnapshot snap = train(ds, valid_ptr, cfg, progress);
  snap.save(out);
  json done = {{"snapshot", out}, {"hash", snap.content_hash()}};
  std::cout << done.dump() << "\n";
  return 0;
}

int run_eval(const std::string& snapshot_path, const std::string& test_path,
             const std::string& infer_logs_path, const std::string& rating_logs_path,
             bool with_doa, bool with_inconsistency, const std::string& out,
             const GlobalFlags& g) {
  ModelSnapshot snap = ModelSnapshot::load(snapshot_path);
  std::vector<RawLogTriple> test = load_logs_csv(test_path);

  std::vector<Scalar> preds;
  std::vector<std::int8_t> labels;
  Matrix mastery;                      // rows aligned with eval_logs' student field
  std::vector<ResponseLog> eval_logs;  // (mastery row, dense exercise, score)
  RatingMatrix ratings;                // only filled when --inconsistency is set

  auto dense_exercise = [&](long long raw) {
    auto ej = snap.ids.exercise_dense.find(raw);
    if (ej == snap.ids.exercise_dense.end()) {
      throw ValidationError("unknown exercise id " + std::to_string(raw));
    }
    return ej->second;
  };

  if (!infer_logs_path.empty()) {
    // Inductive protocol: infer unseen students from their own logs, score
    // only their test entries.
    std::vector<RawLogTriple> evidence = load_logs_csv(infer_logs_path);
    NewStudentBatch batch = NewStudentBatch::from_raw(snap, evidence);
    std::unordered_map<long long, int> row_of;
    for (int r = 0; r < batch.students(); ++r) row_of[batch.raw_student_ids[r]] = r;

    std::vector<NewTarget> targets;
    for (const auto& t : test) {
      auto it = row_of.find(t.student);
      if (it == row_of.end()) continue;  // not one of the new students
      targets.push_back({it->second, dense_exercise(t.exercise)});
      labels.push_back(static_cast<std::int8_t>(t.score));
      eval_logs.push_back(
          {targets.back().batch_row, targets.back().exercise,
           static_cast<std::int8_t>(t.score)});
    }
    if (targets.empty()) throw ValidationError("no test logs belong to the unseen students");
    preds = predict_new(snap, batch, targets);
    if (with_doa || with_inconsistency) mastery = infer_mastery(snap, batch).values;
    if (with_inconsistency) {
      ratings = RatingMatrix(batch.students(), snap.n_exercises);
      for (int row = 0; row < batch.students(); ++row) {
        for (const auto& [j, score] : batch.logs_by_student[row]) {
          ratings.set(row, j, score ? 1 : -1);
        }
      }
    }
  } else {
    std::vector<std::pair<int, int>> targets;
    for (const auto& t : test) {
      auto si = snap.ids.student_dense.find(t.student);
      if (si == snap.ids.student_dense.end()) {
        throw ValidationError("student " + std::to_string(t.student) +
                              " is not in the snapshot; use --infer-logs for new students");
      }
      targets.push_back({si->second, dense_exercise(t.exercise)});
      labels.push_back(static_cast<std::int8_t>(t.score));
      eval_logs.push_back(
          {targets.back().first, targets.back().second, static_cast<std::int8_t>(t.score)});
    }
    if (targets.empty()) throw ValidationError("no test predictions to evaluate");
    preds = snapshot_predict(snap, targets);
    if (with_doa || with_inconsistency) mastery = snapshot_mastery(snap);
    if (with_inconsistency) {
      if (rating_logs_path.empty()) {
        throw ConfigError("--inconsistency needs --logs as the rating source");
      }
      ratings = RatingMatrix(snap.n_students, snap.n_exercises);
      for (const auto& t : load_logs_csv(rating_logs_path)) {
        auto si = snap.ids.student_dense.find(t.student);
        if (si == snap.ids.student_dense.end()) {
          throw ValidationError("rating log references a student unknown to the snapshot");
        }
        ratings.set(si->second, dense_exercise(t.exercise), t.score ? 1 : -1);
      }
    }
  }

  json report;
  report["n_predictions"] = preds.size();
  report["acc"] = accuracy(preds, labels);
  report["rmse"] = rmse(preds, labels);
  try {
    report["auc"] = auc(preds, labels);
  } catch (const ValidationError&) {
    report["auc"] = nullptr;
  }
  if (with_doa) {
    std::vector<int> all_concepts(snap.n_concepts);
    std::iota(all_concepts.begin(), all_concepts.end(), 0);
    report["doa"] = doa(mastery, eval_logs, snap.q, all_concepts, g.threads);
    report["doa_at_10"] = doa_at_10(mastery, eval_logs, snap.q, g.threads);
  }
  if (with_inconsistency) {
    report["inconsistency"] = inconsistency(mastery, ratings);
  }
  emit_report(report, out);
  return 0;
}

int run_infer(const std::string& snapshot_path, const std::string& logs_path,
              const std::string& out, const std::string& targets_path,
              const std::string& out_predictions) {
  ModelSnapshot snap = ModelSnapshot::load(snapshot_path);
  std::vector<RawLogTriple> evidence = load_logs_csv(logs_path);
  NewStudentBatch batch = NewStudentBatch::from_raw(snap, evidence);
  MasteryProfile profile = infer_mastery(snap, batch);

  std::string csv = "student_id,concept_id,mastery\n";
  for (int r = 0; r < batch.students(); ++r) {
    for (int z = 0; z < snap.n_concepts; ++z) {
      csv += std::to_string(batch.raw_student_ids[r]) + ',' +
             std::to_string(snap.ids.concept_raw[z]) + ',' +
             std::to_string(profile.values(r, z)) + '\n';
    }
  }
  write_text_atomic(out, csv);

  if (!targets_path.empty()) {
    if (out_predictions.empty()) {
      throw ConfigError("--targets requires --out-predictions");
    }
    std::vector<RawLogTriple> raw_targets = load_logs_csv(targets_path);
    std::unordered_map<long long, int> row_of;
    for (int r = 0; r < batch.students(); ++r) row_of[batch.raw_student_ids[r]] = r;
    std::vector<NewTarget> targets;
    for (const auto& t : raw_targets) {
      auto it = row_of.find(t.student);
      if (it == row_of.end()) {
        throw ValidationError("target student " + std::to_string(t.student) +
                              " has no evidence logs");
      }
      auto ej = snap.ids.exercise_dense.find(t.exercise);
      if (ej == snap.ids.exercise_dense.end()) {
        throw ValidationError("unknown exercise id " + std::to_string(t.exercise));
      }
      targets.push_back({it->second, ej->second});
    }
    std::vector<Scalar> probs = predict_new(snap, batch, targets);
    std::string pcsv = "student_id,exercise_id,probability\n";
    for (size_t i = 0; i < targets.size(); ++i) {
      pcsv += std::to_string(raw_targets[i].student) + ',' +
              std::to_string(raw_targets[i].exercise) + ',' +
              std::to_string(probs[i]) + '\n';
    }
    write_text_atomic(out_predictions, pcsv);
  }
  return 0;
}

int run_bench(const std::string& snapshot_path, const std::string& logs_path,
              int repeats, const std::string& retrain_logs,
              const std::string& retrain_q, const std::string& retrain_config,
              const std::string& out, const GlobalFlags& g) {
  using clock = std::chrono::steady_clock;
  ModelSnapshot snap = ModelSnapshot::load(snapshot_path);
  std::vector<RawLogTriple> evidence = load_logs_csv(logs_path);
  NewStudentBatch batch = NewStudentBatch::from_raw(snap, evidence);

  infer_mastery(snap, batch);  // warm-up
  std::vector<double> samples;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clock::now();
    MasteryProfile p = infer_mastery(snap, batch);
    const auto t1 = clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    if (p.values.rows() != batch.students()) throw ValidationError("bench: bad profile");
  }

  json report = {{"repeats", repeats},
                 {"students", batch.students()},
                 {"logs", batch.total_logs()},
                 {"median_ms", median_of(samples)},
                 {"p95_ms", percentile_of(samples, 0.95)},
                 {"samples_ms", samples}};

  if (!retrain_logs.empty()) {
    if (retrain_q.empty()) throw ConfigError("--retrain-logs requires --retrain-q");
    Dataset ds = load_dataset(retrain_logs, retrain_q);
    TrainConfig cfg = retrain_config.empty()
                          ? TrainConfig{}
                          : TrainConfig::from_config(
                                KeyValueConfig::from_file(retrain_config));
    if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);
    const auto t0 = clock::now();
    train(ds, nullptr, cfg);
    const auto t1 = clock::now();
    report["retrain_ms"] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  emit_report(report, out);
  return 0;
}

int run_dump_graph(const std::string& logs_path, const std::string& q_path,
                   const std::string& out_dir) {
  Dataset ds = load_dataset(logs_path, q_path);
  const RatingMatrix rating = ds.rating_matrix();
  const BinaryMatrix involvement = build_involvement(rating, ds.q);
  const StudentCenteredGraph g = build_scg(rating, ds.q, involvement);

  fs::create_directories(out_dir);
  auto dump = [&](const std::string& name, const Adjacency& adj,
                  auto&& src_raw, auto&& dst_raw) {
    std::string text;
    for (int s = 0; s < adj.nodes(); ++s) {
      for (int d : adj.neighbors(s)) {
        text += std::to_string(src_raw(s)) + '\t' + std::to_string(dst_raw(d)) + '\n';
      }
    }
    write_text_atomic((fs::path(out_dir) / (name + ".edges")).string(), text);
  };
  auto student = [&](int i) { return ds.raw_student(i); };
  auto exercise = [&](int j) { return ds.raw_exercise(j); };
  auto concept_id = [&](int z) { return ds.raw_concept(z); };
  dump("right", g.student_right, student, exercise);
  dump("wrong", g.student_wrong, student, exercise);
  dump("related_right", g.right_concept, exercise, concept_id);
  dump("related_wrong", g.wrong_concept, exercise, concept_id);
  dump("desired", g.student_concept, student, concept_id);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inductive cognitive diagnosis over a student-centered graph"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalFlags g;
  app.add_option("--seed", g.seed, "Override the seed of any config in use");
  app.add_option("--threads", g.threads, "Worker threads for metric computation")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  std::string logs, q, out, config, valid_logs, snapshot, test, infer_logs;
  std::string out_logs, out_q, out_truth, targets, out_predictions, out_dir;
  std::string retrain_logs, retrain_q, retrain_config, rating_logs;
  int repeats = 5;

  auto* stats = app.add_subcommand("stats", "Dataset statistics as JSON");
  stats->add_option("--logs", logs, "Response log CSV")->required();
  stats->add_option("--q", q, "Q-matrix CSV")->required();
  stats->add_option("--out", out, "Write JSON here instead of stdout");

  auto* synth = app.add_subcommand("synth", "Generate ground-truth synthetic data");
  synth->add_option("--config", config, "Synth config file")->required();
  synth->add_option("--out-logs", out_logs, "Output logs CSV")->required();
  synth->add_option("--out-q", out_q, "Output Q-matrix CSV")->required();
  synth->add_option("--out-truth", out_truth, "Output true-mastery CSV");

  auto* tr = app.add_subcommand("train", "Train a model and save a snapshot");
  tr->add_option("--logs", logs, "Training logs CSV")->required();
  tr->add_option("--q", q, "Q-matrix CSV")->required();
  tr->add_option("--config", config, "Training config file");
  tr->add_option("--valid-logs", valid_logs, "Validation logs CSV");
  tr->add_option("--out", out, "Snapshot output path")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a snapshot on test logs");
  ev->add_option("--snapshot", snapshot, "Snapshot path")->required();
  ev->add_option("--test", test, "Test logs CSV")->required();
  ev->add_option("--infer-logs", infer_logs,
                 "Evidence logs of unseen students (switches to the inductive protocol)");
  ev->add_option("--logs", rating_logs, "Rating source for --inconsistency (transductive)");
  bool with_doa = false, with_inconsistency = false;
  ev->add_flag("--doa", with_doa, "Also report DOA and DOA@10");
  ev->add_flag("--inconsistency", with_inconsistency, "Also report Inconsistency");
  ev->add_option("--out", out, "Write JSON here instead of stdout");

  auto* inf = app.add_subcommand("infer", "Infer mastery for unseen students");
  inf->add_option("--snapshot", snapshot, "Snapshot path")->required();
  inf->add_option("--logs", logs, "Evidence logs CSV")->required();
  inf->add_option("--out", out, "Mastery CSV output path")->required();
  inf->add_option("--targets", targets, "Optional (student,exercise,_) targets CSV");
  inf->add_option("--out-predictions", out_predictions, "Predictions CSV path");

  auto* bench = app.add_subcommand("bench", "Time inductive inference");
  bench->add_option("--snapshot", snapshot, "Snapshot path")->required();
  bench->add_option("--logs", logs, "Evidence logs CSV")->required();
  bench->add_option("--repeats", repeats, "Timing repetitions")->check(CLI::PositiveNumber);
  bench->add_option("--retrain-logs", retrain_logs, "Logs for a retraining contrast");
  bench->add_option("--retrain-q", retrain_q, "Q-matrix for the retraining contrast");
  bench->add_option("--retrain-config", retrain_config, "Config for the retraining contrast");
  bench->add_option("--out", out, "Write JSON here instead of stdout");

  auto* dump = app.add_subcommand("dump-graph", "Write the SCG as edge lists");
  dump->add_option("--logs", logs, "Response log CSV")->required();
  dump->add_option("--q", q, "Q-matrix CSV")->required();
  dump->add_option("--out-dir", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*stats) return run_stats(logs, q, out);
    if (*synth) return run_synth(config, out_logs, out_q, out_truth, g);
    if (*tr) return run_train(logs, q, config, out, valid_logs, g);
    if (*ev) {
      return run_eval(snapshot, test, infer_logs, rating_logs, with_doa,
                      with_inconsistency, out, g);
    }
    if (*inf) return run_infer(snapshot, logs, out, targets, out_predictions);
    if (*bench) {
      return run_bench(snapshot, logs, repeats, retrain_logs, retrain_q,
                       retrain_config, out, g);
    }
    if (*dump) return run_dump_graph(logs, q, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
