#include "icdm/synth.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

namespace icdm {

void SynthConfig::validate() const {
  if (n_students < 1 || n_exercises < 1 || n_concepts < 1) {
    throw ConfigError("synth counts must be >= 1");
  }
  if (!(guess >= 0 && guess < 0.5) || !(slip >= 0 && slip < 0.5)) {
    throw ConfigError("guess/slip must lie in [0, 0.5)");
  }
  if (!(q_density >= 1.0 && q_density <= n_concepts)) {
    throw ConfigError("q_density must lie in [1, n_concepts]");
  }
  if (logs_per_student < 1 || logs_per_student > n_exercises) {
    throw ConfigError("logs_per_student must lie in [1, n_exercises]");
  }
}

SynthConfig SynthConfig::from_config(const KeyValueConfig& kv) {
  SynthConfig c;
  c.n_students = static_cast<int>(kv.get_int("n_students", c.n_students));
  c.n_exercises = static_cast<int>(kv.get_int("n_exercises", c.n_exercises));
  c.n_concepts = static_cast<int>(kv.get_int("n_concepts", c.n_concepts));
  c.q_density = kv.get_real("q_density", c.q_density);
  c.guess = kv.get_real("guess", c.guess);
  c.slip = kv.get_real("slip", c.slip);
  c.logs_per_student =
      static_cast<int>(kv.get_int("logs_per_student", c.logs_per_student));
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.validate();
  return c;
}

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  SynthResult out;
  out.true_mastery = BinaryMatrix::Zero(cfg.n_students, cfg.n_concepts);
  for (int i = 0; i < cfg.n_students; ++i) {
    for (int z = 0; z < cfg.n_concepts; ++z) {
      out.true_mastery(i, z) = coin(rng) < 0.5 ? 1 : 0;
    }
  }

  // Concept counts: 1 + Binomial(Z-1, p) hits the target mean.
  const double extra_p =
      cfg.n_concepts > 1 ? (cfg.q_density - 1.0) / (cfg.n_concepts - 1) : 0.0;
  std::vector<std::vector<int>> q_rows(cfg.n_exercises);
  std::vector<int> concept_pool(cfg.n_concepts);
  std::iota(concept_pool.begin(), concept_pool.end(), 0);
  for (int j = 0; j < cfg.n_exercises; ++j) {
    int count = 1;
    for (int z = 1; z < cfg.n_concepts; ++z) {
      if (coin(rng) < extra_p) ++count;
    }
    std::vector<int> pool = concept_pool;
    for (int pick = 0; pick < count; ++pick) {
      std::uniform_int_distribution<int> idx(pick, cfg.n_concepts - 1);
      std::swap(pool[pick], pool[idx(rng)]);
      q_rows[j].push_back(pool[pick]);
    }
    std::sort(q_rows[j].begin(), q_rows[j].end());
  }

  Dataset& ds = out.dataset;
  ds.n_students = cfg.n_students;
  ds.n_exercises = cfg.n_exercises;
  ds.n_concepts = cfg.n_concepts;
  ds.q = QMatrix(cfg.n_exercises, cfg.n_concepts, q_rows);
  ds.ids.student_raw.resize(cfg.n_students);
  std::iota(ds.ids.student_raw.begin(), ds.ids.student_raw.end(), 0);
  ds.ids.exercise_raw.resize(cfg.n_exercises);
  std::iota(ds.ids.exercise_raw.begin(), ds.ids.exercise_raw.end(), 0);
  ds.ids.concept_raw.resize(cfg.n_concepts);
  std::iota(ds.ids.concept_raw.begin(), ds.ids.concept_raw.end(), 0);
  ds.ids.rebuild_lookup();

  std::vector<int> exercise_pool(cfg.n_exercises);
  std::iota(exercise_pool.begin(), exercise_pool.end(), 0);
  for (int i = 0; i < cfg.n_students; ++i) {
    std::vector<int> pool = exercise_pool;
    std::vector<int> chosen;
    for (int pick = 0; pick < cfg.logs_per_student; ++pick) {
      std::uniform_int_distribution<int> idx(pick, cfg.n_exercises - 1);
      std::swap(pool[pick], pool[idx(rng)]);
      chosen.push_back(pool[pick]);
    }
    std::sort(chosen.begin(), chosen.end());
    for (int j : chosen) {
      bool masters_all = true;
      for (int z : q_rows[j]) {
        if (!out.true_mastery(i, z)) {
          masters_all = false;
          break;
        }
      }
      const double p_right = masters_all ? 1.0 - cfg.slip : cfg.guess;
      const std::int8_t score = coin(rng) < p_right ? 1 : 0;
      ds.logs.push_back({i, j, score});
    }
  }
  return out;
}

void save_truth_csv(const SynthResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write: " + path);
  out << "student_id,concept_id,mastered\n";
  for (Eigen::Index i = 0; i < result.true_mastery.rows(); ++i) {
    for (Eigen::Index z = 0; z < result.true_mastery.cols(); ++z) {
      out << i << ',' << z << ',' << static_cast<int>(result.true_mastery(i, z))
          << '\n';
    }
  }
}

}  // namespace icdm
