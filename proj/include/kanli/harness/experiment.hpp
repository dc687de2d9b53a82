// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "kanli/harness/dataset.hpp"
#include "kanli/harness/task.hpp"
#include "kanli/harness/train.hpp"
#include "kanli/model/encoder.hpp"

namespace kanli::harness {

/// Everything one training run needs. model.vocab_size is replaced by the
/// size of the vocabulary built from the training data.
struct ExperimentConfig {
  model::EncoderConfig model;
  TrainConfig train;
  SyntheticTaskSpec task;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Small model and task sized for a single CPU core.
ExperimentConfig default_experiment_config();

/// {"model": {...}, "train": {...}, "task": {...}}; each section is
/// optional and overrides default_experiment_config().
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

struct RunResult {
  std::unique_ptr<model::Encoder> encoder;
  Vocabulary vocab;
  kb::RelationLexicon lexicon;  ///< after knowledge subsampling
  Metrics train;
  Metrics test;
};

/// Generates the task from cfg.train.seed, subsamples knowledge, trims the
/// training set to data_fraction, builds the vocabulary, trains and scores
/// the test split.
RunResult run_experiment(const ExperimentConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {});
/// Same, on an existing task.
RunResult run_experiment(const ExperimentConfig& cfg, const GeneratedTask& task,
                         const std::function<void(const EpochLog&)>& on_epoch = {});

/// Runs experiments on worker threads and remembers test accuracies, so
/// repeated configurations are trained once.
class ExperimentRunner {
 public:
  explicit ExperimentRunner(std::size_t workers = 1) : workers_(workers ? workers : 1) {}
  double accuracy(const ExperimentConfig& cfg);
  /// Results in input order regardless of scheduling.
  std::vector<double> accuracies(const std::vector<ExperimentConfig>& cfgs);
  std::size_t runs_performed() const { return runs_; }

 private:
  std::size_t workers_;
  std::size_t runs_ = 0;
  std::mutex mutex_;
  std::map<std::string, double> cache_;
};

enum class SweepKind { kDataFraction, kKnowledgeFraction };
std::string_view sweep_name(SweepKind kind);

struct SweepRow {
  std::string sweep;
  double point = 0.0;
  std::string condition;
  /// Mean test accuracy over the seeds.
  double accuracy = 0.0;
  /// First of the consecutive seeds used.
  std::uint64_t seed = 0;
};

/// Data sweeps emit "baseline" (no knowledge) and "knowledge" rows per
/// point; knowledge sweeps emit one "knowledge" row per fraction. Seeds are
/// base.train.seed, +1, ... Grid must be non-empty and strictly ascending.
std::vector<SweepRow> run_sweep(SweepKind kind, const std::vector<double>& grid,
                                const ExperimentConfig& base, std::size_t num_seeds,
                                ExperimentRunner& runner);

/// Header "sweep,point,condition,accuracy,seed", LF line ends.
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// The configuration used for the knowledge condition: base with M1, M2 and
/// M3 on unless base already enables some subset.
ExperimentConfig with_knowledge(ExperimentConfig cfg);
ExperimentConfig without_knowledge(ExperimentConfig cfg);

}  // namespace kanli::harness
