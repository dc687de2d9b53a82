// SPDX-License-Identifier: Apache-2.0
#include "kanli/harness/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <random>
#include <thread>

#include "kanli/binary_io.hpp"
#include "kanli/errors.hpp"

namespace kanli::harness {

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  model::EncoderConfig& m = cfg.model;
  m.num_layers = 2;
  m.num_heads = 2;
  m.d_model = 16;
  m.ff_dim = 32;
  m.seq_len = 12;
  m.knowledge_top_layers = 2;
  m.m1_enabled = m.m2_enabled = m.m3_enabled = true;
  m.m2_extractor = {{3, 5}, 4, {{2, 2}, {3, 3}}, 16};
  m.m3_extractor = {{3, 5}, 4, {{2, 2}, {3, 3}}, 16};
  cfg.train.epochs = 40;
  cfg.train.batch_size = 16;
  cfg.train.learning_rate = 3e-3;
  cfg.train.word_dropout = 0.5;
  return cfg;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  return {{"model", model::to_json(cfg.model)},
          {"train", to_json(cfg.train)},
          {"task", to_json(cfg.task)}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "model" && key != "train" && key != "task") {
      throw ConfigError("unknown experiment key '" + key + "'");
    }
  }
  ExperimentConfig cfg = default_experiment_config();
  if (j.contains("model")) {
    nlohmann::json merged = model::to_json(cfg.model);
    merged.merge_patch(j.at("model"));
    cfg.model = model::encoder_config_from_json(merged);
  }
  if (j.contains("train")) {
    nlohmann::json merged = to_json(cfg.train);
    merged.merge_patch(j.at("train"));
    cfg.train = train_config_from_json(merged);
  }
  if (j.contains("task")) {
    nlohmann::json merged = to_json(cfg.task);
    merged.merge_patch(j.at("task"));
    cfg.task = task_spec_from_json(merged);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const std::string text = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

RunResult run_experiment(const ExperimentConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch) {
  return run_experiment(cfg, generate_task(cfg.task, cfg.train.seed), on_epoch);
}

RunResult run_experiment(const ExperimentConfig& cfg, const GeneratedTask& task,
                         const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.train.validate();
  const std::uint64_t seed = cfg.train.seed;
  RunResult r;
  r.lexicon = subsample_knowledge(task.lexicon, cfg.train.knowledge_fraction, seed);

  std::vector<std::size_t> order(task.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
  }
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(cfg.train.data_fraction * order.size() - 1e-9)));
  order.resize(std::min(keep, order.size()));
  std::vector<NliExample> train_set;
  for (std::size_t i : order) train_set.push_back(task.train[i]);

  r.vocab = Vocabulary::from_examples(train_set);
  model::EncoderConfig mcfg = cfg.model;
  mcfg.vocab_size = r.vocab.size();
  r.encoder = std::make_unique<model::Encoder>(mcfg, seed);
  const auto train_data = encode_examples(train_set, r.vocab, r.lexicon, mcfg.seq_len);
  const auto test_data = encode_examples(task.test, r.vocab, r.lexicon, mcfg.seq_len);
  r.train = train(*r.encoder, train_data, cfg.train, on_epoch);
  r.test = evaluate(*r.encoder, test_data);
  return r;
}

double ExperimentRunner::accuracy(const ExperimentConfig& cfg) { return accuracies({cfg})[0]; }

std::vector<double> ExperimentRunner::accuracies(const std::vector<ExperimentConfig>& cfgs) {
  std::vector<std::string> keys;
  std::vector<double> out(cfgs.size(), 0.0);
  std::vector<std::size_t> todo;
  {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
      keys.push_back(to_json(cfgs[i]).dump());
      auto it = cache_.find(keys.back());
      if (it != cache_.end()) {
        out[i] = it->second;
      } else if (std::find_if(todo.begin(), todo.end(), [&](std::size_t j) {
                   return keys[j] == keys.back();
                 }) == todo.end()) {
        todo.push_back(i);
      }
    }
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < todo.size(); k = next++) {
      try {
        const double acc = run_experiment(cfgs[todo[k]]).test.accuracy;
        std::lock_guard lock(mutex_);
        cache_[keys[todo[k]]] = acc;
        ++runs_;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(workers_, todo.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < cfgs.size(); ++i) out[i] = cache_.at(keys[i]);
  return out;
}

std::string_view sweep_name(SweepKind kind) {
  return kind == SweepKind::kDataFraction ? "data_fraction" : "knowledge_fraction";
}

ExperimentConfig with_knowledge(ExperimentConfig cfg) {
  if (!cfg.model.any_knowledge()) {
    cfg.model.m1_enabled = cfg.model.m2_enabled = cfg.model.m3_enabled = true;
  }
  return cfg;
}

ExperimentConfig without_knowledge(ExperimentConfig cfg) {
  cfg.model.m1_enabled = cfg.model.m2_enabled = cfg.model.m3_enabled = false;
  return cfg;
}

std::vector<SweepRow> run_sweep(SweepKind kind, const std::vector<double>& grid,
                                const ExperimentConfig& base, std::size_t num_seeds,
                                ExperimentRunner& runner) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("sweep grid must ascend strictly");
    const bool ok = kind == SweepKind::kDataFraction ? grid[i] > 0.0 && grid[i] <= 1.0
                                                     : grid[i] >= 0.0 && grid[i] <= 1.0;
    if (!ok) throw ConfigError("sweep point out of range");
  }
  if (num_seeds == 0) throw ConfigError("sweep needs at least one seed");

  struct Cell {
    double point;
    std::string condition;
  };
  std::vector<Cell> cells;
  std::vector<ExperimentConfig> jobs;
  for (double p : grid) {
    std::vector<std::pair<std::string, ExperimentConfig>> conditions;
    if (kind == SweepKind::kDataFraction) {
      conditions = {{"baseline", without_knowledge(base)}, {"knowledge", with_knowledge(base)}};
      for (auto& [_, c] : conditions) c.train.data_fraction = p;
    } else {
      conditions = {{"knowledge", with_knowledge(base)}};
      conditions[0].second.train.knowledge_fraction = p;
    }
    for (auto& [name, c] : conditions) {
      cells.push_back({p, name});
      for (std::size_t s = 0; s < num_seeds; ++s) {
        ExperimentConfig job = c;
        job.train.seed = base.train.seed + s;
        jobs.push_back(job);
      }
    }
  }
  const std::vector<double> acc = runner.accuracies(jobs);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    double total = 0.0;
    for (std::size_t s = 0; s < num_seeds; ++s) total += acc[i * num_seeds + s];
    rows.push_back({std::string(sweep_name(kind)), cells[i].point, cells[i].condition,
                    total / static_cast<double>(num_seeds), base.train.seed});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "sweep,point,condition,accuracy,seed\n";
  char buf[128];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6g,%s,%.6f,%llu\n", r.sweep.c_str(), r.point,
                  r.condition.c_str(), r.accuracy, static_cast<unsigned long long>(r.seed));
    out += buf;
  }
  return out;
}

}  // namespace kanli::harness
