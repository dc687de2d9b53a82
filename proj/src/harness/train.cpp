// SPDX-License-Identifier: Apache-2.0
#include "kanli/harness/train.hpp"

#include <cmath>
#include <random>
#include <set>
#include <thread>

#include "kanli/errors.hpp"

namespace kanli::harness {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(data_fraction > 0.0 && data_fraction <= 1.0)) {
    throw ConfigError("data_fraction must lie in (0, 1]");
  }
  if (!(knowledge_fraction >= 0.0 && knowledge_fraction <= 1.0)) {
    throw ConfigError("knowledge_fraction must lie in [0, 1]");
  }
  if (!(word_dropout >= 0.0 && word_dropout < 1.0)) {
    throw ConfigError("word_dropout must lie in [0, 1)");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"seed", c.seed},
          {"data_fraction", c.data_fraction},
          {"knowledge_fraction", c.knowledge_fraction},
          {"word_dropout", c.word_dropout}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> kKeys = {
      "epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "seed",
      "data_fraction", "knowledge_fraction", "word_dropout"};
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, _] : j.items()) {
      if (!kKeys.count(key)) throw ConfigError("unknown train key '" + key + "'");
    }
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.seed = j.value("seed", c.seed);
    c.data_fraction = j.value("data_fraction", c.data_fraction);
    c.knowledge_fraction = j.value("knowledge_fraction", c.knowledge_fraction);
    c.word_dropout = j.value("word_dropout", c.word_dropout);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

Metrics metrics_from_predictions(const std::vector<std::size_t>& predicted,
                                 const std::vector<std::size_t>& gold) {
  if (predicted.size() != gold.size()) {
    throw ContractError("prediction and label counts differ");
  }
  Metrics m;
  m.count = gold.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= kNumLabels || predicted[i] >= kNumLabels) {
      throw ContractError("label out of range");
    }
    ++m.confusion[gold[i]][predicted[i]];
    correct += gold[i] == predicted[i];
  }
  m.accuracy = m.count ? static_cast<double>(correct) / static_cast<double>(m.count) : 0.0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    std::size_t col = 0, row = 0;
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      col += m.confusion[k][c];
      row += m.confusion[c][k];
    }
    m.precision[c] = col ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(col) : 0.0;
    m.recall[c] = row ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(row) : 0.0;
  }
  return m;
}

void Adam::step(ParamStore& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, var] : params) {
    const Tensor g = var.grad();
    auto [it, fresh] = moments_.try_emplace(name);
    if (fresh) it->second = {Tensor(g.shape()), Tensor(g.shape())};
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    Tensor& w = var.mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon_);
    }
  }
}

Metrics train(model::Encoder& encoder, const std::vector<EncodedExample>& data,
              const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (data.empty()) throw ContractError("training set is empty");
  std::mt19937_64 rng(cfg.seed);
  Adam adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
  ParamStore& params = encoder.params();

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> curve;
  std::vector<std::size_t> predicted(data.size()), gold(data.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    }
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      params.zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const EncodedExample& ex = data[order[b]];
        const model::EncoderInput* input = &ex.input;
        model::EncoderInput dropped;
        if (cfg.word_dropout > 0.0) {
          dropped = ex.input;
          for (std::size_t& id : dropped.token_ids) {
            // Only word ids; the four specials come first in every vocabulary.
            const bool drop = unit_uniform(rng()) < cfg.word_dropout;
            if (id > 3 && drop) id = Vocabulary::kUnkId;
          }
          input = &dropped;
        }
        const Var logits = encoder.forward(*input);
        const Var loss = ops::cross_entropy(logits, ex.label);
        const double value = loss.value().item();
        if (!std::isfinite(value)) {
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                                ", example " + std::to_string(order[b]));
        }
        total += value;
        const Tensor& z = logits.value();
        std::size_t best = 0;
        for (std::size_t c = 1; c < z.size(); ++c) best = z[c] > z[best] ? c : best;
        predicted[order[b]] = best;
        gold[order[b]] = ex.label;
        backward(ops::scale(loss, weight));
      }
      adam.step(params);
    }
    curve.push_back(total / static_cast<double>(data.size()));
    if (on_epoch) {
      on_epoch({epoch, curve.back(), metrics_from_predictions(predicted, gold).accuracy});
    }
  }
  Metrics m = metrics_from_predictions(predicted, gold);
  m.loss_curve = std::move(curve);
  return m;
}

Metrics evaluate(const model::Encoder& encoder, const std::vector<EncodedExample>& data,
                 std::size_t workers) {
  const std::size_t n = encoder.config().seq_len;
  for (const EncodedExample& ex : data) {
    if (ex.input.token_ids.size() != n) {
      throw ConfigError("data encoded for length " + std::to_string(ex.input.token_ids.size()) +
                        " but the model expects " + std::to_string(n));
    }
  }
  std::vector<std::size_t> predicted(data.size()), gold(data.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      predicted[i] = encoder.predict(data[i].input);
      gold[i] = data[i].label;
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, data.size()));
  if (workers == 1) {
    run(0, data.size());
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (data.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk, end = std::min(data.size(), begin + chunk);
      if (begin < end) threads.emplace_back(run, begin, end);
    }
    for (auto& t : threads) t.join();
  }
  return metrics_from_predictions(predicted, gold);
}

}  // namespace kanli::harness
