// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include <json.hpp>

#include "kanli/harness/dataset.hpp"
#include "kanli/model/encoder.hpp"

namespace kanli::harness {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  /// Share of the training set used (a seeded prefix of a shuffle).
  double data_fraction = 1.0;
  /// Share of lexicon pairs visible to both training and evaluation.
  double knowledge_fraction = 1.0;
  /// Probability of replacing a word token by [UNK] during training.
  double word_dropout = 0.0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct Metrics {
  double accuracy = 0.0;
  std::size_t count = 0;
  /// confusion[gold][predicted]
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> confusion{};
  std::array<double, kNumLabels> precision{};
  std::array<double, kNumLabels> recall{};
  /// Mean training loss per epoch (empty for pure evaluation).
  std::vector<double> loss_curve;
};

/// Precision/recall are 0 for classes never predicted / never present.
Metrics metrics_from_predictions(const std::vector<std::size_t>& predicted,
                                 const std::vector<std::size_t>& gold);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

/// Adam with bias correction over every parameter of a store.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double epsilon)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}
  /// Applies one update from the gradients currently held by the store.
  void step(ParamStore& params);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments_;
};

/// Mini-batch training with a seeded shuffle per epoch; the batch loss is
/// the mean example loss. Throws DivergenceError on a non-finite loss.
/// Returns metrics over the epochs' running predictions plus the loss curve.
Metrics train(model::Encoder& encoder, const std::vector<EncodedExample>& data,
              const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch = {});

/// Argmax predictions over the set; `workers` > 1 splits it across threads.
/// ConfigError if the data was encoded for another sequence length.
Metrics evaluate(const model::Encoder& encoder, const std::vector<EncodedExample>& data,
                 std::size_t workers = 1);

}  // namespace kanli::harness
