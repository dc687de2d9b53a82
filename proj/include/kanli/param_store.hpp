// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "kanli/autograd.hpp"

namespace kanli {

enum class Init {
  kZeros,
  kOnes,
  /// uniform(-a, a), a = sqrt(6 / (fan_in + fan_out))
  kGlorotUniform,
};

/// Named trainable parameters, iterated in name order.
///
/// Each tensor is drawn from its own stream seeded by (seed, name), so the
/// values of one parameter never depend on which other parameters exist.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Registers and initializes a parameter. fan_in/fan_out are only used by
  /// kGlorotUniform. Throws ContractError on duplicate names.
  Var& create(const std::string& name, Shape shape, Init init,
              std::size_t fan_in = 0, std::size_t fan_out = 0);

  Var& get(const std::string& name);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;
  std::uint64_t seed() const { return seed_; }

  /// Redraws every parameter from the stored seed and init recipe.
  void reinitialize();
  void zero_grad();

  /// Replaces the value of an existing parameter (shapes must agree).
  void assign(const std::string& name, const Tensor& value);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  struct Recipe {
    Init init;
    std::size_t fan_in;
    std::size_t fan_out;
  };
  Tensor draw(const std::string& name, const Shape& shape, const Recipe& r) const;

  std::uint64_t seed_;
  std::map<std::string, Var> params_;
  std::map<std::string, Recipe> recipes_;
};

/// Deterministic 64-bit hash (FNV-1a) for seeding per-name streams.
std::uint64_t stable_hash(const std::string& text);

/// Uniform double in [0, 1) from a 64-bit generator draw; portable across
/// standard libraries unlike std::uniform_real_distribution.
double unit_uniform(std::uint64_t bits);

}  // namespace kanli
