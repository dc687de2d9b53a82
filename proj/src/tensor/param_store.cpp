// SPDX-License-Identifier: Apache-2.0
#include "kanli/param_store.hpp"

#include <cmath>
#include <random>

#include "kanli/errors.hpp"

namespace kanli {

std::uint64_t stable_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double unit_uniform(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

Tensor ParamStore::draw(const std::string& name, const Shape& shape,
                        const Recipe& r) const {
  switch (r.init) {
    case Init::kZeros:
      return Tensor(shape, 0.0);
    case Init::kOnes:
      return Tensor(shape, 1.0);
    case Init::kGlorotUniform: {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(r.fan_in + r.fan_out));
      std::mt19937_64 rng(seed_ ^ stable_hash(name));
      Tensor t(shape);
      for (auto& v : t.data()) v = (2.0 * unit_uniform(rng()) - 1.0) * limit;
      return t;
    }
  }
  throw ContractError("unknown init");
}

Var& ParamStore::create(const std::string& name, Shape shape, Init init,
                        std::size_t fan_in, std::size_t fan_out) {
  if (params_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
  if (init == Init::kGlorotUniform && fan_in + fan_out == 0) {
    throw ContractError("parameter '" + name + "' needs fan_in/fan_out");
  }
  Recipe recipe{init, fan_in, fan_out};
  recipes_.emplace(name, recipe);
  auto [it, _] = params_.emplace(name, Var(draw(name, shape, recipe), true));
  return it->second;
}

Var& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("no parameter '" + name + "'");
  return it->second;
}

const Var& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("no parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::num_scalars() const {
  std::size_t total = 0;
  for (const auto& [_, v] : params_) total += v.value().size();
  return total;
}

void ParamStore::reinitialize() {
  for (auto& [name, var] : params_) {
    var.mutable_value() = draw(name, var.shape(), recipes_.at(name));
    var.zero_grad();
  }
}

void ParamStore::zero_grad() {
  for (auto& [_, var] : params_) var.zero_grad();
}

void ParamStore::assign(const std::string& name, const Tensor& value) {
  Var& var = get(name);
  if (var.shape() != value.shape()) {
    throw DimensionError("parameter '" + name + "' has shape " +
                         shape_to_string(var.shape()) + ", got " +
                         shape_to_string(value.shape()));
  }
  var.mutable_value() = value;
}

}  // namespace kanli
