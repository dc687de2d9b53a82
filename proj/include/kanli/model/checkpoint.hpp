// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "kanli/model/encoder.hpp"

namespace kanli::model {

struct Checkpoint {
  std::unique_ptr<Encoder> encoder;
  /// Token strings indexed by id.
  std::vector<std::string> vocab;
};

/// "KAM1", u64-length-prefixed JSON {"config", "seed", "vocab"}, u64 tensor
/// count, then per parameter (name order) a u32-prefixed name and a KAT1
/// tensor.
void write_checkpoint(std::ostream& out, const Encoder& encoder,
                      const std::vector<std::string>& vocab);
/// Rebuilds the encoder from the stored config and overwrites every
/// parameter; FormatError if names or shapes disagree with the config.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const Encoder& encoder,
                     const std::vector<std::string>& vocab);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace kanli::model
