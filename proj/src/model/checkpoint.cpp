// SPDX-License-Identifier: Apache-2.0
#include "kanli/model/checkpoint.hpp"

#include <set>
#include <sstream>

#include "kanli/binary_io.hpp"
#include "kanli/errors.hpp"

namespace kanli::model {

namespace {

constexpr std::string_view kMagic = "KAM1";
constexpr std::uint64_t kMaxHeaderBytes = 1ull << 30;

}  // namespace

void write_checkpoint(std::ostream& out, const Encoder& encoder,
                      const std::vector<std::string>& vocab) {
  const nlohmann::json header = {{"config", to_json(encoder.config())},
                                 {"seed", encoder.params().seed()},
                                 {"vocab", vocab}};
  const std::string text = header.dump();
  io::write_magic(out, kMagic);
  io::write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  io::write_u64(out, encoder.params().size());
  for (const auto& [name, var] : encoder.params()) {
    io::write_string(out, name);
    write_tensor(out, var.value());
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  io::expect_magic(in, kMagic);
  const std::uint64_t len = io::read_u64(in);
  if (len > kMaxHeaderBytes) throw FormatError("checkpoint header too large");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw FormatError("truncated checkpoint header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not JSON: ") + e.what());
  }
  if (!header.contains("config") || !header.contains("vocab")) {
    throw FormatError("checkpoint header lacks config or vocab");
  }

  Checkpoint ck;
  EncoderConfig cfg;
  try {
    cfg = encoder_config_from_json(header.at("config"));
    ck.vocab = header.at("vocab").get<std::vector<std::string>>();
    const std::uint64_t seed = header.value("seed", std::uint64_t{0});
    ck.encoder = std::make_unique<Encoder>(cfg, seed);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (ck.vocab.size() != cfg.vocab_size) {
    throw FormatError("checkpoint vocab size does not match config");
  }

  ParamStore& params = ck.encoder->params();
  const std::uint64_t count = io::read_u64(in);
  if (count != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, config needs " +
                      std::to_string(params.size()));
  }
  std::set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = io::read_string(in);
    if (!seen.insert(name).second) throw FormatError("duplicate parameter '" + name + "'");
    Tensor value = read_tensor(in);
    if (!params.contains(name)) throw FormatError("unexpected parameter '" + name + "'");
    if (value.shape() != params.get(name).shape()) {
      throw FormatError("shape mismatch for parameter '" + name + "'");
    }
    params.assign(name, value);
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Encoder& encoder,
                     const std::vector<std::string>& vocab) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, encoder, vocab);
  io::write_file(path, out.str());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::istringstream in(io::read_file(path), std::ios::binary);
  return read_checkpoint(in);
}

}  // namespace kanli::model
