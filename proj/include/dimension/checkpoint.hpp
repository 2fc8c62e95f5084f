#pragma once

// Checkpoint file ("DIMC", little-endian):
//   "DIMC" u32 version u32 endian-tag(0x01020304)
//   text  model config echo (u64 length + key=value lines)
//   u64 seed u64 epochs_done u64 adam_step
//   f64 beta1 f64 beta2 f64 epsilon
//   u64 P, then P f64 parameters, P f64 first moments, P f64 second moments
//   u32 crc32 of everything above

#include <filesystem>

#include "dimension/binary_io.hpp"
#include "dimension/config.hpp"
#include "dimension/optim.hpp"
#include "dimension/params.hpp"

namespace dimension {

struct Checkpoint {
  ModelConfig model;
  ParameterSet params;
  OptimizerState optimizer;
  std::uint64_t seed = 0;
  std::uint64_t epochs_done = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>("DIMC"), 4));
  w.u32(kCheckpointVersion);
  w.u32(kEndianTag);
  KeyValues kv;
  write_model(c.model, kv);
  w.text(to_text(kv));
  w.u64(c.seed);
  w.u64(c.epochs_done);
  w.u64(c.optimizer.step);
  w.f64(c.optimizer.hyper.beta1);
  w.f64(c.optimizer.hyper.beta2);
  w.f64(c.optimizer.hyper.epsilon);
  w.u64(c.params.size());
  w.f64s(c.params.values());
  w.f64s(c.optimizer.first_moment);
  w.f64s(c.optimizer.second_moment);
  w.crc_since(0);
  return w.buffer();
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  expect_magic(r, "DIMC", "checkpoint");
  if (const auto v = r.u32(); v != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(v));
  }
  if (r.u32() != kEndianTag) throw FormatError("checkpoint: bad endianness tag");
  Checkpoint c;
  c.model = read_model(parse_key_values(r.text()), ModelConfig{});
  c.seed = r.u64();
  c.epochs_done = r.u64();
  const auto step = r.u64();
  AdamHyper h;
  h.beta1 = r.f64();
  h.beta2 = r.f64();
  h.epsilon = r.f64();
  const auto n = r.u64();
  c.params = ParameterSet(c.model);
  if (n != c.params.size()) throw FormatError("checkpoint: parameter count does not match the model config");
  auto values = r.f64s(n);
  auto m = r.f64s(n);
  auto v = r.f64s(n);
  r.check_crc_since(0, "checkpoint body");
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  std::copy(values.begin(), values.end(), c.params.mutable_values().begin());
  c.optimizer = OptimizerState(c.params, h);
  c.optimizer.step = step;
  c.optimizer.first_moment = std::move(m);
  c.optimizer.second_moment = std::move(v);
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_checkpoint(bytes);
}

}  // namespace dimension
