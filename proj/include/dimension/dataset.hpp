#pragma once

// Training triples (S, K_u, mask) and their on-disk format.
//
// Dataset file ("DIMK", all integers/doubles little-endian):
//   header : "DIMK" u32 version u32 endian-tag(0x01020304)
//            u64 nx u64 ny u64 nt u64 count            u32 crc32(header)
//   record : u8 split(0 train, 1 test) f64 accel u32 acs
//            f64 noise_std u64 noise_seed
//            ceil(ny*nt/8) bytes mask bits, bit i = line (i / nt), frame (i % nt), LSB first
//            S   : nx*ny*nt interleaved (re, im) f64
//            K_u : nx*ny*nt interleaved (re, im) f64
//            u32 crc32(record)
//
// Volume bundle ("DIMV"): header "DIMV" u32 version u32 endian-tag u64 nx
// u64 ny u64 nt u64 count, then the volumes, then one u32 crc32 over all.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dimension/binary_io.hpp"
#include "dimension/phantom.hpp"
#include "dimension/sampling.hpp"

namespace dimension {

enum class Split : std::uint8_t { train = 0, test = 1 };

struct Example {
  ComplexVolume image;   // fully sampled S
  ComplexVolume kspace;  // undersampled K_u
  SamplingMask mask;
  double noise_std = 0.0;
  std::uint64_t noise_seed = 0;
  Split split = Split::train;

  bool operator==(const Example&) const = default;
};

struct Dataset {
  Dims dims;
  std::vector<Example> examples;

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < examples.size(); ++i)
      if (examples[i].split == s) out.push_back(i);
    return out;
  }

  bool operator==(const Dataset&) const = default;
};

inline Example make_example(ComplexVolume image, SamplingMask mask, double noise_std, std::uint64_t noise_seed,
                            Split split) {
  Example e;
  e.kspace = simulate_acquisition(image, mask, noise_std, noise_seed);
  e.image = std::move(image);
  e.mask = std::move(mask);
  e.noise_std = noise_std;
  e.noise_seed = noise_seed;
  e.split = split;
  return e;
}

struct SamplingSpec {
  double accel = 4.0;
  std::size_t acs = 4;
  double sigma_fraction = 1.0 / 6.0;
  std::uint64_t seed = 0;
};

struct DatasetSpec {
  PhantomSpec phantom;
  std::size_t count = 50;
  double test_fraction = 0.1;
  SamplingSpec sampling;
  std::optional<Dims> patch;
  std::array<std::size_t, 3> stride{7, 7, 5};
};

/// `count` phantoms (seeds derived from phantom.seed), a fresh mask per
/// example, and a random phantom-level train/test split.
inline Dataset make_dataset(const DatasetSpec& spec) {
  spec.phantom.validate();
  if (spec.count < 1) throw ConfigError("dataset needs at least one phantom");
  if (!(spec.test_fraction >= 0.0 && spec.test_fraction < 1.0)) throw ConfigError("test fraction must be in [0, 1)");

  std::vector<Split> split(spec.count, Split::train);
  {
    std::vector<std::size_t> order(spec.count);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(spec.phantom.seed, 0x5917));
    rng.shuffle(order.begin(), order.end());
    const auto n_test = static_cast<std::size_t>(std::lround(spec.test_fraction * static_cast<double>(spec.count)));
    for (std::size_t i = 0; i < n_test; ++i) split[order[i]] = Split::test;
  }

  Dataset ds;
  ds.dims = spec.patch ? *spec.patch : spec.phantom.dims();
  std::uint64_t serial = 0;
  for (std::size_t i = 0; i < spec.count; ++i) {
    PhantomSpec ps = spec.phantom;
    ps.seed = derive_seed(spec.phantom.seed, i);
    ComplexVolume full = generate_phantom(ps);
    std::vector<ComplexVolume> pieces;
    if (spec.patch) {
      pieces = shear_patches(full, *spec.patch, spec.stride);
    } else {
      pieces.push_back(std::move(full));
    }
    for (auto& piece : pieces) {
      const Dims& d = piece.dims();
      auto mask = generate_mask(d.ny, d.nt, spec.sampling.accel, spec.sampling.acs,
                                derive_seed(spec.sampling.seed, serial), spec.sampling.sigma_fraction);
      ds.examples.push_back(make_example(std::move(piece), std::move(mask), spec.phantom.noise_std,
                                         derive_seed(spec.phantom.seed ^ 0x4e015eULL, serial), split[i]));
      ++serial;
    }
  }
  return ds;
}

inline constexpr std::uint32_t kDatasetVersion = 1;

namespace detail {

inline void write_mask_bits(ByteWriter& w, const SamplingMask& m) {
  std::vector<std::uint8_t> bits((m.ny() * m.nt() + 7) / 8, 0);
  for (std::size_t c = 0; c < m.ny(); ++c)
    for (std::size_t t = 0; t < m.nt(); ++t)
      if (m.line(c, t)) {
        const std::size_t i = c * m.nt() + t;
        bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
      }
  w.bytes(bits);
}

inline SamplingMask read_mask_bits(ByteReader& r, const Dims& d, std::size_t acs, double accel) {
  SamplingMask m(d.ny, d.nt, acs, accel);
  auto bits = r.bytes((d.ny * d.nt + 7) / 8);
  for (std::size_t c = 0; c < d.ny; ++c)
    for (std::size_t t = 0; t < d.nt; ++t) {
      const std::size_t i = c * d.nt + t;
      m.set_line(c, t, (bits[i / 8] >> (i % 8)) & 1u);
    }
  return m;
}

inline void write_header(ByteWriter& w, const char* magic, std::uint32_t version, const Dims& d, std::uint64_t count) {
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(magic), 4));
  w.u32(version);
  w.u32(kEndianTag);
  w.u64(d.nx);
  w.u64(d.ny);
  w.u64(d.nt);
  w.u64(count);
}

inline std::pair<Dims, std::uint64_t> read_header(ByteReader& r, const char (&magic)[5], std::uint32_t version,
                                                  const std::string& what) {
  expect_magic(r, magic, what);
  const auto v = r.u32();
  if (v != version) throw FormatError(what + ": unsupported version " + std::to_string(v));
  if (r.u32() != kEndianTag) throw FormatError(what + ": bad endianness tag");
  Dims d{r.u64(), r.u64(), r.u64()};
  const auto count = r.u64();
  return {d, count};
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  ByteWriter w;
  detail::write_header(w, "DIMK", kDatasetVersion, ds.dims, ds.examples.size());
  w.crc_since(0);
  for (const auto& e : ds.examples) {
    require_same(ds.dims, e.image.dims(), "dataset record");
    const std::size_t mark = w.size();
    w.u8(static_cast<std::uint8_t>(e.split));
    w.f64(e.mask.accel());
    w.u32(static_cast<std::uint32_t>(e.mask.acs()));
    w.f64(e.noise_std);
    w.u64(e.noise_seed);
    detail::write_mask_bits(w, e.mask);
    w.complex_volume(e.image);
    w.complex_volume(e.kspace);
    w.crc_since(mark);
  }
  return w.buffer();
}

/// Decodes and re-validates every record: K_u must equal the simulated
/// acquisition of S under the stored mask and noise parameters, bit for bit.
inline Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "dataset");
  auto [dims, count] = detail::read_header(r, "DIMK", kDatasetVersion, "dataset");
  r.check_crc_since(0, "header");
  if (count > 0) require_valid(dims);
  Dataset ds;
  ds.dims = dims;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t mark = r.position();
    const std::string where = "record " + std::to_string(i);
    const auto split = r.u8();
    if (split > 1) throw FormatError("dataset " + where + ": bad split tag");
    const double accel = r.f64();
    const auto acs = r.u32();
    Example e;
    e.split = static_cast<Split>(split);
    e.noise_std = r.f64();
    e.noise_seed = r.u64();
    e.mask = detail::read_mask_bits(r, dims, acs, accel);
    e.image = r.complex_volume(dims);
    e.kspace = r.complex_volume(dims);
    r.check_crc_since(mark, where);
    if (!(simulate_acquisition(e.image, e.mask, e.noise_std, e.noise_seed) == e.kspace)) {
      throw FormatError("dataset " + where + ": K_u is not the acquisition of S under its mask");
    }
    ds.examples.push_back(std::move(e));
  }
  if (!r.at_end()) throw FormatError("dataset: trailing bytes after last record");
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) { write_file(path, encode_dataset(ds)); }

inline Dataset load_dataset(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_dataset(bytes);
}

inline void save_volumes(const std::vector<ComplexVolume>& vols, const std::filesystem::path& path) {
  ByteWriter w;
  const Dims d = vols.empty() ? Dims{} : vols.front().dims();
  detail::write_header(w, "DIMV", 1, d, vols.size());
  for (const auto& v : vols) {
    require_same(d, v.dims(), "volume bundle");
    w.complex_volume(v);
  }
  w.crc_since(0);
  write_file(path, w.buffer());
}

inline std::vector<ComplexVolume> load_volumes(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, "volume bundle");
  auto [dims, count] = detail::read_header(r, "DIMV", 1, "volume bundle");
  std::vector<ComplexVolume> out;
  for (std::uint64_t i = 0; i < count; ++i) out.push_back(r.complex_volume(dims));
  r.check_crc_since(0, "bundle");
  return out;
}

}  // namespace dimension
