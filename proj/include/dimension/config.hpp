#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dimension/error.hpp"

namespace dimension {

inline constexpr double kHardDataConsistency = std::numeric_limits<double>::infinity();

enum class TemporalPadding { zero, circular };

/// Cascade architecture and loss weights.
///
/// Blocks are numbered FDN first (0 .. M-1) then SDN (M .. M+N-1). Every block
/// holds `layers_per_block` convolutions 2 -> filters -> ... -> filters -> 2.
struct ModelConfig {
  int m_blocks = 1;
  int n_blocks = 4;
  int layers_per_block = 5;
  int filters = 64;
  std::array<int, 3> kernel{3, 3, 3};
  double dc_lambda = kHardDataConsistency;
  /// Optional per-block lambda, size M+N when present.
  std::vector<double> block_dc_lambda;
  TemporalPadding temporal_padding = TemporalPadding::zero;
  std::vector<double> loss_alpha{0.0};
  std::vector<double> loss_beta{0.0, 0.0, 0.0};

  int block_count() const { return m_blocks + n_blocks; }
  int conv_layer_count() const { return block_count() * layers_per_block; }

  double lambda_for_block(int block) const {
    return block_dc_lambda.empty() ? dc_lambda : block_dc_lambda.at(static_cast<std::size_t>(block));
  }

  void validate() const {
    if (m_blocks < 0) throw ConfigError("M (FDN blocks) must be >= 0");
    if (n_blocks < 1) throw ConfigError("N (SDN blocks) must be >= 1");
    if (layers_per_block < 2) throw ConfigError("L (layers per block) must be >= 2");
    if (filters < 1) throw ConfigError("filters must be >= 1");
    for (int k : kernel) {
      if (k < 1 || k % 2 == 0) throw ConfigError("kernel dims must be odd and positive");
    }
    auto check_lambda = [](double l) {
      if (!(l > 0.0)) throw ConfigError("data-consistency lambda must be > 0 or inf");
    };
    check_lambda(dc_lambda);
    if (!block_dc_lambda.empty()) {
      if (block_dc_lambda.size() != static_cast<std::size_t>(block_count())) {
        throw ConfigError("block_dc_lambda needs one entry per block");
      }
      for (double l : block_dc_lambda) check_lambda(l);
    }
    if (loss_alpha.size() != static_cast<std::size_t>(m_blocks)) {
      throw ConfigError("len(alpha) must equal M = " + std::to_string(m_blocks) + ", got " +
                        std::to_string(loss_alpha.size()));
    }
    if (loss_beta.size() != static_cast<std::size_t>(n_blocks - 1)) {
      throw ConfigError("len(beta) must equal N-1 = " + std::to_string(n_blocks - 1) + ", got " +
                        std::to_string(loss_beta.size()));
    }
    for (double w : loss_alpha)
      if (!(w >= 0.0)) throw ConfigError("loss weights must be non-negative");
    for (double w : loss_beta)
      if (!(w >= 0.0)) throw ConfigError("loss weights must be non-negative");
  }

  bool operator==(const ModelConfig&) const = default;
};

// ---------------------------------------------------------------------------
// key=value text helpers shared by the config, checkpoint and experiment files.

using KeyValues = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Parses `key = value` lines; '#' starts a comment.
inline KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline double parse_double(const std::string& key, const std::string& s) {
  if (s == "inf" || s == "infinite") return kHardDataConsistency;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + s + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not an integer: '" + s + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size() || s.starts_with('-')) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not an unsigned integer: '" + s + "'");
  }
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

inline std::string format_double_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += format_double(v[i]);
  }
  return s;
}

inline std::string to_text(const KeyValues& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

/// Serialises a model under the `model.` prefix.
inline void write_model(const ModelConfig& c, KeyValues& kv) {
  kv["model.m_blocks"] = std::to_string(c.m_blocks);
  kv["model.n_blocks"] = std::to_string(c.n_blocks);
  kv["model.layers"] = std::to_string(c.layers_per_block);
  kv["model.filters"] = std::to_string(c.filters);
  kv["model.kernel"] =
      std::to_string(c.kernel[0]) + "," + std::to_string(c.kernel[1]) + "," + std::to_string(c.kernel[2]);
  kv["model.dc_lambda"] = format_double(c.dc_lambda);
  if (!c.block_dc_lambda.empty()) kv["model.block_dc_lambda"] = format_double_list(c.block_dc_lambda);
  kv["model.temporal_padding"] = c.temporal_padding == TemporalPadding::zero ? "zero" : "circular";
  kv["model.alpha"] = format_double_list(c.loss_alpha);
  kv["model.beta"] = format_double_list(c.loss_beta);
}

/// Applies any `model.*` keys present in kv on top of `base`.
inline ModelConfig read_model(const KeyValues& kv, ModelConfig base) {
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto v = get("model.m_blocks")) base.m_blocks = static_cast<int>(parse_int("model.m_blocks", *v));
  if (auto v = get("model.n_blocks")) base.n_blocks = static_cast<int>(parse_int("model.n_blocks", *v));
  if (auto v = get("model.layers")) base.layers_per_block = static_cast<int>(parse_int("model.layers", *v));
  if (auto v = get("model.filters")) base.filters = static_cast<int>(parse_int("model.filters", *v));
  if (auto v = get("model.kernel")) {
    const auto k = parse_double_list("model.kernel", *v);
    if (k.size() != 3) throw ConfigError("model.kernel needs three comma-separated sizes");
    for (int i = 0; i < 3; ++i) base.kernel[static_cast<std::size_t>(i)] = static_cast<int>(k[static_cast<std::size_t>(i)]);
  }
  if (auto v = get("model.dc_lambda")) base.dc_lambda = parse_double("model.dc_lambda", *v);
  if (auto v = get("model.block_dc_lambda")) base.block_dc_lambda = parse_double_list("model.block_dc_lambda", *v);
  if (auto v = get("model.temporal_padding")) {
    if (*v == "zero") {
      base.temporal_padding = TemporalPadding::zero;
    } else if (*v == "circular") {
      base.temporal_padding = TemporalPadding::circular;
    } else {
      throw ConfigError("model.temporal_padding must be zero or circular");
    }
  }
  if (auto v = get("model.alpha")) base.loss_alpha = parse_double_list("model.alpha", *v);
  if (auto v = get("model.beta")) base.loss_beta = parse_double_list("model.beta", *v);
  return base;
}

}  // namespace dimension
