#pragma once

// Experiment runner: config file, dataset -> train -> evaluate pipeline,
// metrics report, on-disk artifacts, verification and sweeps.
//
// Output directory layout:
//   config.resolved.txt   every key of the resolved config
//   dataset.dimk          dataset actually used (generated or copied)
//   train_log.jsonl       one JSON record per step and per epoch
//   checkpoint.dimc       final parameters and optimizer state
//   reconstructions.dimv  network output for each test example, in index order
//   metrics.csv           per-example rows and a final "mean" row
//   summary.json
//   images/               PGM error maps, y-t extractions and masks

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "dimension/checkpoint.hpp"
#include "dimension/dataset.hpp"
#include "dimension/metrics.hpp"
#include "dimension/presets.hpp"
#include "dimension/trainer.hpp"

namespace dimension {

struct EvalOptions {
  double display_max = 0.07;
  long long yt_index = -1;  // -1: nx / 2
  std::size_t images = 2;   // test examples that get images
  std::size_t jobs = 1;
};

struct ExperimentConfig {
  std::filesystem::path output = "run";
  std::filesystem::path dataset;  // empty: generate from `data`
  DatasetSpec data;
  std::string preset = "dimension";
  ModelConfig model = dimension::preset("dimension");
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  LrSchedule lr;
  AdamHyper adam;
  std::uint64_t train_seed = 0;
  std::size_t checkpoint_every = 1;
  EvalOptions eval;

  void validate() const {
    model.validate();
    data.phantom.validate();
    if (data.count < 1) throw ConfigError("data.count must be >= 1");
    if (!(data.test_fraction >= 0.0 && data.test_fraction < 1.0)) throw ConfigError("data.test_fraction must be in [0, 1)");
    if (batch_size < 1) throw ConfigError("train.batch must be >= 1");
    if (!(lr.initial > 0.0)) throw ConfigError("train.lr must be positive");
    if (!(lr.decay > 0.0)) throw ConfigError("train.decay must be positive");
    if (!(eval.display_max > 0.0)) throw ConfigError("eval.display_max must be positive");
    if (eval.jobs < 1) throw ConfigError("eval.jobs must be >= 1");
    if (!dataset.empty() && !std::filesystem::exists(dataset)) {
      throw ConfigError("dataset file does not exist: " + dataset.string());
    }
  }
};

namespace detail {

inline std::string dims_text(const Dims& d) {
  return std::to_string(d.nx) + "," + std::to_string(d.ny) + "," + std::to_string(d.nt);
}

inline std::array<std::size_t, 3> parse_triple(const std::string& key, const std::string& v) {
  const auto list = parse_double_list(key, v);
  if (list.size() != 3) throw ConfigError(key + ": expected three comma-separated integers");
  std::array<std::size_t, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(list[i] >= 1.0) || list[i] != std::floor(list[i])) throw ConfigError(key + ": entries must be integers >= 1");
    out[i] = static_cast<std::size_t>(list[i]);
  }
  return out;
}

inline const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys{"model.m_blocks", "model.n_blocks",         "model.layers",
                                          "model.filters",  "model.kernel",           "model.dc_lambda",
                                          "model.block_dc_lambda", "model.temporal_padding", "model.alpha",
                                          "model.beta"};
  return keys;
}

}  // namespace detail

/// Builds a config from key=value pairs. Model keys override the preset.
inline ExperimentConfig experiment_from_kv(const KeyValues& kv) {
  ExperimentConfig c;
  auto& p = c.data.phantom;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto size = [](std::size_t& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) {
      const auto n = parse_int(k, v);
      if (n < 0) throw ConfigError(k + " must be >= 0");
      dst = static_cast<std::size_t>(n);
    };
  };
  auto real = [](double& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = parse_double(k, v); }; };
  auto u64 = [](std::uint64_t& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = parse_u64(k, v); }; };

  const std::map<std::string, Setter> setters{
      {"output", [&](const std::string&, const std::string& v) { c.output = v; }},
      {"dataset", [&](const std::string&, const std::string& v) { c.dataset = v; }},
      {"data.count", size(c.data.count)},
      {"data.test_fraction", real(c.data.test_fraction)},
      {"data.patch",
       [&](const std::string& k, const std::string& v) {
         if (v == "none" || v.empty()) {
           c.data.patch.reset();
         } else {
           const auto t = detail::parse_triple(k, v);
           c.data.patch = Dims{t[0], t[1], t[2]};
         }
       }},
      {"data.stride", [&](const std::string& k, const std::string& v) { c.data.stride = detail::parse_triple(k, v); }},
      {"phantom.nx", size(p.nx)},
      {"phantom.ny", size(p.ny)},
      {"phantom.nt", size(p.nt)},
      {"phantom.objects",
       [&](const std::string& k, const std::string& v) { p.n_objects = static_cast<int>(parse_int(k, v)); }},
      {"phantom.motion_amplitude", real(p.motion_amplitude)},
      {"phantom.period", real(p.period)},
      {"phantom.contrast_min", real(p.contrast_min)},
      {"phantom.contrast_max", real(p.contrast_max)},
      {"phantom.phase_amplitude", real(p.phase_amplitude)},
      {"phantom.phase_frequency", real(p.phase_frequency)},
      {"phantom.noise_std", real(p.noise_std)},
      {"phantom.seed", u64(p.seed)},
      {"sampling.accel", real(c.data.sampling.accel)},
      {"sampling.acs", size(c.data.sampling.acs)},
      {"sampling.sigma_fraction", real(c.data.sampling.sigma_fraction)},
      {"sampling.seed", u64(c.data.sampling.seed)},
      {"train.epochs", size(c.epochs)},
      {"train.batch", size(c.batch_size)},
      {"train.lr", real(c.lr.initial)},
      {"train.decay", real(c.lr.decay)},
      {"train.seed", u64(c.train_seed)},
      {"train.beta1", real(c.adam.beta1)},
      {"train.beta2", real(c.adam.beta2)},
      {"train.epsilon", real(c.adam.epsilon)},
      {"train.checkpoint_every", size(c.checkpoint_every)},
      {"eval.display_max", real(c.eval.display_max)},
      {"eval.yt_index", [&](const std::string& k, const std::string& v) { c.eval.yt_index = parse_int(k, v); }},
      {"eval.images", size(c.eval.images)},
      {"eval.jobs", size(c.eval.jobs)},
  };

  if (auto it = kv.find("model.preset"); it != kv.end()) c.preset = it->second;
  c.model = preset(c.preset);
  for (const auto& [k, v] : kv) {
    if (k == "model.preset" || detail::model_keys().count(k)) continue;
    auto s = setters.find(k);
    if (s == setters.end()) throw ConfigError("unknown config key '" + k + "'");
    s->second(k, v);
  }
  c.model = read_model(kv, c.model);
  return c;
}

/// Every key, fully resolved; experiment_from_kv(experiment_to_kv(c)) == c.
inline KeyValues experiment_to_kv(const ExperimentConfig& c) {
  KeyValues kv;
  const auto& p = c.data.phantom;
  kv["output"] = c.output.string();
  if (!c.dataset.empty()) kv["dataset"] = c.dataset.string();
  kv["data.count"] = std::to_string(c.data.count);
  kv["data.test_fraction"] = format_double(c.data.test_fraction);
  kv["data.patch"] = c.data.patch ? detail::dims_text(*c.data.patch) : "none";
  kv["data.stride"] = detail::dims_text({c.data.stride[0], c.data.stride[1], c.data.stride[2]});
  kv["phantom.nx"] = std::to_string(p.nx);
  kv["phantom.ny"] = std::to_string(p.ny);
  kv["phantom.nt"] = std::to_string(p.nt);
  kv["phantom.objects"] = std::to_string(p.n_objects);
  kv["phantom.motion_amplitude"] = format_double(p.motion_amplitude);
  kv["phantom.period"] = format_double(p.period);
  kv["phantom.contrast_min"] = format_double(p.contrast_min);
  kv["phantom.contrast_max"] = format_double(p.contrast_max);
  kv["phantom.phase_amplitude"] = format_double(p.phase_amplitude);
  kv["phantom.phase_frequency"] = format_double(p.phase_frequency);
  kv["phantom.noise_std"] = format_double(p.noise_std);
  kv["phantom.seed"] = std::to_string(p.seed);
  kv["sampling.accel"] = format_double(c.data.sampling.accel);
  kv["sampling.acs"] = std::to_string(c.data.sampling.acs);
  kv["sampling.sigma_fraction"] = format_double(c.data.sampling.sigma_fraction);
  kv["sampling.seed"] = std::to_string(c.data.sampling.seed);
  kv["model.preset"] = c.preset;
  write_model(c.model, kv);
  kv["train.epochs"] = std::to_string(c.epochs);
  kv["train.batch"] = std::to_string(c.batch_size);
  kv["train.lr"] = format_double(c.lr.initial);
  kv["train.decay"] = format_double(c.lr.decay);
  kv["train.seed"] = std::to_string(c.train_seed);
  kv["train.beta1"] = format_double(c.adam.beta1);
  kv["train.beta2"] = format_double(c.adam.beta2);
  kv["train.epsilon"] = format_double(c.adam.epsilon);
  kv["train.checkpoint_every"] = std::to_string(c.checkpoint_every);
  kv["eval.display_max"] = format_double(c.eval.display_max);
  kv["eval.yt_index"] = std::to_string(c.eval.yt_index);
  kv["eval.images"] = std::to_string(c.eval.images);
  kv["eval.jobs"] = std::to_string(c.eval.jobs);
  return kv;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

/// Reads a config file (may be empty) and applies `overrides` on top.
inline ExperimentConfig load_experiment_config(const std::filesystem::path& file, const KeyValues& overrides = {}) {
  KeyValues kv;
  if (!file.empty()) kv = parse_key_values(read_text_file(file));
  for (const auto& [k, v] : overrides) kv[k] = v;
  return experiment_from_kv(kv);
}

// ---------------------------------------------------------------------------
// Metrics report

struct MetricsRow {
  std::string label;  // example index, or "mean"
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double zf_mse = 0.0;
  double zf_psnr = 0.0;
  double zf_ssim = 0.0;
  double seconds = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  MetricsRow mean;
};

inline MetricsRow mean_row(const std::vector<MetricsRow>& rows) {
  MetricsRow m;
  m.label = "mean";
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.mse += r.mse;
    m.psnr += r.psnr;
    m.ssim += r.ssim;
    m.zf_mse += r.zf_mse;
    m.zf_psnr += r.zf_psnr;
    m.zf_ssim += r.zf_ssim;
    m.seconds += r.seconds;
  }
  const double n = static_cast<double>(rows.size());
  for (double* v : {&m.mse, &m.psnr, &m.ssim, &m.zf_mse, &m.zf_psnr, &m.zf_ssim, &m.seconds}) *v /= n;
  return m;
}

inline constexpr const char* kMetricsHeader = "example,mse,psnr,ssim,zf_mse,zf_psnr,zf_ssim,seconds";

inline std::string metrics_csv(const MetricsReport& r) {
  std::string s = std::string(kMetricsHeader) + "\n";
  auto row = [&](const MetricsRow& m) {
    s += m.label;
    for (double v : {m.mse, m.psnr, m.ssim, m.zf_mse, m.zf_psnr, m.zf_ssim, m.seconds}) s += "," + format_double(v);
    s += "\n";
  };
  for (const auto& m : r.rows) row(m);
  row(r.mean);
  return s;
}

inline MetricsReport parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kMetricsHeader) throw FormatError("metrics.csv: unexpected header");
  MetricsReport r;
  bool have_mean = false;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw FormatError("metrics.csv: expected 8 columns in '" + line + "'");
    MetricsRow m;
    m.label = cells[0];
    double* dst[] = {&m.mse, &m.psnr, &m.ssim, &m.zf_mse, &m.zf_psnr, &m.zf_ssim, &m.seconds};
    for (std::size_t i = 0; i < 7; ++i) {
      *dst[i] = cells[i + 1] == "nan" || cells[i + 1] == "-nan" ? std::numeric_limits<double>::quiet_NaN()
                                                                  : parse_double("metrics.csv", cells[i + 1]);
    }
    if (m.label == "mean") {
      r.mean = m;
      have_mean = true;
    } else {
      r.rows.push_back(m);
    }
  }
  if (!have_mean) throw FormatError("metrics.csv: missing mean row");
  return r;
}

// ---------------------------------------------------------------------------
// Stages

inline const char* kDatasetFile = "dataset.dimk";
inline const char* kLogFile = "train_log.jsonl";
inline const char* kCheckpointFile = "checkpoint.dimc";
inline const char* kReconFile = "reconstructions.dimv";
inline const char* kMetricsFile = "metrics.csv";
inline const char* kSummaryFile = "summary.json";
inline const char* kResolvedConfigFile = "config.resolved.txt";

template <class F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

/// Loads cfg.dataset, or generates from cfg.data; a copy goes to the output dir.
inline Dataset stage_data(const ExperimentConfig& cfg) {
  return run_stage("data", [&] {
    Dataset ds = cfg.dataset.empty() ? make_dataset(cfg.data) : load_dataset(cfg.dataset);
    if (ds.examples.empty()) throw ConfigError("dataset is empty");
    std::filesystem::create_directories(cfg.output);
    save_dataset(ds, cfg.output / kDatasetFile);
    return ds;
  });
}

/// Trains (or resumes) and writes the log and final checkpoint.
inline TrainResult stage_train(const ExperimentConfig& cfg, const Dataset& ds, const Checkpoint* resume = nullptr,
                               std::function<void(const std::string&)> sink = {}) {
  return run_stage("train", [&] {
    std::filesystem::create_directories(cfg.output);
    const auto log_path = cfg.output / kLogFile;
    std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
    if (!log) throw Error("cannot open " + log_path.string());
    TrainingOptions o;
    o.epochs = cfg.epochs;
    o.batch_size = cfg.batch_size;
    o.lr = cfg.lr;
    o.adam = cfg.adam;
    o.seed = cfg.train_seed;
    o.checkpoint_every = cfg.checkpoint_every;
    o.checkpoint_path = cfg.output / kCheckpointFile;
    o.sink = [&](const std::string& line) {
      log << line << "\n" << std::flush;
      if (sink) sink(line);
    };
    auto res = fit(ds, cfg.model, o, resume);
    save_checkpoint({cfg.model, res.params, res.optimizer, cfg.train_seed, res.epochs_done}, o.checkpoint_path);
    return res;
  });
}

struct Evaluated {
  MetricsReport report;
  std::vector<std::size_t> indices;
  std::vector<ComplexVolume> reconstructions;
};

/// Reconstructs the test split (training split if there is no test split)
/// and scores network output and zero-filled baseline on magnitudes.
inline Evaluated evaluate_split(const Dataset& ds, const ParameterSet& params, const ModelConfig& model,
                                std::size_t jobs = 1) {
  Evaluated ev;
  ev.indices = ds.indices(Split::test);
  if (ev.indices.empty()) ev.indices = ds.indices(Split::train);
  const std::size_t n = ev.indices.size();
  ev.report.rows.resize(n);
  ev.reconstructions.resize(n);
  const SsimOptions opt;
  const bool can_ssim = ds.dims.nx >= static_cast<std::size_t>(opt.window) &&
                        ds.dims.ny >= static_cast<std::size_t>(opt.window);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto worker = [&] {
    for (std::size_t j; (j = next++) < n;) {
      try {
        const Example& ex = ds.examples[ev.indices[j]];
        const auto t0 = std::chrono::steady_clock::now();
        ComplexVolume rec = reconstruct(ex, params, model);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto ref = magnitude(ex.image);
        const auto out = magnitude(rec);
        const auto zf = magnitude(zero_filled_recon(ex.kspace));
        MetricsRow& m = ev.report.rows[j];
        m.label = std::to_string(ev.indices[j]);
        m.mse = mean_squared_error(ref, out);
        m.psnr = psnr(ref, out);
        m.ssim = can_ssim ? ssim(ref, out, opt) : nan;
        m.zf_mse = mean_squared_error(ref, zf);
        m.zf_psnr = psnr(ref, zf);
        m.zf_ssim = can_ssim ? ssim(ref, zf, opt) : nan;
        m.seconds = secs;
        ev.reconstructions[j] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  ev.report.mean = mean_row(ev.report.rows);
  return ev;
}

inline void write_images(const ExperimentConfig& cfg, const Dataset& ds, const Evaluated& ev) {
  const auto dir = cfg.output / "images";
  const std::size_t yt = cfg.eval.yt_index < 0 ? ds.dims.nx / 2 : static_cast<std::size_t>(cfg.eval.yt_index);
  for (std::size_t j = 0; j < std::min(cfg.eval.images, ev.indices.size()); ++j) {
    const Example& ex = ds.examples[ev.indices[j]];
    const std::string stem = "ex" + std::to_string(ev.indices[j]);
    const auto ref = magnitude(ex.image);
    const auto rec = magnitude(ev.reconstructions[j]);
    const auto zf = magnitude(zero_filled_recon(ex.kspace));
    const auto err = error_map(ref, rec, cfg.eval.display_max);
    const auto zf_err = error_map(ref, zf, cfg.eval.display_max);
    for (std::size_t t = 0; t < err.size(); ++t) {
      const std::string ts = "_t" + std::to_string(t) + ".pgm";
      write_pgm(frame_image(rec, t), dir / (stem + "_recon" + ts));
      write_pgm(err[t], dir / (stem + "_err" + ts));
      write_pgm(zf_err[t], dir / (stem + "_zf_err" + ts));
    }
    write_pgm(to_gray(yt_extract(ref, yt), 0.0, 1.0), dir / (stem + "_yt_ref.pgm"));
    write_pgm(to_gray(yt_extract(rec, yt), 0.0, 1.0), dir / (stem + "_yt_recon.pgm"));
    write_pgm(to_gray(yt_extract(zf, yt), 0.0, 1.0), dir / (stem + "_yt_zf.pgm"));
    write_pgm(mask_image(ex.mask), dir / (stem + "_mask.pgm"));
  }
}

inline nlohmann::json row_json(const MetricsRow& m) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  return {{"mse", num(m.mse)},       {"psnr", num(m.psnr)},       {"ssim", num(m.ssim)},
          {"zf_mse", num(m.zf_mse)}, {"zf_psnr", num(m.zf_psnr)}, {"zf_ssim", num(m.zf_ssim)},
          {"seconds", num(m.seconds)}};
}

/// Evaluates `params` and writes reconstructions, metrics, summary and images.
inline MetricsReport stage_eval(const ExperimentConfig& cfg, const Dataset& ds, const ParameterSet& params,
                                const nlohmann::json& extra = {}) {
  const auto ev = run_stage("eval", [&] { return evaluate_split(ds, params, cfg.model, cfg.eval.jobs); });
  run_stage("report", [&] {
    save_volumes(ev.reconstructions, cfg.output / kReconFile);
    write_text_file(cfg.output / kMetricsFile, metrics_csv(ev.report));
    nlohmann::json s;
    s["preset"] = cfg.preset;
    s["parameters"] = params.size();
    s["test_examples"] = ev.indices.size();
    s["mean"] = row_json(ev.report.mean);
    s["psnr_gain_db"] = ev.report.mean.psnr - ev.report.mean.zf_psnr;
    s["ssim_gain"] = ev.report.mean.ssim - ev.report.mean.zf_ssim;
    for (const auto& [k, v] : extra.items()) s[k] = v;
    write_text_file(cfg.output / kSummaryFile, s.dump(2) + "\n");
    write_images(cfg, ds, ev);
  });
  return ev.report;
}

struct ExperimentResult {
  MetricsReport report;
  TrainResult training;
};

/// Full pipeline. Any failure is rethrown as StageError tagged with the stage.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::function<void(const std::string&)> sink = {}) {
  run_stage("config", [&] {
    cfg.validate();
    std::filesystem::create_directories(cfg.output);
    write_text_file(cfg.output / kResolvedConfigFile, to_text(experiment_to_kv(cfg)));
  });
  const Dataset ds = stage_data(cfg);
  ExperimentResult r;
  const auto t0 = std::chrono::steady_clock::now();
  r.training = stage_train(cfg, ds, nullptr, std::move(sink));
  const double train_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json extra;
  extra["epochs"] = r.training.epochs_done;
  extra["steps"] = r.training.log.steps.size();
  extra["train_seconds"] = train_secs;
  if (!r.training.log.steps.empty()) extra["final_tloss"] = r.training.log.steps.back().loss.tloss;
  r.report = stage_eval(cfg, ds, r.training.params, extra);
  return r;
}

// ---------------------------------------------------------------------------
// Verification

struct VerifyResult {
  std::size_t values_checked = 0;
  std::vector<std::string> mismatches;

  bool ok() const { return mismatches.empty(); }
};

namespace detail {

inline bool same_value(double a, double b, double tol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

}  // namespace detail

/// Recomputes every metric in metrics.csv from the stored dataset and
/// reconstructions, checks the mean row, and re-runs inference from the
/// checkpoint to confirm the stored reconstructions.
inline VerifyResult verify_experiment(const std::filesystem::path& dir, double tol = 1e-12) {
  VerifyResult v;
  const auto ds = load_dataset(dir / kDatasetFile);
  const auto recs = load_volumes(dir / kReconFile);
  const auto csv = parse_metrics_csv(read_text_file(dir / kMetricsFile));
  const auto ckpt = load_checkpoint(dir / kCheckpointFile);

  auto check = [&](const std::string& where, double stored, double fresh) {
    ++v.values_checked;
    if (!detail::same_value(fresh, stored, tol)) {
      v.mismatches.push_back(where + ": stored " + format_double(stored) + ", recomputed " + format_double(fresh));
    }
  };

  if (csv.rows.size() != recs.size()) {
    v.mismatches.push_back("metrics.csv has " + std::to_string(csv.rows.size()) + " rows but " +
                           std::to_string(recs.size()) + " reconstructions are stored");
    return v;
  }
  const SsimOptions opt;
  const bool can_ssim = ds.dims.nx >= static_cast<std::size_t>(opt.window) &&
                        ds.dims.ny >= static_cast<std::size_t>(opt.window);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t j = 0; j < recs.size(); ++j) {
    const auto& row = csv.rows[j];
    const auto idx = static_cast<std::size_t>(parse_u64("metrics.csv example", row.label));
    if (idx >= ds.examples.size()) {
      v.mismatches.push_back("row " + row.label + ": no such example");
      continue;
    }
    const Example& ex = ds.examples[idx];
    const auto ref = magnitude(ex.image);
    const auto rec = magnitude(recs[j]);
    const auto zf = magnitude(zero_filled_recon(ex.kspace));
    const std::string w = "example " + row.label;
    check(w + " mse", row.mse, mean_squared_error(ref, rec));
    check(w + " psnr", row.psnr, psnr(ref, rec));
    check(w + " ssim", row.ssim, can_ssim ? ssim(ref, rec, opt) : nan);
    check(w + " zf_mse", row.zf_mse, mean_squared_error(ref, zf));
    check(w + " zf_psnr", row.zf_psnr, psnr(ref, zf));
    check(w + " zf_ssim", row.zf_ssim, can_ssim ? ssim(ref, zf, opt) : nan);
    ++v.values_checked;
    if (!(reconstruct(ex, ckpt.params, ckpt.model) == recs[j])) {
      v.mismatches.push_back(w + ": checkpoint inference differs from the stored reconstruction");
    }
  }
  const auto m = mean_row(csv.rows);
  check("mean mse", csv.mean.mse, m.mse);
  check("mean psnr", csv.mean.psnr, m.psnr);
  check("mean ssim", csv.mean.ssim, m.ssim);
  check("mean zf_mse", csv.mean.zf_mse, m.zf_mse);
  check("mean zf_psnr", csv.mean.zf_psnr, m.zf_psnr);
  check("mean zf_ssim", csv.mean.zf_ssim, m.zf_ssim);
  check("mean seconds", csv.mean.seconds, m.seconds);
  return v;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepEntry {
  std::string value;
  std::filesystem::path output;
  MetricsRow mean;
};

inline std::string sanitize_component(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ? c : '_';
  return out;
}

/// One experiment per value of `key`, each in <output>/<key>=<value>/;
/// `jobs` experiments run concurrently. Writes <output>/sweep.csv.
inline std::vector<SweepEntry> sweep(const ExperimentConfig& base, const std::string& key,
                                     const std::vector<std::string>& values, std::size_t jobs = 1) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<ExperimentConfig> cfgs;
  for (const auto& value : values) {
    auto kv = experiment_to_kv(base);
    kv[key] = value;
    auto c = run_stage("config", [&] { return experiment_from_kv(kv); });
    c.output = base.output / sanitize_component(key + "=" + value);
    cfgs.push_back(std::move(c));
  }
  std::vector<SweepEntry> out(values.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < cfgs.size();) {
      try {
        const auto r = run_experiment(cfgs[i]);
        out[i] = {values[i], cfgs[i].output, r.report.mean};
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, cfgs.size()));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);

  std::string csv = "key,value,mse,psnr,ssim,zf_mse,zf_psnr,zf_ssim,seconds\n";
  for (const auto& e : out) {
    csv += key + "," + e.value;
    for (double v : {e.mean.mse, e.mean.psnr, e.mean.ssim, e.mean.zf_mse, e.mean.zf_psnr, e.mean.zf_ssim,
                     e.mean.seconds})
      csv += "," + format_double(v);
    csv += "\n";
  }
  write_text_file(base.output / "sweep.csv", csv);
  return out;
}

}  // namespace dimension
