#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dimension/checkpoint.hpp"
#include "dimension/dataset.hpp"
#include "dimension/loss.hpp"
#include "dimension/metrics.hpp"
#include "dimension/network.hpp"
#include "dimension/optim.hpp"

namespace dimension {

struct TrainingOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 4;
  LrSchedule lr;
  AdamHyper adam;
  std::uint64_t seed = 0;
  /// Save a checkpoint every this many epochs (0 = never) to checkpoint_path.
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_path;
  bool validate = true;
  /// Receives each log line as it is produced.
  std::function<void(const std::string&)> sink;
};

struct StepRecord {
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  double lr = 0.0;
  LossReport loss;
};

struct EpochRecord {
  std::uint64_t epoch = 0;
  double mean_tloss = 0.0;
  double val_psnr = std::numeric_limits<double>::quiet_NaN();
  double val_ssim = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::vector<std::string> lines;
};

struct TrainResult {
  ParameterSet params;
  OptimizerState optimizer;
  std::uint64_t epochs_done = 0;
  TrainingLog log;
};

inline std::string log_line(const StepRecord& r) {
  nlohmann::json j;
  j["type"] = "step";
  j["epoch"] = r.epoch;
  j["step"] = r.step;
  j["lr"] = r.lr;
  j["ploss"] = r.loss.ploss;
  j["kloss"] = r.loss.kloss_terms;
  j["sloss"] = r.loss.sloss_terms;
  j["tloss"] = r.loss.tloss;
  return j.dump();
}

inline std::string log_line(const EpochRecord& r) {
  nlohmann::json j;
  j["type"] = "epoch";
  j["epoch"] = r.epoch;
  j["mean_tloss"] = r.mean_tloss;
  j["val_psnr"] = std::isfinite(r.val_psnr) || std::isinf(r.val_psnr) ? nlohmann::json(r.val_psnr) : nullptr;
  j["val_ssim"] = std::isfinite(r.val_ssim) ? nlohmann::json(r.val_ssim) : nullptr;
  return j.dump();
}

struct ExampleGradient {
  LossReport loss;
  ParameterSet grads;
};

/// Forward pass, multi-supervised loss and backward for one example.
inline ExampleGradient example_gradient(const Example& ex, const ParameterSet& params, const ModelConfig& config) {
  Tape tape(params);
  const auto traced = record_forward(tape, ex.kspace, ex.mask, config, params);
  const auto loss = record_loss(tape, traced, ex.image, fft2_frames(ex.image), config);
  const double t = tape.scalar(loss.tloss);
  if (!std::isfinite(t)) {
    const auto first = tape.first_non_finite();
    throw TrainingError("non-finite loss; first non-finite tensor: " + first.value_or("<none>"));
  }
  ExampleGradient out{loss.report(tape), tape.backward(loss.tloss)};
  if (!out.grads.all_finite()) throw TrainingError("non-finite parameter gradient");
  return out;
}

inline ComplexVolume reconstruct(const Example& ex, const ParameterSet& params, const ModelConfig& config) {
  return dimension::dimension_forward(ex.kspace, ex.mask, params, config).final_image();
}

struct Evaluation {
  double psnr = 0.0;
  double ssim = std::numeric_limits<double>::quiet_NaN();
};

/// Mean magnitude PSNR / SSIM of the reconstructions of `indices`.
inline Evaluation evaluate(const Dataset& ds, const std::vector<std::size_t>& indices, const ParameterSet& params,
                           const ModelConfig& config) {
  Evaluation e;
  if (indices.empty()) return e;
  const SsimOptions opt;
  const bool can_ssim = ds.dims.nx >= static_cast<std::size_t>(opt.window) &&
                        ds.dims.ny >= static_cast<std::size_t>(opt.window);
  double p = 0.0, s = 0.0;
  for (auto i : indices) {
    const auto ref = magnitude(ds.examples[i].image);
    const auto rec = magnitude(reconstruct(ds.examples[i], params, config));
    p += psnr(ref, rec);
    if (can_ssim) s += ssim(ref, rec, opt);
  }
  e.psnr = p / static_cast<double>(indices.size());
  if (can_ssim) e.ssim = s / static_cast<double>(indices.size());
  return e;
}

namespace detail {

inline LossReport mean_report(const std::vector<LossReport>& rs, const ModelConfig& config) {
  LossReport m;
  m.kloss_terms.assign(rs.front().kloss_terms.size(), 0.0);
  m.sloss_terms.assign(rs.front().sloss_terms.size(), 0.0);
  const double n = static_cast<double>(rs.size());
  for (const auto& r : rs) {
    m.ploss += r.ploss;
    for (std::size_t i = 0; i < r.kloss_terms.size(); ++i) m.kloss_terms[i] += r.kloss_terms[i];
    for (std::size_t i = 0; i < r.sloss_terms.size(); ++i) m.sloss_terms[i] += r.sloss_terms[i];
  }
  m.ploss /= n;
  for (double& v : m.kloss_terms) v /= n;
  for (double& v : m.sloss_terms) v /= n;
  m.tloss = compose_tloss(m.ploss, m.kloss_terms, config.loss_alpha, m.sloss_terms, config.loss_beta);
  return m;
}

}  // namespace detail

/// Mini-batch training. Parameters start from He initialisation seeded by
/// opts.seed, or from `resume`. Each epoch visits the training split in an
/// order shuffled by (seed, epoch), so a resumed run replays the same batches.
inline TrainResult fit(const Dataset& ds, const ModelConfig& config, const TrainingOptions& opts,
                       const Checkpoint* resume = nullptr) {
  config.validate();
  const auto train = ds.indices(Split::train);
  if (train.empty()) throw ConfigError("fit: dataset has no training examples");
  if (opts.batch_size < 1) throw ConfigError("fit: batch size must be >= 1");
  const auto test = ds.indices(Split::test);

  TrainResult res;
  if (resume) {
    if (!(resume->model == config)) throw ConfigError("fit: checkpoint model config differs from the requested one");
    if (resume->seed != opts.seed) throw ConfigError("fit: checkpoint was written with a different training seed");
    res.params = resume->params;
    res.optimizer = resume->optimizer;
    res.epochs_done = resume->epochs_done;
  } else {
    res.params = he_initialized(config, derive_seed(opts.seed, 0x1417));
    res.optimizer = OptimizerState(res.params, opts.adam);
  }

  auto emit = [&](std::string line) {
    if (opts.sink) opts.sink(line);
    res.log.lines.push_back(std::move(line));
  };

  for (std::uint64_t epoch = res.epochs_done; epoch < opts.epochs; ++epoch) {
    std::vector<std::size_t> order = train;
    Rng rng(derive_seed(opts.seed, 0x10000 + epoch));
    rng.shuffle(order.begin(), order.end());
    const double lr = opts.lr(epoch);
    double epoch_loss = 0.0;
    std::size_t batches = 0;

    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      ParameterSet grads = res.params.zeros_like();
      auto gsum = grads.mutable_values();
      std::vector<LossReport> reports;
      for (std::size_t b = start; b < end; ++b) {
        auto eg = example_gradient(ds.examples[order[b]], res.params, config);
        auto g = eg.grads.values();
        for (std::size_t i = 0; i < g.size(); ++i) gsum[i] += g[i];
        reports.push_back(std::move(eg.loss));
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (double& v : gsum) v *= inv;
      adam_step(res.optimizer, res.params, grads, lr);

      StepRecord rec{epoch, res.optimizer.step, lr, detail::mean_report(reports, config)};
      epoch_loss += rec.loss.tloss;
      ++batches;
      emit(log_line(rec));
      res.log.steps.push_back(std::move(rec));
    }

    EpochRecord er;
    er.epoch = epoch;
    er.mean_tloss = epoch_loss / static_cast<double>(batches);
    if (opts.validate && !test.empty()) {
      const auto ev = evaluate(ds, test, res.params, config);
      er.val_psnr = ev.psnr;
      er.val_ssim = ev.ssim;
    }
    emit(log_line(er));
    res.log.epochs.push_back(er);
    res.epochs_done = epoch + 1;

    if (opts.checkpoint_every > 0 && res.epochs_done % opts.checkpoint_every == 0 && !opts.checkpoint_path.empty()) {
      save_checkpoint({config, res.params, res.optimizer, opts.seed, res.epochs_done}, opts.checkpoint_path);
    }
  }
  return res;
}

}  // namespace dimension
