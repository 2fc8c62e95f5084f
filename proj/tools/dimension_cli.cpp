#include <chrono>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dimension/dimension.hpp"

namespace {

using namespace dimension;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "override, key=value (repeatable)");
  app->add_option("--seed", c.seed, "sets phantom.seed, sampling.seed and train.seed");
  app->add_option("--out", c.out, "output directory");
}

KeyValues overrides(const Common& c, KeyValues kv = {}) {
  if (!c.config.empty())
    for (const auto& [k, v] : parse_key_values(read_text_file(c.config))) kv[k] = v;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
  }
  if (c.seed) {
    const auto s = std::to_string(*c.seed);
    kv["phantom.seed"] = s;
    kv["sampling.seed"] = s;
    kv["train.seed"] = s;
  }
  if (!c.out.empty()) kv["output"] = c.out;
  return kv;
}

ExperimentConfig resolve(const Common& c) { return experiment_from_kv(overrides(c)); }

void print_row(const std::string& name, const MetricsRow& m) {
  std::cout << name << ": mse " << m.mse << "  psnr " << m.psnr << " dB  ssim " << m.ssim << "  | zero-filled mse "
            << m.zf_mse << "  psnr " << m.zf_psnr << " dB  ssim " << m.zf_ssim << "\n";
}

int gen_data(const Common& c, const std::string& file) {
  auto cfg = resolve(c);
  const auto ds = make_dataset(cfg.data);
  const std::filesystem::path path = file.empty() ? cfg.output / kDatasetFile : std::filesystem::path(file);
  save_dataset(ds, path);
  std::cout << "wrote " << ds.examples.size() << " examples (" << ds.indices(Split::train).size() << " train, "
            << ds.indices(Split::test).size() << " test), dims " << ds.dims.str() << " to " << path.string() << "\n";
  return 0;
}

int gradcheck(const Common& c) {
  const auto p = tiny_gradcheck_problem(c.seed.value_or(0));
  const auto r = gradient_check(p.example, p.params, p.config);
  std::cout << "checked " << r.checked << " parameters, " << r.failures << " failures, max relative error "
            << r.max_relative_error << " (index " << r.worst_index << ")\n";
  std::cout << (r.passed() ? "PASS" : "FAIL") << "\n";
  return r.passed() ? 0 : 1;
}

int train(const Common& c, bool resume, bool eval) {
  const auto cfg = resolve(c);
  run_stage("config", [&] {
    cfg.validate();
    std::filesystem::create_directories(cfg.output);
    write_text_file(cfg.output / kResolvedConfigFile, to_text(experiment_to_kv(cfg)));
  });
  const auto ds = stage_data(cfg);
  std::optional<Checkpoint> ck;
  if (resume) ck = run_stage("resume", [&] { return load_checkpoint(cfg.output / kCheckpointFile); });
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = stage_train(cfg, ds, ck ? &*ck : nullptr, [](const std::string& line) {
    if (line.find("\"type\":\"epoch\"") != std::string::npos) std::cout << line << "\n" << std::flush;
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "trained " << res.epochs_done << " epochs; checkpoint " << (cfg.output / kCheckpointFile).string()
            << "\n";
  if (eval) {
    const nlohmann::json extra{{"epochs", res.epochs_done}, {"train_seconds", secs}};
    print_row("test mean", stage_eval(cfg, ds, res.params, extra).mean);
  }
  return 0;
}

int evaluate_run(const Common& c, const std::string& dir, std::size_t jobs) {
  const auto stored = parse_key_values(read_text_file(std::filesystem::path(dir) / kResolvedConfigFile));
  auto cfg = experiment_from_kv(overrides(c, stored));
  cfg.output = dir;
  cfg.dataset.clear();
  cfg.eval.jobs = jobs;
  const auto ds = run_stage("data", [&] { return load_dataset(cfg.output / kDatasetFile); });
  const auto ck = run_stage("checkpoint", [&] { return load_checkpoint(cfg.output / kCheckpointFile); });
  if (!(ck.model == cfg.model)) throw StageError("checkpoint", "model config differs from config.resolved.txt");
  const auto report = stage_eval(cfg, ds, ck.params);
  for (const auto& r : report.rows) print_row("example " + r.label, r);
  print_row("mean", report.mean);
  return 0;
}

int run_sweep(const Common& c, const std::string& key, const std::vector<std::string>& values, std::size_t jobs) {
  const auto cfg = resolve(c);
  const auto entries = sweep(cfg, key, values, jobs);
  for (const auto& e : entries) print_row(key + "=" + e.value, e.mean);
  std::cout << "wrote " << (cfg.output / "sweep.csv").string() << "\n";
  return 0;
}

int verify(const std::string& dir) {
  const auto v = verify_experiment(dir);
  for (const auto& m : v.mismatches) std::cout << "MISMATCH " << m << "\n";
  std::cout << v.values_checked << " values checked, " << v.mismatches.size() << " mismatches\n";
  return v.ok() ? 0 : 1;
}

int mask_preview(const Common& c, std::size_t ny, std::size_t nt, const std::string& pgm) {
  const auto cfg = resolve(c);
  const auto& s = cfg.data.sampling;
  const auto m = generate_mask(ny, nt, s.accel, s.acs, s.seed, s.sigma_fraction);
  for (std::size_t line = 0; line < ny; ++line) {
    for (std::size_t t = 0; t < nt; ++t) std::cout << (m.line(line, t) ? '#' : '.');
    const bool acs = line >= m.acs_first() && line < m.acs_first() + s.acs;
    std::cout << (acs ? "  acs" : "") << "\n";
  }
  std::cout << "lines per frame:";
  for (std::size_t t = 0; t < nt; ++t) std::cout << " " << m.count(t);
  std::cout << "\n";
  if (!pgm.empty()) write_pgm(mask_image(m), pgm);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic MR reconstruction: phantoms, training and evaluation"};
  app.require_subcommand(1);

  Common gen_c, grad_c, train_c, eval_c, sweep_c, verify_c, mask_c;
  std::string dataset_file, run_dir, verify_dir, sweep_key;
  std::vector<std::string> sweep_values;
  std::size_t jobs = 1, eval_jobs = 1, ny = 64, nt = 6;
  std::string pgm;
  bool resume = false, eval_after = false;

  auto* g = app.add_subcommand("gen-data", "generate a phantom dataset file");
  add_common(g, gen_c);
  g->add_option("--file", dataset_file, "dataset path (default <out>/dataset.dimk)");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every gradient on a tiny model");
  add_common(gc, grad_c);

  auto* t = app.add_subcommand("train", "build or load the dataset and train");
  add_common(t, train_c);
  t->add_flag("--resume", resume, "continue from <out>/checkpoint.dimc");
  t->add_flag("--eval", eval_after, "evaluate after training");

  auto* e = app.add_subcommand("eval", "evaluate a trained run directory");
  add_common(e, eval_c);
  e->add_option("run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--jobs", eval_jobs, "parallel evaluation threads");

  auto* s = app.add_subcommand("sweep", "one full experiment per value of a config key");
  add_common(s, sweep_c);
  s->add_option("--key", sweep_key, "config key to vary")->required();
  s->add_option("--value", sweep_values, "value (repeatable)")->required();
  s->add_option("--jobs", jobs, "experiments run concurrently");

  auto* v = app.add_subcommand("verify", "recompute metrics of a run and diff against metrics.csv");
  add_common(v, verify_c);
  v->add_option("run", verify_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  auto* mp = app.add_subcommand("mask-preview", "print a sampling mask");
  add_common(mp, mask_c);
  mp->add_option("--ny", ny, "phase-encode lines");
  mp->add_option("--nt", nt, "frames");
  mp->add_option("--pgm", pgm, "also write the mask as a PGM image");

  CLI11_PARSE(app, argc, argv);

  try {
    if (g->parsed()) return gen_data(gen_c, dataset_file);
    if (gc->parsed()) return gradcheck(grad_c);
    if (t->parsed()) return train(train_c, resume, eval_after);
    if (e->parsed()) return evaluate_run(eval_c, run_dir, eval_jobs);
    if (s->parsed()) return run_sweep(sweep_c, sweep_key, sweep_values, jobs);
    if (v->parsed()) return verify(verify_dir);
    if (mp->parsed()) return mask_preview(mask_c, ny, nt, pgm);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
