#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"

using namespace dimension;
using namespace testing_support;

namespace {

// Direct per-window SSIM: explicit 2-D Gaussian weights and centred moments.
double ssim_direct(const RealVolume& a, const RealVolume& b) {
  const int w = 11;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::vector<double> g(w * w);
  double gs = 0.0;
  for (int i = 0; i < w; ++i)
    for (int j = 0; j < w; ++j) {
      const double r2 = (i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0);
      gs += g[static_cast<std::size_t>(i * w + j)] = std::exp(-r2 / (2.0 * sigma * sigma));
    }
  for (double& v : g) v /= gs;
  const Dims& d = a.dims();
  double total = 0.0;
  long count = 0;
  for (std::size_t t = 0; t < d.nt; ++t)
    for (std::size_t x0 = 0; x0 + w <= d.nx; ++x0)
      for (std::size_t y0 = 0; y0 + w <= d.ny; ++y0) {
        double ma = 0, mb = 0;
        for (int i = 0; i < w; ++i)
          for (int j = 0; j < w; ++j) {
            const double wt = g[static_cast<std::size_t>(i * w + j)];
            ma += wt * a(x0 + i, y0 + j, t);
            mb += wt * b(x0 + i, y0 + j, t);
          }
        double va = 0, vb = 0, cov = 0;
        for (int i = 0; i < w; ++i)
          for (int j = 0; j < w; ++j) {
            const double wt = g[static_cast<std::size_t>(i * w + j)];
            const double da = a(x0 + i, y0 + j, t) - ma, db = b(x0 + i, y0 + j, t) - mb;
            va += wt * da * da;
            vb += wt * db * db;
            cov += wt * da * db;
          }
        total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return total / static_cast<double>(count);
}

RealVolume structured(std::size_t n, std::size_t nt) {
  RealVolume v({n, n, nt});
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t t = 0; t < nt; ++t)
        v(x, y, t) = 0.5 + 0.4 * std::sin(0.3 * static_cast<double>(x) + 0.2 * static_cast<double>(t)) *
                               std::cos(0.45 * static_cast<double>(y));
  return v;
}

ExperimentConfig tiny_experiment(const std::string& name, std::size_t epochs) {
  KeyValues kv{{"output", temp_dir(name).string()},
               {"data.count", "4"},
               {"data.test_fraction", "0.25"},
               {"phantom.nx", "16"},
               {"phantom.ny", "16"},
               {"phantom.nt", "2"},
               {"phantom.objects", "3"},
               {"phantom.period", "2"},
               {"sampling.accel", "2"},
               {"sampling.acs", "2"},
               {"model.preset", "dimension"},
               {"model.layers", "2"},
               {"model.filters", "2"},
               {"train.epochs", std::to_string(epochs)},
               {"train.batch", "2"},
               {"train.lr", "0.001"},
               {"eval.images", "1"}};
  return experiment_from_kv(kv);
}

}  // namespace

TEST(Psnr, ClosedFormExample) {
  RealVolume ref({2, 2, 1}), rec({2, 2, 1});
  const double vals[] = {1.0, 0.5, 0.25, 0.75};
  for (std::size_t i = 0; i < 4; ++i) {
    ref[i] = vals[i];
    rec[i] = vals[i] + (i % 2 ? 0.1 : -0.1);
  }
  EXPECT_NEAR(psnr(ref, rec), 20.0, 1e-12);
}

TEST(Psnr, IdenticalIsInfinite) {
  const auto a = random_real({4, 4, 2}, 1);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_GT(psnr(a, a), 0.0);
}

TEST(Psnr, AllZeroReferenceIsAnError) {
  EXPECT_THROW(psnr(RealVolume({2, 2, 1}), random_real({2, 2, 1}, 2)), ShapeError);
}

TEST(Psnr, MatchesScalarLoop) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = random_real({6, 5, 3}, s), b = random_real({6, 5, 3}, 100 + s);
    double peak = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      peak = std::max(peak, a[i]);
      sq += (a[i] - b[i]) * (a[i] - b[i]);
    }
    const double oracle = 10.0 * std::log10(peak * peak / (sq / static_cast<double>(a.size())));
    EXPECT_NEAR(psnr(a, b), oracle, 1e-10);
  }
}

TEST(Psnr, DecreasesWithErrorNorm) {
  const auto ref = random_real({5, 5, 2}, 3);
  const auto noise = random_real({5, 5, 2}, 4, -1.0, 1.0);
  double last = std::numeric_limits<double>::infinity();
  for (double scale : {0.001, 0.01, 0.05, 0.2, 1.0}) {
    RealVolume rec(ref.dims());
    for (std::size_t i = 0; i < rec.size(); ++i) rec[i] = ref[i] + scale * noise[i];
    const double p = psnr(ref, rec);
    EXPECT_LT(p, last);
    last = p;
  }
}

TEST(Mse, PerVoxelMean) {
  const auto a = random_real({3, 3, 2}, 5);
  EXPECT_EQ(mean_squared_error(a, a), 0.0);
  RealVolume b = a;
  for (auto& v : b.data()) v += 0.2;
  EXPECT_NEAR(mean_squared_error(a, b), 0.04, 1e-15);
}

TEST(Ssim, IdentityIsOne) {
  const auto a = structured(16, 2);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, InvertedImageIsLessThanOne) {
  const auto a = structured(16, 2);
  RealVolume inv(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) inv[i] = 1.0 - a[i];
  EXPECT_LT(ssim(a, inv), 1.0);
  EXPECT_GE(ssim(a, inv), -1.0);
}

TEST(Ssim, MatchesDirectWindowFormula) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Dims d{11 + s % 9, 11 + (s * 7) % 8, 1 + s % 3};
    const auto a = random_real(d, s), b = random_real(d, 1000 + s);
    EXPECT_NEAR(ssim(a, b), ssim_direct(a, b), 1e-8) << d.str();
  }
}

TEST(Ssim, FramesSmallerThanWindowAreAnError) {
  EXPECT_THROW(ssim(random_real({10, 16, 1}, 1), random_real({10, 16, 1}, 2)), ShapeError);
}

TEST(ErrorMap, BlackWhiteAndMidpoint) {
  const auto ref = random_real({4, 3, 2}, 6);
  const auto same = error_map(ref, ref);
  for (const auto& f : same)
    for (auto p : f.pixels) EXPECT_EQ(p, 0);
  RealVolume far = ref;
  for (auto& v : far.data()) v += 0.07;
  RealVolume z({2, 2, 1}), white({2, 2, 1}), mid({2, 2, 1});
  for (auto& v : white.data()) v = 0.07;
  for (auto& v : mid.data()) v = 0.035;
  const auto w = error_map(z, white), m = error_map(z, mid), f = error_map(ref, far);
  for (auto p : w[0].pixels) EXPECT_EQ(p, 255);
  for (auto p : m[0].pixels) EXPECT_EQ(p, 128);  // 127.5 rounds away from zero
  for (auto p : f[1].pixels) EXPECT_GE(p, 254);
  EXPECT_EQ(same.size(), 2u);
}

TEST(ErrorMap, ClipsAboveDisplayRange) {
  RealVolume a({1, 1, 1}), b({1, 1, 1});
  b[0] = 3.0;
  EXPECT_EQ(error_map(a, b)[0].pixels[0], 255);
  EXPECT_THROW(error_map(a, b, 0.0), ConfigError);
}

TEST(YtExtract, ConstantVolume) {
  RealVolume v({5, 6, 3});
  for (auto& x : v.data()) x = 0.25;
  const auto img = yt_extract(v, 2);
  EXPECT_EQ(img.rows, 6u);
  EXPECT_EQ(img.cols, 3u);
  for (double x : img.values) EXPECT_EQ(x, 0.25);
}

TEST(YtExtract, TracksMovingPoint) {
  RealVolume v({7, 10, 5});
  for (std::size_t t = 0; t < 5; ++t) v(3, 2 + t, t) = 1.0;
  v(4, 0, 0) = 5.0;
  const auto img = yt_extract(v, 3);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t y = 0; y < 10; ++y) EXPECT_EQ(img.at(y, t), y == 2 + t ? 1.0 : 0.0);
}

TEST(YtExtract, IndexOutOfRange) { EXPECT_THROW(yt_extract(RealVolume({4, 4, 2}), 4), ShapeError); }

TEST(Pgm, BinaryGraymapLayout) {
  const auto path = temp_dir("pgm") / "a.pgm";
  write_pgm({3, 2, {0, 1, 2, 3, 4, 255}}, path);
  std::ifstream in(path, std::ios::binary);
  const std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(all.substr(0, 11), "P5\n3 2\n255\n");
  EXPECT_EQ(all.size(), 17u);
  EXPECT_EQ(static_cast<unsigned char>(all.back()), 255);
}

TEST(Presets, TableRows) {
  const auto d5c5 = preset("d5c5");
  EXPECT_EQ(d5c5.m_blocks, 0);
  EXPECT_EQ(d5c5.n_blocks, 5);
  EXPECT_TRUE(d5c5.loss_alpha.empty());
  EXPECT_EQ(d5c5.loss_beta, std::vector<double>(4, 0.0));
  const auto m1 = preset("model1");
  EXPECT_EQ(m1.m_blocks, 1);
  EXPECT_EQ(m1.n_blocks, 4);
  EXPECT_EQ(m1.loss_alpha, std::vector<double>{0.0});
  EXPECT_EQ(m1.loss_beta, std::vector<double>(3, 0.0));
  EXPECT_EQ(preset("model2").loss_alpha, std::vector<double>{0.1});
  EXPECT_EQ(preset("model2").loss_beta, std::vector<double>(3, 0.0));
  EXPECT_EQ(preset("model3").loss_alpha, std::vector<double>{0.0});
  EXPECT_EQ(preset("model3").loss_beta, std::vector<double>(3, 1e3));
  EXPECT_EQ(preset("dimension").loss_alpha, std::vector<double>{0.1});
  EXPECT_EQ(preset("dimension").loss_beta, std::vector<double>(3, 1e3));
  EXPECT_EQ(preset("dimension-sloss2").loss_beta, (std::vector<double>{1e5, 1e4, 1e3}));
  for (const auto& n : preset_names()) {
    EXPECT_EQ(preset(n).layers_per_block, 5) << n;
    EXPECT_EQ(preset(n).filters, 64) << n;
    EXPECT_NO_THROW(preset(n).validate()) << n;
  }
  EXPECT_EQ(d5c5.conv_layer_count(), 25);
  EXPECT_EQ(preset("dimension").conv_layer_count(), 25);
  EXPECT_THROW(preset("model4"), ConfigError);
}

TEST(ExperimentConfig, KeyValueRoundTrip) {
  auto c = tiny_experiment("cfg_rt", 3);
  c.data.patch = Dims{8, 8, 2};
  c.model.dc_lambda = 0.5;
  c.eval.yt_index = 3;
  const auto kv = experiment_to_kv(c);
  EXPECT_EQ(experiment_to_kv(experiment_from_kv(kv)), kv);
  const auto back = experiment_from_kv(kv);
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.data.patch, c.data.patch);
  EXPECT_EQ(back.epochs, 3u);
}

TEST(ExperimentConfig, UnknownKeyAndBadValues) {
  try {
    experiment_from_kv({{"train.epoch", "3"}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown config key"), std::string::npos);
  }
  EXPECT_THROW(experiment_from_kv({{"train.epochs", "many"}}), ConfigError);
  EXPECT_THROW(experiment_from_kv({{"model.preset", "nope"}}), ConfigError);
  auto c = tiny_experiment("cfg_bad", 1);
  c.dataset = "/nonexistent/data.dimk";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Experiment, ZeroEpochsEvaluatesUntrainedNetwork) {
  const auto cfg = tiny_experiment("exp_zero", 0);
  const auto r = run_experiment(cfg);
  const auto ds = load_dataset(cfg.output / kDatasetFile);
  const auto untrained = he_initialized(cfg.model, derive_seed(cfg.train_seed, 0x1417));
  const auto ev = evaluate_split(ds, untrained, cfg.model, 1);
  ASSERT_EQ(r.report.rows.size(), 1u);
  EXPECT_EQ(r.report.rows[0].psnr, ev.report.rows[0].psnr);
  EXPECT_EQ(r.report.rows[0].ssim, ev.report.rows[0].ssim);
  for (const char* f : {kDatasetFile, kCheckpointFile, kReconFile, kMetricsFile, kSummaryFile, kResolvedConfigFile})
    EXPECT_TRUE(std::filesystem::exists(cfg.output / f)) << f;
  EXPECT_TRUE(std::filesystem::exists(cfg.output / "images"));
}

TEST(Experiment, ReportIsReproducibleFromDisk) {
  const auto cfg = tiny_experiment("exp_verify", 1);
  const auto r = run_experiment(cfg);
  const auto v = verify_experiment(cfg.output);
  EXPECT_TRUE(v.ok()) << (v.mismatches.empty() ? "" : v.mismatches.front());
  EXPECT_GT(v.values_checked, 10u);

  const auto csv = parse_metrics_csv(read_text_file(cfg.output / kMetricsFile));
  const auto m = mean_row(csv.rows);
  EXPECT_NEAR(csv.mean.psnr, m.psnr, 1e-12 * std::abs(m.psnr));
  EXPECT_NEAR(csv.mean.ssim, m.ssim, 1e-12);
  EXPECT_EQ(csv.rows.size(), r.report.rows.size());
  EXPECT_EQ(csv.mean.psnr, r.report.mean.psnr);

  auto text = read_text_file(cfg.output / kMetricsFile);
  const auto line = text.find('\n') + 1;
  const auto comma = text.find(',', line);
  text.insert(comma + 1, "9");
  write_text_file(cfg.output / kMetricsFile, text);
  EXPECT_FALSE(verify_experiment(cfg.output).ok());
}

TEST(Experiment, LogHasOneRecordPerStepAndEpoch) {
  const auto cfg = tiny_experiment("exp_log", 2);
  run_experiment(cfg);
  std::ifstream in(cfg.output / kLogFile);
  std::size_t steps = 0, epochs = 0;
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    (j["type"] == "step" ? steps : epochs)++;
    if (j["type"] == "step") {
      double sum = j["ploss"].get<double>() + 0.1 * j["kloss"][0].get<double>();
      for (const auto& s : j["sloss"]) sum += 1e3 * s.get<double>();
      EXPECT_NEAR(j["tloss"].get<double>(), sum, 1e-12 * sum);
    }
  }
  EXPECT_EQ(steps, 4u);
  EXPECT_EQ(epochs, 2u);
}

TEST(Experiment, FailuresAreTaggedWithStage) {
  auto cfg = tiny_experiment("exp_stage", 0);
  cfg.dataset = cfg.output / "missing.dimk";
  try {
    run_experiment(cfg);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
  write_text_file(cfg.output / "missing.dimk", "DIMKgarbage");
  try {
    run_experiment(cfg);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "data");
  }
}

TEST(Experiment, AlphaSweepEmitsOneReportPerValue) {
  auto cfg = tiny_experiment("exp_sweep", 1);
  cfg.eval.images = 0;
  const std::vector<std::string> values{"1e-8", "1e-7", "1e-6", "1e-5", "1e-4", "1e-3", "1e-2", "1e-1"};
  const auto entries = sweep(cfg, "model.alpha", values, 4);
  ASSERT_EQ(entries.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    EXPECT_EQ(entries[i].value, values[i]);
    EXPECT_TRUE(std::isfinite(entries[i].mean.psnr));
    const auto stored = parse_key_values(read_text_file(entries[i].output / kResolvedConfigFile));
    EXPECT_EQ(parse_double("a", stored.at("model.alpha")), std::stod(values[i]));
  }
  std::ifstream in(cfg.output / "sweep.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, values.size() + 1);
  const auto serial = sweep(cfg, "model.alpha", {"1e-3"}, 1);
  EXPECT_EQ(serial[0].mean.psnr, entries[5].mean.psnr);
}
