// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "ffcnet/app.hpp"
#include "ffcnet/fft.hpp"
#include "ffcnet/log.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace ffcnet;
using namespace ffcnet::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> run;
};

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ffcnet_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

double max_abs_diff(const ComplexTensor<double>& a, const ComplexTensor<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max({m, std::abs(a.re()[i] - b.re()[i]), std::abs(a.im()[i] - b.im()[i])});
  }
  return m;
}

Outcome fft_vs_naive() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(1001);
  double worst = 0, parseval = 0;
  for (int i = 0; i < 200; ++i) {
    const auto x = random_complex(Shape{16, 16}, gen);
    const auto X = fft2(x);
    worst = std::max(worst, max_abs_diff(X, dft2_naive(x)));
    double ex = 0, eX = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      ex += x.re()[k] * x.re()[k] + x.im()[k] * x.im()[k];
      eX += X.re()[k] * X.re()[k] + X.im()[k] * X.im()[k];
    }
    parseval = std::max(parseval, std::abs(eX / 256.0 - ex) / ex);
  }
  const double t = seconds_since(t0);
  return {worst < 1e-10 && parseval < 1e-6 && t < 10,
          "max |fft2 - naive| " + fmt_g(worst) + ", Parseval rel " + fmt_g(parseval) + ", " + fmt_g(t) + " s"};
}

Outcome conv_vs_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(2002);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t cin = 1 + gen() % 4, cout = 1 + gen() % 4, k = 1 + 2 * (gen() % 3);
    const int stride = 1 + static_cast<int>(gen() % 2), pad = static_cast<int>(gen() % (k / 2 + 1));
    const std::size_t h = k + gen() % 6, w = k + gen() % 6;
    auto p = make_complex_conv<double>(cin, cout, k, stride, pad, gen() % 2 == 0);
    p.kernel_re = random_tensor(p.kernel_re.shape(), gen);
    p.kernel_im = random_tensor(p.kernel_im.shape(), gen);
    if (p.bias) *p.bias = random_complex(p.bias->shape(), gen);
    const auto x = random_complex(Shape{1 + gen() % 3, cin, h, w}, gen);
    worst = std::max(worst, max_abs_diff(complex_conv2d(x, p), conv_oracle(x, p)));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-10 && t < 30, "max abs error " + fmt_g(worst) + " over 50 configurations, " + fmt_g(t) + " s"};
}

Outcome bn_whitening() {
  std::mt19937_64 gen(3003);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t channels = 1 + gen() % 4;
    auto x = random_complex(Shape{16, channels, 4, 4}, gen, 3.0);
    std::uniform_real_distribution<double> mix(-0.9, 0.9), shift(-3, 3);
    for (std::size_t c = 0; c < channels; ++c) {
      const double a = mix(gen), m_re = shift(gen), m_im = shift(gen);
      for (std::size_t b = 0; b < 16; ++b) {
        for (std::size_t s = 0; s < 16; ++s) {
          const std::size_t i = (b * channels + c) * 16 + s;
          x.im()[i] += a * x.re()[i] + m_im;
          x.re()[i] += m_re;
        }
      }
    }
    auto p = make_complex_bn<double>(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      p.gamma[c * 3 + 0] = 1;
      p.gamma[c * 3 + 1] = 1;
      p.gamma[c * 3 + 2] = 0;
    }
    const auto y = complex_bn_forward(x, p, true);
    for (const auto& m : two_pass_moments(y)) {
      worst = std::max({worst, std::abs(m.mean_re), std::abs(m.mean_im), std::abs(m.rr - 1), std::abs(m.ii - 1),
                        std::abs(m.ri)});
    }
  }
  return {worst <= 1e-5, "max deviation from zero mean / identity covariance " + fmt_g(worst) + " over 100 batches"};
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double layer = 0, deep = 0;
  std::string worst_layer;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& r : layer_grads(seed)) {
      if (r.error > layer) {
        layer = r.error;
        worst_layer = r.name;
      }
    }
    deep = std::max({deep, block_grad(seed).error, model_grad(seed).error});
  }
  const double t = seconds_since(t0);
  return {layer < 1e-4 && deep < 1e-3 && t < 300,
          "worst layer rel error " + fmt_g(layer) + " (" + worst_layer + "), block/end-to-end " + fmt_g(deep) +
              ", 20 seeds, " + fmt_g(t) + " s"};
}

Outcome spectral_invariances() {
  std::mt19937_64 gen(5005);
  double shift_err = 0, offdc = 0, dc_err = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<double> img(Shape{1, 64, 64});
    std::uniform_real_distribution<double> u(0, 1);
    for (double& v : img.data()) v = u(gen);

    // Circular shift of the whole image: identical magnitude spectrum.
    const std::size_t dy = gen() % 64, dx = gen() % 64;
    Tensor<double> shifted(img.shape());
    for (std::size_t y = 0; y < 64; ++y) {
      for (std::size_t x = 0; x < 64; ++x) shifted[((y + dy) % 64) * 64 + (x + dx) % 64] = img[y * 64 + x];
    }
    const PsmConfig whole{.patches_per_side = 1, .shuffle_prob = 0};
    const auto a = magnitude(apply_psm(img, whole, false).patches);
    const auto b = magnitude(apply_psm(shifted, whole, false).patches);
    double diff = 0, peak = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      diff = std::max(diff, std::abs(a[i] - b[i]));
      peak = std::max(peak, a[i]);
    }
    shift_err = std::max(shift_err, diff / peak);

    // Brightness offset: only each patch's DC bin moves, by offset * pixels.
    const PsmConfig patches{.patches_per_side = 4, .shuffle_prob = 0};
    Tensor<double> bright = img;
    for (double& v : bright.data()) v += 0.2;
    const auto s0 = apply_psm(img, patches, false).patches, s1 = apply_psm(bright, patches, false).patches;
    const std::size_t plane = 16 * 16;
    for (std::size_t i = 0; i < s0.size(); ++i) {
      const double dre = s1.re()[i] - s0.re()[i], dim = s1.im()[i] - s0.im()[i];
      if (i % plane == 0) {
        dc_err = std::max({dc_err, std::abs(dre - 0.2 * plane), std::abs(dim)});
      } else {
        offdc = std::max({offdc, std::abs(dre), std::abs(dim)});
      }
    }
  }
  return {shift_err <= 1e-6 && offdc <= 1e-9 && dc_err <= 1e-9,
          "shift magnitude rel " + fmt_g(shift_err) + ", non-DC change " + fmt_g(offdc) + ", DC error " +
              fmt_g(dc_err)};
}

Outcome psm_behaviour() {
  std::mt19937_64 gen(6006);
  const auto img = random_tensor(Shape{1, 32, 32}, gen);
  bool p0_identity = true, eval_identity = true;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const auto r = apply_psm(img, PsmConfig{.patches_per_side = 4, .shuffle_prob = 0, .seed = s}, true);
    p0_identity &= r.permutation.is_identity() && !r.permutation.triggered;
    const auto e = apply_psm(img, PsmConfig{.patches_per_side = 4, .shuffle_prob = 1, .seed = s}, false);
    eval_identity &= e.permutation.is_identity() && !e.permutation.triggered;
  }
  ComplexTensor<double> x(Shape{1, 16, 1, 1});
  std::size_t triggered = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    Rng rng(derive_seed(6006, "psm", {i, 0}));
    Permutation perm;
    shuffle_patches(x, 0.3, rng, perm);
    triggered += perm.triggered;
  }
  const double rate = static_cast<double>(triggered) / 10000.0;
  return {p0_identity && eval_identity && rate >= 0.28 && rate <= 0.32,
          std::string("p=0 identity ") + (p0_identity ? "yes" : "no") + ", eval never shuffles " +
              (eval_identity ? "yes" : "no") + ", trigger rate at p=0.3 " + fmt_g(rate)};
}

Outcome memorize() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthSpec spec;
  spec.per_class = 2;
  const auto set = generate_synthetic(spec, 7007);
  std::vector<LabeledImage> eight;
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    eight.push_back({set.images[i], set.index.entries[i].label, set.index.entries[i].source});
  }
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.psm.shuffle_prob = 0;
  cfg.hflip = cfg.vflip = false;
  cfg.schedule.kind = LrSchedule::Kind::kNone;
  cfg.early_stop = 0;
  cfg.seed = 7007;
  std::size_t reached = 0;
  TrainOutputs<float> outputs{{}, [&](const EpochRecord& r, Model<float>&) {
                                if (r.val_accuracy == 1.0) reached = r.epoch;
                                return reached != 0;
                              }};
  const auto r = train<float>(eight, eight, set.index.class_names, ArchitectureSpec::mini(1), cfg, outputs);
  const double t = seconds_since(t0);
  return {reached != 0 && t < 180,
          reached ? "100% eval-mode accuracy on the 8 training samples at epoch " + std::to_string(reached) + ", " +
                        fmt_g(t) + " s"
                  : "not memorized after " + std::to_string(r.history.size()) + " epochs (last loss " +
                        fmt_g(r.history.back().train_loss) + ")"};
}

double end_to_end(const fs::path& out, double shuffle_prob) {
  RunConfig cfg;
  cfg.out_dir = out;
  cfg.seed = 7;
  cfg.train.psm.shuffle_prob = shuffle_prob;
  cmd_gen_data(cfg);
  cmd_train(cfg);
  return cmd_eval(cfg);
}

Outcome synthetic_accuracy() {
  const auto t0 = std::chrono::steady_clock::now();
  const double acc = end_to_end(scratch("end_to_end"), 0.3);
  const double t = seconds_since(t0);
  Outcome o{acc >= 0.9 && t < 900, "test accuracy " + fmt_g(100 * acc) + "% with K=4, p=0.3 in " + fmt_g(t) + " s"};
  // Reference point only; not part of the criterion.
  const auto t1 = std::chrono::steady_clock::now();
  const double ablation = end_to_end(scratch("end_to_end_p0"), 0.0);
  std::printf("[INFO]  8 ablation: p=0 test accuracy %.2f%% (%+.2f points vs p=0.3) in %.0f s\n", 100 * ablation,
              100 * (ablation - acc), seconds_since(t1));
  return o;
}

Outcome metric_identities() {
  std::mt19937_64 gen(9009);
  bool equal = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 2 + gen() % 6;
    ConfusionMatrix cm(c);
    const std::size_t n = 1 + gen() % 500;
    for (std::size_t i = 0; i < n; ++i) cm.update(gen() % c, gen() % c);
    const auto s = summarize(cm, Averaging::kWeighted);
    equal &= s.recall == s.accuracy;
  }
  ConfusionMatrix hand(2);
  const std::uint64_t counts[2][2] = {{8, 2}, {3, 7}};
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t p = 0; p < 2; ++p) {
      for (std::uint64_t k = 0; k < counts[t][p]; ++k) hand.update(t, p);
    }
  }
  const auto s = summarize(hand);
  const double p0 = 8.0 / 11, r0 = 0.8, p1 = 7.0 / 9, r1 = 0.7;
  const double f0 = 2 * p0 * r0 / (p0 + r0), f1 = 2 * p1 * r1 / (p1 + r1);
  const bool hand_ok = std::abs(s.accuracy - 0.75) < 1e-15 && std::abs(s.precision - (p0 + p1) / 2) < 1e-15 &&
                       std::abs(s.recall - 0.75) < 1e-15 && std::abs(s.f1 - (f0 + f1) / 2) < 1e-15;
  return {equal && hand_ok, std::string("weighted recall == accuracy on 100 matrices: ") + (equal ? "yes" : "no") +
                                ", hand-computed 2x2 example: " + (hand_ok ? "yes" : "no")};
}

Outcome reproducibility() {
  const auto data = scratch("repro_data");
  RunConfig base;
  base.seed = 10010;
  base.data_root = data;
  base.image_size = 16;
  base.synth.image_size = 16;
  base.synth.per_class = 10;
  base.synth.max_shift = 16;
  base.train.psm.patches_per_side = 2;
  base.train.epochs = 4;
  base.train.batch_size = 8;
  base.deterministic = true;
  base.out_dir = scratch("repro_gen");
  cmd_gen_data(base);
  std::vector<fs::path> outs{scratch("repro_a"), scratch("repro_b")};
  for (const auto& out : outs) {
    RunConfig cfg = base;
    cfg.out_dir = out;
    cmd_train(cfg);
  }
  bool same = true;
  std::string which;
  for (const char* name : {"checkpoint_best.ffcw", "checkpoint_last.ffcw", "metrics_history.jsonl"}) {
    const std::string a = slurp(outs[0] / name), b = slurp(outs[1] / name);
    if (a.empty() || a != b) {
      same = false;
      which += std::string(" ") + name;
    }
  }
  return {same, same ? "checkpoints and metrics history byte-identical across two runs" : "differs:" + which};
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria{
      {1, "fft2 agrees with the naive DFT and Parseval holds", fft_vs_naive},
      {2, "complex convolution matches the multiply-accumulate oracle", conv_vs_oracle},
      {3, "complex batch norm whitens each channel", bn_whitening},
      {4, "analytic gradients match central differences", gradients},
      {5, "shift leaves magnitudes unchanged; brightness moves only DC", spectral_invariances},
      {6, "patch shuffling: p=0 identity, trigger rate, eval never shuffles", psm_behaviour},
      {7, "mini network memorizes 8 samples within 200 epochs", memorize},
      {8, "synthetic four-class data reaches >= 90% test accuracy", synthetic_accuracy},
      {9, "weighted recall equals accuracy; hand-computed metrics", metric_identities},
      {10, "deterministic training is byte-reproducible", reproducibility},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
