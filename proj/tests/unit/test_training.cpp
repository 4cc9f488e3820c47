#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ffcnet/training.hpp"
#include "support/oracles.hpp"

using namespace ffcnet;
using namespace ffcnet::testing;

namespace {

struct Splits {
  std::vector<LabeledImage> train, val, test;
  std::vector<std::string> names;
};

Splits synthetic_splits(std::size_t per_class, std::size_t size, std::uint64_t seed) {
  SynthSpec spec;
  spec.per_class = per_class;
  spec.image_size = size;
  spec.max_shift = size;
  const auto set = generate_synthetic(spec, seed);
  Splits s;
  s.names = set.index.class_names;
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    const auto& e = set.index.entries[i];
    LabeledImage li{set.images[i], e.label, e.source};
    (e.split == Split::kTrain ? s.train : e.split == Split::kVal ? s.val : s.test).push_back(li);
  }
  return s;
}

}  // namespace

TEST_CASE("cross entropy value and extremes") {
  const Tensor<double> uniform(Shape{2, 4});
  const std::vector<int> labels{0, 3};
  CHECK(cross_entropy(uniform, labels).loss == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  const Tensor<double> big(Shape{1, 2}, std::vector<double>{1000, 0});
  const std::vector<int> zero{0};
  const auto r = cross_entropy(big, zero);
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss < 1e-12);
  const std::vector<int> bad{4};
  CHECK_THROWS(cross_entropy(Tensor<double>(Shape{1, 4}), bad));
  CHECK_THROWS_AS(cross_entropy(Tensor<double>(Shape{2, 4}), zero), ShapeError);
}

TEST_CASE("cross entropy gradient matches central differences to 1e-8") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 gen(seed);
    auto logits = random_tensor(Shape{4, 4}, gen);
    const std::vector<int> labels{0, 1, 2, 3};
    const auto r = cross_entropy(logits, labels);
    const auto loss = [&] { return cross_entropy(logits, labels).loss; };
    CHECK(fd_check(logits.data(), r.grad.data(), loss, gen, 64, 1e-5) < 1e-8);
  }
}

TEST_CASE("step schedule") {
  TrainConfig cfg;
  cfg.epochs = 60;
  CHECK(cfg.lr_at(0) == 0.1);
  CHECK(cfg.lr_at(29) == 0.1);
  CHECK(cfg.lr_at(30) == doctest::Approx(0.01));
  CHECK(cfg.lr_at(45) == doctest::Approx(0.001));
  cfg.schedule.kind = LrSchedule::Kind::kNone;
  CHECK(cfg.lr_at(59) == 0.1);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.psm.shuffle_prob = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.schedule.milestones = {1.5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("sgd step with momentum and weight decay") {
  auto spec = ArchitectureSpec::mini(1, 2);
  spec.stages = {{1, 4, 1}};
  spec.stem.channels = 4;
  TrainState<double> state{Model<double>(spec, 1)};
  auto params = state.model.parameters();
  auto& head_w = *params.back().value;  // any non-gamma parameter
  REQUIRE_FALSE(params.back().psd_gamma);
  const auto before = head_w;
  for (auto& p : params) {
    for (double& g : p.grad->data()) g = 0.5;
  }
  TrainConfig cfg;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.01;
  sgd_step(state, cfg, 0.1);
  const auto after1 = head_w;
  for (std::size_t i = 0; i < head_w.size(); ++i) {
    const double v1 = 0.5 + 0.01 * before[i];
    CHECK(after1[i] == doctest::Approx(before[i] - 0.1 * v1).epsilon(1e-14));
  }
  sgd_step(state, cfg, 0.1);
  for (std::size_t i = 0; i < head_w.size(); ++i) {
    const double v1 = 0.5 + 0.01 * before[i];
    const double v2 = 0.9 * v1 + 0.5 + 0.01 * after1[i];
    CHECK(head_w[i] == doctest::Approx(after1[i] - 0.1 * v2).epsilon(1e-14));
  }
  CHECK(state.model.constraints_hold());
}

TEST_CASE("flips") {
  Tensor<double> img(Shape{1, 2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(flip_horizontal(img).storage() == std::vector<double>{3, 2, 1, 6, 5, 4});
  CHECK(flip_vertical(img).storage() == std::vector<double>{4, 5, 6, 1, 2, 3});
  Rng rng(1);
  for (int i = 0; i < 20; ++i) CHECK(augment(img, rng, false, false) == img);
  int changed = 0;
  for (int i = 0; i < 200; ++i) changed += !(augment(img, rng, true, true) == img);
  CHECK(changed > 120);
  CHECK(changed < 180);
}

TEST_CASE("short training run: determinism and outputs") {
  const auto s = synthetic_splits(12, 16, 3);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 11;
  cfg.deterministic = true;
  const auto dir = std::filesystem::temp_directory_path() / "ffcnet_unit_train";
  std::filesystem::remove_all(dir);
  const auto a = train<float>(s.train, s.val, s.names, ArchitectureSpec::mini(1), cfg, {dir, {}});
  const auto b = train<float>(s.train, s.val, s.names, ArchitectureSpec::mini(1), cfg);
  REQUIRE(a.history.size() == 3);
  CHECK(std::isfinite(a.history[0].train_loss));
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(a.history[e].to_json(false) == b.history[e].to_json(false));
  }
  CHECK(std::filesystem::exists(dir / "checkpoint_best.ffcw"));
  CHECK(std::filesystem::exists(dir / "checkpoint_last.ffcw"));
  CHECK(std::filesystem::exists(dir / "timing.jsonl"));
  std::ifstream hist(dir / "metrics_history.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(hist, line)) {
    ++lines;
    CHECK(line.find("wall_time_s") == std::string::npos);
    CHECK(line.find("\"val_acc\"") != std::string::npos);
  }
  CHECK(lines == 3);
  CHECK(a.state.best_epoch >= 1);
}

TEST_CASE("first-epoch loss is near chance on four balanced classes") {
  const auto s = synthetic_splits(40, 64, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 3;
  const auto r = train<float>(s.train, s.val, s.names, ArchitectureSpec::mini(1), cfg);
  CHECK(std::abs(r.history[0].train_loss - std::log(4.0)) < 0.3);
}

TEST_CASE("early stopping and the epoch callback") {
  const auto s = synthetic_splits(6, 16, 4);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  cfg.early_stop = 2;
  cfg.learning_rate = 1e-9;  // nothing improves after the first epoch
  const auto r = train<float>(s.train, s.val, s.names, ArchitectureSpec::mini(1), cfg);
  CHECK(r.history.size() == 3);

  cfg.early_stop = 0;
  int calls = 0;
  TrainOutputs<float> out{{}, [&](const EpochRecord&, Model<float>&) { return ++calls == 2; }};
  CHECK(train<float>(s.train, s.val, s.names, ArchitectureSpec::mini(1), cfg, out).history.size() == 2);
}

TEST_CASE("non-finite loss aborts with context") {
  auto s = synthetic_splits(6, 16, 5);
  for (auto& img : s.train) img.pixels[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  try {
    train<float>(s.train, s.val, s.names, ArchitectureSpec::mini(1), cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    INFO(std::string(e.what()));
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("evaluate never shuffles and reports chance for an untrained model") {
  const auto s = synthetic_splits(25, 16, 6);
  PsmConfig psm;
  psm.shuffle_prob = 1.0;
  Model<float> m(adapt_architecture(ArchitectureSpec::mini(1), psm, 1, 4), 1);
  const auto r = evaluate(m, s.test, psm, s.names);
  CHECK(r.all_identity);
  CHECK(r.confusion.total() == s.test.size());
  const auto again = evaluate(m, s.test, psm, s.names);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t p = 0; p < 4; ++p) CHECK(r.confusion.count(t, p) == again.confusion.count(t, p));
  }
}

TEST_CASE("sweep rows and csv") {
  const auto s = synthetic_splits(6, 16, 7);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.seed = 3;
  const auto rows = sweep<float>(s.train, s.val, s.test, s.names, ArchitectureSpec::mini(1), cfg, {1, 2}, {0.0, 0.5});
  REQUIRE(rows.size() == 4);
  CHECK(rows[1].patches_per_side == 1);
  CHECK(rows[1].shuffle_prob == 0.5);
  CHECK(rows[2].patches_per_side == 2);
  for (const auto& r : rows) {
    CHECK(r.seed == 3);
    CHECK(r.val_accuracy >= 0);
    CHECK(r.test_accuracy <= 1);
  }
  const auto path = std::filesystem::temp_directory_path() / "ffcnet_unit_sweep.csv";
  write_sweep_csv(path, rows);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "K,p,seed,val_acc,test_acc");
}
