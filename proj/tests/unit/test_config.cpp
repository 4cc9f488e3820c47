#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ffcnet/config.hpp"

using namespace ffcnet;
namespace fs = std::filesystem;

TEST_CASE("apply_setting parses typed values") {
  RunConfig cfg;
  apply_setting(cfg, "run.seed", "42");
  apply_setting(cfg, "run.precision", "f64");
  apply_setting(cfg, "psm.patches", "8");
  apply_setting(cfg, "psm.shuffle_prob", "0.25");
  apply_setting(cfg, "train.hflip", "false");
  apply_setting(cfg, "arch.bridge", "concat");
  apply_setting(cfg, "sweep.patches", "2,4");
  apply_setting(cfg, "synth.bands", "1:2,4:5");
  CHECK(cfg.seed == 42);
  CHECK(cfg.precision == Precision::kF64);
  CHECK(cfg.train.psm.patches_per_side == 8);
  CHECK(cfg.train.psm.shuffle_prob == 0.25);
  CHECK_FALSE(cfg.train.hflip);
  CHECK(cfg.arch.bridge == BridgeMode::kConcat);
  CHECK(cfg.sweep_patches == std::vector<int>{2, 4});
  REQUIRE(cfg.synth.bands.size() == 2);
  CHECK(cfg.synth.bands[1].first == 4);

  CHECK_THROWS_AS(apply_setting(cfg, "run.colour", "1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "run.seed", "abc"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "psm.shuffle_prob", "0.3x"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "train.hflip", "maybe"), ConfigError);
  try {
    apply_setting(cfg, "train.bogus", "1");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.bogus") != std::string::npos);
  }
}

TEST_CASE("INI files load, and dump_config round-trips") {
  const auto dir = fs::temp_directory_path() / "ffcnet_unit_config";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "a.ini");
    os << "; comment\n[run]\nseed = 9\n\n[psm]\npatches = 2\nshuffle_prob = 0.5\n[train]\nlr = 0.05\n";
  }
  RunConfig cfg;
  load_config_file(cfg, dir / "a.ini");
  CHECK(cfg.seed == 9);
  CHECK(cfg.train.psm.patches_per_side == 2);
  CHECK(cfg.train.learning_rate == 0.05);

  {
    std::ofstream os(dir / "b.ini");
    os << dump_config(cfg);
  }
  RunConfig again;
  load_config_file(again, dir / "b.ini");
  CHECK(dump_config(again) == dump_config(cfg));

  {
    std::ofstream os(dir / "c.ini");
    os << "[psm]\npatchez = 2\n";
  }
  RunConfig bad;
  CHECK_THROWS_AS(load_config_file(bad, dir / "c.ini"), ConfigError);
  CHECK_THROWS_AS(load_config_file(bad, dir / "missing.ini"), ConfigError);
}

TEST_CASE("validate rejects bad combinations before any work") {
  const auto dir = fs::temp_directory_path() / "ffcnet_unit_validate";
  fs::remove_all(dir);
  RunConfig cfg;
  cfg.out_dir = dir;
  CHECK_NOTHROW(validate(cfg, Command::kGenData));
  CHECK_THROWS_AS(validate(cfg, Command::kTrain), ConfigError);  // no dataset yet
  fs::create_directories(cfg.dataset_root());
  CHECK_NOTHROW(validate(cfg, Command::kTrain));
  CHECK_THROWS_AS(validate(cfg, Command::kEval), ConfigError);  // no checkpoint

  auto c = cfg;
  c.train.psm.patches_per_side = 3;
  CHECK_THROWS_AS(validate(c, Command::kTrain), ConfigError);
  c = cfg;
  c.train.psm.patches_per_side = 128;
  CHECK_THROWS_AS(validate(c, Command::kTrain), ConfigError);
  c = cfg;
  c.train.psm.shuffle_prob = 1.5;
  CHECK_THROWS_AS(validate(c, Command::kTrain), ConfigError);
  c = cfg;
  c.image_size = 48;
  CHECK_THROWS_AS(validate(c, Command::kTrain), ConfigError);
  c = cfg;
  c.train.batch_size = 0;
  CHECK_THROWS_AS(validate(c, Command::kTrain), ConfigError);
  c = cfg;
  c.sweep_patches = {2, 5};
  CHECK_THROWS_AS(validate(c, Command::kSweep), ConfigError);
  c = cfg;
  CHECK_THROWS_AS(validate(c, Command::kInspect), ConfigError);
}
