#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ffcnet/config.hpp"
#include "ffcnet/dataset.hpp"

using namespace ffcnet;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FFCNET_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path fresh(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ffcnet_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

const std::string kSmallData =
    "--set synth.image_size=16 --set synth.per_class=10 --set synth.max_shift=16 "
    "--set data.image_size=16 --set psm.patches=2";

}  // namespace

TEST_CASE("cli: exit codes") {
  CHECK(run_cli("") == 1);
  CHECK(run_cli("bogus") == 1);
  CHECK(run_cli("train --set psm.patches=3 --out " + fresh("exit").string()) == 1);
  CHECK(run_cli("train --set nope.key=1") == 1);
  CHECK(run_cli("eval --out " + fresh("exit_missing").string()) == 1);
  CHECK(run_cli("gen-data --print-config --out " + fresh("print").string()) == 0);
}

TEST_CASE("cli: gen-data is byte reproducible") {
  const auto a = fresh("gen_a"), b = fresh("gen_b");
  REQUIRE(run_cli("gen-data --seed 3 --out " + a.string() + " " + kSmallData) == 0);
  REQUIRE(run_cli("gen-data --seed 3 --out " + b.string() + " " + kSmallData) == 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a / "data")) {
    if (!e.is_regular_file()) continue;
    ++files;
    CHECK(slurp(e.path()) == slurp(b / "data" / fs::relative(e.path(), a / "data")));
  }
  CHECK(files == 41);  // 40 images and the manifest
}

TEST_CASE("cli: preprocess, untrained eval and broken checkpoints") {
  const auto out = fresh("eval");
  REQUIRE(run_cli("gen-data --seed 5 --out " + out.string() + " " + kSmallData) == 0);
  REQUIRE(run_cli("preprocess --seed 5 --out " + out.string() + " " + kSmallData) == 0);
  CHECK(fs::file_size(out / "cache" / "train.ffcs") > 0);

  // An untrained network on four balanced classes sits near chance. Use a
  // larger set so the estimate is meaningful.
  const auto big = fresh("eval_big");
  const std::string data = "--set synth.image_size=16 --set synth.per_class=100 --set synth.max_shift=16 "
                           "--set data.image_size=16 --set psm.patches=2";
  REQUIRE(run_cli("gen-data --seed 5 --out " + big.string() + " " + data) == 0);
  RunConfig cfg;
  cfg.out_dir = big;
  cfg.image_size = 16;
  cfg.train.psm.patches_per_side = 2;
  const auto index = load_folder(cfg.dataset_root(), cfg.seed);
  Model<float> model(adapt_architecture(cfg.arch.build(), cfg.train.psm, 1, 4), 99);
  save_checkpoint(big / "untrained.ffcw", model);
  REQUIRE(run_cli("eval --seed 0 --out " + big.string() + " --checkpoint " + (big / "untrained.ffcw").string() +
                  " " + data) == 0);
  const auto summary = nlohmann::json::parse(slurp(big / "eval" / "test" / "summary.json"));
  const double acc = summary["weighted"]["accuracy"].get<double>();
  CHECK(acc >= 5.0);
  CHECK(acc <= 45.0);
  CHECK(fs::exists(big / "eval" / "test" / "confusion.svg"));
  CHECK(fs::exists(big / "eval" / "test" / "confusion_percent.csv"));

  {
    std::ofstream os(big / "broken.ffcw", std::ios::binary);
    os << "XXXXjunk";
  }
  CHECK(run_cli("eval --out " + big.string() + " --checkpoint " + (big / "broken.ffcw").string() + " " + data) == 2);
}

TEST_CASE("cli: inspect of a constant image has a single DC peak") {
  const auto out = fresh("inspect");
  fs::create_directories(out);
  write_image(out / "flat.png", Tensor<double>(Shape{1, 16, 16}, 0.6));
  REQUIRE(run_cli("inspect " + (out / "flat.png").string() + " --out " + out.string() +
                  " --set data.image_size=16 --set psm.patches=2 --set inspect.center=false") == 0);
  for (int q = 0; q < 4; ++q) {
    const auto mag = read_image(out / "inspect" / ("patch_" + std::to_string(q) + "_magnitude.png"));
    REQUIRE(mag.shape() == Shape{1, 8, 8});
    CHECK(mag[0] == 1.0);
    for (std::size_t i = 1; i < mag.size(); ++i) CHECK(mag[i] == 0.0);
  }
}
