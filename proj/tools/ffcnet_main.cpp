#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ffcnet/app.hpp"
#include "ffcnet/log.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  bool deterministic = false;
  std::optional<std::string> precision;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  std::optional<std::string> split;
  std::optional<std::string> image;
  std::vector<std::string> sets;
  bool print_config = false;
};

ffcnet::RunConfig resolve(const Flags& f) {
  using ffcnet::apply_setting;
  ffcnet::RunConfig cfg;
  if (!f.config.empty()) ffcnet::load_config_file(cfg, f.config);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ffcnet::ConfigError("--set expects section.key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  // Dedicated flags win over the file and --set.
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out_dir = *f.out;
  if (f.workers) cfg.workers = *f.workers;
  if (f.deterministic) cfg.deterministic = true;
  if (f.precision) apply_setting(cfg, "run.precision", *f.precision);
  if (f.data) cfg.data_root = *f.data;
  if (f.checkpoint) cfg.checkpoint = *f.checkpoint;
  if (f.split) apply_setting(cfg, "eval.split", *f.split);
  if (f.image) cfg.inspect_image = *f.image;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-domain complex-valued CNN: data generation, training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "INI run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "Base seed for every random stream");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--workers", f.workers, "Parallel workers for loading, preprocessing and evaluation");
  app.add_flag("--deterministic", f.deterministic, "Single-threaded numerics and time-free metrics history");
  app.add_option("--precision", f.precision, "Numeric precision")->check(CLI::IsMember({"f32", "f64"}));
  app.add_option("--data", f.data, "Dataset root (default <out>/data)");
  app.add_option("--set", f.sets, "Override a config key: section.key=value (repeatable)");
  app.add_flag("--print-config", f.print_config, "Print the resolved configuration and exit");

  const std::vector<std::pair<ffcnet::Command, std::string>> commands{
      {ffcnet::Command::kGenData, "Write the synthetic dataset and its manifest"},
      {ffcnet::Command::kPreprocess, "Write unshuffled spectral caches for every split"},
      {ffcnet::Command::kTrain, "Train and write checkpoints and the metrics history"},
      {ffcnet::Command::kEval, "Evaluate a checkpoint on one split"},
      {ffcnet::Command::kSweep, "Train over a grid of patch counts and shuffle probabilities"},
      {ffcnet::Command::kInspect, "Write per-patch magnitude and phase images"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [cmd, help] : commands) subs.push_back(app.add_subcommand(ffcnet::command_name(cmd), help));
  subs[3]->add_option("--checkpoint", f.checkpoint, "Checkpoint to evaluate (default <out>/checkpoint_best.ffcw)");
  subs[3]->add_option("--split", f.split, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test"}));
  subs[5]->add_option("image", f.image, "Image to inspect");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  ffcnet::init_logging();
  std::optional<ffcnet::Command> command;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (subs[i]->parsed()) command = commands[i].first;
  }

  try {
    const ffcnet::RunConfig cfg = resolve(f);
    if (f.print_config) {
      std::cout << ffcnet::dump_config(cfg);
      return 0;
    }
    ffcnet::run_command(*command, cfg);
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return 0;
}
