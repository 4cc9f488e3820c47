#include "ffcnet/config.hpp"

#include "ffcnet/fft.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace ffcnet {

namespace fs = std::filesystem;

const char* command_name(Command c) {
  switch (c) {
    case Command::kGenData:
      return "gen-data";
    case Command::kPreprocess:
      return "preprocess";
    case Command::kTrain:
      return "train";
    case Command::kEval:
      return "eval";
    case Command::kSweep:
      return "sweep";
    case Command::kInspect:
      return "inspect";
  }
  return "?";
}

ArchitectureSpec ArchConfig::build() const {
  ArchitectureSpec a = variant == "resnet18" ? ArchitectureSpec::resnet18(1) : ArchitectureSpec::mini(1);
  a.head.bridge = bridge;
  if (stem_channels) a.stem.channels = stem_channels;
  if (stem_kernel) a.stem.kernel = stem_kernel;
  if (stem_stride) a.stem.stride = stem_stride;
  if (stem_pool >= 0) a.stem.pool = stem_pool != 0;
  return a;
}

fs::path RunConfig::dataset_root() const { return data_root.empty() ? out_dir / "data" : data_root; }

fs::path RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? out_dir / "checkpoint_best.ffcw" : checkpoint;
}

TrainConfig RunConfig::effective_train() const {
  TrainConfig t = train;
  t.seed = seed;
  t.workers = workers;
  t.deterministic = deterministic;
  t.precision = precision;
  return t;
}

namespace {

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c); };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError(key + ": invalid value '" + value + "' (expected " + expected + ")");
}

template <typename N>
N parse_number(const std::string& key, const std::string& raw, const char* expected) {
  const std::string v = trim(raw);
  N out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, raw, expected);
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  return parse_number<std::size_t>(key, v, "a non-negative integer");
}

bool parse_bool(const std::string& key, const std::string& raw) {
  std::string v = trim(raw);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, raw, "true or false");
}

template <typename N>
std::vector<N> parse_list(const std::string& key, const std::string& raw, const char* expected) {
  std::vector<N> out;
  std::stringstream ss(raw);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_number<N>(key, item, expected));
  if (out.empty()) bad_value(key, raw, expected);
  return out;
}

std::string join(const auto& items) {
  std::ostringstream os;
  for (std::size_t i = 0; i < items.size(); ++i) os << (i ? "," : "") << items[i];
  return os.str();
}

template <typename E>
E parse_enum(const std::string& key, const std::string& raw, const std::vector<std::pair<std::string, E>>& options) {
  const std::string v = trim(raw);
  std::string names;
  for (const auto& [name, value] : options) {
    if (v == name) return value;
    names += (names.empty() ? "" : " | ") + name;
  }
  bad_value(key, raw, names);
}

template <typename E>
std::string enum_name(E value, const std::vector<std::pair<std::string, E>>& options) {
  for (const auto& [name, v] : options) {
    if (v == value) return name;
  }
  return "?";
}

const std::vector<std::pair<std::string, Precision>> kPrecisions{{"f32", Precision::kF32}, {"f64", Precision::kF64}};
const std::vector<std::pair<std::string, PatchLayout>> kLayouts{{"channels", PatchLayout::kChannels},
                                                                {"mosaic", PatchLayout::kMosaic}};
const std::vector<std::pair<std::string, ColorMode>> kColors{{"per_channel", ColorMode::kPerChannel},
                                                             {"gray", ColorMode::kGray}};
const std::vector<std::pair<std::string, BridgeMode>> kBridges{
    {"magnitude", BridgeMode::kMagnitude}, {"real", BridgeMode::kRealPart}, {"concat", BridgeMode::kConcat}};
const std::vector<std::pair<std::string, LrSchedule::Kind>> kSchedules{{"none", LrSchedule::Kind::kNone},
                                                                       {"step", LrSchedule::Kind::kStep}};
const std::vector<std::pair<std::string, Averaging>> kAveraging{{"weighted", Averaging::kWeighted},
                                                                {"macro", Averaging::kMacro}};
const std::vector<std::pair<std::string, Split>> kSplits{
    {"train", Split::kTrain}, {"val", Split::kVal}, {"test", Split::kTest}};

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt_band(const std::vector<std::pair<double, double>>& bands) {
  std::ostringstream os;
  for (std::size_t i = 0; i < bands.size(); ++i) os << (i ? "," : "") << bands[i].first << ':' << bands[i].second;
  return os.str();
}

std::vector<std::pair<double, double>> parse_bands(const std::string& key, const std::string& raw) {
  std::vector<std::pair<double, double>> out;
  std::stringstream ss(raw);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) bad_value(key, raw, "lo:hi pairs separated by commas");
    out.emplace_back(parse_number<double>(key, item.substr(0, colon), "lo:hi pairs"),
                     parse_number<double>(key, item.substr(colon + 1), "lo:hi pairs"));
  }
  if (out.empty()) bad_value(key, raw, "lo:hi pairs separated by commas");
  return out;
}

#define FFCNET_FIELD(member, parse, format)                                                   \
  Field {                                                                                     \
    [](RunConfig& c, [[maybe_unused]] const std::string& k, const std::string& v) { c.member = parse; },       \
        [](const RunConfig& c) -> std::string { return format; }                              \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table{
      {"run.seed", FFCNET_FIELD(seed, parse_number<std::uint64_t>(k, v, "an unsigned integer"),
                                std::to_string(c.seed))},
      {"run.out", FFCNET_FIELD(out_dir, fs::path(trim(v)), c.out_dir.string())},
      {"run.workers", FFCNET_FIELD(workers, parse_count(k, v), std::to_string(c.workers))},
      {"run.deterministic", FFCNET_FIELD(deterministic, parse_bool(k, v), c.deterministic ? "true" : "false")},
      {"run.precision", FFCNET_FIELD(precision, parse_enum(k, v, kPrecisions), enum_name(c.precision, kPrecisions))},
      {"data.root", FFCNET_FIELD(data_root, fs::path(trim(v)), c.data_root.string())},
      {"data.image_size", FFCNET_FIELD(image_size, parse_count(k, v), std::to_string(c.image_size))},
      {"psm.patches", FFCNET_FIELD(train.psm.patches_per_side, parse_number<int>(k, v, "an integer"),
                                   std::to_string(c.train.psm.patches_per_side))},
      {"psm.shuffle_prob", FFCNET_FIELD(train.psm.shuffle_prob, parse_number<double>(k, v, "a number"),
                                        fmt_double(c.train.psm.shuffle_prob))},
      {"psm.layout", FFCNET_FIELD(train.psm.layout, parse_enum(k, v, kLayouts), enum_name(c.train.psm.layout, kLayouts))},
      {"psm.color", FFCNET_FIELD(train.psm.color, parse_enum(k, v, kColors), enum_name(c.train.psm.color, kColors))},
      {"train.lr", FFCNET_FIELD(train.learning_rate, parse_number<double>(k, v, "a number"),
                                fmt_double(c.train.learning_rate))},
      {"train.batch_size", FFCNET_FIELD(train.batch_size, parse_count(k, v), std::to_string(c.train.batch_size))},
      {"train.epochs", FFCNET_FIELD(train.epochs, parse_count(k, v), std::to_string(c.train.epochs))},
      {"train.momentum", FFCNET_FIELD(train.momentum, parse_number<double>(k, v, "a number"),
                                      fmt_double(c.train.momentum))},
      {"train.weight_decay", FFCNET_FIELD(train.weight_decay, parse_number<double>(k, v, "a number"),
                                          fmt_double(c.train.weight_decay))},
      {"train.schedule", FFCNET_FIELD(train.schedule.kind, parse_enum(k, v, kSchedules),
                                      enum_name(c.train.schedule.kind, kSchedules))},
      {"train.milestones", FFCNET_FIELD(train.schedule.milestones, parse_list<double>(k, v, "fractions"),
                                        join(c.train.schedule.milestones))},
      {"train.lr_factor", FFCNET_FIELD(train.schedule.factor, parse_number<double>(k, v, "a number"),
                                       fmt_double(c.train.schedule.factor))},
      {"train.early_stop", FFCNET_FIELD(train.early_stop, parse_count(k, v), std::to_string(c.train.early_stop))},
      {"train.hflip", FFCNET_FIELD(train.hflip, parse_bool(k, v), c.train.hflip ? "true" : "false")},
      {"train.vflip", FFCNET_FIELD(train.vflip, parse_bool(k, v), c.train.vflip ? "true" : "false")},
      {"arch.variant", FFCNET_FIELD(arch.variant, trim(v), c.arch.variant)},
      {"arch.bridge", FFCNET_FIELD(arch.bridge, parse_enum(k, v, kBridges), enum_name(c.arch.bridge, kBridges))},
      {"arch.stem_channels", FFCNET_FIELD(arch.stem_channels, parse_count(k, v), std::to_string(c.arch.stem_channels))},
      {"arch.stem_kernel", FFCNET_FIELD(arch.stem_kernel, parse_count(k, v), std::to_string(c.arch.stem_kernel))},
      {"arch.stem_stride", FFCNET_FIELD(arch.stem_stride, parse_number<int>(k, v, "an integer"),
                                        std::to_string(c.arch.stem_stride))},
      {"arch.stem_pool", FFCNET_FIELD(arch.stem_pool, trim(v) == "default" ? -1 : (parse_bool(k, v) ? 1 : 0),
                                      c.arch.stem_pool < 0 ? "default" : (c.arch.stem_pool ? "true" : "false"))},
      {"synth.image_size", FFCNET_FIELD(synth.image_size, parse_count(k, v), std::to_string(c.synth.image_size))},
      {"synth.per_class", FFCNET_FIELD(synth.per_class, parse_count(k, v), std::to_string(c.synth.per_class))},
      {"synth.noise_sigma", FFCNET_FIELD(synth.noise_sigma, parse_number<double>(k, v, "a number"),
                                         fmt_double(c.synth.noise_sigma))},
      {"synth.brightness_jitter", FFCNET_FIELD(synth.brightness_jitter, parse_number<double>(k, v, "a number"),
                                               fmt_double(c.synth.brightness_jitter))},
      {"synth.max_shift", FFCNET_FIELD(synth.max_shift, parse_count(k, v), std::to_string(c.synth.max_shift))},
      {"synth.components", FFCNET_FIELD(synth.components, parse_count(k, v), std::to_string(c.synth.components))},
      {"synth.amplitude", FFCNET_FIELD(synth.amplitude, parse_number<double>(k, v, "a number"),
                                       fmt_double(c.synth.amplitude))},
      {"synth.bands", FFCNET_FIELD(synth.bands, parse_bands(k, v), fmt_band(c.synth.bands))},
      {"eval.split", FFCNET_FIELD(eval_split, parse_enum(k, v, kSplits), enum_name(c.eval_split, kSplits))},
      {"eval.averaging", FFCNET_FIELD(averaging, parse_enum(k, v, kAveraging), enum_name(c.averaging, kAveraging))},
      {"eval.checkpoint", FFCNET_FIELD(checkpoint, fs::path(trim(v)), c.checkpoint.string())},
      {"sweep.patches", FFCNET_FIELD(sweep_patches, parse_list<int>(k, v, "integers"), join(c.sweep_patches))},
      {"sweep.shuffle_probs", FFCNET_FIELD(sweep_probs, parse_list<double>(k, v, "numbers"), join(c.sweep_probs))},
      {"inspect.image", FFCNET_FIELD(inspect_image, fs::path(trim(v)), c.inspect_image.string())},
      {"inspect.center", FFCNET_FIELD(inspect_center, parse_bool(k, v), c.inspect_center ? "true" : "false")},
  };
  return table;
}

#undef FFCNET_FIELD

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ConfigError(what + " " + p.string() + " does not exist");
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(trim(key));
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, it->first, value);
}

void load_config_file(RunConfig& cfg, const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file " + path.string() + " does not exist");
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config file " + path.string() + ": key '" + section + "' is outside a section");
    for (const auto& [key, value] : body) apply_setting(cfg, section + "." + key, value.data());
  }
}

void validate(const RunConfig& cfg, Command command) {
  if (cfg.out_dir.empty()) throw ConfigError("run.out must not be empty");
  if (cfg.workers == 0) throw ConfigError("run.workers must be >= 1");
  if (command == Command::kGenData) {
    cfg.synth.validate();
    return;
  }
  if (!is_power_of_two(cfg.image_size)) {
    throw ConfigError("data.image_size must be a power of two for the radix-2 transform, got " +
                      std::to_string(cfg.image_size));
  }
  const TrainConfig t = cfg.effective_train();
  t.validate();
  t.psm.validate(cfg.image_size, cfg.image_size);
  if (cfg.arch.variant != "mini" && cfg.arch.variant != "resnet18") {
    throw ConfigError("arch.variant must be mini or resnet18, got '" + cfg.arch.variant + "'");
  }
  cfg.arch.build().validate();

  if (command == Command::kInspect) {
    if (cfg.inspect_image.empty()) throw ConfigError("inspect needs an image (inspect.image or a positional path)");
    require_exists(cfg.inspect_image, "image");
    return;
  }
  require_exists(cfg.dataset_root(), "dataset root");
  if (command == Command::kEval) require_exists(cfg.checkpoint_path(), "checkpoint");
  if (command == Command::kSweep) {
    for (int k : cfg.sweep_patches) {
      PsmConfig p = t.psm;
      p.patches_per_side = k;
      p.validate(cfg.image_size, cfg.image_size);
    }
    for (double p : cfg.sweep_probs) {
      if (!(p >= 0 && p <= 1)) throw ConfigError("sweep.shuffle_probs entries must lie in [0, 1]");
    }
  }
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, field] : fields()) {
    const std::string s = key.substr(0, key.find('.'));
    if (s != section) {
      os << (section.empty() ? "" : "\n") << '[' << s << "]\n";
      section = s;
    }
    os << key.substr(s.size() + 1) << " = " << field.get(cfg) << '\n';
  }
  return os.str();
}

}  // namespace ffcnet
