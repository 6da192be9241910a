#include "rd2v/config.hpp"

#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "rd2v/errors.hpp"
#include "rd2v/rng.hpp"

namespace rd2v {

using nlohmann::json;

Profile parse_profile(std::string_view name) {
  if (name == "paper") return Profile::kPaper;
  if (name == "desk") return Profile::kDesk;
  if (name == "toy") return Profile::kToy;
  throw ConfigError("unknown profile '" + std::string(name) + "'");
}

std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::kPaper: return "paper";
    case Profile::kDesk: return "desk";
    case Profile::kToy: return "toy";
  }
  return "?";
}

TrainConfig TrainConfig::for_profile(Profile p) {
  TrainConfig c;
  c.profile = p;
  switch (p) {
    case Profile::kPaper:
      c.model.conv = ConvSpec::paper();
      c.model.transformer = {12, 768, 12, 3072, 8, true};
      c.negatives.patch_min = 30;
      c.negatives.patch_max = 50;
      c.steps = 100000;
      break;
    case Profile::kDesk:
      c.model.conv = ConvSpec::desk();
      c.model.transformer = {4, 64, 4, 256, 3, true};
      c.steps = 2000;
      break;
    case Profile::kToy:
      c.model.conv = ConvSpec::standard(32);
      c.model.transformer = {2, 32, 4, 64, 2, true};
      c.data.min_duration = 1.0;
      c.data.max_duration = 1.5;
      c.data.corpus_size = 16;
      c.data.noise_count = 4;
      c.batch_size = 2;
      c.steps = 300;
      break;
  }
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  ema.validate();
  loss.validate();
  optimizer.validate();
  if (!(mask.prob >= 0.0 && mask.prob <= 1.0) || mask.span < 1) {
    throw ConfigError("mask.prob must lie in [0, 1] and mask.span be >= 1");
  }
  const auto& n = negatives.counts;
  if (negatives.patch_min < 1 || negatives.patch_max < negatives.patch_min) {
    throw ConfigError("negatives.patch_min/patch_max must satisfy 1 <= min <= max");
  }
  if (loss.contrastive()) {
    if (n.n_standard + n.n_non_semantic < 1) {
      throw ConfigError("contrastive loss modes need at least one negative");
    }
    if (loss.mode == LossMode::kJointNonSemanticRemoval &&
        (n.k < 1 || n.k > n.n_standard + n.n_non_semantic)) {
      throw ConfigError("negatives.k must lie in [1, n_standard + n_non_semantic]");
    }
  }
  if (negatives.k_anneal_steps < 0) throw ConfigError("negatives.k_anneal_steps must be >= 0");
  if (data.sample_rate <= 0) throw ConfigError("data.sample_rate must be > 0");
  if (!(data.min_duration > 0.0) || data.max_duration < data.min_duration) {
    throw ConfigError("data durations must satisfy 0 < min_duration <= max_duration");
  }
  if (data.snr_max < data.snr_min) throw ConfigError("data.snr_max < data.snr_min");
  const auto min_samples = std::size_t(data.min_duration * data.sample_rate);
  if (min_samples < model.conv.receptive_field() + model.conv.total_stride()) {
    throw ConfigError("data.min_duration yields fewer than two encoder frames");
  }
  if (data.manifest.empty() && data.corpus_size < 1) {
    throw ConfigError("data.corpus_size must be >= 1");
  }
  if (data.noise_manifest.empty() && data.noise_count < 1) {
    throw ConfigError("data.noise_count must be >= 1");
  }
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (warmup_steps < -1) throw ConfigError("warmup_steps must be >= -1");
}

std::int64_t TrainConfig::resolved_warmup() const {
  return warmup_steps >= 0 ? warmup_steps : steps / 10;
}

AdamConfig TrainConfig::resolved_optimizer() const {
  AdamConfig a = optimizer;
  a.warmup_steps = resolved_warmup();
  return a;
}

std::size_t TrainConfig::k_at(std::int64_t step) const {
  const auto& n = negatives.counts;
  if (negatives.k_anneal_steps <= 0 || step >= negatives.k_anneal_steps) {
    return n.k;
  }
  const double pool = double(n.n_standard + n.n_non_semantic);
  const double frac = double(step) / double(negatives.k_anneal_steps);
  return std::size_t(std::llround(pool + (double(n.k) - pool) * frac));
}

PoolPlan TrainConfig::pool_plan_at(std::int64_t step) const {
  NegativeCounts counts = negatives.counts;
  counts.k = k_at(step);
  return pool_plan(loss.mode, counts);
}

std::uint64_t TrainConfig::digest() const {
  json j = to_json(*this);
  j.erase("output_dir");
  j.erase("checkpoint_every");
  j.erase("steps");
  j["data"].erase("probe_size");
  j["optimizer"]["warmup_steps"] = resolved_warmup();
  return fnv1a64(j.dump());
}

json to_json(const TrainConfig& c) {
  json kernels = json::array(), strides = json::array();
  for (const auto& l : c.model.conv.layers) {
    kernels.push_back(l.kernel);
    strides.push_back(l.stride);
  }
  const auto& t = c.model.transformer;
  const auto& n = c.negatives;
  return {
      {"profile", to_string(c.profile)},
      {"seed", c.seed},
      {"steps", c.steps},
      {"batch_size", c.batch_size},
      {"output_dir", c.output_dir},
      {"checkpoint_every", c.checkpoint_every},
      {"conv",
       {{"kernels", kernels}, {"strides", strides}, {"channels", c.model.conv.output_channels()}}},
      {"transformer",
       {{"layers", t.layers},
        {"model_dim", t.model_dim},
        {"heads", t.heads},
        {"ffn_dim", t.ffn_dim},
        {"top_m", t.top_m},
        {"positional", t.positional}}},
      {"mask", {{"prob", c.mask.prob}, {"span", c.mask.span}}},
      {"ema",
       {{"tau0", c.ema.tau0},
        {"tau_e", c.ema.tau_e},
        {"tau_n", c.ema.tau_n},
        {"transformer_only", c.ema_transformer_only}}},
      {"loss",
       {{"mode", to_string(c.loss.mode)},
        {"beta", c.loss.beta},
        {"kappa", c.loss.kappa},
        {"lambda", c.loss.lambda}}},
      {"negatives",
       {{"n_standard", n.counts.n_standard},
        {"n_non_semantic", n.counts.n_non_semantic},
        {"k", n.counts.k},
        {"k_anneal_steps", n.k_anneal_steps},
        {"patch_min", n.patch_min},
        {"patch_max", n.patch_max}}},
      {"optimizer",
       {{"max_lr", c.optimizer.max_lr},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"eps", c.optimizer.eps},
        {"warmup_steps", c.warmup_steps}}},
      {"data",
       {{"sample_rate", c.data.sample_rate},
        {"min_duration", c.data.min_duration},
        {"max_duration", c.data.max_duration},
        {"snr_min", c.data.snr_min},
        {"snr_max", c.data.snr_max},
        {"corpus_size", c.data.corpus_size},
        {"noise_count", c.data.noise_count},
        {"manifest", c.data.manifest},
        {"noise_manifest", c.data.noise_manifest},
        {"probe_size", c.data.probe_size}}},
  };
}

namespace {

void check_keys(const json& patch, const json& reference, const std::string& prefix) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (!reference.contains(it.key())) {
      throw ConfigError("unknown config key '" + prefix + it.key() + "'");
    }
    const json& ref = reference.at(it.key());
    if (ref.is_object()) {
      if (!it.value().is_object()) {
        throw ConfigError("config key '" + prefix + it.key() + "' must be a table");
      }
      check_keys(it.value(), ref, prefix + it.key() + ".");
    }
  }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  const json& v = section ? j.at(section).at(key) : j.at(key);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + (section ? std::string(section) + "." : "") +
                      key + "' has the wrong type");
  }
}

} // namespace

TrainConfig config_from_json(const json& patch, const TrainConfig* base) {
  if (!patch.is_object()) {
    throw ConfigError("config must be a table");
  }
  TrainConfig start = base ? *base : TrainConfig::for_profile(Profile::kDesk);
  if (patch.contains("profile")) {
    const Profile p = parse_profile(get<std::string>(patch, nullptr, "profile"));
    if (!base || p != base->profile) start = TrainConfig::for_profile(p);
  }
  json merged = to_json(start);
  check_keys(patch, merged, "");
  merged.merge_patch(patch);

  TrainConfig c;
  c.profile = parse_profile(get<std::string>(merged, nullptr, "profile"));
  c.seed = get<std::uint64_t>(merged, nullptr, "seed");
  c.steps = get<std::int64_t>(merged, nullptr, "steps");
  c.batch_size = get<std::size_t>(merged, nullptr, "batch_size");
  c.output_dir = get<std::string>(merged, nullptr, "output_dir");
  c.checkpoint_every = get<std::int64_t>(merged, nullptr, "checkpoint_every");

  const auto kernels = get<std::vector<std::size_t>>(merged, "conv", "kernels");
  const auto strides = get<std::vector<std::size_t>>(merged, "conv", "strides");
  const auto channels = get<std::size_t>(merged, "conv", "channels");
  if (kernels.size() != strides.size()) {
    throw ConfigError("conv.kernels and conv.strides differ in length");
  }
  c.model.conv.layers.clear();
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    c.model.conv.layers.push_back({kernels[i], strides[i], channels});
  }
  auto& t = c.model.transformer;
  t.layers = get<std::size_t>(merged, "transformer", "layers");
  t.model_dim = get<std::size_t>(merged, "transformer", "model_dim");
  t.heads = get<std::size_t>(merged, "transformer", "heads");
  t.ffn_dim = get<std::size_t>(merged, "transformer", "ffn_dim");
  t.top_m = get<std::size_t>(merged, "transformer", "top_m");
  t.positional = get<bool>(merged, "transformer", "positional");

  c.mask.prob = get<double>(merged, "mask", "prob");
  c.mask.span = get<std::size_t>(merged, "mask", "span");

  c.ema.tau0 = get<double>(merged, "ema", "tau0");
  c.ema.tau_e = get<double>(merged, "ema", "tau_e");
  c.ema.tau_n = get<std::int64_t>(merged, "ema", "tau_n");
  c.ema_transformer_only = get<bool>(merged, "ema", "transformer_only");

  c.loss.mode = parse_loss_mode(get<std::string>(merged, "loss", "mode"));
  c.loss.beta = get<double>(merged, "loss", "beta");
  c.loss.kappa = get<double>(merged, "loss", "kappa");
  c.loss.lambda = get<double>(merged, "loss", "lambda");

  auto& n = c.negatives;
  n.counts.n_standard = get<std::size_t>(merged, "negatives", "n_standard");
  n.counts.n_non_semantic = get<std::size_t>(merged, "negatives", "n_non_semantic");
  n.counts.k = get<std::size_t>(merged, "negatives", "k");
  n.k_anneal_steps = get<std::int64_t>(merged, "negatives", "k_anneal_steps");
  n.patch_min = get<std::size_t>(merged, "negatives", "patch_min");
  n.patch_max = get<std::size_t>(merged, "negatives", "patch_max");

  c.optimizer.max_lr = get<double>(merged, "optimizer", "max_lr");
  c.optimizer.beta1 = get<double>(merged, "optimizer", "beta1");
  c.optimizer.beta2 = get<double>(merged, "optimizer", "beta2");
  c.optimizer.eps = get<double>(merged, "optimizer", "eps");
  c.warmup_steps = get<std::int64_t>(merged, "optimizer", "warmup_steps");

  auto& d = c.data;
  d.sample_rate = get<int>(merged, "data", "sample_rate");
  d.min_duration = get<double>(merged, "data", "min_duration");
  d.max_duration = get<double>(merged, "data", "max_duration");
  d.snr_min = get<double>(merged, "data", "snr_min");
  d.snr_max = get<double>(merged, "data", "snr_max");
  d.corpus_size = get<std::size_t>(merged, "data", "corpus_size");
  d.noise_count = get<std::size_t>(merged, "data", "noise_count");
  d.manifest = get<std::string>(merged, "data", "manifest");
  d.noise_manifest = get<std::string>(merged, "data", "noise_manifest");
  d.probe_size = get<std::size_t>(merged, "data", "probe_size");

  c.validate();
  return c;
}

json toml_to_json(std::string_view toml_text) {
  toml::table table;
  try {
    table = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("TOML parse error: ") + std::string(e.description()));
  }
  std::ostringstream os;
  os << toml::json_formatter{table};
  return json::parse(os.str());
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(toml_to_json(ss.str()));
}

} // namespace rd2v
