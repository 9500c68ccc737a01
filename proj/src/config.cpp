#include "stgformer/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace stgformer {

using nlohmann::json;

namespace {

/// Pulls typed values out of a json object while recording every unknown
/// key and type violation instead of failing fast.
class Reader {
 public:
  Reader(const json& j, std::string prefix, std::vector<std::string>& violations)
      : j_(j), prefix_(std::move(prefix)), violations_(violations) {
    if (!j_.is_object()) violations_.push_back(prefix_ + " must be an object");
  }

  ~Reader() {
    if (!j_.is_object()) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) violations_.push_back("unknown key " + prefix_ + "." + key);
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.is_object()) return;
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      violations_.push_back(prefix_ + "." + key + " has the wrong type");
    }
  }

  const json* object(const char* key) {
    if (!j_.is_object()) return nullptr;
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

 private:
  const json& j_;
  std::string prefix_;
  std::vector<std::string>& violations_;
  std::set<std::string> seen_;
};

void parse_ablation(const json& j, AblationFlags& flags, std::vector<std::string>& violations) {
  Reader r(j, "ablation", violations);
  r.get("no_social", flags.no_social);
  r.get("no_learned_prior", flags.no_learned_prior);
  r.get("stationary_g", flags.stationary_g);
  r.get("short_term_g", flags.short_term_g);
  r.get("no_g", flags.no_g);
  r.get("zeta_zero", flags.zeta_zero);
}

void parse_model(const json& j, ModelConfig& m, std::vector<std::string>& violations) {
  Reader r(j, "model", violations);
  r.get("d", m.d);
  r.get("w", m.w);
  r.get("heads", m.heads);
  r.get("ff", m.ff);
  r.get("traj_blocks", m.traj_blocks);
  r.get("graph_blocks", m.graph_blocks);
  r.get("max_steps", m.max_steps);
  r.get("layer_norm_eps", m.layer_norm_eps);
  r.get("ste_temperature", m.ste_temperature);
  r.get("scale_by_head_dim", m.scale_by_head_dim);
  if (const json* a = r.object("ablation")) parse_ablation(*a, m.ablation, violations);
}

void parse_train(const json& j, TrainConfig& t, std::vector<std::string>& violations) {
  Reader r(j, "train", violations);
  r.get("lr", t.lr);
  r.get("weight_decay", t.weight_decay);
  r.get("beta1", t.beta1);
  r.get("beta2", t.beta2);
  r.get("adam_eps", t.adam_eps);
  r.get("kl_clip", t.kl_clip);
  r.get("zeta", t.zeta);
  r.get("grad_clip", t.grad_clip);
  r.get("epochs", t.epochs);
  r.get("samples_per_step", t.samples_per_step);
  r.get("seed", t.seed);
  r.get("straight_through", t.straight_through);
}

}  // namespace

SceneFormat RunConfig::format() const {
  if (dataset.format == "ethucy") return SceneFormat::ethucy;
  if (dataset.format == "sdd") return SceneFormat::sdd;
  throw ConfigError({"dataset.format must be 'ethucy' or 'sdd', got '" + dataset.format + "'"});
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << "schema=" << kConfigSchemaVersion << ";root=" << dataset.root
     << ";format=" << dataset.format << ";ppu=" << format_double(dataset.pixels_per_unit)
     << ";stride=" << dataset.stride << ";frame_step=" << dataset.frame_step
     << ";peds=" << dataset.pedestrians_only << ";" << train.canonical() << ";k=" << k
     << ";det=" << deterministic << ";share_warmup=" << share_warmup;
  return os.str();
}

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  std::vector<std::string> violations;
  {
    Reader r(j, "config", violations);
    int schema = kConfigSchemaVersion;
    r.get("schema_version", schema);
    if (schema != kConfigSchemaVersion)
      violations.push_back("schema_version " + std::to_string(schema) + " unsupported");
    if (const json* d = r.object("dataset")) {
      Reader rd(*d, "dataset", violations);
      rd.get("root", cfg.dataset.root);
      rd.get("format", cfg.dataset.format);
      rd.get("pixels_per_unit", cfg.dataset.pixels_per_unit);
      rd.get("stride", cfg.dataset.stride);
      rd.get("frame_step", cfg.dataset.frame_step);
      rd.get("pedestrians_only", cfg.dataset.pedestrians_only);
    }
    if (const json* m = r.object("model")) parse_model(*m, cfg.train.model, violations);
    if (const json* t = r.object("train")) parse_train(*t, cfg.train, violations);
    r.get("k", cfg.k);
    r.get("deterministic", cfg.deterministic);
    r.get("share_warmup", cfg.share_warmup);
    r.get("out_dir", cfg.out_dir);
  }
  if (cfg.dataset.format != "ethucy" && cfg.dataset.format != "sdd")
    violations.push_back("dataset.format must be 'ethucy' or 'sdd'");
  if (cfg.dataset.pixels_per_unit <= 0) violations.push_back("dataset.pixels_per_unit must be positive");
  if (cfg.dataset.stride < 1) violations.push_back("dataset.stride must be >= 1");
  if (cfg.k < 1) violations.push_back("k must be >= 1");
  try {
    cfg.train.validate();
  } catch (const ConfigError& e) {
    violations.insert(violations.end(), e.violations().begin(), e.violations().end());
  }
  if (!violations.empty()) throw ConfigError(std::move(violations));
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

json run_config_to_json(const RunConfig& cfg) {
  json ab = {{"no_social", cfg.train.model.ablation.no_social},
             {"no_learned_prior", cfg.train.model.ablation.no_learned_prior},
             {"stationary_g", cfg.train.model.ablation.stationary_g},
             {"short_term_g", cfg.train.model.ablation.short_term_g},
             {"no_g", cfg.train.model.ablation.no_g},
             {"zeta_zero", cfg.train.model.ablation.zeta_zero}};
  return json{{"schema_version", kConfigSchemaVersion},
              {"dataset",
               {{"root", cfg.dataset.root},
                {"format", cfg.dataset.format},
                {"pixels_per_unit", cfg.dataset.pixels_per_unit},
                {"stride", cfg.dataset.stride},
                {"frame_step", cfg.dataset.frame_step},
                {"pedestrians_only", cfg.dataset.pedestrians_only}}},
              {"model",
               {{"d", cfg.train.model.d},
                {"w", cfg.train.model.w},
                {"heads", cfg.train.model.heads},
                {"ff", cfg.train.model.ff},
                {"traj_blocks", cfg.train.model.traj_blocks},
                {"graph_blocks", cfg.train.model.graph_blocks},
                {"max_steps", cfg.train.model.max_steps},
                {"layer_norm_eps", cfg.train.model.layer_norm_eps},
                {"ste_temperature", cfg.train.model.ste_temperature},
                {"scale_by_head_dim", cfg.train.model.scale_by_head_dim},
                {"ablation", ab}}},
              {"train",
               {{"lr", cfg.train.lr},
                {"weight_decay", cfg.train.weight_decay},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"adam_eps", cfg.train.adam_eps},
                {"kl_clip", cfg.train.kl_clip},
                {"zeta", cfg.train.zeta},
                {"grad_clip", cfg.train.grad_clip},
                {"epochs", cfg.train.epochs},
                {"samples_per_step", cfg.train.samples_per_step},
                {"seed", cfg.train.seed},
                {"straight_through", cfg.train.straight_through}}},
              {"k", cfg.k},
              {"deterministic", cfg.deterministic},
              {"share_warmup", cfg.share_warmup},
              {"out_dir", cfg.out_dir}};
}

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"d", cfg.d},
              {"w", cfg.w},
              {"heads", cfg.heads},
              {"ff", cfg.ff},
              {"traj_blocks", cfg.traj_blocks},
              {"graph_blocks", cfg.graph_blocks},
              {"max_steps", cfg.max_steps},
              {"layer_norm_eps", cfg.layer_norm_eps},
              {"ste_temperature", cfg.ste_temperature},
              {"scale_by_head_dim", cfg.scale_by_head_dim},
              {"ablation",
               {{"no_social", cfg.ablation.no_social},
                {"no_learned_prior", cfg.ablation.no_learned_prior},
                {"stationary_g", cfg.ablation.stationary_g},
                {"short_term_g", cfg.ablation.short_term_g},
                {"no_g", cfg.ablation.no_g},
                {"zeta_zero", cfg.ablation.zeta_zero}}}};
}

ModelConfig model_config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint config: ") + e.what());
  }
  ModelConfig cfg;
  std::vector<std::string> violations;
  parse_model(j, cfg, violations);
  if (!violations.empty()) throw ConfigError(std::move(violations));
  return cfg;
}

void apply_ablation(AblationFlags& flags, const std::string& name) {
  std::istringstream is(name);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok.empty()) continue;
    if (tok == "no_social") flags.no_social = true;
    else if (tok == "no_learned_prior") flags.no_learned_prior = true;
    else if (tok == "stationary_g") flags.stationary_g = true;
    else if (tok == "short_term_g") flags.short_term_g = true;
    else if (tok == "no_g") flags.no_g = true;
    else if (tok == "zeta_zero") flags.zeta_zero = true;
    else
      throw ConfigError({"unknown ablation '" + tok +
                         "' (expected no_social, no_learned_prior, stationary_g, short_term_g, "
                         "no_g, zeta_zero)"});
  }
}

}  // namespace stgformer
