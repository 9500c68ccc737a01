#pragma once

#include "stgformer/train.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <string>

namespace stgformer {

inline constexpr int kConfigSchemaVersion = 1;

/// Declarative run configuration consumed by the CLI. Unknown keys are
/// rejected; validation reports every violation at once.
struct RunConfig {
  struct Dataset {
    std::string root = ".";
    std::string format = "ethucy";  // or "sdd"
    double pixels_per_unit = 1.0;
    int stride = 1;
    long frame_step = 0;  // 0 = format default
    bool pedestrians_only = false;
  };

  Dataset dataset;
  TrainConfig train;
  int k = 20;  // prediction samples
  bool deterministic = false;
  bool share_warmup = false;  // reuse the posterior warm-up across samples
  std::string out_dir = "out";

  SceneFormat format() const;
  std::uint64_t hash() const { return fnv1a(canonical()); }
  std::string canonical() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json_string(const std::string& text);

/// Apply `name` (comma-separated flags from {no_social, no_learned_prior,
/// stationary_g, short_term_g, no_g, zeta_zero}) onto the flags.
void apply_ablation(AblationFlags& flags, const std::string& name);

}  // namespace stgformer
