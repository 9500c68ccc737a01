#pragma once

#include "stgformer/data.hpp"
#include "stgformer/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace stgformer {

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;  // first-moment decay ("momentum")
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double kl_clip = 2.0;       // per-step cap on the KL term
  double zeta = 0.01;         // weight of the L0 surrogate
  double grad_clip = 5.0;     // global gradient norm cap; <= 0 disables
  int epochs = 100;
  int samples_per_step = 1;   // Monte-Carlo samples of the reconstruction term
  std::uint64_t seed = 0;
  bool straight_through = true;  // hard gates backprop through the sigmoid surrogate

  double effective_zeta() const { return model.ablation.zeta_zero ? 0.0 : zeta; }
  std::string canonical() const;
  std::uint64_t hash() const { return fnv1a(canonical()); }
  void validate() const;
};

struct LossBreakdown {
  double mse = 0.0;
  double kl_preclip = 0.0;
  double kl = 0.0;
  double sparsity = 0.0;
  double total = 0.0;  // mse + kl + effective_zeta * sparsity
  std::vector<double> mse_per_step;       // index 0 is always 0
  std::vector<double> kl_preclip_per_step;
  std::vector<double> kl_per_step;
  std::vector<double> sparsity_per_step;
  long hard_edges = 0;
  long possible_edges = 0;
  double edge_density() const { return possible_edges ? double(hard_edges) / possible_edges : 0.0; }
};

/// The loss graph over one position sequence (frames[t] is n x 2, length
/// >= 2): teacher-forced posterior sampling, prior conditioned on the
/// posterior samples, per-step clipped KL, and the soft edge mass.
struct SequenceLoss {
  ad::Var total;
  ad::Var mse;       // may be null under degenerate configs
  ad::Var kl;        // null when the graph modules are off
  ad::Var sparsity;  // null when the graph modules are off
  LossBreakdown breakdown;
};
SequenceLoss sequence_loss(const std::vector<Mat>& frames, const ModelParams& params,
                           const TrainConfig& cfg, RandomStream& rng);

/// sequence_loss over a window's 20 frames, values only.
LossBreakdown window_loss(const TrajectoryWindow& window, const ModelParams& params,
                          const TrainConfig& cfg, RandomStream& rng);

/// Decoupled-weight-decay Adam over a fixed parameter list.
class AdamW {
 public:
  AdamW(std::vector<ad::Var> params, const TrainConfig& cfg);
  /// One update at the given learning rate; clears nothing.
  void step(double lr);
  void zero_grad();
  /// Scales gradients to the configured global norm cap; returns the norm.
  double clip_gradients();

 private:
  std::vector<ad::Var> params_;
  std::vector<Mat> m_, v_;
  double beta1_, beta2_, eps_, weight_decay_, grad_clip_;
  long step_count_ = 0;
};

/// Cosine-annealed learning rate from lr down to 0 over total steps.
double cosine_lr(double lr, long step, long total_steps);

struct EpochStats {
  int epoch = 0;
  double mse = 0.0, kl = 0.0, sparsity = 0.0, total = 0.0;
  double edge_density = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> log;
  bool diverged = false;
  int diverged_epoch = -1;  // last good epoch is diverged_epoch - 1
};

/// Full optimization loop: per-window steps, shuffled each epoch, cosine
/// schedule over epochs * windows steps. Deterministic given cfg.seed. On a
/// non-finite loss the parameters roll back to the end of the last finished
/// epoch and training stops with `diverged` set.
TrainResult train(const std::vector<TrajectoryWindow>& dataset, const TrainConfig& cfg);

void write_metrics_jsonl(std::ostream& os, const std::vector<EpochStats>& log);
void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<EpochStats>& log);

/// Versioned binary checkpoint: config, config hash, and every parameter
/// bit-exactly. Round trips are exact.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
/// Same, but rejects a checkpoint whose config differs from `expected`.
ModelParams load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace stgformer
