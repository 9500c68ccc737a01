#pragma once

#include "stgformer/nn.hpp"
#include "stgformer/stg.hpp"

#include <string>
#include <vector>

namespace stgformer {

struct AblationFlags {
  bool no_social = false;       // off-diagonal agent edges forced 0
  bool no_learned_prior = false;  // prior frozen to the standard normal
  bool stationary_g = false;    // step-1 embedding reused for every step
  bool short_term_g = false;    // adjacency restricted to sources at t-1
  bool no_g = false;            // adjacency forced all-ones, graph modules off
  bool zeta_zero = false;       // sparsity weight forced to 0

  bool any() const {
    return no_social || no_learned_prior || stationary_g || short_term_g || no_g || zeta_zero;
  }
  std::string tag() const;
};

struct ModelConfig {
  int d = 16;          // graph embedding width
  int w = 64;          // model width
  int heads = 4;
  int ff = 128;        // feed-forward hidden width
  int traj_blocks = 2;
  int graph_blocks = 1;
  int max_steps = 20;  // steps a window may span; positional table size
  double layer_norm_eps = 1e-5;
  double ste_temperature = 1.0;
  bool scale_by_head_dim = false;  // sqrt(d_k) logits instead of sqrt(#keys)
  AblationFlags ablation;

  std::string canonical() const;
  std::uint64_t hash() const { return fnv1a(canonical()); }
  void validate() const;
};

struct DecoderStack {
  std::vector<DecoderBlockParams> blocks;
  LinearParams head;
};

struct TrajectoryParams {
  LinearParams in_proj;  // 2 -> w
  ad::Var pos;           // max_steps x w learned step encoding
  DecoderStack stack;    // head: w -> 2 (the predicted mean)
  // Final sampling map of the prediction head (2 -> 2). The reconstruction
  // loss is defined on the mean upstream of it, so it receives no gradient;
  // it is initialized to the identity and left out of the trainable set.
  LinearParams out_map;
};

struct PriorParams {
  LinearParams in_proj;  // d -> w
  ad::Var pos;
  DecoderStack stack;  // head: w -> d
};

struct PosteriorParams {
  LinearParams x_proj;  // 2 -> w
  LinearParams g_proj;  // d -> w
  ad::Var pos;
  DecoderStack stack;     // head: w -> d
  ad::Var start_token;  // 1 x d, stands in for the empty graph history at t=0
};

struct ModelParams {
  ModelConfig config;
  TrajectoryParams trajectory;
  PriorParams prior;
  PosteriorParams posterior;

  std::vector<ad::Var> trainable() const;
  std::vector<ad::Var> all() const;  // trainable + frozen, for checkpoints
};

ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Graph-building layer. These return autodiff nodes and are what the trainer
// differentiates; the value-level step functions below wrap them.
//
// Token layout: every node of the socio-temporal graph is one token. A step-t
// embedding stacks as [dest (n rows); src (n*t rows, time-major)], and each
// token receives the learned positional row of the step it represents (dest
// rows of G^tau get pos[tau]; src row (tau', j) gets pos[tau']).

struct EmbeddingVars {
  int t = 0;
  ad::Var dest;  // n x d
  ad::Var src;   // (n*t) x d, may have 0 rows
  int agents() const { return static_cast<int>(dest->rows()); }
};

EmbeddingVars to_vars(const GraphEmbedding& e);
GraphEmbedding to_embedding(const EmbeddingVars& v, Provenance provenance);

/// Mean of the step-t prior given the t previous embeddings. Queries are the
/// step t-1 embedding padded with n zero rows (the slots for the new source
/// step); keys/values are the stacked history.
EmbeddingVars prior_mean(const ModelParams& params, const std::vector<EmbeddingVars>& history);

/// Mean of the step-t posterior given positions x^{0:t} (queries) and the
/// sampled embedding history (keys/values; a learned start token at t = 0).
EmbeddingVars posterior_mean(const ModelParams& params, const std::vector<ad::Var>& x_hist,
                             const std::vector<EmbeddingVars>& g_hist);

/// The adjacency gate derived from a sampled embedding: hard 0/1 forward,
/// straight-through sigmoid backward when enabled, ablation masks applied.
struct StepGates {
  ad::Var dots;       // n x (n*t) bilinear products; null when t == 0 or no_g
  ad::Var gate;       // effective hard gate; null when no_g (unmasked)
  ad::Var soft_mass;  // 1x1 sum of the sigmoid surrogate over effective edges
  Adjacency effective;  // the adjacency actually used (for logging/dumps)
};
StepGates make_step_gates(const ModelParams& params, const EmbeddingVars& g,
                          bool straight_through);

/// Mean of the step-t trajectory module: queries from x^{t-1}, keys/values
/// from the full position history, masked by the gates. Later blocks
/// self-attend over the first block's per-agent outputs under the
/// pair-collapsed gate (any edge from j's history into i, plus self).
ad::Var trajectory_mean(const ModelParams& params, const std::vector<ad::Var>& x_hist,
                        const StepGates& gates);

// ---------------------------------------------------------------------------
// Value-level step API. Sampling adds unit normal noise to the mean
// (row-major over [dest; src]) unless deterministic is set.

GraphEmbedding init_g0(const ModelParams& params, int n, RandomStream& rng, bool deterministic);

GraphEmbedding prior_step(const ModelParams& params, const std::vector<GraphEmbedding>& history,
                          RandomStream& rng, bool deterministic);

GraphEmbedding posterior_step(const ModelParams& params, const std::vector<Mat>& x_hist,
                              const std::vector<GraphEmbedding>& g_hist, RandomStream& rng,
                              bool deterministic);

struct TrajectoryStepResult {
  Mat next;  // n x 2 sampled prediction
  Mat mean;  // n x 2 predicted mean
  Adjacency adjacency;  // the effective adjacency used
};

TrajectoryStepResult trajectory_step(const ModelParams& params, const std::vector<Mat>& x_hist,
                                     const GraphEmbedding& g_t, RandomStream& rng,
                                     bool deterministic);

}  // namespace stgformer
