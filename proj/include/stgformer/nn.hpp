#pragma once

#include "stgformer/autodiff.hpp"
#include "stgformer/stg.hpp"

#include <optional>
#include <vector>

namespace stgformer {

struct LinearParams {
  ad::Var weight;  // out x in
  ad::Var bias;    // 1 x out
  int in() const { return static_cast<int>(weight->cols()); }
  int out() const { return static_cast<int>(weight->rows()); }
};

struct LayerNormParams {
  ad::Var gain;  // 1 x w
  ad::Var bias;  // 1 x w
};

struct FeedForwardParams {
  LinearParams expand;    // w -> ff
  LinearParams contract;  // ff -> w
};

struct AttentionParams {
  LinearParams query, key, value;  // w -> w, split into heads column-wise
  LinearParams output;             // w -> w
  int heads = 1;
};

struct DecoderBlockParams {
  AttentionParams attn;
  LayerNormParams norm_attn;  // applied to the attention output
  LayerNormParams norm_ff;    // applied after the residual feed-forward
  FeedForwardParams ff;
};

/// y = x W^T + bias.
ad::Var linear(const LinearParams& p, const ad::Var& x);

/// Per-call attention configuration. `gate` is the hard edge gate aligned
/// with (query rows x key rows); null means unmasked. `fallback` supplies
/// the fixed row distribution used when a gate row is entirely zero.
/// `scale` is the logit divisor (the spec'd convention is sqrt(#keys)).
struct AttentionContext {
  ad::Var gate;
  std::optional<Mat> fallback;
  double scale = 1.0;
};

/// Multi-head scaled dot-product attention: project queries from q_src and
/// keys/values from kv_src, mask logits to -inf where the gate is 0, take
/// the softmax-weighted sum of values per head, concatenate and project.
ad::Var multi_head_attention(const AttentionParams& p, const ad::Var& q_src,
                             const ad::Var& kv_src, const AttentionContext& ctx);

/// The decoder tail applied to an attention output:
///   u = LayerNorm(attn_out); a = LayerNorm(u + MLP(ReLU(MLP(u)))).
ad::Var decoder_block(const DecoderBlockParams& p, const ad::Var& attn_out,
                      double layer_norm_eps);

/// Uniform distribution over each destination agent's own history columns
/// (column tau*n + i for every tau); used when an adjacency row is all zero.
Mat own_history_fallback(int n, int t);

struct StgAttentionOptions {
  double layer_norm_eps = 1e-5;  // unused here; kept with nn defaults below
  bool scale_by_head_dim = false;
  double ste_temperature = 1.0;
  bool straight_through = false;
};

/// Value-level socio-temporal attention: n x w queries against the (n*t) x w
/// stacked history, masked by the adjacency. Scale is sqrt(n*t) unless
/// scale_by_head_dim is set.
Mat stg_attention(const AttentionParams& p, const Mat& q_src, const Mat& kv_src,
                  const Adjacency& adj, const StgAttentionOptions& options = {});

/// Value-level decoder tail (see decoder_block).
Mat decoder_block_values(const DecoderBlockParams& p, const Mat& attn_out, double layer_norm_eps);

struct InitScale {
  double weight = 0.0;  // 0 -> Xavier-uniform bound
};

LinearParams make_linear(int in, int out, RandomStream& rng, const std::string& name,
                         const InitScale& scale = {});
LayerNormParams make_layer_norm(int width, const std::string& name);
FeedForwardParams make_feed_forward(int width, int hidden, RandomStream& rng,
                                    const std::string& name);
AttentionParams make_attention(int width, int heads, RandomStream& rng, const std::string& name);
DecoderBlockParams make_decoder_block(int width, int hidden, int heads, RandomStream& rng,
                                      const std::string& name);

void collect_params(const LinearParams& p, std::vector<ad::Var>& out);
void collect_params(const LayerNormParams& p, std::vector<ad::Var>& out);
void collect_params(const FeedForwardParams& p, std::vector<ad::Var>& out);
void collect_params(const AttentionParams& p, std::vector<ad::Var>& out);
void collect_params(const DecoderBlockParams& p, std::vector<ad::Var>& out);

}  // namespace stgformer
