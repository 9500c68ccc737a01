#include "stgformer/nn.hpp"

#include <cmath>

namespace stgformer {

ad::Var linear(const LinearParams& p, const ad::Var& x) {
  return ad::add_row(ad::matmul(x, ad::transpose(p.weight)), p.bias);
}

ad::Var multi_head_attention(const AttentionParams& p, const ad::Var& q_src,
                             const ad::Var& kv_src, const AttentionContext& ctx) {
  const int w = p.query.out();
  if (p.heads < 1 || w % p.heads != 0)
    throw ShapeError("attention: width " + std::to_string(w) + " not divisible by " +
                     std::to_string(p.heads) + " heads");
  if (ctx.gate && (ctx.gate->rows() != q_src->rows() || ctx.gate->cols() != kv_src->rows()))
    throw ShapeError("attention: gate must be queries x keys");
  const int hd = w / p.heads;
  ad::Var q = linear(p.query, q_src);
  ad::Var k = linear(p.key, kv_src);
  ad::Var v = linear(p.value, kv_src);
  std::vector<ad::Var> heads;
  heads.reserve(p.heads);
  for (int h = 0; h < p.heads; ++h) {
    // Column slice of a head via transpose+rows to keep the op set small.
    ad::Var qh = ad::transpose(ad::rows(ad::transpose(q), h * hd, hd));
    ad::Var kh = ad::transpose(ad::rows(ad::transpose(k), h * hd, hd));
    ad::Var vh = ad::transpose(ad::rows(ad::transpose(v), h * hd, hd));
    ad::Var logits = ad::scale(ad::matmul(qh, ad::transpose(kh)), 1.0 / ctx.scale);
    ad::Var probs =
        ad::masked_softmax(logits, ctx.gate, ctx.fallback ? &*ctx.fallback : nullptr);
    heads.push_back(ad::matmul(probs, vh));
  }
  ad::Var concat =
      heads.size() == 1 ? heads[0] : ad::transpose(ad::vstack([&] {
        std::vector<ad::Var> t;
        for (auto& h : heads) t.push_back(ad::transpose(h));
        return t;
      }()));
  return linear(p.output, concat);
}

ad::Var decoder_block(const DecoderBlockParams& p, const ad::Var& attn_out,
                      double layer_norm_eps) {
  ad::Var u = ad::layer_norm(attn_out, p.norm_attn.gain, p.norm_attn.bias, layer_norm_eps);
  ad::Var hidden = ad::relu(linear(p.ff.expand, u));
  ad::Var ffn = linear(p.ff.contract, hidden);
  return ad::layer_norm(ad::add(u, ffn), p.norm_ff.gain, p.norm_ff.bias, layer_norm_eps);
}

Mat own_history_fallback(int n, int t) {
  Mat fb = Mat::Zero(n, static_cast<Eigen::Index>(n) * t);
  if (t == 0) return fb;
  for (int i = 0; i < n; ++i)
    for (int tau = 0; tau < t; ++tau) fb(i, Adjacency::column(i, tau, n)) = 1.0 / t;
  return fb;
}

Mat stg_attention(const AttentionParams& p, const Mat& q_src, const Mat& kv_src,
                  const Adjacency& adj, const StgAttentionOptions& options) {
  const int n = static_cast<int>(q_src.rows());
  if (adj.t < 1) throw ShapeError("stg_attention: adjacency must cover at least one step");
  if (adj.n != n || adj.bits.cols() != kv_src.rows())
    throw ShapeError("stg_attention: adjacency is " + std::to_string(adj.n) + "x" +
                     std::to_string(adj.bits.cols()) + ", inputs are " + std::to_string(n) +
                     " queries over " + std::to_string(kv_src.rows()) + " keys");
  AttentionContext ctx;
  ctx.gate = ad::constant(adj.bits.cast<double>());
  ctx.fallback = own_history_fallback(adj.n, adj.t);
  ctx.scale = options.scale_by_head_dim ? std::sqrt(double(p.query.out()) / p.heads)
                                        : std::sqrt(double(kv_src.rows()));
  return multi_head_attention(p, ad::constant(q_src), ad::constant(kv_src), ctx)->value;
}

Mat decoder_block_values(const DecoderBlockParams& p, const Mat& attn_out, double layer_norm_eps) {
  return decoder_block(p, ad::constant(attn_out), layer_norm_eps)->value;
}

LinearParams make_linear(int in, int out, RandomStream& rng, const std::string& name,
                         const InitScale& scale) {
  const double bound = scale.weight > 0.0 ? scale.weight : std::sqrt(6.0 / (in + out));
  Mat w(out, in);
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) w(r, c) = bound * (2.0 * rng.uniform() - 1.0);
  LinearParams p;
  p.weight = ad::parameter(std::move(w), name + ".weight");
  p.bias = ad::parameter(Mat::Zero(1, out), name + ".bias");
  return p;
}

LayerNormParams make_layer_norm(int width, const std::string& name) {
  LayerNormParams p;
  p.gain = ad::parameter(Mat::Ones(1, width), name + ".gain");
  p.bias = ad::parameter(Mat::Zero(1, width), name + ".bias");
  return p;
}

FeedForwardParams make_feed_forward(int width, int hidden, RandomStream& rng,
                                    const std::string& name) {
  FeedForwardParams p;
  p.expand = make_linear(width, hidden, rng, name + ".expand");
  p.contract = make_linear(hidden, width, rng, name + ".contract");
  return p;
}

AttentionParams make_attention(int width, int heads, RandomStream& rng, const std::string& name) {
  AttentionParams p;
  p.query = make_linear(width, width, rng, name + ".query");
  p.key = make_linear(width, width, rng, name + ".key");
  p.value = make_linear(width, width, rng, name + ".value");
  p.output = make_linear(width, width, rng, name + ".output");
  p.heads = heads;
  return p;
}

DecoderBlockParams make_decoder_block(int width, int hidden, int heads, RandomStream& rng,
                                      const std::string& name) {
  DecoderBlockParams p;
  p.attn = make_attention(width, heads, rng, name + ".attn");
  p.norm_attn = make_layer_norm(width, name + ".norm_attn");
  p.norm_ff = make_layer_norm(width, name + ".norm_ff");
  p.ff = make_feed_forward(width, hidden, rng, name + ".ff");
  return p;
}

void collect_params(const LinearParams& p, std::vector<ad::Var>& out) {
  out.push_back(p.weight);
  out.push_back(p.bias);
}
void collect_params(const LayerNormParams& p, std::vector<ad::Var>& out) {
  out.push_back(p.gain);
  out.push_back(p.bias);
}
void collect_params(const FeedForwardParams& p, std::vector<ad::Var>& out) {
  collect_params(p.expand, out);
  collect_params(p.contract, out);
}
void collect_params(const AttentionParams& p, std::vector<ad::Var>& out) {
  collect_params(p.query, out);
  collect_params(p.key, out);
  collect_params(p.value, out);
  collect_params(p.output, out);
}
void collect_params(const DecoderBlockParams& p, std::vector<ad::Var>& out) {
  collect_params(p.attn, out);
  collect_params(p.norm_attn, out);
  collect_params(p.norm_ff, out);
  collect_params(p.ff, out);
}

}  // namespace stgformer
