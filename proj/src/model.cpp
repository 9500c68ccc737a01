#include "stgformer/model.hpp"

#include <cmath>
#include <sstream>

namespace stgformer {

namespace {

/// Project a token block and add the learned positional row for `step`.
ad::Var token_block(const LinearParams& proj, const ad::Var& pos, const ad::Var& x, int step) {
  return ad::add_row(linear(proj, x), ad::rows(pos, step, 1));
}

/// Tokens of one stacked embedding: dest rows carry the step they belong to,
/// src rows the step of the source they represent.
std::vector<ad::Var> embedding_tokens(const LinearParams& proj, const ad::Var& pos,
                                      const EmbeddingVars& g) {
  const int n = g.agents();
  std::vector<ad::Var> blocks;
  blocks.push_back(token_block(proj, pos, g.dest, g.t));
  for (int tau = 0; tau < g.t; ++tau)
    blocks.push_back(token_block(proj, pos, ad::rows(g.src, tau * n, n), tau));
  return blocks;
}

/// Apply a decoder stack: the first block attends queries over keys/values,
/// later blocks self-attend over the running output (the first block's
/// outcomes supply their queries, keys and values).
ad::Var run_stack(const DecoderStack& stack, const ModelConfig& cfg, const ad::Var& queries,
                  const ad::Var& kv, const AttentionContext& first_ctx,
                  const AttentionContext& self_ctx) {
  ad::Var a;
  for (size_t b = 0; b < stack.blocks.size(); ++b) {
    const bool first = b == 0;
    const ad::Var& q = first ? queries : a;
    const ad::Var& k = first ? kv : a;
    ad::Var attn = multi_head_attention(stack.blocks[b].attn, q, k, first ? first_ctx : self_ctx);
    a = decoder_block(stack.blocks[b], attn, cfg.layer_norm_eps);
  }
  return linear(stack.head, a);
}

double logit_scale(const ModelConfig& cfg, Eigen::Index key_rows) {
  if (cfg.scale_by_head_dim) return std::sqrt(double(cfg.w) / cfg.heads);
  return std::sqrt(double(std::max<Eigen::Index>(key_rows, 1)));
}

void check_step_budget(const ModelConfig& cfg, int t) {
  if (t >= cfg.max_steps)
    throw Error("step " + std::to_string(t) + " exceeds the configured horizon of " +
                std::to_string(cfg.max_steps) + " steps");
}

Mat sample_around(const Mat& mean, RandomStream& rng, bool deterministic) {
  if (deterministic) return mean;
  return mean + rng.normal_matrix(mean.rows(), mean.cols());
}

}  // namespace

std::string AblationFlags::tag() const {
  std::string s;
  auto append = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += name;
  };
  append(no_social, "no_social");
  append(no_learned_prior, "no_learned_prior");
  append(stationary_g, "stationary_g");
  append(short_term_g, "short_term_g");
  append(no_g, "no_g");
  append(zeta_zero, "zeta_zero");
  return s.empty() ? "none" : s;
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "d=" << d << ";w=" << w << ";heads=" << heads << ";ff=" << ff
     << ";traj_blocks=" << traj_blocks << ";graph_blocks=" << graph_blocks
     << ";max_steps=" << max_steps << ";ln_eps=" << format_double(layer_norm_eps)
     << ";ste_temp=" << format_double(ste_temperature)
     << ";scale_by_head_dim=" << scale_by_head_dim << ";ablation=" << ablation.tag();
  return os.str();
}

void ModelConfig::validate() const {
  std::vector<std::string> bad;
  if (d < 1) bad.push_back("model.d must be >= 1");
  if (w < 1) bad.push_back("model.w must be >= 1");
  if (heads < 1 || w % heads != 0) bad.push_back("model.w must be divisible by model.heads");
  if (ff < 1) bad.push_back("model.ff must be >= 1");
  if (traj_blocks < 1) bad.push_back("model.traj_blocks must be >= 1");
  if (graph_blocks < 1) bad.push_back("model.graph_blocks must be >= 1");
  if (max_steps < 2) bad.push_back("model.max_steps must be >= 2");
  if (layer_norm_eps <= 0) bad.push_back("model.layer_norm_eps must be positive");
  if (ste_temperature <= 0) bad.push_back("model.ste_temperature must be positive");
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

std::vector<ad::Var> ModelParams::trainable() const {
  std::vector<ad::Var> out;
  collect_params(trajectory.in_proj, out);
  out.push_back(trajectory.pos);
  for (const auto& b : trajectory.stack.blocks) collect_params(b, out);
  collect_params(trajectory.stack.head, out);
  if (!config.ablation.no_g) {
    if (!config.ablation.no_learned_prior) {
      collect_params(prior.in_proj, out);
      out.push_back(prior.pos);
      for (const auto& b : prior.stack.blocks) collect_params(b, out);
      collect_params(prior.stack.head, out);
    }
    collect_params(posterior.x_proj, out);
    collect_params(posterior.g_proj, out);
    out.push_back(posterior.pos);
    for (const auto& b : posterior.stack.blocks) collect_params(b, out);
    collect_params(posterior.stack.head, out);
    out.push_back(posterior.start_token);
  }
  return out;
}

std::vector<ad::Var> ModelParams::all() const {
  std::vector<ad::Var> out;
  collect_params(trajectory.in_proj, out);
  out.push_back(trajectory.pos);
  for (const auto& b : trajectory.stack.blocks) collect_params(b, out);
  collect_params(trajectory.stack.head, out);
  collect_params(trajectory.out_map, out);
  collect_params(prior.in_proj, out);
  out.push_back(prior.pos);
  for (const auto& b : prior.stack.blocks) collect_params(b, out);
  collect_params(prior.stack.head, out);
  collect_params(posterior.x_proj, out);
  collect_params(posterior.g_proj, out);
  out.push_back(posterior.pos);
  for (const auto& b : posterior.stack.blocks) collect_params(b, out);
  collect_params(posterior.stack.head, out);
  out.push_back(posterior.start_token);
  return out;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  RandomStream rng(seed);
  ModelParams p;
  p.config = config;

  p.trajectory.in_proj = make_linear(2, config.w, rng, "trajectory.in_proj");
  p.trajectory.pos =
      ad::parameter(0.02 * rng.normal_matrix(config.max_steps, config.w), "trajectory.pos");
  for (int b = 0; b < config.traj_blocks; ++b)
    p.trajectory.stack.blocks.push_back(make_decoder_block(
        config.w, config.ff, config.heads, rng, "trajectory.block" + std::to_string(b)));
  p.trajectory.stack.head = make_linear(config.w, 2, rng, "trajectory.head");
  p.trajectory.out_map.weight = ad::parameter(Mat::Identity(2, 2), "trajectory.out_map.weight");
  p.trajectory.out_map.bias = ad::parameter(Mat::Zero(1, 2), "trajectory.out_map.bias");

  p.prior.in_proj = make_linear(config.d, config.w, rng, "prior.in_proj");
  p.prior.pos = ad::parameter(0.02 * rng.normal_matrix(config.max_steps, config.w), "prior.pos");
  for (int b = 0; b < config.graph_blocks; ++b)
    p.prior.stack.blocks.push_back(make_decoder_block(config.w, config.ff, config.heads, rng,
                                                      "prior.block" + std::to_string(b)));
  p.prior.stack.head = make_linear(config.w, config.d, rng, "prior.head");

  p.posterior.x_proj = make_linear(2, config.w, rng, "posterior.x_proj");
  p.posterior.g_proj = make_linear(config.d, config.w, rng, "posterior.g_proj");
  p.posterior.pos =
      ad::parameter(0.02 * rng.normal_matrix(config.max_steps, config.w), "posterior.pos");
  for (int b = 0; b < config.graph_blocks; ++b)
    p.posterior.stack.blocks.push_back(make_decoder_block(
        config.w, config.ff, config.heads, rng, "posterior.block" + std::to_string(b)));
  p.posterior.stack.head = make_linear(config.w, config.d, rng, "posterior.head");
  p.posterior.start_token = ad::parameter(rng.normal_matrix(1, config.d), "posterior.start");
  return p;
}

EmbeddingVars to_vars(const GraphEmbedding& e) {
  EmbeddingVars v;
  v.t = e.t;
  v.dest = ad::constant(e.dest);
  v.src = ad::constant(e.src);
  return v;
}

GraphEmbedding to_embedding(const EmbeddingVars& v, Provenance provenance) {
  GraphEmbedding e;
  e.t = v.t;
  e.dest = v.dest->value;
  e.src = v.src->value;
  e.provenance = provenance;
  return e;
}

EmbeddingVars prior_mean(const ModelParams& params, const std::vector<EmbeddingVars>& history) {
  const ModelConfig& cfg = params.config;
  const int t = static_cast<int>(history.size());
  if (t < 1) throw Error("prior needs at least the step-0 embedding");
  check_step_budget(cfg, t);
  const int n = history.front().agents();

  std::vector<ad::Var> kv_blocks;
  for (const auto& g : history) {
    auto blocks = embedding_tokens(params.prior.in_proj, params.prior.pos, g);
    kv_blocks.insert(kv_blocks.end(), blocks.begin(), blocks.end());
  }
  ad::Var kv = ad::vstack(kv_blocks);

  // Queries: the step t-1 embedding padded with n zero rows. Row k of the
  // query stack produces row k of [dest^t; src^t]; the zero rows are the
  // slots for the sources the new step introduces.
  const EmbeddingVars& last = history.back();
  std::vector<ad::Var> q_blocks;
  q_blocks.push_back(token_block(params.prior.in_proj, params.prior.pos, last.dest, t));
  for (int tau = 0; tau < last.t; ++tau)
    q_blocks.push_back(token_block(params.prior.in_proj, params.prior.pos,
                                   ad::rows(last.src, tau * n, n), tau));
  q_blocks.push_back(token_block(params.prior.in_proj, params.prior.pos,
                                 ad::constant(Mat::Zero(n, cfg.d)), t - 1));
  ad::Var q = ad::vstack(q_blocks);

  AttentionContext first_ctx{nullptr, std::nullopt, logit_scale(cfg, kv->rows())};
  AttentionContext self_ctx{nullptr, std::nullopt, logit_scale(cfg, q->rows())};
  ad::Var mu = run_stack(params.prior.stack, cfg, q, kv, first_ctx, self_ctx);

  EmbeddingVars out;
  out.t = t;
  out.dest = ad::rows(mu, 0, n);
  out.src = ad::rows(mu, n, static_cast<Eigen::Index>(n) * t);
  return out;
}

EmbeddingVars posterior_mean(const ModelParams& params, const std::vector<ad::Var>& x_hist,
                             const std::vector<EmbeddingVars>& g_hist) {
  const ModelConfig& cfg = params.config;
  if (x_hist.empty()) throw Error("posterior needs x^0");
  const int t = static_cast<int>(x_hist.size()) - 1;
  if (static_cast<int>(g_hist.size()) != t)
    throw ShapeError("posterior: got " + std::to_string(g_hist.size()) +
                     " embeddings for x history through step " + std::to_string(t));
  check_step_budget(cfg, t);
  const int n = static_cast<int>(x_hist.front()->rows());

  ad::Var kv;
  if (t == 0) {
    kv = token_block(params.posterior.g_proj, params.posterior.pos, params.posterior.start_token,
                     0);
  } else {
    std::vector<ad::Var> kv_blocks;
    for (const auto& g : g_hist) {
      auto blocks = embedding_tokens(params.posterior.g_proj, params.posterior.pos, g);
      kv_blocks.insert(kv_blocks.end(), blocks.begin(), blocks.end());
    }
    kv = ad::vstack(kv_blocks);
  }

  // Queries are the positions x^{0:t}, time-major, so rows [0, n*t) of the
  // output are src^t and the last n rows (queried by x^t) are dest^t.
  std::vector<ad::Var> q_blocks;
  for (int tau = 0; tau <= t; ++tau)
    q_blocks.push_back(token_block(params.posterior.x_proj, params.posterior.pos, x_hist[tau], tau));
  ad::Var q = ad::vstack(q_blocks);

  AttentionContext first_ctx{nullptr, std::nullopt, logit_scale(cfg, kv->rows())};
  AttentionContext self_ctx{nullptr, std::nullopt, logit_scale(cfg, q->rows())};
  ad::Var mu = run_stack(params.posterior.stack, cfg, q, kv, first_ctx, self_ctx);

  EmbeddingVars out;
  out.t = t;
  out.src = ad::rows(mu, 0, static_cast<Eigen::Index>(n) * t);
  out.dest = ad::rows(mu, static_cast<Eigen::Index>(n) * t, n);
  return out;
}

StepGates make_step_gates(const ModelParams& params, const EmbeddingVars& g,
                          bool straight_through) {
  const ModelConfig& cfg = params.config;
  const int n = g.agents();
  StepGates gates;
  if (cfg.ablation.no_g) {
    gates.effective = full_adjacency(n, g.t);
    return gates;
  }
  if (g.t == 0) {
    gates.effective.n = n;
    gates.effective.t = 0;
    gates.effective.bits.resize(n, 0);
    return gates;
  }
  gates.dots = ad::matmul(g.dest, ad::transpose(g.src));
  gates.gate = ad::ste_gate(gates.dots, cfg.ste_temperature, straight_through);

  Mat restrict = Mat::Ones(n, static_cast<Eigen::Index>(n) * g.t);
  bool restricted = false;
  if (cfg.ablation.short_term_g && g.t > 1) {
    restrict.leftCols(static_cast<Eigen::Index>(n) * (g.t - 1)).setZero();
    restricted = true;
  }
  if (cfg.ablation.no_social) {
    for (int i = 0; i < n; ++i)
      for (int tau = 0; tau < g.t; ++tau)
        for (int j = 0; j < n; ++j)
          if (j != i) restrict(i, Adjacency::column(j, tau, n)) = 0.0;
    restricted = true;
  }
  if (restricted) gates.gate = ad::mask(gates.gate, restrict);

  ad::Var soft = ad::sigmoid(gates.dots, cfg.ste_temperature);
  if (restricted) soft = ad::mask(soft, restrict);
  gates.soft_mass = ad::sum(soft);

  gates.effective.n = n;
  gates.effective.t = g.t;
  gates.effective.bits = gates.gate->value.cast<std::uint8_t>();
  return gates;
}

ad::Var trajectory_mean(const ModelParams& params, const std::vector<ad::Var>& x_hist,
                        const StepGates& gates) {
  const ModelConfig& cfg = params.config;
  const int t = static_cast<int>(x_hist.size());
  if (t < 1) throw Error("trajectory module needs at least one observed step");
  check_step_budget(cfg, t);
  const int n = static_cast<int>(x_hist.front()->rows());
  if (gates.effective.t != 0 &&
      (gates.effective.n != n || gates.effective.t != t))
    throw ShapeError("trajectory: adjacency for step " + std::to_string(gates.effective.t) +
                     " used at step " + std::to_string(t));

  std::vector<ad::Var> kv_blocks;
  for (int tau = 0; tau < t; ++tau)
    kv_blocks.push_back(
        token_block(params.trajectory.in_proj, params.trajectory.pos, x_hist[tau], tau));
  ad::Var kv = ad::vstack(kv_blocks);
  ad::Var q = token_block(params.trajectory.in_proj, params.trajectory.pos, x_hist[t - 1], t);

  AttentionContext first_ctx;
  first_ctx.gate = gates.gate;
  first_ctx.fallback = own_history_fallback(n, t);
  first_ctx.scale = logit_scale(cfg, kv->rows());

  // Pair-collapsed gate for the self-attending blocks: agent i may see agent
  // j's block-1 outcome iff any source step of j feeds i, self always
  // allowed. Collapsing is on the hard bits, so the straight-through path
  // stays with the first block.
  AttentionContext self_ctx;
  self_ctx.scale = logit_scale(cfg, n);
  if (gates.gate) {
    Mat pair = Mat::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        for (int tau = 0; tau < gates.effective.t; ++tau)
          if (gates.effective.at(i, j, tau)) {
            pair(i, j) = 1.0;
            break;
          }
      }
    self_ctx.gate = ad::constant(pair);
  }

  ad::Var a;
  for (int b = 0; b < cfg.traj_blocks; ++b) {
    const bool first = b == 0;
    ad::Var attn = multi_head_attention(params.trajectory.stack.blocks[b].attn, first ? q : a,
                                        first ? kv : a, first ? first_ctx : self_ctx);
    a = decoder_block(params.trajectory.stack.blocks[b], attn, cfg.layer_norm_eps);
  }
  return linear(params.trajectory.stack.head, a);
}

GraphEmbedding init_g0(const ModelParams& params, int n, RandomStream& rng, bool deterministic) {
  GraphEmbedding g;
  g.t = 0;
  g.dest = deterministic ? Mat::Zero(n, params.config.d)
                         : rng.normal_matrix(n, params.config.d);
  g.src.resize(0, params.config.d);
  g.provenance = Provenance::prior;
  return g;
}

GraphEmbedding prior_step(const ModelParams& params, const std::vector<GraphEmbedding>& history,
                          RandomStream& rng, bool deterministic) {
  const int t = static_cast<int>(history.size());
  if (t < 1) throw Error("prior_step: empty history; use init_g0 for step 0");
  check_step_budget(params.config, t);
  const int n = history.front().agents();
  for (int tau = 0; tau < t; ++tau) {
    history[tau].validate();
    if (history[tau].t != tau) throw ShapeError("prior_step: history steps must be contiguous");
  }

  Mat mean_dest, mean_src;
  if (params.config.ablation.no_learned_prior) {
    mean_dest = Mat::Zero(n, params.config.d);
    mean_src = Mat::Zero(static_cast<Eigen::Index>(n) * t, params.config.d);
  } else {
    std::vector<EmbeddingVars> hist_vars;
    for (const auto& g : history) hist_vars.push_back(to_vars(g));
    EmbeddingVars mu = prior_mean(params, hist_vars);
    mean_dest = mu.dest->value;
    mean_src = mu.src->value;
  }

  GraphEmbedding out;
  out.t = t;
  out.dest = sample_around(mean_dest, rng, deterministic);
  out.src = sample_around(mean_src, rng, deterministic);
  out.provenance = Provenance::prior;
  return out;
}

GraphEmbedding posterior_step(const ModelParams& params, const std::vector<Mat>& x_hist,
                              const std::vector<GraphEmbedding>& g_hist, RandomStream& rng,
                              bool deterministic) {
  if (x_hist.empty()) throw ShapeError("posterior_step: x history is empty");
  const int t = static_cast<int>(x_hist.size()) - 1;
  if (static_cast<int>(g_hist.size()) != t)
    throw ShapeError("posterior_step: x history through step " + std::to_string(t) + " needs " +
                     std::to_string(t) + " embeddings, got " + std::to_string(g_hist.size()));

  std::vector<ad::Var> x_vars;
  for (const auto& x : x_hist) x_vars.push_back(ad::constant(x));
  std::vector<EmbeddingVars> g_vars;
  for (const auto& g : g_hist) g_vars.push_back(to_vars(g));
  EmbeddingVars mu = posterior_mean(params, x_vars, g_vars);

  GraphEmbedding out;
  out.t = t;
  out.dest = sample_around(mu.dest->value, rng, deterministic);
  out.src = sample_around(mu.src->value, rng, deterministic);
  out.provenance = Provenance::posterior;
  return out;
}

TrajectoryStepResult trajectory_step(const ModelParams& params, const std::vector<Mat>& x_hist,
                                     const GraphEmbedding& g_t, RandomStream& rng,
                                     bool deterministic) {
  const int t = static_cast<int>(x_hist.size());
  if (t < 1) throw Error("trajectory_step: needs at least one observed step");
  if (g_t.t != t)
    throw ShapeError("trajectory_step: embedding is for step " + std::to_string(g_t.t) +
                     ", history implies step " + std::to_string(t));

  StepGates gates = make_step_gates(params, to_vars(g_t), false);
  std::vector<ad::Var> x_vars;
  for (const auto& x : x_hist) x_vars.push_back(ad::constant(x));
  Mat mean = trajectory_mean(params, x_vars, gates)->value;

  Mat latent = sample_around(mean, rng, deterministic);
  TrajectoryStepResult out;
  out.mean = mean;
  out.next = (latent * params.trajectory.out_map.weight->value.transpose()).rowwise() +
             params.trajectory.out_map.bias->value.row(0);
  out.adjacency = gates.effective;
  return out;
}

}  // namespace stgformer
