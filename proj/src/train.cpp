#include "stgformer/train.hpp"

#include "stgformer/config.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace stgformer {

namespace {

void check_finite(double v, const char* term, int step) {
  if (!std::isfinite(v))
    throw DivergenceError(std::string(term) + " is not finite at step " + std::to_string(step));
}

ad::Var accumulate(ad::Var acc, const ad::Var& term) {
  return acc ? ad::add(acc, term) : term;
}

std::vector<Mat> snapshot_values(const ModelParams& params) {
  std::vector<Mat> vals;
  for (const auto& p : params.all()) vals.push_back(p->value);
  return vals;
}

void restore_values(ModelParams& params, const std::vector<Mat>& vals) {
  auto ps = params.all();
  for (size_t i = 0; i < ps.size(); ++i) ps[i]->value = vals[i];
}

}  // namespace

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os << model.canonical() << ";lr=" << format_double(lr) << ";wd=" << format_double(weight_decay)
     << ";beta1=" << format_double(beta1) << ";beta2=" << format_double(beta2)
     << ";adam_eps=" << format_double(adam_eps) << ";kl_clip=" << format_double(kl_clip)
     << ";zeta=" << format_double(zeta) << ";grad_clip=" << format_double(grad_clip)
     << ";epochs=" << epochs << ";samples=" << samples_per_step << ";seed=" << seed
     << ";ste=" << straight_through;
  return os.str();
}

void TrainConfig::validate() const {
  model.validate();
  std::vector<std::string> bad;
  if (lr <= 0) bad.push_back("train.lr must be positive");
  if (weight_decay < 0) bad.push_back("train.weight_decay must be >= 0");
  if (beta1 < 0 || beta1 >= 1) bad.push_back("train.beta1 must be in [0, 1)");
  if (beta2 < 0 || beta2 >= 1) bad.push_back("train.beta2 must be in [0, 1)");
  if (kl_clip <= 0) bad.push_back("train.kl_clip must be positive");
  if (zeta < 0) bad.push_back("train.zeta must be >= 0");
  if (epochs < 1) bad.push_back("train.epochs must be >= 1");
  if (samples_per_step < 1) bad.push_back("train.samples_per_step must be >= 1");
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

SequenceLoss sequence_loss(const std::vector<Mat>& frames, const ModelParams& params,
                           const TrainConfig& cfg, RandomStream& rng) {
  const int T = static_cast<int>(frames.size());
  if (T < 2) throw Error("sequence_loss: need at least two frames");
  const int n = static_cast<int>(frames.front().rows());
  for (int t = 0; t < T; ++t) {
    if (frames[t].rows() != n || frames[t].cols() != 2)
      throw ShapeError("sequence_loss: frame " + std::to_string(t) + " is not " +
                       std::to_string(n) + "x2");
    if (!frames[t].allFinite())
      throw DivergenceError("input positions are not finite at step " + std::to_string(t));
  }
  const AblationFlags& ab = params.config.ablation;
  const int d = params.config.d;

  SequenceLoss out;
  auto& b = out.breakdown;
  b.mse_per_step.assign(T, 0.0);
  b.kl_preclip_per_step.assign(T, 0.0);
  b.kl_per_step.assign(T, 0.0);
  b.sparsity_per_step.assign(T, 0.0);

  std::vector<ad::Var> x_vars;
  for (const auto& f : frames) x_vars.push_back(ad::constant(f));

  ad::Var mse_acc, kl_acc, sp_acc;
  std::vector<EmbeddingVars> chain;  // posterior samples the pass conditions on

  for (int t = 0; t < T; ++t) {
    std::vector<EmbeddingVars> samples;
    if (!ab.no_g) {
      if (ab.stationary_g && t >= 2) {
        // Reuse the step-1 embedding: same destinations, the single source
        // block tiled over every past step.
        const EmbeddingVars& base = chain[1];
        EmbeddingVars tiled;
        tiled.t = t;
        tiled.dest = base.dest;
        tiled.src = ad::vstack(std::vector<ad::Var>(t, base.src));
        samples.push_back(tiled);
      } else {
        std::vector<ad::Var> x_prefix(x_vars.begin(), x_vars.begin() + t + 1);
        EmbeddingVars mu = posterior_mean(params, x_prefix, chain);

        ad::Var pre;
        if (t == 0 || ab.no_learned_prior) {
          // Prior is the standard normal here, so the KL mean gap is just
          // the posterior mean.
          pre = accumulate(ad::sum_squares(mu.dest), ad::sum_squares(mu.src));
        } else {
          EmbeddingVars pmu = prior_mean(params, chain);
          pre = ad::add(ad::sum_squares(ad::sub(mu.dest, pmu.dest)),
                        ad::sum_squares(ad::sub(mu.src, pmu.src)));
        }
        b.kl_preclip_per_step[t] = pre->value(0, 0);
        check_finite(b.kl_preclip_per_step[t], "l_kl", t);
        ad::Var clipped = ad::clip_max(pre, cfg.kl_clip);
        b.kl_per_step[t] = clipped->value(0, 0);
        kl_acc = accumulate(kl_acc, clipped);

        for (int s = 0; s < cfg.samples_per_step; ++s) {
          EmbeddingVars sample;
          sample.t = t;
          sample.dest = ad::add(mu.dest, ad::constant(rng.normal_matrix(n, d)));
          sample.src = t == 0 ? mu.src
                              : ad::add(mu.src, ad::constant(rng.normal_matrix(
                                                    static_cast<Eigen::Index>(n) * t, d)));
          samples.push_back(sample);
        }
        chain.push_back(samples.front());
      }
    } else {
      samples.emplace_back();  // placeholder; gates become all-ones below
    }

    const double inv_s = 1.0 / samples.size();
    ad::Var mse_t, sp_t;
    for (const auto& sample : samples) {
      StepGates gates;
      if (ab.no_g) {
        gates.effective = full_adjacency(n, t);
      } else {
        gates = make_step_gates(params, sample, cfg.straight_through);
      }
      b.hard_edges += edge_count(gates.effective);
      b.possible_edges += static_cast<long>(n) * n * t;
      if (gates.soft_mass) sp_t = accumulate(sp_t, gates.soft_mass);
      if (t >= 1) {
        std::vector<ad::Var> x_past(x_vars.begin(), x_vars.begin() + t);
        ad::Var mu_phi = trajectory_mean(params, x_past, gates);
        mse_t = accumulate(mse_t, ad::sum_squares(ad::sub(x_vars[t], mu_phi)));
      }
    }
    if (mse_t) {
      if (samples.size() > 1) mse_t = ad::scale(mse_t, inv_s);
      b.mse_per_step[t] = mse_t->value(0, 0);
      check_finite(b.mse_per_step[t], "l_mse", t);
      mse_acc = accumulate(mse_acc, mse_t);
    }
    if (sp_t) {
      if (samples.size() > 1) sp_t = ad::scale(sp_t, inv_s);
      b.sparsity_per_step[t] = sp_t->value(0, 0);
      check_finite(b.sparsity_per_step[t], "l_sparsity", t);
      sp_acc = accumulate(sp_acc, sp_t);
    }
  }

  ad::Var total = mse_acc;
  if (kl_acc) total = accumulate(total, kl_acc);
  const double zeta = cfg.effective_zeta();
  if (sp_acc && zeta > 0.0) total = accumulate(total, ad::scale(sp_acc, zeta));
  if (!total) throw Error("sequence_loss: empty objective");

  b.mse = mse_acc ? mse_acc->value(0, 0) : 0.0;
  if (kl_acc) {
    b.kl = kl_acc->value(0, 0);
    for (double v : b.kl_preclip_per_step) b.kl_preclip += v;
  }
  b.sparsity = sp_acc ? sp_acc->value(0, 0) : 0.0;
  b.total = b.mse + b.kl + zeta * b.sparsity;
  check_finite(b.total, "total", T - 1);
  out.total = total;
  out.mse = mse_acc;
  out.kl = kl_acc;
  out.sparsity = sp_acc;
  return out;
}

LossBreakdown window_loss(const TrajectoryWindow& window, const ModelParams& params,
                          const TrainConfig& cfg, RandomStream& rng) {
  return sequence_loss(window.all_frames(), params, cfg, rng).breakdown;
}

AdamW::AdamW(std::vector<ad::Var> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.adam_eps),
      weight_decay_(cfg.weight_decay),
      grad_clip_(cfg.grad_clip) {
  for (const auto& p : params_) {
    m_.push_back(Mat::Zero(p->rows(), p->cols()));
    v_.push_back(Mat::Zero(p->rows(), p->cols()));
  }
}

double AdamW::clip_gradients() {
  double sq = 0.0;
  for (const auto& p : params_)
    if (p->has_grad()) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (grad_clip_ > 0.0 && norm > grad_clip_) {
    const double s = grad_clip_ / norm;
    for (auto& p : params_)
      if (p->has_grad()) p->grad *= s;
  }
  return norm;
}

void AdamW::step(double lr) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, step_count_);
  const double bc2 = 1.0 - std::pow(beta2_, step_count_);
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const Mat grad = p->has_grad() ? p->grad : Mat::Zero(p->rows(), p->cols());
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const Mat update =
        ((m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + eps_)).matrix();
    p->value -= lr * (update + weight_decay_ * p->value);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

double cosine_lr(double lr, long step, long total_steps) {
  if (total_steps <= 0) return lr;
  const double frac = std::clamp(double(step) / double(total_steps), 0.0, 1.0);
  return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

TrainResult train(const std::vector<TrajectoryWindow>& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw Error("train: empty dataset");

  TrainResult result;
  result.params = init_params(cfg.model, cfg.seed);
  RandomStream rng(RandomStream::substream(cfg.seed, 1));
  AdamW opt(result.params.trainable(), cfg);

  const long total_steps = static_cast<long>(cfg.epochs) * static_cast<long>(dataset.size());
  std::vector<Mat> last_good = snapshot_values(result.params);
  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates on the window order, driven by the training stream.
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(rng.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
    EpochStats stats;
    stats.epoch = epoch;
    double density_sum = 0.0;
    try {
      for (size_t idx : order) {
        SequenceLoss loss = sequence_loss(dataset[idx].all_frames(), result.params, cfg, rng);
        ad::backward(loss.total);
        opt.clip_gradients();
        stats.lr = cosine_lr(cfg.lr, step, total_steps);
        opt.step(stats.lr);
        opt.zero_grad();
        ++step;
        stats.mse += loss.breakdown.mse;
        stats.kl += loss.breakdown.kl;
        stats.sparsity += loss.breakdown.sparsity;
        stats.total += loss.breakdown.total;
        density_sum += loss.breakdown.edge_density();
      }
    } catch (const DivergenceError&) {
      restore_values(result.params, last_good);
      result.diverged = true;
      result.diverged_epoch = epoch;
      break;
    }
    const double inv = 1.0 / double(dataset.size());
    stats.mse *= inv;
    stats.kl *= inv;
    stats.sparsity *= inv;
    stats.total *= inv;
    stats.edge_density = density_sum * inv;
    result.log.push_back(stats);
    last_good = snapshot_values(result.params);
  }
  return result;
}

void write_metrics_jsonl(std::ostream& os, const std::vector<EpochStats>& log) {
  for (const auto& e : log) {
    os << "{\"epoch\":" << e.epoch << ",\"l_mse\":" << format_double(e.mse)
       << ",\"l_kl\":" << format_double(e.kl) << ",\"l_sparsity\":" << format_double(e.sparsity)
       << ",\"total\":" << format_double(e.total)
       << ",\"edge_density\":" << format_double(e.edge_density)
       << ",\"lr\":" << format_double(e.lr) << "}\n";
  }
}

void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<EpochStats>& log) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  write_metrics_jsonl(os, log);
}

namespace {

constexpr char kMagic[4] = {'S', 'T', 'G', 'F'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw IoError("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, std::uint32_t cap = 1u << 20) {
  const auto len = read_raw<std::uint32_t>(is);
  if (len > cap) throw IoError("checkpoint: corrupt string length");
  std::string s(len, '\0');
  if (!is.read(s.data(), len)) throw IoError("checkpoint: truncated file");
  return s;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kMagic, 4);
  write_raw(os, kCheckpointVersion);
  write_raw<std::uint64_t>(os, params.config.hash());
  write_string(os, model_config_to_json(params.config).dump());
  const auto all = params.all();
  write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(all.size()));
  for (const auto& p : all) {
    write_string(os, p->name);
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(p->rows()));
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(p->cols()));
    for (Eigen::Index r = 0; r < p->rows(); ++r)
      for (Eigen::Index c = 0; c < p->cols(); ++c) write_raw<double>(os, p->value(r, c));
  }
  if (!os) throw IoError("checkpoint: write failed for " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("checkpoint: bad magic (corrupt or not a checkpoint)");
  const auto version = read_raw<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: version " + std::to_string(version) + " unsupported (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  const auto stored_hash = read_raw<std::uint64_t>(is);
  ModelConfig config = model_config_from_json_string(read_string(is));
  if (config.hash() != stored_hash) throw IoError("checkpoint: config hash mismatch");

  ModelParams params = init_params(config, 0);
  auto all = params.all();
  const auto count = read_raw<std::uint32_t>(is);
  if (count != all.size())
    throw IoError("checkpoint: expected " + std::to_string(all.size()) + " tensors, found " +
                  std::to_string(count));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(is);
    const auto rows = read_raw<std::uint32_t>(is);
    const auto cols = read_raw<std::uint32_t>(is);
    ad::Var target;
    for (const auto& p : all)
      if (p->name == name) {
        target = p;
        break;
      }
    if (!target) throw IoError("checkpoint: unknown tensor '" + name + "'");
    if (target->rows() != rows || target->cols() != cols)
      throw IoError("checkpoint: tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                    std::to_string(cols) + ", expected " + std::to_string(target->rows()) + "x" +
                    std::to_string(target->cols()));
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) target->value(r, c) = read_raw<double>(is);
  }
  return params;
}

ModelParams load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  ModelParams params = load_checkpoint(path);
  if (params.config.hash() != expected.hash())
    throw ConfigError({"checkpoint config mismatch: stored '" + params.config.canonical() +
                       "' vs expected '" + expected.canonical() + "'"});
  return params;
}

}  // namespace stgformer
