// stgformer: socio-temporal graph trajectory forecasting toolkit.
//
// Subcommands cover the whole pipeline: synth (scripted scenes), train,
// predict, eval, analyze, benchmark. Runs are driven by a JSON config
// (--config) with CLI overrides and are byte-reproducible given a seed.

#include "stgformer/analysis.hpp"
#include "stgformer/config.hpp"
#include "stgformer/eval.hpp"
#include "stgformer/predict.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace stgformer;

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  bool deterministic = false;
  std::string ablation;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_config = true) {
  if (with_config) cmd->add_option("--config", args.config_path, "JSON run config");
  cmd->add_option("--seed", args.seed, "Override the run seed");
  cmd->add_option("--k", args.k, "Prediction samples per window");
  cmd->add_flag("--deterministic", args.deterministic, "Disable all sampling noise");
  cmd->add_option("--ablation", args.ablation,
                  "Comma-separated flags: no_social,no_learned_prior,stationary_g,"
                  "short_term_g,no_g,zeta_zero");
  cmd->add_option("--out", args.out, "Output directory");
}

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = load_run_config(args.config_path);
  if (const char* root = std::getenv("STGFORMER_DATA_ROOT")) cfg.dataset.root = root;
  if (args.seed) cfg.train.seed = *args.seed;
  if (args.k) cfg.k = *args.k;
  if (args.deterministic) cfg.deterministic = true;
  if (!args.ablation.empty()) apply_ablation(cfg.train.model.ablation, args.ablation);
  if (!args.out.empty()) cfg.out_dir = args.out;
  return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  return dir;
}

void stamp_config(const RunConfig& cfg, const fs::path& dir) {
  std::ofstream os(dir / "run_config.json");
  os << run_config_to_json(cfg).dump(2) << '\n';
}

std::vector<TrajectoryWindow> load_dataset(const RunConfig& cfg, const std::string& data_arg) {
  LoadOptions lo;
  lo.frame_step = cfg.dataset.frame_step;
  lo.pedestrians_only = cfg.dataset.pedestrians_only;
  WindowOptions wo;
  wo.pixels_per_unit = cfg.dataset.pixels_per_unit;

  const fs::path root = data_arg.empty() ? fs::path(cfg.dataset.root) : fs::path(data_arg);
  std::vector<fs::path> files;
  if (fs::is_directory(root)) {
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(root)) {
    files.push_back(root);
  } else {
    throw IoError("dataset path not found: " + root.string());
  }
  if (files.empty()) throw IoError("no scene files (*.txt) under " + root.string());

  std::vector<TrajectoryWindow> windows;
  for (const auto& f : files) {
    auto w = make_windows(load_scene(f, cfg.format(), lo), cfg.dataset.stride, wo);
    windows.insert(windows.end(), w.begin(), w.end());
  }
  if (windows.empty()) throw Error("dataset produced no complete 20-frame windows");
  return windows;
}

int cmd_synth(const CommonArgs& common, const ScenarioSpec& spec, int count) {
  RunConfig cfg = resolve_config(common);
  const fs::path dir = prepare_out_dir(cfg);
  for (int i = 0; i < count; ++i) {
    Scene scene = synth_scenario(spec, RandomStream::substream(cfg.train.seed, i));
    std::ostringstream name;
    name << spec.name << '_' << std::setw(3) << std::setfill('0') << i << ".txt";
    write_scene_ethucy(dir / name.str(), scene);
  }
  std::cout << "wrote " << count << " " << spec.name << " scene(s) to " << dir << '\n';
  return 0;
}

int cmd_train(const CommonArgs& common, const std::string& data_arg) {
  RunConfig cfg = resolve_config(common);
  const fs::path dir = prepare_out_dir(cfg);
  auto windows = load_dataset(cfg, data_arg);
  TrainResult result = train(windows, cfg.train);
  save_checkpoint(result.params, dir / "checkpoint.bin");
  write_metrics_jsonl(dir / "metrics.jsonl", result.log);
  stamp_config(cfg, dir);
  if (result.diverged)
    std::cerr << "training diverged at epoch " << result.diverged_epoch
              << "; checkpoint holds the last finished epoch\n";
  std::cout << "trained on " << windows.size() << " windows for " << result.log.size()
            << " epochs -> " << (dir / "checkpoint.bin") << '\n';
  return result.diverged ? 3 : 0;
}

int cmd_predict(const CommonArgs& common, const std::string& checkpoint,
                const std::string& data_arg) {
  RunConfig cfg = resolve_config(common);
  const fs::path dir = prepare_out_dir(cfg);
  ModelParams params = load_checkpoint(checkpoint);
  auto windows = load_dataset(cfg, data_arg);

  PredictOptions po;
  po.k = cfg.k;
  po.deterministic = cfg.deterministic;
  po.share_warmup = cfg.share_warmup;

  std::ofstream pred_os(dir / "predictions.csv");
  std::ofstream gt_os(dir / "ground_truth.csv");
  std::ofstream adj_os(dir / "graphs.csv");
  std::vector<AdjacencyRecord> records;
  for (size_t w = 0; w < windows.size(); ++w) {
    PredictionSet pred =
        predict_window(windows[w], params, po, RandomStream::substream(cfg.train.seed, w));
    write_predictions_csv(pred_os, static_cast<long>(w), windows[w], pred, w == 0);
    write_ground_truth_csv(gt_os, static_cast<long>(w), windows[w], w == 0);
    for (int s = 0; s < pred.k; ++s)
      for (const auto& adj : pred.graphs[s])
        records.push_back({static_cast<long>(w), s, adj});
  }
  write_adjacency_csv(adj_os, records);
  stamp_config(cfg, dir);
  std::cout << "predicted " << windows.size() << " windows x " << cfg.k << " samples -> " << dir
            << '\n';
  return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& pred_path, const std::string& gt_path,
             bool joint_scene) {
  RunConfig cfg = resolve_config(common);
  const fs::path dir = prepare_out_dir(cfg);
  std::ifstream pred_is(pred_path);
  if (!pred_is) throw IoError("cannot open " + pred_path);
  std::ifstream gt_is(gt_path);
  if (!gt_is) throw IoError("cannot open " + gt_path);
  AdeFdeOptions opts;
  opts.joint_scene = joint_scene;
  MetricReport report =
      evaluate_dumps(read_predictions_csv(pred_is), read_ground_truth_csv(gt_is), opts);
  report.config_hash = cfg.hash();
  std::ofstream os(dir / "report.json");
  write_metric_report(os, report);
  std::cout << render_table(report);
  return 0;
}

int cmd_analyze(const CommonArgs& common, const std::string& graphs_path,
                const std::string& pred_path, double bin_width, bool latest_only) {
  RunConfig cfg = resolve_config(common);
  const fs::path dir = prepare_out_dir(cfg);
  std::ifstream adj_is(graphs_path);
  if (!adj_is) throw IoError("cannot open " + graphs_path);
  std::ifstream pred_is(pred_path);
  if (!pred_is) throw IoError("cannot open " + pred_path);
  const auto records = read_adjacency_csv(adj_is);
  const PredictionDump pred = read_predictions_csv(pred_is);
  const auto agg =
      latest_only ? PairAggregation::latest_source_step : PairAggregation::any_source_step;

  std::vector<EdgeEvent> events;
  std::vector<Adjacency> all_adj;
  std::vector<Mat> all_pos;
  for (const auto& w : pred.windows) {
    for (size_t s = 0; s < w.samples.size(); ++s) {
      std::vector<Adjacency> seq;
      for (const auto& rec : records)
        if (rec.window == w.id && rec.sample == static_cast<long>(s)) seq.push_back(rec.adj);
      if (seq.size() != w.samples[s].size())
        throw ShapeError("window " + std::to_string(w.id) + " sample " + std::to_string(s) +
                         ": " + std::to_string(seq.size()) + " graphs for " +
                         std::to_string(w.samples[s].size()) + " steps");
      auto ev = flip_events(seq, w.samples[s], w.first_step, agg, w.id, static_cast<long>(s));
      events.insert(events.end(), ev.begin(), ev.end());
      all_adj.insert(all_adj.end(), seq.begin(), seq.end());
      all_pos.insert(all_pos.end(), w.samples[s].begin(), w.samples[s].end());
    }
  }

  Histogram dist = distance_histogram(all_adj, all_pos, bin_width, agg);
  Histogram span = span_histogram(all_adj);
  FlipHistograms flips = flip_distance_histogram(events, bin_width);

  {
    std::ofstream os(dir / "edge_distance_histogram.csv");
    write_histogram_csv(os, dist, "active_edge_distance");
  }
  {
    std::ofstream os(dir / "edge_span_histogram.csv");
    write_histogram_csv(os, span, "active_edge_span");
  }
  {
    std::ofstream os(dir / "flip_distance_histogram.csv");
    os << "bin_lo,bin_hi,count,label\n";
    for (size_t b = 0; b < flips.zero_to_one.counts.size(); ++b)
      os << format_double(b * bin_width) << ',' << format_double((b + 1) * bin_width) << ','
         << flips.zero_to_one.counts[b] << ",flip_0_to_1\n";
    for (size_t b = 0; b < flips.one_to_zero.counts.size(); ++b)
      os << format_double(b * bin_width) << ',' << format_double((b + 1) * bin_width) << ','
         << flips.one_to_zero.counts[b] << ",flip_1_to_0\n";
  }
  write_histogram_svg(dir / "edge_distance_histogram.svg", dist, "active edges by distance");
  write_histogram_svg(dir / "edge_span_histogram.svg", span, "active edges by time span");
  write_flip_histograms_svg(dir / "flip_distance_histogram.svg", flips, "flip events by distance");

  const auto samples = edge_distance_samples(all_adj, all_pos, agg);
  std::vector<double> ds, act;
  for (const auto& s : samples) {
    ds.push_back(s.distance);
    act.push_back(s.active);
  }
  const SpearmanResult rho = spearman(ds, act);
  std::cout << events.size() << " flip events, " << dist.total
            << " active edge observations; activation-vs-distance spearman rho="
            << format_double(rho.rho) << " (one-sided p=" << format_double(rho.p_one_sided_negative)
            << ")\n";
  return 0;
}

int cmd_benchmark(const CommonArgs& common, const std::string& protocol_name) {
  RunConfig cfg = resolve_config(common);
  const fs::path dir = prepare_out_dir(cfg);
  Protocol protocol;
  if (protocol_name == "leave_one_scene_out") protocol = Protocol::leave_one_scene_out;
  else if (protocol_name == "single_split") protocol = Protocol::single_split;
  else throw ConfigError({"protocol must be leave_one_scene_out or single_split"});

  MetricReport report = benchmark(cfg.dataset.root, protocol, cfg);
  std::ofstream os(dir / "report.json");
  write_metric_report(os, report);
  stamp_config(cfg, dir);
  std::cout << render_table(report);

  const fs::path reference = fs::path(STGFORMER_DATA_DIR) / "reference_scores.json";
  if (fs::exists(reference)) {
    std::ifstream ris(reference);
    nlohmann::json ref;
    ris >> ref;
    std::cout << "\nreference full-scale best-of-20 scores (for deltas):\n";
    for (const auto& [name, v] : ref.items())
      std::cout << "  " << name << ": " << v.at("ade").get<double>() << "/"
                << v.at("fde").get<double>() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Socio-temporal graph trajectory forecasting"};
  app.require_subcommand(1);

  CommonArgs common;
  ScenarioSpec spec;
  int synth_count = 1;
  std::string data_arg, checkpoint, pred_path, gt_path, protocol = "leave_one_scene_out";
  bool joint_scene = false, latest_only = false;
  double bin_width = 5.0;

  CLI::App* synth = app.add_subcommand("synth", "Generate scripted scenes");
  add_common(synth, common);
  synth->add_option("--scenario", spec.name, "crossing|approach_diverge|parallel|random_walk")
      ->required();
  synth->add_option("--agents", spec.agents, "Agent count");
  synth->add_option("--frames", spec.frames, "Frames per scene");
  synth->add_option("--speed", spec.speed, "Speed in units per frame");
  synth->add_option("--noise", spec.noise, "Per-coordinate noise sigma");
  synth->add_option("--radius", spec.radius, "approach_diverge: closest distance");
  synth->add_option("--meet-frame", spec.meet_frame, "approach_diverge: closest frame");
  synth->add_option("--count", synth_count, "Scenes to generate");

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", data_arg, "Scene file or directory (default: config root)");

  CLI::App* predict_cmd = app.add_subcommand("predict", "Roll out predictions");
  add_common(predict_cmd, common);
  predict_cmd->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  predict_cmd->add_option("--data", data_arg, "Scene file or directory");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a prediction dump");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--pred", pred_path, "predictions.csv")->required();
  eval_cmd->add_option("--gt", gt_path, "ground_truth.csv")->required();
  eval_cmd->add_flag("--joint-scene", joint_scene, "Best-of-K jointly per scene");

  CLI::App* analyze_cmd = app.add_subcommand("analyze", "Learned-graph statistics");
  add_common(analyze_cmd, common);
  std::string graphs_path;
  analyze_cmd->add_option("--graphs", graphs_path, "graphs.csv")->required();
  analyze_cmd->add_option("--pred", pred_path, "predictions.csv")->required();
  analyze_cmd->add_option("--bin-width", bin_width, "Histogram bin width");
  analyze_cmd->add_flag("--latest-only", latest_only,
                        "Aggregate pair edges from the latest source step only");

  CLI::App* bench_cmd = app.add_subcommand("benchmark", "Train/test rotation harness");
  add_common(bench_cmd, common);
  bench_cmd->add_option("--protocol", protocol, "leave_one_scene_out|single_split");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(common, spec, synth_count);
    if (*train_cmd) return cmd_train(common, data_arg);
    if (*predict_cmd) return cmd_predict(common, checkpoint, data_arg);
    if (*eval_cmd) return cmd_eval(common, pred_path, gt_path, joint_scene);
    if (*analyze_cmd) return cmd_analyze(common, graphs_path, pred_path, bin_width, latest_only);
    if (*bench_cmd) return cmd_benchmark(common, protocol);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 4;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return 5;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 6;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
