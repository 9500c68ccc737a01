#include "stgformer/eval.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace stgformer;
namespace fs = std::filesystem;

namespace {

std::vector<Mat> straight_line(int n, int steps, double speed) {
  std::vector<Mat> frames;
  for (int t = 0; t < steps; ++t) {
    Mat f(n, 2);
    for (int i = 0; i < n; ++i) f.row(i) << speed * t, double(i);
    frames.push_back(f);
  }
  return frames;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("perfect prediction scores zero") {
    auto gt = straight_line(2, 12, 1.0);
    Metrics m = ade_fde({gt}, gt);
    CHECK(m.ade == 0.0);
    CHECK(m.fde == 0.0);
  }

  TEST_CASE("constant offset of (1,0) scores ADE 1 and FDE 1") {
    auto gt = straight_line(3, 12, 1.0);
    auto pred = gt;
    for (auto& f : pred) f.col(0).array() += 1.0;
    Metrics m = ade_fde({pred}, gt);
    CHECK(m.ade == doctest::Approx(1.0));
    CHECK(m.fde == doctest::Approx(1.0));
  }

  TEST_CASE("best-of-K picks the perfect sample") {
    auto gt = straight_line(2, 12, 1.0);
    auto off = gt;
    for (auto& f : off) f.col(0).array() += 3.0;
    Metrics m = ade_fde({off, gt}, gt);
    CHECK(m.ade == 0.0);
    CHECK(m.fde == 0.0);
  }

  TEST_CASE("random instances match the exhaustive oracle to 1e-12") {
    RandomStream rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 1 + static_cast<int>(rng.next_u64() % 4);
      const int steps = 1 + static_cast<int>(rng.next_u64() % 12);
      const int k = 1 + static_cast<int>(rng.next_u64() % 6);
      std::vector<Mat> gt;
      for (int t = 0; t < steps; ++t) gt.push_back(rng.normal_matrix(n, 2));
      std::vector<std::vector<Mat>> samples;
      for (int s = 0; s < k; ++s) {
        std::vector<Mat> sample;
        for (int t = 0; t < steps; ++t) sample.push_back(rng.normal_matrix(n, 2));
        samples.push_back(std::move(sample));
      }
      Metrics m = ade_fde(samples, gt);
      auto [ade, fde] = oracle::ade_fde(samples, gt);
      CHECK(std::abs(m.ade - ade) < 1e-12);
      CHECK(std::abs(m.fde - fde) < 1e-12);
    }
  }

  TEST_CASE("ADE is monotone nonincreasing in K on nested sample sets") {
    RandomStream rng(5);
    const int n = 3, steps = 12;
    std::vector<Mat> gt;
    for (int t = 0; t < steps; ++t) gt.push_back(rng.normal_matrix(n, 2));
    std::vector<std::vector<Mat>> samples;
    double prev_ade = std::numeric_limits<double>::infinity();
    double prev_fde = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 20; ++k) {
      std::vector<Mat> sample;
      for (int t = 0; t < steps; ++t) sample.push_back(rng.normal_matrix(n, 2));
      samples.push_back(std::move(sample));
      Metrics m = ade_fde(samples, gt);
      CHECK(m.ade <= prev_ade + 1e-15);
      CHECK(m.fde <= prev_fde + 1e-15);
      prev_ade = m.ade;
      prev_fde = m.fde;
    }
  }

  TEST_CASE("metrics are invariant to agent ordering") {
    RandomStream rng(7);
    const int n = 4, steps = 6;
    std::vector<Mat> gt;
    std::vector<Mat> pred;
    for (int t = 0; t < steps; ++t) {
      gt.push_back(rng.normal_matrix(n, 2));
      pred.push_back(rng.normal_matrix(n, 2));
    }
    Metrics base = ade_fde({pred}, gt);
    std::vector<int> perm{2, 0, 3, 1};
    std::vector<Mat> gt_p(steps), pred_p(steps);
    for (int t = 0; t < steps; ++t) {
      gt_p[t].resize(n, 2);
      pred_p[t].resize(n, 2);
      for (int i = 0; i < n; ++i) {
        gt_p[t].row(i) = gt[t].row(perm[i]);
        pred_p[t].row(i) = pred[t].row(perm[i]);
      }
    }
    Metrics permuted = ade_fde({pred_p}, gt_p);
    CHECK(base.ade == doctest::Approx(permuted.ade).epsilon(1e-12));
    CHECK(base.fde == doctest::Approx(permuted.fde).epsilon(1e-12));
  }

  TEST_CASE("joint-scene best-of-K differs from per-agent when samples split the win") {
    // Two agents, two samples: each sample is perfect for one agent only.
    std::vector<Mat> gt{(Mat(2, 2) << 0, 0, 10, 10).finished()};
    std::vector<Mat> s0{(Mat(2, 2) << 0, 0, 13, 14).finished()};   // agent 0 perfect
    std::vector<Mat> s1{(Mat(2, 2) << 3, 4, 10, 10).finished()};   // agent 1 perfect
    Metrics per_agent = ade_fde({s0, s1}, gt);
    CHECK(per_agent.ade == 0.0);
    AdeFdeOptions joint;
    joint.joint_scene = true;
    Metrics scene = ade_fde({s0, s1}, gt, joint);
    CHECK(scene.ade == doctest::Approx(2.5));  // one agent pays 5, averaged
  }

  TEST_CASE("shape mismatch is rejected") {
    auto gt = straight_line(2, 12, 1.0);
    auto bad = straight_line(3, 12, 1.0);
    CHECK_THROWS_AS(ade_fde({bad}, gt), ShapeError);
  }

  TEST_CASE("constant-position baseline on unit-speed lines: ADE 6.5, FDE 12") {
    ScenarioSpec spec;
    spec.name = "parallel";
    spec.agents = 2;
    spec.speed = 1.0;
    auto windows = make_windows(synth_scenario(spec, 1), 1);
    REQUIRE_FALSE(windows.empty());
    PredictionSet pred = baseline_constant_position(windows[0]);
    Metrics m = ade_fde(pred, windows[0].future);
    CHECK(m.ade == doctest::Approx(6.5));  // mean of 1..12
    CHECK(m.fde == doctest::Approx(12.0));
  }

  TEST_CASE("constant-velocity baseline is exact on straight lines") {
    ScenarioSpec spec;
    spec.name = "parallel";
    spec.agents = 2;
    spec.speed = 1.3;
    auto windows = make_windows(synth_scenario(spec, 1), 1);
    PredictionSet pred = baseline_constant_velocity(windows[0]);
    Metrics m = ade_fde(pred, windows[0].future);
    CHECK(m.ade < 1e-9);
    CHECK(m.fde < 1e-9);
  }

  TEST_CASE("report json round-trips and renders a table") {
    MetricReport r;
    r.k = 20;
    r.windows = 7;
    r.config_hash = 123456789;
    r.per_scene["eth"] = {0.75, 1.5, 10};
    r.per_scene["hotel"] = {0.25, 0.5, 30};
    r.aggregate = {0.5, 1.0, 40};
    std::stringstream ss;
    write_metric_report(ss, r);
    MetricReport back = read_metric_report(ss);
    CHECK(back.k == 20);
    CHECK(back.per_scene.size() == 2);
    CHECK(back.per_scene["eth"].ade == doctest::Approx(0.75));
    CHECK(back.aggregate.fde == doctest::Approx(1.0));

    std::string table = render_table(back);
    CHECK(table.find("eth") != std::string::npos);
    CHECK(table.find("AVG") != std::string::npos);
  }

  TEST_CASE("leave-one-scene-out runs every rotation") {
    // Five tiny scenes, desk-scale training config.
    const fs::path root = fs::temp_directory_path() / "stgformer_loso";
    fs::create_directories(root);
    for (int s = 0; s < 5; ++s) {
      ScenarioSpec spec;
      spec.name = "crossing";
      spec.agents = 2;
      spec.noise = 0.05;
      write_scene_ethucy(root / ("scene" + std::to_string(s) + ".txt"),
                         synth_scenario(spec, 40 + s));
    }
    RunConfig cfg;
    cfg.dataset.root = root.string();
    cfg.k = 2;
    cfg.train.epochs = 2;
    cfg.train.model.d = 2;
    cfg.train.model.w = 4;
    cfg.train.model.heads = 1;
    cfg.train.model.ff = 8;
    MetricReport report = benchmark(root, Protocol::leave_one_scene_out, cfg);
    CHECK(report.per_scene.size() == 5);
    for (const auto& [name, m] : report.per_scene) {
      CHECK(m.ade >= 0.0);
      CHECK(std::isfinite(m.ade));
    }
    double mean_ade = 0.0;
    for (const auto& [name, m] : report.per_scene) mean_ade += m.ade / 5.0;
    CHECK(report.aggregate.ade == doctest::Approx(mean_ade));
    fs::remove_all(root);
  }

  TEST_CASE("missing scene directory is an IoError") {
    RunConfig cfg;
    CHECK_THROWS_AS(
        benchmark(fs::temp_directory_path() / "stgformer_nope", Protocol::leave_one_scene_out, cfg),
        IoError);
  }

  TEST_CASE("evaluate_dumps matches direct ade_fde") {
    ModelConfig mc;
    mc.d = 2;
    mc.w = 4;
    mc.heads = 1;
    mc.ff = 8;
    ModelParams params = init_params(mc, 1);
    ScenarioSpec spec;
    spec.name = "crossing";
    spec.agents = 2;
    spec.noise = 0.05;
    auto windows = make_windows(synth_scenario(spec, 50), 1);
    TrajectoryWindow w = windows.front();
    PredictOptions po;
    po.k = 3;
    PredictionSet pred = predict_window(w, params, po, 51);

    std::stringstream ps, gs;
    write_predictions_csv(ps, 0, w, pred, true);
    write_ground_truth_csv(gs, 0, w, true);
    MetricReport report = evaluate_dumps(read_predictions_csv(ps), read_ground_truth_csv(gs));

    std::vector<std::vector<Mat>> denorm_samples;
    for (const auto& s : pred.samples) {
      std::vector<Mat> steps;
      for (const auto& m : s) steps.push_back(w.denormalize(m));
      denorm_samples.push_back(std::move(steps));
    }
    std::vector<Mat> denorm_future;
    for (const auto& f : w.future) denorm_future.push_back(w.denormalize(f));
    Metrics direct = ade_fde(denorm_samples, denorm_future);
    CHECK(report.aggregate.ade == doctest::Approx(direct.ade).epsilon(1e-9));
    CHECK(report.aggregate.fde == doctest::Approx(direct.fde).epsilon(1e-9));
  }
}
