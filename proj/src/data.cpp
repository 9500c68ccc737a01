#include "stgformer/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

namespace stgformer {

namespace {

struct RawRow {
  long frame;
  long agent;
  Vec2 pos;
};

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream is(line);
  std::string t;
  while (is >> t) toks.push_back(t);
  return toks;
}

double parse_num(const std::string& tok, long line_no) {
  try {
    size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": expected a number, got '" + tok + "'");
  }
}

long parse_long(const std::string& tok, long line_no) {
  const double v = parse_num(tok, line_no);
  if (v != std::floor(v))
    throw ParseError("line " + std::to_string(line_no) + ": expected an integer, got '" + tok + "'");
  return static_cast<long>(v);
}

std::vector<RawRow> parse_ethucy(std::istream& is) {
  std::vector<RawRow> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() != 4)
      throw ParseError("line " + std::to_string(line_no) + ": expected 'frame agent_id x y', got " +
                       std::to_string(toks.size()) + " fields");
    RawRow r;
    r.frame = parse_long(toks[0], line_no);
    r.agent = parse_long(toks[1], line_no);
    r.pos = Vec2(parse_num(toks[2], line_no), parse_num(toks[3], line_no));
    rows.push_back(r);
  }
  return rows;
}

std::vector<RawRow> parse_sdd(std::istream& is, const LoadOptions& options) {
  std::vector<RawRow> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() < 10)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'agent_id xmin ymin xmax ymax frame lost occluded generated "
                       "label', got " +
                       std::to_string(toks.size()) + " fields");
    RawRow r;
    r.agent = parse_long(toks[0], line_no);
    const double xmin = parse_num(toks[1], line_no), ymin = parse_num(toks[2], line_no);
    const double xmax = parse_num(toks[3], line_no), ymax = parse_num(toks[4], line_no);
    r.frame = parse_long(toks[5], line_no);
    const long lost = parse_long(toks[6], line_no);
    if (lost && !options.include_lost) continue;
    // Labels may span tokens and carry quotes, e.g. "Pedestrian".
    std::string label;
    for (size_t i = 9; i < toks.size(); ++i) label += toks[i];
    std::erase(label, '"');
    if (options.pedestrians_only && label != "Pedestrian") continue;
    r.pos = Vec2(0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

Scene load_scene(std::istream& is, SceneFormat format, const LoadOptions& options,
                 const std::string& name) {
  std::vector<RawRow> rows =
      format == SceneFormat::ethucy ? parse_ethucy(is) : parse_sdd(is, options);
  if (rows.empty()) throw ParseError(name + ": no observations");

  const long base = std::min_element(rows.begin(), rows.end(), [](auto& a, auto& b) {
                      return a.frame < b.frame;
                    })->frame;
  long step = options.frame_step;
  if (step == 0) {
    for (const auto& r : rows) step = std::gcd(step, r.frame - base);
    if (step == 0) step = 1;  // single distinct frame
  }

  std::map<long, std::map<long, Vec2>> by_agent;  // agent -> frame index -> pos
  for (const auto& r : rows) {
    if ((r.frame - base) % step != 0) continue;  // off the sampling cadence
    by_agent[r.agent][(r.frame - base) / step] = r.pos;
  }

  Scene scene;
  scene.id = name;
  scene.units = format == SceneFormat::sdd ? UnitLabel::pixels : UnitLabel::meters;
  for (const auto& [agent, frames] : by_agent) {
    AgentTrack track;
    track.id = agent;
    for (const auto& [frame, pos] : frames) {
      if (!pos.allFinite())
        throw ParseError(name + ": non-finite position for agent " + std::to_string(agent));
      track.points.emplace_back(frame, pos);
    }
    scene.agents.push_back(std::move(track));
  }
  if (scene.agents.empty()) throw ParseError(name + ": no observations after filtering");
  return scene;
}

Scene load_scene(const std::filesystem::path& path, SceneFormat format,
                 const LoadOptions& options) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  LoadOptions opts = options;
  if (opts.frame_step == 0 && format == SceneFormat::sdd) opts.frame_step = 12;  // 30 fps -> 0.4 s
  Scene scene = load_scene(is, format, opts, path.filename().string());
  return scene;
}

std::vector<Mat> TrajectoryWindow::all_frames() const {
  std::vector<Mat> frames = observed;
  frames.insert(frames.end(), future.begin(), future.end());
  return frames;
}

std::vector<TrajectoryWindow> make_windows(const Scene& scene, int stride,
                                           const WindowOptions& options) {
  if (stride < 1) throw Error("make_windows: stride must be >= 1");
  long last_frame = 0;
  for (const auto& a : scene.agents)
    for (const auto& [f, p] : a.points) last_frame = std::max(last_frame, f);

  std::vector<TrajectoryWindow> windows;
  for (long start = 0; start + kWindowSteps - 1 <= last_frame; start += stride) {
    std::vector<const AgentTrack*> present;
    std::vector<std::vector<Vec2>> tracks;
    for (const auto& agent : scene.agents) {
      std::vector<Vec2> track;
      track.reserve(kWindowSteps);
      for (long f = start; f < start + kWindowSteps; ++f) {
        auto it = std::lower_bound(
            agent.points.begin(), agent.points.end(), f,
            [](const std::pair<long, Vec2>& p, long frame) { return p.first < frame; });
        if (it == agent.points.end() || it->first != f) break;
        track.push_back(it->second);
      }
      if (static_cast<int>(track.size()) == kWindowSteps) {
        present.push_back(&agent);
        tracks.push_back(std::move(track));
      }
    }
    if (present.empty()) continue;

    TrajectoryWindow w;
    w.scene_id = scene.id;
    w.start_frame = start;
    const int n = static_cast<int>(present.size());
    for (int i = 0; i < n; ++i) w.agent_ids.push_back(present[i]->id);
    w.scale = scene.units == UnitLabel::pixels ? options.pixels_per_unit : 1.0;
    if (w.scale <= 0.0) throw Error("make_windows: pixels_per_unit must be positive");
    Vec2 centroid = Vec2::Zero();
    for (int i = 0; i < n; ++i) centroid += tracks[i][0];
    w.origin = centroid / n;
    for (int s = 0; s < kWindowSteps; ++s) {
      Mat frame(n, 2);
      for (int i = 0; i < n; ++i) frame.row(i) = (tracks[i][s] - w.origin) / w.scale;
      (s < kObservedSteps ? w.observed : w.future).push_back(std::move(frame));
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

Scene synth_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  if (spec.agents < 1) throw Error("synth_scenario: agents must be >= 1");
  if (spec.frames < 2) throw Error("synth_scenario: frames must be >= 2");
  RandomStream rng(seed);
  Scene scene;
  scene.id = spec.name;
  scene.units = UnitLabel::meters;

  auto add_agent = [&](long id, const std::vector<Vec2>& path) {
    AgentTrack track;
    track.id = id;
    for (int f = 0; f < static_cast<int>(path.size()); ++f) {
      Vec2 p = path[f];
      if (spec.noise > 0.0) p += spec.noise * Vec2(rng.normal(), rng.normal());
      track.points.emplace_back(f, p);
    }
    scene.agents.push_back(std::move(track));
  };

  if (spec.name == "crossing") {
    // Agents walk through a shared center from evenly spaced directions,
    // offset a little so paths cross without coinciding.
    for (int i = 0; i < spec.agents; ++i) {
      const double angle = 2.0 * std::numbers::pi * i / spec.agents;
      const Vec2 dir(std::cos(angle), std::sin(angle));
      const Vec2 perp(-dir.y(), dir.x());
      const Vec2 offset = perp * (0.3 * i);
      const double reach = spec.speed * (spec.frames - 1) / 2.0;
      std::vector<Vec2> path;
      for (int f = 0; f < spec.frames; ++f)
        path.push_back(offset - dir * reach + dir * (spec.speed * f));
      add_agent(i, path);
    }
  } else if (spec.name == "approach_diverge") {
    // Two agents on parallel lanes `radius` apart, passing at meet_frame:
    // |x_0 - x_1|(f) = sqrt(4 s^2 (f - meet)^2 + radius^2), unimodal with the
    // minimum exactly at the meet frame.
    if (spec.meet_frame <= 0 || spec.meet_frame >= spec.frames - 1)
      throw Error("synth_scenario: meet_frame must be interior to the scene");
    std::vector<Vec2> a, b;
    for (int f = 0; f < spec.frames; ++f) {
      const double x = spec.speed * (f - spec.meet_frame);
      a.emplace_back(x, spec.radius / 2.0);
      b.emplace_back(-x, -spec.radius / 2.0);
    }
    add_agent(0, a);
    add_agent(1, b);
  } else if (spec.name == "parallel") {
    for (int i = 0; i < spec.agents; ++i) {
      std::vector<Vec2> path;
      for (int f = 0; f < spec.frames; ++f)
        path.emplace_back(spec.speed * f, 2.0 * i);
      add_agent(i, path);
    }
  } else if (spec.name == "random_walk") {
    for (int i = 0; i < spec.agents; ++i) {
      std::vector<Vec2> path;
      Vec2 p(4.0 * rng.normal(), 4.0 * rng.normal());
      path.push_back(p);
      for (int f = 1; f < spec.frames; ++f) {
        p += spec.speed * Vec2(rng.normal(), rng.normal());
        path.push_back(p);
      }
      add_agent(i, path);
    }
  } else {
    throw Error("synth_scenario: unknown scenario '" + spec.name + "'");
  }
  return scene;
}

void write_scene_ethucy(std::ostream& os, const Scene& scene) {
  // Frame-major like the source datasets; one observation per line.
  std::map<long, std::vector<std::pair<long, Vec2>>> by_frame;
  for (const auto& a : scene.agents)
    for (const auto& [f, p] : a.points) by_frame[f].emplace_back(a.id, p);
  for (const auto& [frame, obs] : by_frame)
    for (const auto& [agent, pos] : obs)
      os << frame << ' ' << agent << ' ' << format_double(pos.x()) << ' '
         << format_double(pos.y()) << '\n';
}

void write_scene_ethucy(const std::filesystem::path& path, const Scene& scene) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  write_scene_ethucy(os, scene);
}

}  // namespace stgformer
