#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace stgformer {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;
using BitMat = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Config validation failure carrying every violation found, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Deterministic random stream. Normal draws use Box-Muller on top of
/// mt19937_64 so the exact sequence is reproducible across platforms and
/// standard libraries (std::normal_distribution is not portable).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform();

  /// Standard normal. Consumes exactly two uniforms per draw.
  double normal();

  /// rows x cols matrix of standard normals, filled row-major.
  Mat normal_matrix(Eigen::Index rows, Eigen::Index cols);

  /// Derive an independent substream seed (splitmix64 of seed ^ index).
  static std::uint64_t substream(std::uint64_t seed, std::uint64_t index);

 private:
  std::mt19937_64 engine_;
};

/// FNV-1a over a string; used to stamp config identity into artifacts.
std::uint64_t fnv1a(const std::string& text);

/// Shortest round-trippable decimal form of a double ("%.17g" trimmed).
std::string format_double(double v);

}  // namespace stgformer
