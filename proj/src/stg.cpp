#include "stgformer/stg.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace stgformer {

void GraphEmbedding::validate() const {
  if (dest.cols() <= 0) throw ShapeError("embedding width must be positive");
  if (src.rows() != static_cast<Eigen::Index>(t) * dest.rows())
    throw ShapeError("src must have n*t rows, got " + std::to_string(src.rows()) + " for n=" +
                     std::to_string(dest.rows()) + " t=" + std::to_string(t));
  if (t > 0 && src.cols() != dest.cols()) throw ShapeError("dest/src width mismatch");
  if (!dest.allFinite() || !src.allFinite()) throw ShapeError("embedding has non-finite entries");
}

Adjacency hard_adjacency(const GraphEmbedding& e) {
  e.validate();
  Adjacency a;
  a.n = e.agents();
  a.t = e.t;
  if (e.t == 0) {
    a.bits.resize(a.n, 0);
    return a;
  }
  Mat dots = e.dest * e.src.transpose();
  a.bits = (dots.array() > 0.0).cast<std::uint8_t>();
  return a;
}

Mat soft_adjacency(const GraphEmbedding& e, double temperature) {
  e.validate();
  if (temperature <= 0.0) throw Error("soft_adjacency: temperature must be positive");
  if (e.t == 0) return Mat(e.agents(), 0);
  Mat dots = e.dest * e.src.transpose();
  return (1.0 / (1.0 + (-dots.array() / temperature).exp())).matrix();
}

long edge_count(const Adjacency& a) {
  long count = 0;
  for (Eigen::Index r = 0; r < a.bits.rows(); ++r)
    for (Eigen::Index c = 0; c < a.bits.cols(); ++c) count += a.bits(r, c);
  return count;
}

Adjacency full_adjacency(int n, int t) {
  Adjacency a;
  a.n = n;
  a.t = t;
  a.bits = BitMat::Ones(n, static_cast<Eigen::Index>(n) * t);
  return a;
}

void write_adjacency_csv(std::ostream& os, const std::vector<AdjacencyRecord>& records) {
  os << "window,sample,t,n,bits\n";
  for (const auto& rec : records) {
    os << rec.window << ',' << rec.sample << ',' << rec.adj.t << ',' << rec.adj.n << ',';
    for (Eigen::Index r = 0; r < rec.adj.bits.rows(); ++r)
      for (Eigen::Index c = 0; c < rec.adj.bits.cols(); ++c)
        os << (rec.adj.bits(r, c) ? '1' : '0');
    os << '\n';
  }
}

std::vector<AdjacencyRecord> read_adjacency_csv(std::istream& is) {
  std::vector<AdjacencyRecord> out;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("window,", 0) == 0) continue;
    if (line.empty()) continue;
    std::istringstream ls(line);
    AdjacencyRecord rec;
    char comma;
    std::string bits;
    if (!(ls >> rec.window >> comma >> rec.sample >> comma >> rec.adj.t >> comma >> rec.adj.n >>
          comma) ||
        !(ls >> bits))
      throw ParseError("adjacency csv: malformed line " + std::to_string(line_no));
    const long expect = static_cast<long>(rec.adj.n) * rec.adj.n * rec.adj.t;
    if (static_cast<long>(bits.size()) != expect)
      throw ParseError("adjacency csv: line " + std::to_string(line_no) + " expects " +
                       std::to_string(expect) + " bits, got " + std::to_string(bits.size()));
    rec.adj.bits.resize(rec.adj.n, static_cast<Eigen::Index>(rec.adj.n) * rec.adj.t);
    for (Eigen::Index r = 0, k = 0; r < rec.adj.bits.rows(); ++r)
      for (Eigen::Index c = 0; c < rec.adj.bits.cols(); ++c, ++k) {
        if (bits[k] != '0' && bits[k] != '1')
          throw ParseError("adjacency csv: non-binary bit on line " + std::to_string(line_no));
        rec.adj.bits(r, c) = bits[k] == '1';
      }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace stgformer
