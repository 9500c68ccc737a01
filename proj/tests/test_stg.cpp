#include "stgformer/stg.hpp"

#include <doctest.h>

#include <sstream>

using namespace stgformer;

namespace {

GraphEmbedding embedding(int n, int t, int d, std::uint64_t seed) {
  RandomStream rng(seed);
  GraphEmbedding e;
  e.t = t;
  e.dest = rng.normal_matrix(n, d);
  e.src = rng.normal_matrix(static_cast<Eigen::Index>(n) * t, d);
  return e;
}

}  // namespace

TEST_SUITE("stg") {
  TEST_CASE("positive inner product gives an edge") {
    GraphEmbedding e;
    e.t = 1;
    e.dest = (Mat(1, 2) << 1, 0).finished();
    e.src = (Mat(1, 2) << 1, 0).finished();
    Adjacency a = hard_adjacency(e);
    CHECK(a.bits(0, 0) == 1);
  }

  TEST_CASE("exactly zero inner product maps to no edge") {
    GraphEmbedding e;
    e.t = 1;
    e.dest = (Mat(1, 2) << 1, 0).finished();
    e.src = (Mat(1, 2) << 0, 1).finished();
    CHECK(hard_adjacency(e).bits(0, 0) == 0);
  }

  TEST_CASE("t=0 yields a zero-column adjacency") {
    GraphEmbedding e;
    e.t = 0;
    e.dest = Mat::Zero(3, 4);
    e.src.resize(0, 4);
    Adjacency a = hard_adjacency(e);
    CHECK(a.bits.rows() == 3);
    CHECK(a.bits.cols() == 0);
  }

  TEST_CASE("random embedding matches the dot-then-threshold oracle") {
    GraphEmbedding e = embedding(3, 2, 4, 42);
    Adjacency a = hard_adjacency(e);
    REQUIRE(a.bits.rows() == 3);
    REQUIRE(a.bits.cols() == 6);
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 6; ++c)
        CHECK(a.bits(i, c) == (e.dest.row(i).dot(e.src.row(c)) > 0.0 ? 1 : 0));
  }

  TEST_CASE("hard adjacency is invariant to positive scaling of dest") {
    GraphEmbedding e = embedding(4, 3, 5, 43);
    Adjacency base = hard_adjacency(e);
    e.dest *= 7.5;
    CHECK(hard_adjacency(e).bits == base.bits);
  }

  TEST_CASE("column layout round-trips") {
    const int n = 5;
    for (int tau = 0; tau < 4; ++tau)
      for (int j = 0; j < n; ++j) {
        auto [agent, step] = Adjacency::decode_column(Adjacency::column(j, tau, n), n);
        CHECK(agent == j);
        CHECK(step == tau);
      }
  }

  TEST_CASE("soft adjacency hits the sigmoid anchors") {
    GraphEmbedding e;
    e.t = 1;
    e.dest = (Mat(1, 2) << 1, 0).finished();
    e.src = (Mat(1, 2) << 0, 1).finished();  // dot = 0
    CHECK(soft_adjacency(e, 1.0)(0, 0) == doctest::Approx(0.5));

    e.src = (Mat(1, 2) << std::log(3.0), 0).finished();  // dot = ln 3
    CHECK(soft_adjacency(e, 1.0)(0, 0) == doctest::Approx(0.75));
  }

  TEST_CASE("soft adjacency approaches the hard one away from zero") {
    RandomStream rng(7);
    GraphEmbedding e = embedding(4, 2, 6, 44);
    Mat dots = e.dest * e.src.transpose();
    // Push every product away from the threshold.
    for (int i = 0; i < dots.rows(); ++i)
      for (int c = 0; c < dots.cols(); ++c)
        if (std::abs(dots(i, c)) < 0.1) e.dest.row(i) *= 3.0;
    dots = e.dest * e.src.transpose();
    Mat soft = soft_adjacency(e, 1e-3);
    Adjacency hard = hard_adjacency(e);
    double max_gap = 0.0;
    for (int i = 0; i < dots.rows(); ++i)
      for (int c = 0; c < dots.cols(); ++c)
        if (std::abs(dots(i, c)) > 0.1)
          max_gap = std::max(max_gap, std::abs(soft(i, c) - double(hard.bits(i, c))));
    CHECK(max_gap < 1e-20);
  }

  TEST_CASE("soft adjacency is monotone in each inner product") {
    GraphEmbedding e;
    e.t = 1;
    e.dest = (Mat(1, 1) << 1.0).finished();
    double prev = -1.0;
    for (double dot = -3.0; dot <= 3.0; dot += 0.25) {
      e.src = (Mat(1, 1) << dot).finished();
      const double v = soft_adjacency(e, 0.8)(0, 0);
      CHECK(v > prev);
      prev = v;
    }
  }

  TEST_CASE("edge_count sums ones") {
    Adjacency a;
    a.n = 2;
    a.t = 2;
    a.bits = BitMat::Zero(2, 4);
    CHECK(edge_count(a) == 0);
    a.bits = BitMat::Ones(2, 4);
    CHECK(edge_count(a) == 8);

    RandomStream rng(5);
    long expect = 0;
    for (int i = 0; i < 2; ++i)
      for (int c = 0; c < 4; ++c) {
        a.bits(i, c) = rng.uniform() < 0.5;
        expect += a.bits(i, c);
      }
    CHECK(edge_count(a) == expect);
  }

  TEST_CASE("adjacency csv round-trips") {
    std::vector<AdjacencyRecord> records;
    for (int s = 0; s < 3; ++s) {
      AdjacencyRecord rec;
      rec.window = 2;
      rec.sample = s;
      rec.adj = hard_adjacency(embedding(3, s + 1, 4, 100 + s));
      records.push_back(rec);
    }
    std::stringstream ss;
    write_adjacency_csv(ss, records);
    auto back = read_adjacency_csv(ss);
    REQUIRE(back.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i) {
      CHECK(back[i].window == records[i].window);
      CHECK(back[i].sample == records[i].sample);
      CHECK(back[i].adj.bits == records[i].adj.bits);
    }
  }

  TEST_CASE("adjacency csv rejects malformed rows") {
    std::stringstream ss("window,sample,t,n,bits\n0,0,1,2,10\n");
    CHECK_THROWS_AS(read_adjacency_csv(ss), ParseError);  // wrong bit count
  }
}
