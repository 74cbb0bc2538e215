#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pirnn/attention.hpp"
#include "pirnn/errors.hpp"
#include "pirnn/grad_check.hpp"

using namespace pirnn;

namespace {

double max_abs(const Tensor& a, const oracle::Mat& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b[i][j]));
  return m;
}

struct Block {
  Tensor wq, wk, wv;
  std::size_t heads;
  MultiHeadParams bind(Tape& t) const {
    MultiHeadParams p;
    p.wq = t.constant(wq);
    p.wk = t.constant(wk);
    p.wv = t.constant(wv);
    p.n_heads = heads;
    return p;
  }
};

Block random_block(Rng& rng, std::size_t d, std::size_t heads) {
  return {oracle::random_tensor(rng, d, d), oracle::random_tensor(rng, d, d), oracle::random_tensor(rng, d, d), heads};
}

}  // namespace

TEST_CASE("scaled_dot_attention trivial cases") {
  Rng rng(1);
  Tape t;
  const Tensor v = oracle::random_tensor(rng, 1, 3);
  const auto single = scaled_dot_attention(t.constant(oracle::random_tensor(rng, 4, 3)),
                                           t.constant(oracle::random_tensor(rng, 1, 3)), t.constant(v));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(single.weights[0](i, 0) == 1.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(single.output.value()(i, j) - v(0, j)) <= 1e-15);
  }
  // Queries orthogonal to every key give the column mean of v.
  const Tensor q = Tensor::from_rows({{1, 0}});
  const Tensor k = Tensor::from_rows({{0, 1}, {0, -2}, {0, 5}});
  const Tensor v3 = Tensor::from_rows({{1, 2}, {3, 4}, {5, 9}});
  const auto ortho = scaled_dot_attention(t.constant(q), t.constant(k), t.constant(v3));
  CHECK(std::abs(ortho.output.value()(0, 0) - 3.0) <= 1e-12);
  CHECK(std::abs(ortho.output.value()(0, 1) - 5.0) <= 1e-12);
  CHECK_THROWS_AS(scaled_dot_attention(t.constant(q), t.constant(Tensor::zeros({3, 3})), t.constant(v3)),
                  DimensionError);
}

TEST_CASE("scaled_dot_attention matches the scalar oracle") {
  Rng rng(2);
  Tape t;
  const Tensor q = oracle::random_tensor(rng, 2, 2), k = oracle::random_tensor(rng, 3, 2),
               v = oracle::random_tensor(rng, 3, 2);
  const auto got = scaled_dot_attention(t.constant(q), t.constant(k), t.constant(v));
  const auto want = oracle::attention(oracle::to_mat(q), oracle::to_mat(k), oracle::to_mat(v));
  CHECK(max_abs(got.output.value(), want.output) <= 1e-12);
  CHECK(max_abs(got.weights[0], want.weights) <= 1e-12);
}

TEST_CASE("multi_head identity reduction, oracle and head independence") {
  Tape t;
  MultiHeadParams id;
  id.wq = id.wk = id.wv = t.constant(Tensor::identity(3));
  id.n_heads = 1;
  const Tensor v = Tensor::from_rows({{0.2, -0.4, 0.9}});
  const auto one = multi_head(t.constant(Tensor::from_rows({{1, 2, 3}, {0, 0, 1}})), t.constant(v), id);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(one.output.value()(i, j) - v(0, j)) <= 1e-15);

  Rng rng(3);
  const Block blk = random_block(rng, 4, 2);
  const Tensor qs = oracle::random_tensor(rng, 3, 4), kvs = oracle::random_tensor(rng, 5, 4);
  const auto got = multi_head(t.constant(qs), t.constant(kvs), blk.bind(t));
  const auto want = oracle::multi_head(oracle::to_mat(qs), oracle::to_mat(kvs), oracle::to_mat(blk.wq),
                                       oracle::to_mat(blk.wk), oracle::to_mat(blk.wv), 2);
  CHECK(max_abs(got.output.value(), want.output) <= 1e-12);
  REQUIRE(got.weights.size() == 2);
  for (std::size_t h = 0; h < 2; ++h) CHECK(max_abs(got.weights[h], want.weights[h]) <= 1e-12);

  // Perturb head 2's columns only; head 1's output columns stay put.
  Block other = blk;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 2; j < 4; ++j) {
      other.wq(i, j) += rng.uniform(-1, 1);
      other.wk(i, j) += rng.uniform(-1, 1);
      other.wv(i, j) += rng.uniform(-1, 1);
    }
  const auto moved = multi_head(t.constant(qs), t.constant(kvs), other.bind(t));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(moved.output.value()(i, j) == got.output.value()(i, j));
  CHECK(max_abs_diff(moved.output.value(), got.output.value()) > 1e-6);
}

TEST_CASE("head count must divide the width") {
  CHECK_THROWS_AS(check_head_config(6, 4), ConfigError);
  CHECK_THROWS_AS(check_head_config(6, 0), ConfigError);
  CHECK_NOTHROW(check_head_config(8, 4));
  Rng rng(1);
  Tape t;
  const Block blk = random_block(rng, 6, 4);
  CHECK_THROWS_AS(multi_head(t.constant(oracle::random_tensor(rng, 2, 6)), t.constant(oracle::random_tensor(rng, 2, 6)),
                             blk.bind(t)),
                  ConfigError);
}

TEST_CASE("assignment_context hand-set instance matches the oracle") {
  Tape t;
  const Tensor x = Tensor::from_rows({{1.0, 0.0}, {0.5, -1.0}});
  const Tensor h = Tensor::from_rows({{0.2, 0.3}, {-0.7, 0.1}});
  Block blk{Tensor::from_rows({{1.0, 0.5}, {-0.3, 2.0}}), Tensor::from_rows({{0.4, 0.0}, {1.0, -1.0}}),
            Tensor::from_rows({{2.0, 1.0}, {0.0, 0.5}}), 1};
  const auto got = assignment_context(t.constant(x), t.constant(h), blk.bind(t));
  const auto want = oracle::multi_head(oracle::to_mat(h), oracle::stack(oracle::to_mat(x), oracle::to_mat(h)),
                                       oracle::to_mat(blk.wq), oracle::to_mat(blk.wk), oracle::to_mat(blk.wv), 1);
  CHECK(max_abs(got.output.value(), want.output) <= 1e-12);
  CHECK(got.weights[0].shape() == Tensor::Shape{2, 4});
}

TEST_CASE("assignment_context input invariance and state equivariance") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t heads = 1 + rng.below(2);
    const std::size_t d = 2 * heads * (1 + rng.below(3));
    const std::size_t mx = 1 + rng.below(6), mh = 1 + rng.below(6);
    const Block blk = random_block(rng, d, heads);
    const Tensor x = oracle::random_tensor(rng, mx, d), h = oracle::random_tensor(rng, mh, d);
    Tape t;
    const auto base = assignment_context(t.constant(x), t.constant(h), blk.bind(t));
    const auto px = oracle::random_permutation(rng, mx);
    const auto ph = oracle::random_permutation(rng, mh);
    const auto inv = assignment_context(t.constant(oracle::permute_rows(x, px)), t.constant(h), blk.bind(t));
    CHECK(max_abs_diff(inv.output.value(), base.output.value()) <= 1e-9);
    const auto eq = assignment_context(t.constant(x), t.constant(oracle::permute_rows(h, ph)), blk.bind(t));
    CHECK(max_abs_diff(eq.output.value(), oracle::permute_rows(base.output.value(), ph)) <= 1e-9);
    for (const auto& w : base.weights) {
      for (std::size_t i = 0; i < w.rows(); ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) {
          CHECK(w(i, j) >= 0.0);
          CHECK(w(i, j) <= 1.0);
          total += w(i, j);
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("assignment_context gradients pass a finite-difference check") {
  Rng rng(8);
  ParamStore ps;
  ps.add("wq", oracle::random_tensor(rng, 4, 4));
  ps.add("wk", oracle::random_tensor(rng, 4, 4));
  ps.add("wv", oracle::random_tensor(rng, 4, 4));
  ps.add("x", oracle::random_tensor(rng, 3, 4));
  ps.add("h", oracle::random_tensor(rng, 3, 4));
  const Tensor proj = oracle::random_tensor(rng, 3, 4);
  auto loss = [&](Tape& t, const ParamStore& p) {
    MultiHeadParams mp;
    mp.wq = t.param(p, "wq");
    mp.wk = t.param(p, "wk");
    mp.wv = t.param(p, "wv");
    mp.n_heads = 2;
    const auto r = assignment_context(t.param(p, "x"), t.param(p, "h"), mp);
    return sum(mul(r.output, t.constant(proj)));
  };
  CHECK(grad_check(loss, ps) < 1e-4);
}

TEST_CASE("mean_over_heads averages elementwise") {
  const AttentionWeights w = {Tensor::from_rows({{1.0, 0.0}}), Tensor::from_rows({{0.5, 0.5}})};
  CHECK(mean_over_heads(w) == Tensor::from_rows({{0.75, 0.25}}));
  CHECK_THROWS_AS(mean_over_heads({}), UsageError);
}
