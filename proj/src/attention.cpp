#include "pirnn/attention.hpp"

#include <cmath>

#include "pirnn/errors.hpp"

namespace pirnn {

void check_head_config(std::size_t d, std::size_t n_heads) {
  if (n_heads == 0 || d % n_heads != 0) {
    throw ConfigError("attention head count " + std::to_string(n_heads) + " does not divide width " +
                      std::to_string(d));
  }
}

AttentionResult scaled_dot_attention(Var q, Var k, Var v) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  if (qv.cols() != kv.cols() || kv.rows() != vv.rows() || vv.cols() != qv.cols()) {
    throw DimensionError("scaled_dot_attention: q " + shape_string(qv.shape()) + ", k " + shape_string(kv.shape()) +
                         ", v " + shape_string(vv.shape()));
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(qv.cols()));
  Var weights = row_softmax(scale(matmul_nt(q, k), inv_sqrt_dk));
  return {matmul(weights, v), {weights.value()}};
}

AttentionResult multi_head(Var q_set, Var kv_set, const MultiHeadParams& p) {
  const std::size_t d = p.wq.value().rows();
  check_head_config(p.wq.value().cols(), p.n_heads);
  if (q_set.value().cols() != d || kv_set.value().cols() != d) {
    throw DimensionError("multi_head: set widths " + std::to_string(q_set.value().cols()) + "/" +
                         std::to_string(kv_set.value().cols()) + " do not match projection width " +
                         std::to_string(d));
  }
  const std::size_t dk = p.wq.value().cols() / p.n_heads;
  Var q_all = matmul(q_set, p.wq);
  Var k_all = matmul(kv_set, p.wk);
  Var v_all = matmul(kv_set, p.wv);

  AttentionResult result;
  std::vector<Var> heads;
  heads.reserve(p.n_heads);
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    const std::size_t b = h * dk, e = b + dk;
    AttentionResult head = p.n_heads == 1
                               ? scaled_dot_attention(q_all, k_all, v_all)
                               : scaled_dot_attention(slice_cols(q_all, b, e), slice_cols(k_all, b, e),
                                                      slice_cols(v_all, b, e));
    heads.push_back(head.output);
    result.weights.push_back(std::move(head.weights.front()));
  }
  result.output = heads.size() == 1 ? heads.front() : concat_cols(heads);
  if (p.wo) result.output = matmul(result.output, *p.wo);
  return result;
}

AttentionResult assignment_context(Var x_set, Var h_prev, const MultiHeadParams& p) {
  const Var parts[] = {x_set, h_prev};
  return multi_head(h_prev, concat_rows(parts), p);
}

Tensor mean_over_heads(const AttentionWeights& weights) {
  if (weights.empty()) throw UsageError("mean_over_heads: no heads");
  Tensor out = Tensor::zeros(weights.front().shape());
  for (const auto& w : weights) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[i];
  }
  for (auto& v : out.values()) v /= static_cast<double>(weights.size());
  return out;
}

}  // namespace pirnn
