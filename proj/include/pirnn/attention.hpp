#pragma once

#include <optional>
#include <vector>

#include "pirnn/autodiff.hpp"

namespace pirnn {

/// Projection weights of a multi-head attention block.
///
/// Each full d x d matrix is the column-wise concatenation of the per-head
/// d x d_k projections, so head i owns columns [i*d_k, (i+1)*d_k).
struct MultiHeadParams {
  Var wq;
  Var wk;
  Var wv;
  std::size_t n_heads = 1;
  std::optional<Var> wo;  // post-concat projection, ablation only
};

/// Row-stochastic softmax factor of one head: queries x keys.
using AttentionWeights = std::vector<Tensor>;

struct AttentionResult {
  Var output;
  AttentionWeights weights;  // one matrix per head
};

// softmax(q k^T / sqrt(d_k)) v
AttentionResult scaled_dot_attention(Var q, Var k, Var v);

// Concatenation of independent heads along the width; no output projection unless p.wo is set.
AttentionResult multi_head(Var q_set, Var kv_set, const MultiHeadParams& p);

// Context set: every state slot queries the union of the inputs and the previous states.
// Key/value rows are ordered inputs first, then states.
AttentionResult assignment_context(Var x_set, Var h_prev, const MultiHeadParams& p);

// Elementwise mean of the per-head matrices.
Tensor mean_over_heads(const AttentionWeights& weights);

void check_head_config(std::size_t d, std::size_t n_heads);

}  // namespace pirnn
