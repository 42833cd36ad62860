#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "hgot/common.hpp"

// Reverse-mode autodiff over dense matrices. A Tape records matrix-valued
// nodes in forward order; backward() walks them in reverse, accumulating
// gradients into every node with requires_grad. Graphs are rebuilt per
// training step (define-by-run), so node ids are only valid until clear().

namespace hgot::ad {

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

enum class Act { identity, relu, leaky_relu, elu, tanh_fn };

double act_value(Act a, double x);
double act_deriv(Act a, double x);

class Tape {
 public:
  Var leaf(Mat value, bool requires_grad);
  Var constant(Mat value) { return leaf(std::move(value), false); }

  const Mat& value(Var v) const;
  // Gradient of the last backward() target w.r.t. v. Zero matrix if the
  // node was never reached.
  Mat grad(Var v) const;
  bool requires_grad(Var v) const;

  void backward(Var scalar_output);              // output must be 1x1; seed 1
  void backward(Var output, const Mat& seed);    // seed shape must match output

  void clear();
  std::size_t size() const { return nodes_.size(); }

  // Implementation hooks used by the op constructors.
  struct Node {
    Mat value;
    Mat grad;  // empty until first accumulation
    bool requires_grad = false;
    std::function<void()> pull;  // propagates this->grad into parents
  };
  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }
  Var emplace(Mat value, bool requires_grad, std::function<void()> pull);
  // Accumulates `g` into node `id` if it participates in differentiation.
  void accumulate(int id, const Mat& g);

 private:
  // deque, not vector: value()/node() references stay valid while new
  // nodes are recorded, which callers rely on when chaining ops.
  std::deque<Node> nodes_;
};

// --- primitive ops ---------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var hadamard(Var a, Var b);
Var activation(Var a, Act k, double leaky_slope = 0.2);
Var exp_elem(Var a);
Var add_rowvec(Var a, Var r);              // r is 1 x cols, broadcast over rows
Var add_colvec(Var a, Var c);              // c is rows x 1, broadcast over cols
Var outer_sum(Var col_a, Var col_b);       // (n x 1, m x 1) -> n x m, a_i + b_j
Var masked_row_softmax(Var logits, const Mat& mask);  // mask entries in {0,1}
Var row_softmax(Var a);
Var logsumexp_rows(Var a);                 // n x m -> n x 1
Var logsumexp_cols(Var a);                 // n x m -> 1 x m
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, int offset, int count);
Var rows_normalize(Var a);                 // each row scaled to unit L2 norm
Var frobenius_norm(Var a);                 // -> 1x1
Var inner(Var a, Var b);                   // <A, B> -> 1x1
Var abs_scalar(Var a);                     // 1x1 -> 1x1
Var diag_vec(Var a);                       // square n x n -> n x 1
Var scale_by_entry(Var a, Var s, int row, int col);  // A * s(row, col)
Var sum_all(Var a);                        // -> 1x1

}  // namespace hgot::ad
