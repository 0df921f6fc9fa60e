#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "groundlab/common.hpp"

namespace groundlab::ad {

// Minimal reverse-mode engine over dense matrices. A Tape owns the nodes of
// one computation; ops append nodes, so tape order is a topological order and
// backward() is a single reverse sweep. Max-style ops pick a branch (ties go
// to the lowest index) and backpropagate the subgradient of the selected
// branch; the selected indices are optionally recorded into `signature` so a
// finite-difference checker can detect when a perturbation crossed a kink.
class Tape;

struct Node {
  Matrix value;
  Matrix grad;  // allocated on first accumulation
  bool needs_grad = false;
  std::function<void()> backward;
};

struct Value {
  Node* node = nullptr;
  Tape* tape = nullptr;

  const Matrix& val() const { return node->value; }
  int rows() const { return static_cast<int>(node->value.rows()); }
  int cols() const { return static_cast<int>(node->value.cols()); }
  double scalar() const { return node->value(0, 0); }
};

class Tape {
 public:
  // Non-differentiable constant.
  Value constant(Matrix v);
  // Differentiable leaf; read node->grad after backward().
  Value leaf(Matrix v);

  Value make(Matrix v, bool needs_grad, std::function<void()> back);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. `loss` must be
  // 1x1. Leaf gradients accumulate into their nodes.
  void backward(Value loss);

  std::size_t size() const { return nodes_.size(); }

  // When set, max-style ops append their selected indices here.
  std::vector<std::int32_t>* signature = nullptr;

 private:
  std::deque<std::unique_ptr<Node>> nodes_;
};

void accumulate(Node* n, const Matrix& g);

// ---- ops ----

Value matmul(Value a, Value b);     // a * b
Value matmul_nt(Value a, Value b);  // a * b^T
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value add_rowvec(Value a, Value r);  // r is 1 x cols(a), broadcast over rows
Value scale(Value a, double s);
Value add_const(Value a, double c);
Value hadamard(Value a, Value b);
Value tanh_op(Value a);
Value softmax_rows(Value a);
Value block(Value a, int i0, int j0, int p, int q);
Value transpose(Value a);
Value vstack(const std::vector<Value>& rows);
Value sum_all(Value a);   // 1x1
Value mean_all(Value a);  // 1x1
Value dot_all(Value a, Value b);  // sum(a .* b), 1x1

// out(k, s) = max over j in [0, seglen) of a(k, s*seglen + j).
Value segment_colmax(Value a, int nseg, int seglen);
// a is (nseg*seglen) x d; out(s, c) = max over the segment's rows.
Value maxpool_rows(Value a, int nseg, int seglen);

// Cosine of every (row of q, row of e) pair, zero-norm rows give 0.
Value cosine_rows(Value q, Value e);

// Numerically stable log(1 + exp(x/eta)) on a 1x1 value.
Value log_loss_op(Value x, double eta);

}  // namespace groundlab::ad
