#include "groundlab/autodiff.hpp"

#include <cmath>

namespace groundlab::ad {

namespace {

void check_same_tape(Value a, Value b) {
  if (a.tape != b.tape)
    throw InvalidArgumentError("autodiff: operands from different tapes");
}

}  // namespace

Value Tape::constant(Matrix v) { return make(std::move(v), false, nullptr); }

Value Tape::leaf(Matrix v) { return make(std::move(v), true, nullptr); }

Value Tape::make(Matrix v, bool needs_grad, std::function<void()> back) {
  auto node = std::make_unique<Node>();
  node->value = std::move(v);
  node->needs_grad = needs_grad;
  node->backward = std::move(back);
  Node* raw = node.get();
  nodes_.push_back(std::move(node));
  return Value{raw, this};
}

void Tape::backward(Value loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw InvalidArgumentError("autodiff: backward needs a scalar loss");
  if (!loss.node->needs_grad) return;
  loss.node->grad = Matrix::Ones(1, 1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (n->needs_grad && n->grad.size() != 0 && n->backward) n->backward();
  }
}

void accumulate(Node* n, const Matrix& g) {
  if (!n->needs_grad) return;
  if (n->grad.size() == 0) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  n->grad += g;
}

Value matmul(Value a, Value b) {
  check_same_tape(a, b);
  Node *na = a.node, *nb = b.node;
  bool ng = na->needs_grad || nb->needs_grad;
  Value out = a.tape->make(na->value * nb->value, ng, nullptr);
  Node* no = out.node;
  if (ng)
    no->backward = [na, nb, no] {
      accumulate(na, no->grad * nb->value.transpose());
      accumulate(nb, na->value.transpose() * no->grad);
    };
  return out;
}

Value matmul_nt(Value a, Value b) {
  check_same_tape(a, b);
  Node *na = a.node, *nb = b.node;
  bool ng = na->needs_grad || nb->needs_grad;
  Value out = a.tape->make(na->value * nb->value.transpose(), ng, nullptr);
  Node* no = out.node;
  if (ng)
    no->backward = [na, nb, no] {
      accumulate(na, no->grad * nb->value);
      accumulate(nb, no->grad.transpose() * na->value);
    };
  return out;
}

Value add(Value a, Value b) {
  check_same_tape(a, b);
  Node *na = a.node, *nb = b.node;
  bool ng = na->needs_grad || nb->needs_grad;
  Value out = a.tape->make(na->value + nb->value, ng, nullptr);
  Node* no = out.node;
  if (ng)
    no->backward = [na, nb, no] {
      accumulate(na, no->grad);
      accumulate(nb, no->grad);
    };
  return out;
}

Value sub(Value a, Value b) {
  check_same_tape(a, b);
  Node *na = a.node, *nb = b.node;
  bool ng = na->needs_grad || nb->needs_grad;
  Value out = a.tape->make(na->value - nb->value, ng, nullptr);
  Node* no = out.node;
  if (ng)
    no->backward = [na, nb, no] {
      accumulate(na, no->grad);
      accumulate(nb, -no->grad);
    };
  return out;
}

Value add_rowvec(Value a, Value r) {
  check_same_tape(a, r);
  if (r.rows() != 1 || r.cols() != a.cols())
    throw InvalidArgumentError("autodiff: add_rowvec shape mismatch");
  Node *na = a.node, *nr = r.node;
  bool ng = na->needs_grad || nr->needs_grad;
  Matrix v = na->value;
  v.rowwise() += nr->value.row(0);
  Value out = a.tape->make(std::move(v), ng, nullptr);
  Node* no = out.node;
  if (ng)
    no->backward = [na, nr, no] {
      accumulate(na, no->grad);
      accumulate(nr, no->grad.colwise().sum());
    };
  return out;
}

Value scale(Value a, double s) {
  Node* na = a.node;
  Value out = a.tape->make(na->value * s, na->needs_grad, nullptr);
  Node* no = out.node;
  if (na->needs_grad)
    no->backward = [na, no, s] { accumulate(na, no->grad * s); };
  return out;
}

Value add_const(Value a, double c) {
  Node* na = a.node;
  Value out = a.tape->make(na->value.array() + c, na->needs_grad, nullptr);
  Node* no = out.node;
  if (na->needs_grad)
    no->backward = [na, no] { accumulate(na, no->grad); };
  return out;
}

Value hadamard(Value a, Value b) {
  check_same_tape(a, b);
  Node *na = a.node, *nb = b.node;
  bool ng = na->needs_grad || nb->needs_grad;
  Value out = a.tape->make(na->value.cwiseProduct(nb->value), ng, nullptr);
  Node* no = out.node;
  if (ng)
    no->backward = [na, nb, no] {
      accumulate(na, no->grad.cwiseProduct(nb->value));
      accumulate(nb, no->grad.cwiseProduct(na->value));
    };
  return out;
}

Value tanh_op(Value a) {
  Node* na = a.node;
  Value out = a.tape->make(na->value.array().tanh(), na->needs_grad, nullptr);
  Node* no = out.node;
  if (na->needs_grad)
    no->backward = [na, no] {
      accumulate(na, no->grad.cwiseProduct(
                         (1.0 - no->value.array().square()).matrix()));
    };
  return out;
}

Value softmax_rows(Value a) {
  Node* na = a.node;
  Matrix v(na->value.rows(), na->value.cols());
  for (int r = 0; r < v.rows(); ++r) {
    double m = na->value.row(r).maxCoeff();
    Eigen::ArrayXd e = (na->value.row(r).array() - m).exp();
    v.row(r) = (e / e.sum()).matrix();
  }
  Value out = a.tape->make(std::move(v), na->needs_grad, nullptr);
  Node* no = out.node;
  if (na->needs_grad)
    no->backward = [na, no] {
      Matrix g(no->value.rows(), no->value.cols());
      for (int r = 0; r < g.rows(); ++r) {
        double dot = no->grad.row(r).dot(no->value.row(r));
        g.row(r) =
            no->value.row(r).cwiseProduct(no->grad.row(r).array().matrix() -
                                          Eigen::RowVectorXd::Constant(g.cols(), dot));
      }
      accumulate(na, g);
    };
  return out;
}

Value block(Value a, int i0, int j0, int p, int q) {
  Node* na = a.node;
  Value out = a.tape->make(na->value.block(i0, j0, p, q), na->needs_grad, nullptr);
  Node* no = out.node;
  if (na->needs_grad)
    no->backward = [na, no, i0, j0, p, q] {
      if (na->grad.size() == 0)
        na->grad = Matrix::Zero(na->value.rows(), na->value.cols());
      na->grad.block(i0, j0, p, q) += no->grad;
    };
  return out;
}

Value transpose(Value a) {
  Node* na = a.node;
  Value out = a.tape->make(na->value.transpose(), na->needs_grad, nullptr);
  Node* no = out.node;
  if (na->needs_grad)
    no->backward = [na, no] { accumulate(na, no->grad.transpose()); };
  return out;
}

Value vstack(const std::vector<Value>& rows) {
  if (rows.empty()) throw InvalidArgumentError("autodiff: vstack of nothing");
  Tape* tape = rows[0].tape;
  int total = 0;
  bool ng = false;
  for (const Value& v : rows) {
    if (v.tape != tape)
      throw InvalidArgumentError("autodiff: vstack across tapes");
    total += v.rows();
    ng = ng || v.node->needs_grad;
  }
  Matrix m(total, rows[0].cols());
  int at = 0;
  for (const Value& v : rows) {
    m.middleRows(at, v.rows()) = v.val();
    at += v.rows();
  }
  std::vector<Node*> parents;
  parents.reserve(rows.size());
  for (const Value& v : rows) parents.push_back(v.node);
  Value out = tape->make(std::move(m), ng, nullptr);
  Node* no = out.node;
  if (ng)
    no->backward = [parents, no] {
      int at = 0;
      for (Node* p : parents) {
        accumulate(p, no->grad.middleRows(at, p->value.rows()));
        at += static_cast<int>(p->value.rows());
      }
    };
  return out;
}

Value sum_all(Value a) {
  Node* na = a.node;
  Matrix v(1, 1);
  v(0, 0) = na->value.sum();
  Value out = a.tape->make(std::move(v), na->needs_grad, nullptr);
  Node* no = out.node;
  if (na->needs_grad)
    no->backward = [na, no] {
      accumulate(na, Matrix::Constant(na->value.rows(), na->value.cols(),
                                      no->grad(0, 0)));
    };
  return out;
}

Value mean_all(Value a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.rows() * a.cols()));
}

Value dot_all(Value a, Value b) {
  check_same_tape(a, b);
  Node *na = a.node, *nb = b.node;
  bool ng = na->needs_grad || nb->needs_grad;
  Matrix v(1, 1);
  v(0, 0) = na->value.cwiseProduct(nb->value).sum();
  Value out = a.tape->make(std::move(v), ng, nullptr);
  Node* no = out.node;
  if (ng)
    no->backward = [na, nb, no] {
      accumulate(na, no->grad(0, 0) * nb->value);
      accumulate(nb, no->grad(0, 0) * na->value);
    };
  return out;
}

Value segment_colmax(Value a, int nseg, int seglen) {
  Node* na = a.node;
  const int K = a.rows();
  if (a.cols() != nseg * seglen)
    throw InvalidArgumentError("autodiff: segment_colmax shape mismatch");
  Matrix v(K, nseg);
  auto arg = std::make_shared<std::vector<int>>(K * nseg);
  for (int k = 0; k < K; ++k)
    for (int s = 0; s < nseg; ++s) {
      int best = 0;
      double bv = na->value(k, s * seglen);
      for (int j = 1; j < seglen; ++j) {
        double x = na->value(k, s * seglen + j);
        if (x > bv) {
          bv = x;
          best = j;
        }
      }
      v(k, s) = bv;
      (*arg)[k * nseg + s] = best;
    }
  if (a.tape->signature)
    a.tape->signature->insert(a.tape->signature->end(), arg->begin(), arg->end());
  Value out = a.tape->make(std::move(v), na->needs_grad, nullptr);
  Node* no = out.node;
  if (na->needs_grad)
    no->backward = [na, no, arg, nseg, seglen] {
      if (na->grad.size() == 0)
        na->grad = Matrix::Zero(na->value.rows(), na->value.cols());
      for (int k = 0; k < no->value.rows(); ++k)
        for (int s = 0; s < nseg; ++s)
          na->grad(k, s * seglen + (*arg)[k * nseg + s]) += no->grad(k, s);
    };
  return out;
}

Value maxpool_rows(Value a, int nseg, int seglen) {
  Node* na = a.node;
  const int d = a.cols();
  if (a.rows() != nseg * seglen)
    throw InvalidArgumentError("autodiff: maxpool_rows shape mismatch");
  Matrix v(nseg, d);
  auto arg = std::make_shared<std::vector<int>>(nseg * d);
  for (int s = 0; s < nseg; ++s)
    for (int c = 0; c < d; ++c) {
      int best = 0;
      double bv = na->value(s * seglen, c);
      for (int j = 1; j < seglen; ++j) {
        double x = na->value(s * seglen + j, c);
        if (x > bv) {
          bv = x;
          best = j;
        }
      }
      v(s, c) = bv;
      (*arg)[s * d + c] = best;
    }
  if (a.tape->signature)
    a.tape->signature->insert(a.tape->signature->end(), arg->begin(), arg->end());
  Value out = a.tape->make(std::move(v), na->needs_grad, nullptr);
  Node* no = out.node;
  if (na->needs_grad)
    no->backward = [na, no, arg, nseg, seglen] {
      if (na->grad.size() == 0)
        na->grad = Matrix::Zero(na->value.rows(), na->value.cols());
      const int d = static_cast<int>(no->value.cols());
      for (int s = 0; s < nseg; ++s)
        for (int c = 0; c < d; ++c)
          na->grad(s * seglen + (*arg)[s * d + c], c) += no->grad(s, c);
    };
  return out;
}

Value cosine_rows(Value q, Value e) {
  check_same_tape(q, e);
  Node *nq = q.node, *ne = e.node;
  if (q.cols() != e.cols())
    throw InvalidArgumentError("autodiff: cosine_rows dim mismatch");
  const int K = q.rows(), R = e.rows();
  Matrix v(K, R);
  Vector qn(K), en(R);
  for (int k = 0; k < K; ++k) qn(k) = nq->value.row(k).norm();
  for (int i = 0; i < R; ++i) en(i) = ne->value.row(i).norm();
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < R; ++i) {
      double denom = qn(k) * en(i);
      v(k, i) = denom > 0.0 ? nq->value.row(k).dot(ne->value.row(i)) / denom : 0.0;
    }
  bool ng = nq->needs_grad || ne->needs_grad;
  Value out = q.tape->make(std::move(v), ng, nullptr);
  Node* no = out.node;
  if (ng)
    no->backward = [nq, ne, no, qn, en] {
      const int K = static_cast<int>(no->value.rows());
      const int R = static_cast<int>(no->value.cols());
      Matrix gq = Matrix::Zero(nq->value.rows(), nq->value.cols());
      Matrix ge = Matrix::Zero(ne->value.rows(), ne->value.cols());
      for (int k = 0; k < K; ++k) {
        for (int i = 0; i < R; ++i) {
          double g = no->grad(k, i);
          if (g == 0.0) continue;
          double denom = qn(k) * en(i);
          if (denom <= 0.0) continue;  // constant branch
          double c = no->value(k, i);
          gq.row(k) += g * (ne->value.row(i) / denom -
                            c * nq->value.row(k) / (qn(k) * qn(k)));
          ge.row(i) += g * (nq->value.row(k) / denom -
                            c * ne->value.row(i) / (en(i) * en(i)));
        }
      }
      accumulate(nq, gq);
      accumulate(ne, ge);
    };
  return out;
}

Value log_loss_op(Value x, double eta) {
  if (eta <= 0.0) throw InvalidArgumentError("autodiff: log-loss scale must be > 0");
  if (x.rows() != 1 || x.cols() != 1)
    throw InvalidArgumentError("autodiff: log_loss_op expects a scalar");
  Node* nx = x.node;
  double z = nx->value(0, 0) / eta;
  Matrix v(1, 1);
  v(0, 0) = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
  Value out = x.tape->make(std::move(v), nx->needs_grad, nullptr);
  Node* no = out.node;
  if (nx->needs_grad)
    no->backward = [nx, no, z, eta] {
      double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                            : std::exp(z) / (1.0 + std::exp(z));
      Matrix g(1, 1);
      g(0, 0) = no->grad(0, 0) * sig / eta;
      accumulate(nx, g);
    };
  return out;
}

}  // namespace groundlab::ad
