#include <doctest.h>

#include <cmath>
#include <functional>

#include "groundlab/autodiff.hpp"
#include "groundlab/rng.hpp"
#include "support/coverage.hpp"
#include "support/helpers.hpp"

using namespace groundlab;
using groundlab_test::random_matrix;

namespace {

// Finite-difference check: build() maps leaf values to a scalar Value on the
// given tape. Verifies d(out)/d(leaf) for every coordinate of every leaf.
void fd_check(const std::vector<Matrix>& leaf_values,
              const std::function<ad::Value(ad::Tape&, std::vector<ad::Value>&)>& build,
              double tol = 1e-6) {
  std::vector<Matrix> values = leaf_values;
  auto eval = [&](std::vector<Matrix>& vals) {
    ad::Tape tape;
    std::vector<ad::Value> leaves;
    for (const auto& v : vals) leaves.push_back(tape.leaf(v));
    return build(tape, leaves).scalar();
  };

  ad::Tape tape;
  std::vector<ad::Value> leaves;
  for (const auto& v : values) leaves.push_back(tape.leaf(v));
  ad::Value out = build(tape, leaves);
  tape.backward(out);

  const double h = 1e-6;
  for (size_t li = 0; li < values.size(); ++li) {
    Matrix analytic = leaves[li].node->grad.size()
                          ? leaves[li].node->grad
                          : Matrix::Zero(values[li].rows(), values[li].cols());
    for (int r = 0; r < values[li].rows(); ++r)
      for (int c = 0; c < values[li].cols(); ++c) {
        double orig = values[li](r, c);
        values[li](r, c) = orig + h;
        double up = eval(values);
        values[li](r, c) = orig - h;
        double down = eval(values);
        values[li](r, c) = orig;
        double fd = (up - down) / (2 * h);
        CHECK(std::abs(fd - analytic(r, c)) <
              tol * std::max({1.0, std::abs(fd), std::abs(analytic(r, c))}));
      }
  }
}

}  // namespace

TEST_CASE("matmul family gradients match finite differences") {
  RandomStream rng(1, "ad");
  fd_check({random_matrix(3, 4, rng), random_matrix(4, 2, rng)},
           [](ad::Tape&, std::vector<ad::Value>& l) {
             return ad::sum_all(ad::matmul(l[0], l[1]));
           });
  fd_check({random_matrix(3, 4, rng), random_matrix(2, 4, rng)},
           [](ad::Tape&, std::vector<ad::Value>& l) {
             return ad::sum_all(ad::hadamard(ad::matmul_nt(l[0], l[1]),
                                             ad::matmul_nt(l[0], l[1])));
           });
}

TEST_CASE("elementwise and broadcast op gradients") {
  RandomStream rng(2, "ad");
  fd_check({random_matrix(3, 5, rng), random_matrix(1, 5, rng)},
           [](ad::Tape&, std::vector<ad::Value>& l) {
             return ad::sum_all(ad::tanh_op(ad::add_rowvec(l[0], l[1])));
           });
  fd_check({random_matrix(4, 3, rng), random_matrix(4, 3, rng)},
           [](ad::Tape&, std::vector<ad::Value>& l) {
             return ad::dot_all(ad::scale(l[0], 1.7), ad::add_const(l[1], 0.3));
           });
  fd_check({random_matrix(2, 6, rng)}, [](ad::Tape&, std::vector<ad::Value>& l) {
    return ad::mean_all(ad::sub(ad::transpose(l[0]), ad::transpose(l[0])));
  });
}

TEST_CASE("softmax rows gradient") {
  RandomStream rng(3, "ad");
  Matrix weights = random_matrix(3, 4, rng);
  fd_check({random_matrix(3, 4, rng)}, [&](ad::Tape& t, std::vector<ad::Value>& l) {
    return ad::dot_all(ad::softmax_rows(l[0]), t.constant(weights));
  });
}

TEST_CASE("block, vstack, transpose gradients") {
  RandomStream rng(4, "ad");
  Matrix weights = random_matrix(5, 2, rng);
  fd_check({random_matrix(4, 6, rng), random_matrix(1, 2, rng)},
           [&](ad::Tape& t, std::vector<ad::Value>& l) {
             std::vector<ad::Value> parts;
             parts.push_back(ad::block(l[0], 0, 0, 2, 2));
             parts.push_back(ad::block(l[0], 2, 4, 2, 2));
             parts.push_back(l[1]);
             return ad::dot_all(ad::vstack(parts), t.constant(weights));
           });
}

TRACED_TEST_CASE("F06", "segment max picks the maximum with lowest-index ties") {
  ad::Tape tape;
  Matrix m(1, 6);
  m << 0.2, 0.7, 0.4, 0.5, 0.5, 0.1;
  ad::Value v = tape.leaf(m);
  ad::Value f = ad::segment_colmax(v, 2, 3);
  CHECK(f.val()(0, 0) == doctest::Approx(0.7));
  CHECK(f.val()(0, 1) == doctest::Approx(0.5));

  // ties resolve to the lower index: gradient flows to column 3, not 4
  tape.backward(ad::sum_all(f));
  CHECK(v.node->grad(0, 3) == 1.0);
  CHECK(v.node->grad(0, 4) == 0.0);
}

TEST_CASE("max-style op gradients away from ties") {
  RandomStream rng(5, "ad");
  Matrix weights = random_matrix(2, 3, rng);
  fd_check({random_matrix(2, 6, rng)}, [&](ad::Tape& t, std::vector<ad::Value>& l) {
    return ad::dot_all(ad::segment_colmax(l[0], 3, 2), t.constant(weights));
  });
  Matrix w2 = random_matrix(2, 4, rng);
  fd_check({random_matrix(6, 4, rng)}, [&](ad::Tape& t, std::vector<ad::Value>& l) {
    return ad::dot_all(ad::maxpool_rows(l[0], 2, 3), t.constant(w2));
  });
}

TRACED_TEST_CASE("F05", "cosine rows values and gradients") {
  ad::Tape tape;
  Matrix q(2, 3), e(2, 3);
  q << 1, 0, 0, 0, 2, 0;
  e << 3, 0, 0, 0, 0, 0;  // second row has zero norm
  ad::Value c = ad::cosine_rows(tape.leaf(q), tape.leaf(e));
  CHECK(c.val()(0, 0) == doctest::Approx(1.0));
  CHECK(c.val()(1, 0) == doctest::Approx(0.0));
  CHECK(c.val()(0, 1) == doctest::Approx(0.0));  // zero-norm row scores 0
  CHECK(c.val()(1, 1) == doctest::Approx(0.0));

  RandomStream rng(6, "ad");
  Matrix weights = random_matrix(3, 4, rng);
  fd_check({random_matrix(3, 5, rng), random_matrix(4, 5, rng)},
           [&](ad::Tape& t, std::vector<ad::Value>& l) {
             return ad::dot_all(ad::cosine_rows(l[0], l[1]), t.constant(weights));
           },
           1e-5);
}

TRACED_TEST_CASE("F09", "stable log-loss values and gradient") {
  ad::Tape tape;
  ad::Value x = tape.leaf(Matrix::Zero(1, 1));
  CHECK(ad::log_loss_op(x, 0.7).scalar() == doctest::Approx(std::log(2.0)));

  Matrix big(1, 1);
  big << -10.0;
  ad::Value y = tape.leaf(big);
  CHECK(ad::log_loss_op(y, 0.2).scalar() < 1e-21);

  fd_check({Matrix::Constant(1, 1, 0.37)}, [](ad::Tape&, std::vector<ad::Value>& l) {
    return ad::log_loss_op(l[0], 0.2);
  });
}
