#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "robustnet/rng.hpp"
#include "robustnet/tape.hpp"

using namespace robustnet;

namespace {

// Central-difference check of d(root)/d(leaves) for a scalar graph built by
// `build` from leaf tensors. Rebuilds the tape per probe, so the graph must
// be a pure function of the leaf values.
void check_gradients(std::vector<Tensor> leaves,
                     const std::function<NodeId(Tape&, const std::vector<NodeId>&)>& build,
                     double tol = 1e-6) {
  Tape tape;
  std::vector<NodeId> ids;
  for (const Tensor& t : leaves) ids.push_back(tape.leaf(t));
  NodeId root = build(tape, ids);
  tape.backward(root);

  const double h = 1e-6;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    Tensor grad = tape.grad(ids[l]);
    REQUIRE(grad.size() == leaves[l].size());
    for (std::size_t i = 0; i < leaves[l].size(); ++i) {
      auto eval = [&](double v) {
        std::vector<Tensor> probe = leaves;
        probe[l][i] = v;
        Tape t2;
        std::vector<NodeId> ids2;
        for (const Tensor& t : probe) ids2.push_back(t2.leaf(t));
        return t2.value(build(t2, ids2)).as_scalar();
      };
      double x = leaves[l][i];
      double fd = (eval(x + h) - eval(x - h)) / (2.0 * h);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
  }
}

Tensor rvec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return Tensor::vector(std::move(v));
}

Tensor rmat(Rng& rng, std::size_t r, std::size_t c) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return Tensor::matrix(r, c, std::move(v));
}

}  // namespace

TEST_CASE("tape forward values") {
  Tape tape;
  NodeId a = tape.leaf(Tensor::vector({1.0, -2.0, 3.0}));
  NodeId b = tape.leaf(Tensor::vector({0.5, 0.5, 0.5}));

  CHECK(tape.value(tape.add(a, b))[1] == -1.5);
  CHECK(tape.value(tape.sub(a, b))[0] == 0.5);
  CHECK(tape.value(tape.hadamard(a, b))[2] == 1.5);
  CHECK(tape.value(tape.scale(a, -2.0))[0] == -2.0);
  CHECK(tape.value(tape.relu(a))[1] == 0.0);
  CHECK(tape.value(tape.dot(a, b)).as_scalar() == doctest::Approx(1.0));
  CHECK(tape.value(tape.sum_reduce(a)).as_scalar() == doctest::Approx(2.0));
  CHECK(tape.value(tape.max_reduce(a)).as_scalar() == 3.0);
  CHECK(tape.value(tape.select(a, 1)).as_scalar() == -2.0);
  CHECK(tape.value(tape.lq_norm(a, Norm::l1)).as_scalar() == doctest::Approx(6.0));

  NodeId m = tape.leaf(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  CHECK(tape.value(tape.matmul(m, a))[0] == doctest::Approx(1.0 - 4.0 + 9.0));
  CHECK(tape.value(tape.transpose(m)).at(2, 1) == 6.0);
  CHECK(tape.value(tape.select_row(m, 1))[2] == 6.0);
  CHECK(tape.value(tape.scale_rows(m, Tensor::vector({0.0, 2.0}))).at(1, 0) == 8.0);

  NodeId mm = tape.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  CHECK(tape.value(tape.concat_cols(mm, mm)).cols() == 4);
  NodeId v2 = tape.leaf(Tensor::vector({10.0, 20.0}));
  CHECK(tape.value(tape.add_col_broadcast(mm, v2)).at(1, 1) == 24.0);

  NodeId s1 = tape.select(a, 0);
  NodeId s2 = tape.select(a, 2);
  CHECK(tape.value(tape.pack({s1, s2}))[1] == 3.0);
}

TEST_CASE("tape shape errors") {
  Tape tape;
  NodeId a = tape.leaf(Tensor::vector({1.0, 2.0}));
  NodeId b = tape.leaf(Tensor::vector({1.0, 2.0, 3.0}));
  CHECK_THROWS(tape.add(a, b));
  CHECK_THROWS(tape.matmul(a, b));
  CHECK_THROWS(tape.backward(a));  // root must be scalar
}

TEST_CASE("tape gradients match finite differences per op") {
  Rng rng(11);

  check_gradients({rvec(rng, 4), rvec(rng, 4)}, [](Tape& t, const std::vector<NodeId>& v) {
    return t.dot(t.add(v[0], v[1]), t.sub(v[0], v[1]));
  });
  check_gradients({rvec(rng, 4), rvec(rng, 4)}, [](Tape& t, const std::vector<NodeId>& v) {
    return t.sum_reduce(t.hadamard(v[0], v[1]));
  });
  check_gradients({rvec(rng, 5)}, [](Tape& t, const std::vector<NodeId>& v) {
    return t.sum_reduce(t.relu(t.scale(v[0], 1.7)));
  });
  check_gradients({rmat(rng, 3, 4), rvec(rng, 4)},
                  [](Tape& t, const std::vector<NodeId>& v) {
                    return t.sum_reduce(t.matmul(v[0], v[1]));
                  });
  check_gradients({rmat(rng, 3, 4), rmat(rng, 4, 2)},
                  [](Tape& t, const std::vector<NodeId>& v) {
                    return t.sum_reduce(t.relu(t.matmul(v[0], v[1])));
                  });
  check_gradients({rmat(rng, 3, 4)}, [](Tape& t, const std::vector<NodeId>& v) {
    return t.sum_reduce(t.transpose(v[0]));
  });
  check_gradients({rmat(rng, 3, 4)}, [](Tape& t, const std::vector<NodeId>& v) {
    return t.sum_reduce(t.scale_rows(v[0], Tensor::vector({1.0, -2.0, 0.5})));
  });
  check_gradients({rmat(rng, 3, 2), rvec(rng, 3)},
                  [](Tape& t, const std::vector<NodeId>& v) {
                    return t.sum_reduce(t.relu(t.add_col_broadcast(v[0], v[1])));
                  });
  check_gradients({rmat(rng, 2, 2), rmat(rng, 2, 3)},
                  [](Tape& t, const std::vector<NodeId>& v) {
                    return t.sum_reduce(t.relu(t.concat_cols(v[0], v[1])));
                  });
  check_gradients({rvec(rng, 4)}, [](Tape& t, const std::vector<NodeId>& v) {
    return t.scale(t.select(v[0], 2), 3.0);
  });
  check_gradients({rmat(rng, 3, 3)}, [](Tape& t, const std::vector<NodeId>& v) {
    return t.sum_reduce(t.select_row(v[0], 1));
  });
  check_gradients({rvec(rng, 4)}, [](Tape& t, const std::vector<NodeId>& v) {
    return t.logsumexp(v[0]);
  });
  check_gradients({rvec(rng, 4), rvec(rng, 4)}, [](Tape& t, const std::vector<NodeId>& v) {
    return t.dot(t.softmax(v[0]), v[1]);
  });
  check_gradients({rvec(rng, 3), rvec(rng, 3)}, [](Tape& t, const std::vector<NodeId>& v) {
    NodeId s0 = t.dot(v[0], v[1]);
    NodeId s1 = t.logsumexp(v[0]);
    return t.sum_reduce(t.pack({s0, s1}));
  });
  // Lq norms away from their kinks.
  check_gradients({Tensor::vector({0.5, -1.5, 2.5})},
                  [](Tape& t, const std::vector<NodeId>& v) {
                    return t.lq_norm(v[0], Norm::l1);
                  });
  check_gradients({Tensor::vector({0.5, -1.5, 2.5})},
                  [](Tape& t, const std::vector<NodeId>& v) {
                    return t.lq_norm(v[0], Norm::l2);
                  });
  check_gradients({Tensor::vector({0.5, -1.5, 2.5})},
                  [](Tape& t, const std::vector<NodeId>& v) {
                    return t.lq_norm(v[0], Norm::linf);
                  });
  // Max away from ties.
  check_gradients({Tensor::vector({0.5, 3.0, -1.0})},
                  [](Tape& t, const std::vector<NodeId>& v) {
                    return t.max_reduce(v[0]);
                  });
}

TEST_CASE("tape subgradient conventions") {
  Tape tape;
  NodeId v = tape.leaf(Tensor::vector({0.0, -1.0}));
  tape.backward(tape.sum_reduce(tape.relu(v)));
  CHECK(tape.grad(v)[0] == 0.0);  // relu'(0) = 0
  CHECK(tape.grad(v)[1] == 0.0);

  Tape t2;
  NodeId z = t2.leaf(Tensor::vector({0.0, 0.0, 0.0}));
  t2.backward(t2.lq_norm(z, Norm::l2));
  CHECK(t2.grad(z)[0] == 0.0);  // norm subgradient at the origin

  Tape t3;
  NodeId w = t3.leaf(Tensor::vector({2.0, 2.0, 1.0}));
  t3.backward(t3.max_reduce(w));
  CHECK(t3.grad(w)[0] == 1.0);  // first argmax wins the tie
  CHECK(t3.grad(w)[1] == 0.0);

  Tape t4;
  NodeId u = t4.leaf(Tensor::vector({-3.0, 3.0}));
  t4.backward(t4.lq_norm(u, Norm::linf));
  CHECK(t4.grad(u)[0] == -1.0);  // first max-|.| coordinate, signed
  CHECK(t4.grad(u)[1] == 0.0);
}

TEST_CASE("tape constants are excluded from backward") {
  Tape tape;
  NodeId c = tape.constant(Tensor::vector({1.0, 2.0}));
  NodeId v = tape.leaf(Tensor::vector({3.0, 4.0}));
  NodeId root = tape.dot(c, v);
  tape.backward(root);
  Tensor gc = tape.grad(c);
  for (std::size_t i = 0; i < gc.size(); ++i) CHECK(gc[i] == 0.0);
  CHECK(tape.grad(v)[0] == 1.0);
  CHECK(tape.grad(v)[1] == 2.0);
}

TEST_CASE("backward clears previous gradients") {
  Tape tape;
  NodeId v = tape.leaf(Tensor::vector({1.0, 2.0}));
  NodeId r1 = tape.sum_reduce(v);
  NodeId r2 = tape.dot(v, v);
  tape.backward(r1);
  CHECK(tape.grad(v)[0] == 1.0);
  tape.backward(r2);
  CHECK(tape.grad(v)[0] == 2.0);  // not 1 + 2
  CHECK(tape.grad(v)[1] == 4.0);
}
