#include <doctest.h>

#include <cmath>
#include <limits>

#include "robustnet/tensor.hpp"

using namespace robustnet;

TEST_CASE("tensor construction and shape validation") {
  Tensor s = Tensor::scalar(3.5);
  CHECK(s.is_scalar());
  CHECK(s.rank() == 0);
  CHECK(s.as_scalar() == 3.5);

  Tensor v = Tensor::vector({1.0, 2.0, 3.0});
  CHECK(v.is_vector());
  CHECK(v.size() == 3);
  CHECK(v[2] == 3.0);

  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.is_matrix());
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 0) == 4.0);  // row-major

  Tensor d;
  CHECK(d.empty());
  CHECK(!d.is_scalar());

  CHECK_THROWS(Tensor({2, 3}, {1.0, 2.0}));       // length mismatch
  CHECK_THROWS(Tensor({0}, {}));                  // zero extent
  CHECK_THROWS(Tensor({2, 0}, {}));
  CHECK_THROWS(Tensor::matrix(2, 2, {1.0, 2.0}));
}

TEST_CASE("tensor finite check") {
  Tensor v = Tensor::vector({1.0, 2.0});
  CHECK(v.all_finite());
  v[1] = std::numeric_limits<double>::infinity();
  CHECK(!v.all_finite());
  v[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK(!v.all_finite());
}

TEST_CASE("relu clamps negatives only") {
  Tensor v = relu(Tensor::vector({-2.0, 0.0, 3.0}));
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 0.0);
  CHECK(v[2] == 3.0);
}

TEST_CASE("lp norms") {
  Tensor v = Tensor::vector({3.0, -4.0, 0.0});
  CHECK(lp_norm(v, Norm::l1) == doctest::Approx(7.0));
  CHECK(lp_norm(v, Norm::l2) == doctest::Approx(5.0));
  CHECK(lp_norm(v, Norm::linf) == doctest::Approx(4.0));
  CHECK(lp_norm(Tensor::vector({0.0, 0.0}), Norm::l2) == 0.0);
}

TEST_CASE("dual norm pairing") {
  CHECK(dual_norm(Norm::l1) == Norm::linf);
  CHECK(dual_norm(Norm::linf) == Norm::l1);
  CHECK(dual_norm(Norm::l2) == Norm::l2);
}

TEST_CASE("norm parsing") {
  CHECK(parse_norm("1") == Norm::l1);
  CHECK(parse_norm("2") == Norm::l2);
  CHECK(parse_norm("inf") == Norm::linf);
  CHECK_THROWS(parse_norm("3"));
  CHECK(norm_name(Norm::linf) == "inf");
}

TEST_CASE("logsumexp is shift invariant and overflow safe") {
  Tensor z = Tensor::vector({1.0, 2.0, 3.0});
  double direct = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  CHECK(logsumexp(z) == doctest::Approx(direct).epsilon(1e-12));

  Tensor shifted = Tensor::vector({1.0 + 100.0, 2.0 + 100.0, 3.0 + 100.0});
  CHECK(logsumexp(shifted) == doctest::Approx(direct + 100.0).epsilon(1e-12));

  Tensor huge = Tensor::vector({1e4, 1e4 - 1.0});
  CHECK(std::isfinite(logsumexp(huge)));
  CHECK(logsumexp(huge) == doctest::Approx(1e4 + std::log(1.0 + std::exp(-1.0))));
}

TEST_CASE("softmax sums to one and dominates correctly") {
  Tensor s = softmax(Tensor::vector({0.0, 1.0, -1.0}));
  double total = s[0] + s[1] + s[2];
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s[1] > s[0]);
  CHECK(s[0] > s[2]);
}

TEST_CASE("argmax takes the lowest index on ties") {
  CHECK(argmax(Tensor::vector({1.0, 3.0, 3.0, 2.0})) == 1);
  CHECK(argmax(Tensor::vector({5.0})) == 0);
  CHECK(argmax(Tensor::vector({2.0, 2.0, 2.0})) == 0);
}
