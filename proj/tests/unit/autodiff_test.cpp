// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "tmn/error.hpp"
#include "tmn/ops.hpp"
#include "tmn/tensor.hpp"

using namespace tmn;
using namespace tmn::ad;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                     double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(n);
  for (double& v : data) v = dist(rng);
  return Tensor::from(std::move(data), std::move(shape), requires_grad);
}

// A fixed random weighting makes the loss sensitive to each output element
// separately. The weights must not change between grad_check evaluations,
// so they are drawn once, outside the loss closure.
Tensor fixed_weights(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  return random_tensor(std::move(shape), rng, 0.3, 1.7, false);
}

double check_op(const std::function<Tensor()>& f,
                std::vector<std::pair<std::string, Tensor>> params) {
  return grad_check(f, params, 1e-5).max_rel_error;
}

}  // namespace

TEST_CASE("tensor construction and shape rules") {
  Tensor a = Tensor::zeros({2, 3});
  CHECK(a.rows() == 2);
  CHECK(a.cols() == 3);
  CHECK(a.numel() == 6);
  CHECK_FALSE(a.requires_grad());

  Tensor s = Tensor::scalar(4.5);
  CHECK(s.is_scalar());
  CHECK(s.item() == 4.5);
  CHECK(s.shape() == std::vector<std::size_t>{1});

  CHECK_THROWS_AS(Tensor::zeros({0}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({2, 2, 2}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({1.0, 2.0}, {3}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({2, 2}).item(), DimensionError);
}

TEST_CASE("gradient buffer is lazy and zeroable") {
  Tensor a = Tensor::zeros({3}, true);
  CHECK_FALSE(a.has_grad());
  a.grad()[1] = 2.0;
  CHECK(a.has_grad());
  a.zero_grad();
  CHECK(a.grad()[1] == 0.0);
}

TEST_CASE("ops do not record without an active tape") {
  Tensor x = Tensor::from({1.0, 2.0}, {2}, true);
  Tensor y = add(x, x);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.value()[0] == 2.0);
}

TEST_CASE("backward on y = x + x gives dx = 2") {
  Tensor x = Tensor::from({1.5}, {1}, true);
  Tape tape;
  Tensor y;
  {
    TapeScope scope(tape);
    y = sum(add(x, x));
  }
  CHECK(tape.size() == 2);
  backward(y, tape);
  CHECK(x.grad()[0] == 2.0);
}

TEST_CASE("backward twice accumulates leaf gradients") {
  Tensor x = Tensor::from({3.0}, {1}, true);
  Tape tape;
  Tensor y;
  {
    TapeScope scope(tape);
    y = sum(mul(x, x));
  }
  backward(y, tape);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
  backward(y, tape);
  CHECK(x.grad()[0] == doctest::Approx(12.0));
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = Tensor::from({1.0, 2.0}, {2}, true);
  Tape tape;
  Tensor y;
  {
    TapeScope scope(tape);
    y = add(x, x);
  }
  CHECK_THROWS_AS(backward(y, tape), ContractError);
}

TEST_CASE("tape scopes nest and restore") {
  Tape outer, inner;
  CHECK(Tape::current() == nullptr);
  {
    TapeScope a(outer);
    CHECK(Tape::current() == &outer);
    {
      TapeScope b(inner);
      CHECK(Tape::current() == &inner);
    }
    CHECK(Tape::current() == &outer);
    {
      NoGradScope off;
      CHECK(Tape::current() == nullptr);
    }
    CHECK(Tape::current() == &outer);
  }
  CHECK(Tape::current() == nullptr);
}

TEST_CASE("matmul values and errors") {
  Tensor a = Tensor::from({1, 2, 3, 4, 5, 6}, {2, 3});
  Tensor b = Tensor::from({7, 8, 9, 10, 11, 12}, {3, 2});
  Tensor c = matmul(a, b);
  CHECK(c.shape() == std::vector<std::size_t>{2, 2});
  CHECK(c.value() == std::vector<double>{58, 64, 139, 154});

  Tensor eye = Tensor::from({1, 0, 0, 1}, {2, 2});
  Tensor d = matmul(c, eye);
  CHECK(d.value() == c.value());

  CHECK_THROWS_AS(matmul(a, a), DimensionError);
  CHECK_THROWS_AS(matmul(a, Tensor::zeros({4})), DimensionError);
}

TEST_CASE("transpose roundtrip") {
  Tensor a = Tensor::from({1, 2, 3, 4, 5, 6}, {2, 3});
  Tensor t = transpose(a);
  CHECK(t.shape() == std::vector<std::size_t>{3, 2});
  CHECK(t.value() == std::vector<double>{1, 4, 2, 5, 3, 6});
  CHECK(transpose(t).value() == a.value());
}

TEST_CASE("elementwise binary ops") {
  Tensor a = Tensor::from({1, -2, 3}, {3});
  Tensor b = Tensor::from({4, 5, -6}, {3});
  CHECK(add(a, b).value() == std::vector<double>{5, 3, -3});
  CHECK(sub(a, b).value() == std::vector<double>{-3, -7, 9});
  CHECK(mul(a, b).value() == std::vector<double>{4, -10, -18});
  CHECK_THROWS_AS(add(a, Tensor::zeros({2})), DimensionError);
  CHECK_THROWS_AS(mul(a, Tensor::zeros({3, 1})), DimensionError);
}

TEST_CASE("unary op values") {
  Tensor x = Tensor::from({0.0}, {1});
  CHECK(sigmoid(x).item() == 0.5);
  CHECK(tanh(x).item() == 0.0);
  CHECK(relu(Tensor::scalar(-1.0)).item() == 0.0);
  CHECK(relu(Tensor::scalar(2.0)).item() == 2.0);
  CHECK(abs(Tensor::scalar(-3.0)).item() == 3.0);
  CHECK(neg(Tensor::scalar(2.5)).item() == -2.5);
  CHECK(exp(Tensor::scalar(0.0)).item() == 1.0);
  CHECK(log(Tensor::scalar(1.0)).item() == 0.0);
  CHECK(sqrt(Tensor::scalar(4.0)).item() == 2.0);
  CHECK(reciprocal(Tensor::scalar(4.0)).item() == 0.25);
  CHECK(scale(Tensor::scalar(3.0), -2.0).item() == -6.0);
}

TEST_CASE("sigmoid saturates without overflow") {
  Tensor x = Tensor::from({-1000.0, 1000.0}, {2});
  Tensor y = sigmoid(x);
  CHECK(std::isfinite(y.value()[0]));
  CHECK(y.value()[0] == doctest::Approx(0.0));
  CHECK(y.value()[1] == doctest::Approx(1.0));
}

TEST_CASE("concat along both axes") {
  Tensor a = Tensor::from({1, 2}, {1, 2});
  Tensor b = Tensor::from({3, 4, 5}, {1, 3});
  Tensor c = concat({a, b}, 1);
  CHECK(c.shape() == std::vector<std::size_t>{1, 5});
  CHECK(c.value() == std::vector<double>{1, 2, 3, 4, 5});

  Tensor d = Tensor::from({1, 2, 3, 4}, {2, 2});
  Tensor e = Tensor::from({5, 6}, {1, 2});
  Tensor f = concat({d, e}, 0);
  CHECK(f.shape() == std::vector<std::size_t>{3, 2});
  CHECK(f.value() == std::vector<double>{1, 2, 3, 4, 5, 6});

  Tensor v = concat({Tensor::from({1.0}, {1}), Tensor::from({2.0, 3.0}, {2})}, 0);
  CHECK(v.shape() == std::vector<std::size_t>{3});

  CHECK_THROWS_AS(concat({a, d}, 1), DimensionError);
  CHECK_THROWS_AS(concat({d, b}, 0), DimensionError);
  CHECK_THROWS_AS(concat({}, 0), ContractError);
}

TEST_CASE("row-structured ops") {
  Tensor m = Tensor::from({1, 2, 3, 4, 5, 6}, {2, 3});
  CHECK(bias_add(m, Tensor::from({10, 20, 30}, {3})).value() ==
        std::vector<double>{11, 22, 33, 14, 25, 36});
  CHECK(row_sum(m).value() == std::vector<double>{6, 15});
  CHECK(scale_rows(m, Tensor::from({2, -1}, {2})).value() ==
        std::vector<double>{2, 4, 6, -4, -5, -6});
  CHECK_THROWS_AS(bias_add(m, Tensor::from({1.0, 2.0}, {2})), DimensionError);
  CHECK_THROWS_AS(scale_rows(m, Tensor::from({1.0, 2.0, 3.0}, {3})), DimensionError);
}

TEST_CASE("gather ops check bounds and accumulate duplicates") {
  Tensor m = Tensor::from({1, 2, 3, 4}, {2, 2}, true);
  Tensor g = gather_rows(m, {1, 0, 1});
  CHECK(g.shape() == std::vector<std::size_t>{3, 2});
  CHECK(g.value() == std::vector<double>{3, 4, 1, 2, 3, 4});
  CHECK_THROWS_AS(gather_rows(m, {2}), IndexError);

  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = sum(gather_rows(m, {1, 1}));
  }
  backward(loss, tape);
  CHECK(m.grad() == std::vector<double>{0, 0, 2, 2});

  Tensor v = Tensor::from({5, 6, 7}, {3});
  CHECK(gather(v, {2, 0}).value() == std::vector<double>{7, 5});
  CHECK_THROWS_AS(gather(v, {3}), IndexError);
}

TEST_CASE("reshape and sum") {
  Tensor m = Tensor::from({1, 2, 3, 4, 5, 6}, {2, 3}, true);
  Tensor r = reshape(m, {6});
  CHECK(r.shape() == std::vector<std::size_t>{6});
  CHECK_THROWS_AS(reshape(m, {4}), DimensionError);

  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = sum(m);
  }
  CHECK(loss.item() == 21.0);
  backward(loss, tape);
  CHECK(m.grad() == std::vector<double>(6, 1.0));
}

TEST_CASE("segment_sum groups rows and leaves empty segments zero") {
  Tensor v = Tensor::from({1, 2, 3}, {3, 1});
  Tensor s = segment_sum(v, {0, 0, 2}, 3);
  CHECK(s.shape() == std::vector<std::size_t>{3, 1});
  CHECK(s.value() == std::vector<double>{3, 0, 3});
  CHECK_THROWS_AS(segment_sum(v, {0, 0, 3}, 3), IndexError);
  CHECK_THROWS_AS(segment_sum(v, {0, 0}, 3), DimensionError);
}

TEST_CASE("segment_softmax matches softmax per segment") {
  Tensor s = Tensor::from({1.0, 2.0, 3.0, -1.0, -1.0}, {5});
  Tensor y = segment_softmax(s, {0, 0, 0, 1, 1}, 2);
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(y.value()[0] == doctest::Approx(std::exp(1.0) / z));
  CHECK(y.value()[1] == doctest::Approx(std::exp(2.0) / z));
  CHECK(y.value()[2] == doctest::Approx(std::exp(3.0) / z));
  CHECK(y.value()[3] == doctest::Approx(0.5));
  CHECK(y.value()[4] == doctest::Approx(0.5));
  CHECK(y.value()[0] + y.value()[1] + y.value()[2] == doctest::Approx(1.0));
}

TEST_CASE("segment_softmax is stable for large scores") {
  Tensor s = Tensor::from({1000.0, 1000.0, 999.0}, {3});
  Tensor y = segment_softmax(s, {0, 0, 0}, 1);
  for (double v : y.value()) CHECK(std::isfinite(v));
  CHECK(y.value()[0] == doctest::Approx(y.value()[1]));
  CHECK(y.value()[0] > y.value()[2]);
}

TEST_CASE("segment_softmax rejects empty segments") {
  Tensor s = Tensor::from({1.0, 2.0}, {2});
  CHECK_THROWS_AS(segment_softmax(s, {0, 0}, 2), DegenerateError);
  CHECK_THROWS_AS(segment_softmax(s, {0, 2}, 2), IndexError);
}

TEST_CASE("forward evaluation is deterministic bit for bit") {
  std::mt19937_64 rng(11);
  Tensor a = random_tensor({7, 5}, rng);
  Tensor b = random_tensor({5, 4}, rng);
  Tensor y1 = sigmoid(matmul(a, b));
  Tensor y2 = sigmoid(matmul(a, b));
  CHECK(std::memcmp(y1.value().data(), y2.value().data(),
                    y1.numel() * sizeof(double)) == 0);
}

TEST_CASE("repeated backward passes are bit identical") {
  std::mt19937_64 rng(12);
  Tensor a = random_tensor({4, 3}, rng);
  Tensor b = random_tensor({3, 2}, rng);
  std::vector<double> first;
  for (int run = 0; run < 2; ++run) {
    a.zero_grad();
    b.zero_grad();
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = sum(tanh(matmul(a, b)));
    }
    backward(loss, tape);
    if (run == 0) {
      first = a.grad();
      first.insert(first.end(), b.grad().begin(), b.grad().end());
    } else {
      std::vector<double> second = a.grad();
      second.insert(second.end(), b.grad().begin(), b.grad().end());
      CHECK(std::memcmp(first.data(), second.data(),
                        first.size() * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("finite differences agree for every op") {
  std::mt19937_64 rng(42);

  SUBCASE("matmul") {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    Tensor w = fixed_weights({3, 2}, rng);
    double err = check_op([&]() { return sum(mul(matmul(a, b), w)); },
                          {{"a", a}, {"b", b}});
    CHECK(err < 1e-5);
  }
  SUBCASE("transpose") {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor w = fixed_weights({4, 3}, rng);
    double err = check_op([&]() { return sum(mul(transpose(a), w)); }, {{"a", a}});
    CHECK(err < 1e-5);
  }
  SUBCASE("add sub mul") {
    Tensor a = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({2, 3}, rng);
    Tensor w = fixed_weights({2, 3}, rng);
    double err = check_op(
        [&]() { return sum(mul(mul(sub(add(a, b), b), b), w)); },
        {{"a", a}, {"b", b}});
    CHECK(err < 1e-5);
  }
  SUBCASE("smooth unaries") {
    Tensor a = random_tensor({2, 4}, rng);
    Tensor w = fixed_weights({2, 4}, rng);
    double err = check_op(
        [&]() { return sum(mul(tanh(sigmoid(neg(scale(a, 1.7)))), w)); },
        {{"a", a}});
    CHECK(err < 1e-5);
  }
  SUBCASE("positive-domain unaries") {
    Tensor a = random_tensor({5}, rng, 0.5, 2.0);
    Tensor w = fixed_weights({5}, rng);
    double err = check_op(
        [&]() { return sum(mul(log(sqrt(reciprocal(exp(a)))), w)); },
        {{"a", a}});
    CHECK(err < 1e-5);
  }
  SUBCASE("kinked unaries away from the kink") {
    Tensor a = random_tensor({6}, rng, 0.2, 1.5);
    Tensor b = random_tensor({6}, rng, -1.5, -0.2);
    Tensor w = fixed_weights({6}, rng);
    double err = check_op(
        [&]() { return sum(mul(add(relu(a), abs(b)), w)); },
        {{"a", a}, {"b", b}});
    CHECK(err < 1e-5);
  }
  SUBCASE("concat") {
    Tensor a = random_tensor({2, 2}, rng);
    Tensor b = random_tensor({2, 3}, rng);
    Tensor w = fixed_weights({2, 5}, rng);
    double err = check_op(
        [&]() { return sum(mul(concat({a, b}, 1), w)); },
        {{"a", a}, {"b", b}});
    CHECK(err < 1e-5);
  }
  SUBCASE("bias_add row_sum scale_rows") {
    Tensor m = random_tensor({4, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor s = random_tensor({4}, rng);
    Tensor w = fixed_weights({4}, rng);
    double err = check_op(
        [&]() {
          Tensor h = scale_rows(bias_add(m, b), s);
          return sum(mul(row_sum(h), w));
        },
        {{"m", m}, {"b", b}, {"s", s}});
    CHECK(err < 1e-5);
  }
  SUBCASE("gathers") {
    Tensor m = random_tensor({4, 3}, rng);
    Tensor v = random_tensor({5}, rng);
    Tensor wm = fixed_weights({4, 3}, rng);
    Tensor wv = fixed_weights({3}, rng);
    double err = check_op(
        [&]() {
          Tensor g = gather_rows(m, {1, 3, 1, 0});
          return add(sum(mul(g, wm)), sum(mul(gather(v, {0, 4, 4}), wv)));
        },
        {{"m", m}, {"v", v}});
    CHECK(err < 1e-5);
  }
  SUBCASE("reshape") {
    Tensor m = random_tensor({3, 4}, rng);
    Tensor w = fixed_weights({12}, rng);
    double err = check_op(
        [&]() { return sum(mul(reshape(m, {12}), w)); }, {{"m", m}});
    CHECK(err < 1e-5);
  }
  SUBCASE("segment_sum") {
    Tensor v = random_tensor({6, 3}, rng);
    Tensor w = fixed_weights({4, 3}, rng);
    double err = check_op(
        [&]() { return sum(mul(segment_sum(v, {0, 1, 0, 2, 2, 1}, 4), w)); },
        {{"v", v}});
    CHECK(err < 1e-5);
  }
  SUBCASE("segment_softmax") {
    Tensor s = random_tensor({7}, rng);
    Tensor w = fixed_weights({7}, rng);
    double err = check_op(
        [&]() {
          return sum(mul(segment_softmax(s, {0, 1, 0, 1, 2, 2, 2}, 3), w));
        },
        {{"s", s}});
    CHECK(err < 1e-5);
  }
}

TEST_CASE("grad_check agrees with itself on a quadratic") {
  Tensor x = Tensor::from({1.0, -2.0, 0.5}, {3}, true);
  auto report = grad_check([&]() { return sum(mul(x, x)); }, {{"x", x}});
  CHECK(report.checked == 3);
  CHECK(report.max_rel_error < 1e-6);
}

namespace {

// Records a wrong derivative (3x instead of 2x) to prove the checker can
// tell a lie from the truth.
Tensor square_with_broken_backward(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    out.value()[i] = x.value()[i] * x.value()[i];
  }
  if (Tape* tape = Tape::current()) {
    out.set_requires_grad(true);
    TapeEntry e;
    e.inputs = {x.impl()};
    e.output = out.impl();
    e.backward = [xi = x.impl(), oi = out.impl()]() {
      auto& g = xi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += oi->grad[i] * 3.0 * xi->value[i];
      }
    };
    tape->record(std::move(e));
  }
  return out;
}

}  // namespace

TEST_CASE("grad_check flags a corrupted backward rule") {
  Tensor x = Tensor::from({1.0, 2.0}, {2}, true);
  auto report =
      grad_check([&]() { return sum(square_with_broken_backward(x)); }, {{"x", x}});
  CHECK(report.max_rel_error > 1e-2);
  CHECK(report.worst_param == "x");
}

TEST_CASE("grad_check rejects bad arguments") {
  Tensor x = Tensor::from({1.0}, {1}, true);
  CHECK_THROWS_AS(grad_check([&]() { return x; }, {}), ContractError);
  Tensor frozen = Tensor::from({1.0}, {1}, false);
  CHECK_THROWS_AS(grad_check([&]() { return sum(frozen); }, {{"f", frozen}}),
                  ContractError);
}
