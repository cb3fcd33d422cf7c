#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "tgnn/error.hpp"
#include "tgnn/tensor.hpp"

using namespace tgnn;
using tgnn::testing::check_gradients;
using tgnn::testing::random_const;
using tgnn::testing::random_param;

TEST_CASE("matmul by identity is the identity map") {
  Tape tape;
  Rng rng(7);
  Tensor m = random_const({3, 3}, rng);
  Tensor out = matmul(tape, Tensor::identity(3), m);
  for (int i = 0; i < 9; ++i)
    CHECK(out.values()[i] == doctest::Approx(m.values()[i]).epsilon(0));
}

TEST_CASE("matmul rejects incompatible shapes, naming them") {
  Tape tape;
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 5});
  CHECK_THROWS_WITH_AS(matmul(tape, a, b),
                       doctest::Contains("matmul"), ShapeError);
}

TEST_CASE("batched matmul matches per-slice results") {
  Tape tape;
  Rng rng(11);
  Tensor a = random_const({2, 3, 4}, rng);
  Tensor b = random_const({4, 5}, rng);
  Tensor out = matmul(tape, a, b);
  REQUIRE(out.shape() == Shape{2, 3, 5});
  for (int s = 0; s < 2; ++s) {
    std::vector<double> slice(a.values().begin() + s * 12,
                              a.values().begin() + (s + 1) * 12);
    Tensor out_s = matmul(tape, Tensor::from({3, 4}, slice), b);
    for (int i = 0; i < 15; ++i)
      CHECK(out.values()[s * 15 + i] == doctest::Approx(out_s.values()[i]));
  }
}

TEST_CASE("softmax of a constant row is uniform") {
  Tape tape;
  Tensor x = Tensor::from({3}, {4.2, 4.2, 4.2});
  Tensor y = softmax(tape, x, 0);
  for (double v : y.values()) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("softmax rows are probability vectors on random input") {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    Tape tape;
    Tensor x = random_const({4, 6}, rng, -30.0, 30.0);
    Tensor y = softmax(tape, x, 1);
    for (int i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 6; ++j) {
        const double v = y.at({i, j});
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("leaky relu slope 0.2") {
  Tape tape;
  Tensor y = leaky_relu(tape, Tensor::from({2}, {-1.0, 2.0}), 0.2);
  CHECK(y.values()[0] == doctest::Approx(-0.2));
  CHECK(y.values()[1] == doctest::Approx(2.0));
}

TEST_CASE("backward of x squared at 3 gives 6") {
  Tape tape;
  Tensor x = Tensor::param({1}, {3.0});
  Tensor loss = mul(tape, x, x);
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("backward of sum(relu(x)) masks negative entries") {
  Tape tape;
  Tensor x = Tensor::param({2}, {-1.0, 2.0});
  Tensor loss = sum_all(tape, relu(tape, x));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(0.0));
  CHECK(x.grad()[1] == doctest::Approx(1.0));
}

TEST_CASE("backward rejects non-scalar losses") {
  Tape tape;
  Tensor x = Tensor::param({2}, {1.0, 2.0});
  Tensor y = relu(tape, x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("unreached leaves get zero gradients") {
  Tape tape;
  Tensor x = Tensor::param({1}, {2.0});
  Tensor y = Tensor::param({1}, {5.0});
  Tensor loss = mul(tape, x, x);
  mul(tape, y, y);  // recorded but not on the loss path
  tape.backward(loss);
  CHECK(y.grad()[0] == doctest::Approx(0.0));
}

TEST_CASE("five-parameter composite graph passes finite differences") {
  Rng rng(17);
  Tensor a = random_param({3, 4}, rng);
  Tensor b = random_param({4, 2}, rng);
  Tensor c = random_param({3, 2}, rng);
  Tensor d = random_param({2}, rng, 0.2, 1.5);
  Tensor e = random_param({1}, rng, 0.5, 1.0);
  auto loss_fn = [&](Tape& t) {
    Tensor z = tanh_op(t, add(t, matmul(t, a, b), c));
    Tensor w = mul(t, sum_axis(t, z, 0), exp_op(t, log_op(t, d)));
    Tensor s = add(t, sqnorm(t, w), mul(t, e, e));
    return mean_all(t, s);
  };
  CHECK(check_gradients({a, b, c, d, e}, loss_fn).empty());
}

TEST_CASE("per-primitive gradients match finite differences") {
  Rng rng(23);

  SUBCASE("matmul") {
    Tensor a = random_param({2, 3, 4}, rng);
    Tensor b = random_param({4, 2}, rng);
    auto fn = [&](Tape& t) { return sqnorm(t, matmul(t, a, b)); };
    CHECK(check_gradients({a, b}, fn).empty());
  }
  SUBCASE("add sub mul div") {
    Tensor a = random_param({3, 3}, rng);
    Tensor b = random_param({3, 3}, rng, 0.5, 2.0);
    auto fn = [&](Tape& t) {
      Tensor x = div(t, mul(t, add(t, a, b), sub(t, a, b)), b);
      return sum_all(t, x);
    };
    CHECK(check_gradients({a, b}, fn).empty());
  }
  SUBCASE("scale add_const pow") {
    Tensor a = random_param({4}, rng, 0.3, 2.0);
    auto fn = [&](Tape& t) {
      return sum_all(t, pow_const(t, add_const(t, scale(t, a, 1.7), 0.4), -0.5));
    };
    CHECK(check_gradients({a}, fn).empty());
  }
  SUBCASE("activations") {
    Tensor a = random_param({6}, rng, 0.1, 2.0);
    Tensor b = random_param({6}, rng, -2.0, -0.1);
    auto fn = [&](Tape& t) {
      Tensor x = add(t, relu(t, a), leaky_relu(t, b, 0.2));
      Tensor y = add(t, tanh_op(t, x), exp_op(t, scale(t, x, 0.3)));
      return sum_all(t, add(t, y, log_op(t, a)));
    };
    CHECK(check_gradients({a, b}, fn).empty());
  }
  SUBCASE("softmax axis 0 and 1") {
    Tensor a = random_param({3, 4}, rng);
    Tensor w = random_const({3, 4}, rng);
    auto fn = [&](Tape& t) {
      Tensor s = add(t, softmax(t, a, 0), softmax(t, a, 1));
      return sum_all(t, mul(t, s, w));
    };
    CHECK(check_gradients({a}, fn).empty());
  }
  SUBCASE("concat narrow reshape permute") {
    Tensor a = random_param({2, 3}, rng);
    Tensor b = random_param({2, 2}, rng);
    auto fn = [&](Tape& t) {
      const Tensor parts[] = {a, b};
      Tensor c = concat(t, parts, 1);               // [2, 5]
      Tensor d = narrow(t, c, 1, 1, 3);             // [2, 3]
      Tensor e = permute(t, reshape(t, d, {3, 2}), {1, 0});
      return sqnorm(t, e);
    };
    CHECK(check_gradients({a, b}, fn).empty());
  }
  SUBCASE("reductions") {
    Tensor a = random_param({3, 4, 2}, rng);
    Tensor w = random_const({4, 2}, rng);
    auto fn = [&](Tape& t) {
      Tensor s = mul(t, mean_axis(t, a, 0), w);
      Tensor u = sum_axis(t, s, 1);
      return add(t, mean_all(t, u), sum_all(t, s));
    };
    CHECK(check_gradients({a}, fn).empty());
  }
}

TEST_CASE("tape replay is deterministic") {
  auto run = [] {
    Rng rng(5);
    Tensor a = random_param({4, 4}, rng);
    Tensor b = random_param({4, 4}, rng);
    Tape tape;
    Tensor loss = sqnorm(tape, tanh_op(tape, matmul(tape, a, b)));
    tape.backward(loss);
    std::vector<double> out(a.grad().begin(), a.grad().end());
    out.push_back(loss.value());
    return out;
  };
  const auto r1 = run();
  const auto r2 = run();
  CHECK(r1 == r2);
}

TEST_CASE("constants are not recorded on the tape") {
  Tape tape;
  Rng rng(2);
  Tensor a = random_const({3, 3}, rng);
  Tensor b = random_const({3, 3}, rng);
  matmul(tape, a, b);
  CHECK(tape.size() == 0);
  Tensor p = random_param({3, 3}, rng);
  matmul(tape, a, p);
  CHECK(tape.size() == 1);
}

TEST_CASE("apply_primitive surface: kind enum dispatch") {
  Tape tape;
  Tensor a = Tensor::param({2, 2}, {1, 2, 3, 4});
  const Tensor in[] = {a, a};
  Tensor out = tape.apply(OpKind::kMul, in);
  CHECK(out.at({1, 1}) == doctest::Approx(16.0));
  CHECK(tape.used(OpKind::kMul));
  CHECK_FALSE(tape.used(OpKind::kAdd));
}
