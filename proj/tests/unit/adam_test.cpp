#include <doctest.h>

#include "tgnn/adam.hpp"
#include "tgnn/error.hpp"

using namespace tgnn;

TEST_CASE("zero gradient leaves parameters unchanged") {
  Tensor w = Tensor::param({3}, {1.0, -2.0, 0.5});
  AdamState state;
  const std::vector<double> zero(3, 0.0);
  adam_step(w, zero, state, 0.1, "w");
  CHECK(w.values()[0] == 1.0);
  CHECK(w.values()[1] == -2.0);
  CHECK(w.values()[2] == 0.5);
  CHECK(state.step == 1);
}

TEST_CASE("one step on f(w) = w^2 from 1 with lr 0.1 lands near 0.9") {
  // Hand evaluation with defaults: g = 2, mhat = 2, vhat = 4,
  // w <- 1 - 0.1 * 2 / (2 + 1e-8).
  Tensor w = Tensor::param({1}, {1.0});
  AdamState state;
  const std::vector<double> grad = {2.0};
  adam_step(w, grad, state, 0.1, "w");
  CHECK(w.values()[0] == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("two successive steps strictly decrease f(w) = w^2") {
  Tensor w = Tensor::param({1}, {1.0});
  AdamState state;
  double prev = 1.0;
  for (int i = 0; i < 2; ++i) {
    const std::vector<double> grad = {2.0 * w.values()[0]};
    adam_step(w, grad, state, 0.1, "w");
    const double f = w.values()[0] * w.values()[0];
    CHECK(f < prev);
    prev = f;
  }
}

TEST_CASE("step counter increases by one per update") {
  Tensor w = Tensor::param({1}, {1.0});
  AdamState state;
  const std::vector<double> grad = {0.5};
  for (int i = 1; i <= 5; ++i) {
    adam_step(w, grad, state, 0.01, "w");
    CHECK(state.step == i);
  }
}

TEST_CASE("non-finite gradient raises a training error naming the parameter") {
  Tensor w = Tensor::param({1}, {1.0});
  AdamState state;
  const std::vector<double> grad = {std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_WITH_AS(adam_step(w, grad, state, 0.1, "predict.w_p"),
                       doctest::Contains("predict.w_p"), TrainingError);
}

TEST_CASE("optimizer applies global-norm clipping when configured") {
  Tensor w = Tensor::param({2}, {0.0, 0.0});
  Tape tape;
  Tensor loss = sqnorm(tape, add_const(tape, w, 3.0));
  tape.backward(loss);  // grad = (6, 6), norm ~ 8.49
  AdamOptimizer opt({{"w", w}});
  opt.step(0.1, 1.0);
  // Direction is preserved; Adam normalizes magnitude per element.
  CHECK(w.values()[0] == doctest::Approx(w.values()[1]));
  CHECK(w.values()[0] < 0.0);
}
