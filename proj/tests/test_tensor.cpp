#include "bcf/tensor.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

using namespace bcf;

namespace {

bool throws_numeric_naming(const std::function<void()>& fn, const std::string& op) {
  try {
    fn();
  } catch (const numeric_error& e) {
    return std::string(e.what()).find(op) != std::string::npos;
  } catch (...) {
    return false;
  }
  return false;
}

Tensor random_tensor(std::size_t r, std::size_t c, RngStream& rng, bool grad = true,
                     double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.uniform_range(lo, hi);
  return Tensor::from_values(r, c, std::move(v), grad);
}

// Shifts values away from a kink at `k` so central differences stay valid.
void avoid_kink(Tensor& t, double k, double margin = 0.05) {
  for (double& v : t.values())
    if (std::abs(v - k) < margin) v = k + (v >= k ? margin : -margin);
}

}  // namespace

TEST_CASE("forward primitives produce the expected values") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == Catch::Approx(0.5));
  CHECK(tanh(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(softplus(Tensor::scalar(0.0)).item() == Catch::Approx(0.6931471805599453).epsilon(1e-12));

  const Tensor a = Tensor::from_values(2, 2, {1, 2, 3, 4});
  const Tensor eye = Tensor::from_values(2, 2, {1, 0, 0, 1});
  const Tensor prod = matmul(a, eye);
  CHECK(prod.values() == std::vector<double>{1, 2, 3, 4});

  const Tensor s = add(Tensor::from_values(1, 3, {1, 2, 3}), Tensor::from_values(1, 3, {4, 5, 6}));
  CHECK(s.values() == std::vector<double>{5, 7, 9});
  CHECK(mean_all(s).item() == Catch::Approx(7.0));
  CHECK(sum_all(s).item() == Catch::Approx(21.0));
}

TEST_CASE("broadcasting follows one-axis rules and rejects mismatches") {
  const Tensor m = Tensor::from_values(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor row = Tensor::from_values(1, 3, {10, 20, 30});
  const Tensor out = add(m, row);
  CHECK(out.at(0, 0) == 11.0);
  CHECK(out.at(1, 2) == 36.0);

  CHECK_THROWS_AS(add(m, Tensor::zeros(3, 2)), config_error);
  CHECK_THROWS_AS(matmul(m, Tensor::zeros(2, 2)), config_error);
  CHECK_THROWS_AS(concat_cols(Tensor::zeros(2, 2), Tensor::zeros(3, 2)), config_error);
}

TEST_CASE("non-finite forward results raise numeric errors naming the op") {
  CHECK(throws_numeric_naming([] { log(Tensor::scalar(-1.0)); }, "log"));
  CHECK(throws_numeric_naming([] { div(Tensor::scalar(1.0), Tensor::scalar(0.0)); }, "div"));
  const Tensor huge = Tensor::scalar(1e308);
  CHECK(throws_numeric_naming([&] { mul(huge, huge); }, "mul"));
}

TEST_CASE("tensor construction contracts") {
  CHECK_THROWS_AS(Tensor::from_values(2, 2, {1, 2, 3}), config_error);
  CHECK_THROWS_AS(Tensor::from_values(2, 2, {1, 2, 3, 4}).item(), usage_error);
  CHECK(Tensor::scalar(3.5).item() == 3.5);
}

TEST_CASE("backward computes textbook derivatives") {
  SECTION("sigmoid at zero") {
    Tensor x = Tensor::scalar(0.0, true);
    backward(sigmoid(x));
    CHECK(x.grad()[0] == Catch::Approx(0.25));
  }
  SECTION("product rule with a reused tensor") {
    Tensor x = Tensor::scalar(3.0, true);
    backward(mul(x, x));
    CHECK(x.grad()[0] == Catch::Approx(6.0));
  }
  SECTION("two consumers accumulate the sum of path gradients") {
    Tensor x = Tensor::scalar(0.3, true);
    Tensor loss = add(sigmoid(x), tanh(x));
    backward(loss);
    const double s = sigmoid_value(0.3);
    const double expected = s * (1.0 - s) + (1.0 - std::tanh(0.3) * std::tanh(0.3));
    CHECK(x.grad()[0] == Catch::Approx(expected).epsilon(1e-12));
  }
  SECTION("non-scalar root is a usage error") {
    Tensor x = Tensor::from_values(1, 2, {1.0, 2.0}, true);
    CHECK_THROWS_AS(backward(sigmoid(x)), usage_error);
  }
}

TEST_CASE("every primitive passes a finite-difference gradient check") {
  RngStream rng(991);
  FdCheckOptions opt;

  // 20 random instances per primitive; 1e-4 relative tolerance throughout.
  for (int rep = 0; rep < 20; ++rep) {
    {
      Tensor a = random_tensor(3, 4, rng), b = random_tensor(4, 2, rng);
      std::vector<Tensor> ps{a, b};
      CHECK(finite_difference_check([&] { return sum_all(matmul(a, b)); }, ps, opt) < 1e-4);
    }
    {
      Tensor a = random_tensor(2, 3, rng), b = random_tensor(2, 3, rng);
      std::vector<Tensor> ps{a, b};
      CHECK(finite_difference_check([&] { return sum_all(mul(add(a, b), sub(a, b))); }, ps, opt) <
            1e-4);
    }
    {
      Tensor a = random_tensor(2, 3, rng), row = random_tensor(1, 3, rng);
      std::vector<Tensor> ps{a, row};
      CHECK(finite_difference_check([&] { return mean_all(mul(a, row)); }, ps, opt) < 1e-4);
    }
    {
      Tensor a = random_tensor(2, 3, rng);
      Tensor b = random_tensor(2, 3, rng, true, 0.5, 2.0);  // away from zero
      std::vector<Tensor> ps{a, b};
      CHECK(finite_difference_check([&] { return sum_all(div(a, b)); }, ps, opt) < 1e-4);
    }
    {
      Tensor a = random_tensor(3, 3, rng);
      std::vector<Tensor> ps{a};
      CHECK(finite_difference_check(
                [&] { return sum_all(add(sigmoid(a), add(tanh(a), scalar_mul(a, 1.7)))); }, ps,
                opt) < 1e-4);
    }
    {
      Tensor a = random_tensor(3, 3, rng);
      avoid_kink(a, 0.0);
      std::vector<Tensor> ps{a};
      CHECK(finite_difference_check([&] { return sum_all(relu(a)); }, ps, opt) < 1e-4);
      CHECK(finite_difference_check([&] { return sum_all(softplus(a)); }, ps, opt) < 1e-4);
    }
    {
      Tensor a = random_tensor(2, 4, rng, true, 0.2, 3.0);
      std::vector<Tensor> ps{a};
      CHECK(finite_difference_check([&] { return sum_all(log(a)); }, ps, opt) < 1e-4);
      CHECK(finite_difference_check([&] { return sum_all(sqrt(a)); }, ps, opt) < 1e-4);
    }
    {
      Tensor a = random_tensor(3, 2, rng), b = random_tensor(3, 3, rng);
      std::vector<Tensor> ps{a, b};
      CHECK(finite_difference_check(
                [&] { return sum_all(mul(concat_cols(a, b), concat_cols(b, a))); }, ps, opt) <
            1e-4);
      CHECK(finite_difference_check([&] { return sum_all(slice_cols(concat_cols(a, b), 1, 4)); },
                                    ps, opt) < 1e-4);
    }
    {
      Tensor a = random_tensor(3, 4, rng);
      std::vector<Tensor> ps{a};
      CHECK(finite_difference_check([&] { return sum_all(tanh(transpose(a))); }, ps, opt) < 1e-4);
      CHECK(finite_difference_check([&] { return sum_all(sigmoid(row_select(a, 1))); }, ps, opt) <
            1e-4);
      CHECK(finite_difference_check([&] { return sum_all(mul(mean_rows(a), mean_rows(a))); }, ps,
                                    opt) < 1e-4);
      CHECK(finite_difference_check([&] { return mean_all(a); }, ps, opt) < 1e-4);
    }
    {
      Tensor a = random_tensor(2, 3, rng, true, 0.0, 1.0);
      avoid_kink(a, 0.5);
      std::vector<Tensor> ps{a};
      CHECK(finite_difference_check([&] { return sum_all(tent(a)); }, ps, opt) < 1e-4);
    }
  }
}

TEST_CASE("clip_grad_norm scales exactly at the threshold") {
  SECTION("a 3-4-5 gradient clips to 3/5 scale") {
    Tensor p = Tensor::from_values(1, 2, {0.0, 0.0}, true);
    p.grad() = {3.0, 4.0};
    std::vector<Tensor> ps{p};
    const double pre = clip_grad_norm(ps, 3.0);
    CHECK(pre == Catch::Approx(5.0));
    CHECK(p.grad()[0] == Catch::Approx(1.8));
    CHECK(p.grad()[1] == Catch::Approx(2.4));
  }
  SECTION("under the threshold nothing changes") {
    Tensor p = Tensor::from_values(1, 1, {0.0}, true);
    p.grad() = {1.0};
    std::vector<Tensor> ps{p};
    CHECK(clip_grad_norm(ps, 3.0) == Catch::Approx(1.0));
    CHECK(p.grad()[0] == 1.0);
  }
  SECTION("zero gradients return zero") {
    Tensor p = Tensor::zeros(2, 2, true);
    std::vector<Tensor> ps{p};
    CHECK(clip_grad_norm(ps, 3.0) == 0.0);
  }
  SECTION("idempotent: clipping twice equals clipping once") {
    Tensor p = Tensor::from_values(1, 3, {0, 0, 0}, true);
    p.grad() = {5.0, -2.0, 7.0};
    std::vector<Tensor> ps{p};
    clip_grad_norm(ps, 3.0);
    const std::vector<double> once = p.grad();
    const double second = clip_grad_norm(ps, 3.0);
    CHECK(second == Catch::Approx(3.0));
    CHECK(p.grad() == once);
  }
}

TEST_CASE("adam_step matches the hand-evaluated first step") {
  SECTION("unit gradient moves the parameter by about lr") {
    Tensor p = Tensor::scalar(1.0, true);
    p.grad() = {1.0};
    std::vector<Tensor> ps{p};
    AdamState st;
    st.cfg = AdamConfig{0.001, 0.9, 0.999, 1e-8, 0.0};
    adam_step(ps, st);
    // m-hat / sqrt(v-hat) = 1 exactly on step one, up to eps.
    CHECK(p.values()[0] == Catch::Approx(1.0 - 0.001).epsilon(1e-6));
    CHECK(st.t == 1);
    CHECK(p.grad()[0] == 0.0);  // grads cleared by the step
  }
  SECTION("zero gradient and zero weight decay is the identity") {
    Tensor p = Tensor::scalar(0.7, true);
    p.grad() = {0.0};
    std::vector<Tensor> ps{p};
    AdamState st;
    st.cfg = AdamConfig{0.001, 0.9, 0.999, 1e-8, 0.0};
    adam_step(ps, st);
    CHECK(p.values()[0] == 0.7);
  }
  SECTION("weight decay shrinks by lr*wd*param even with zero gradient") {
    Tensor p = Tensor::scalar(1.0, true);
    p.grad() = {0.0};
    std::vector<Tensor> ps{p};
    AdamState st;
    st.cfg = AdamConfig{0.01, 0.9, 0.999, 1e-8, 0.1};
    adam_step(ps, st);
    CHECK(p.values()[0] == Catch::Approx(1.0 - 0.01 * 0.1 * 1.0).epsilon(1e-12));
  }
  SECTION("identical state and gradients give bit-identical updates") {
    auto run = [] {
      Tensor p = Tensor::from_values(1, 2, {0.4, -0.2}, true);
      p.grad() = {0.3, -1.1};
      std::vector<Tensor> ps{p};
      AdamState st;
      st.cfg = AdamConfig{0.001, 0.9, 0.999, 1e-8, 0.0001};
      adam_step(ps, st);
      p.grad() = {0.1, 0.9};
      adam_step(ps, st);
      return p.values();
    };
    CHECK(run() == run());
  }
}

TEST_CASE("plateau scheduler reduces lr exactly on schedule") {
  PlateauScheduler sched(0.001, 0.5, 3, 1e-5);
  CHECK_FALSE(sched.observe(10.0));  // establishes best
  CHECK_FALSE(sched.observe(11.0));
  CHECK_FALSE(sched.observe(12.0));
  CHECK(sched.observe(10.5));  // third non-improving epoch triggers
  CHECK(sched.lr == Catch::Approx(0.0005));

  // Improvement resets the wait counter; lr never rises.
  CHECK_FALSE(sched.observe(9.0));
  CHECK(sched.lr == Catch::Approx(0.0005));

  // Repeated decay respects the floor.
  for (int i = 0; i < 100; ++i) sched.observe(100.0);
  CHECK(sched.lr >= 1e-5);
  CHECK(sched.lr == Catch::Approx(1e-5));
}

TEST_CASE("finite_difference_check calibration") {
  SECTION("quadratic loss is exact to 1e-8") {
    RngStream rng(7);
    Tensor x = random_tensor(2, 3, rng);
    std::vector<Tensor> ps{x};
    const double err = finite_difference_check(
        [&] { return scalar_mul(sum_all(mul(x, x)), 0.5); }, ps, {});
    CHECK(err < 1e-8);
  }
  SECTION("constant loss reports zero error") {
    Tensor x = Tensor::scalar(2.0, true);
    std::vector<Tensor> ps{x};
    const double err =
        finite_difference_check([] { return Tensor::scalar(5.0, true); }, ps, {});
    CHECK(err == 0.0);
  }
}
