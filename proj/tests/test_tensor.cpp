#include <doctest.h>

#include <cstring>

#include "oracles.hpp"
#include "searchreg/ops.hpp"
#include "searchreg/tensor.hpp"

using namespace sreg;

TEST_CASE("tensor shape and data stay consistent") {
  auto t = Tensor<float>::zeros({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.rank() == 3);
  CHECK(t.dim(-1) == 4);
  CHECK_THROWS_AS(Tensor<float>::from_data({2, 2}, {1.0f, 2.0f, 3.0f}),
                  std::invalid_argument);
  auto s = Tensor<float>::from_data({}, {7.0f});
  CHECK(s.numel() == 1);
  CHECK(s.item() == 7.0f);
}

TEST_CASE("backward of sum of squares is 2x") {
  Rng rng(7);
  auto x = oracle::rand_tensor<double>(rng, {3, 4}, -2, 2, true);
  GradientTape<double> tape;
  auto loss = sum(mul(x, x));
  backward(loss);
  const auto xv = x.values();
  const auto g = x.grad();
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(g[i] == doctest::Approx(2.0 * xv[i]).epsilon(1e-12));
}

TEST_CASE("constant loss leaves leaf gradients at zero") {
  auto x = Tensor<double>::filled({5}, 1.5, true);
  auto c = Tensor<double>::filled({}, 3.0);
  GradientTape<double> tape;
  auto loss = add_scalar(c, 1.0);
  backward(loss);
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("backward twice accumulates leaf gradients") {
  auto x = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
  GradientTape<double> tape;
  auto loss = sum(mul(x, x));
  backward(loss);
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(4.0));
  CHECK(x.grad()[1] == doctest::Approx(8.0));
}

TEST_CASE("backward rejects non-scalar losses and missing tapes") {
  auto x = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
  {
    GradientTape<double> tape;
    auto y = mul(x, x);
    CHECK_THROWS_AS(backward(y), std::invalid_argument);
  }
  auto s = Tensor<double>::filled({}, 1.0, true);
  CHECK_THROWS_AS(backward(s), std::logic_error);
}

TEST_CASE("ops run untracked without an active tape") {
  auto x = Tensor<float>::from_data({2}, {1.0f, 2.0f}, true);
  auto y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.values()[1] == 4.0f);
}

TEST_CASE("tape replay is bitwise deterministic") {
  auto run = [] {
    Rng rng(123);
    auto x = oracle::rand_tensor<float>(rng, {4, 5}, -1, 1, true);
    auto w = oracle::rand_tensor<float>(rng, {4, 5}, -1, 1, true);
    GradientTape<float> tape;
    auto loss = mean(mul(sigmoid(mul(x, w)), tanh(add(x, w))));
    backward(loss);
    std::vector<float> out{loss.item()};
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    return out;
  };
  const auto a = run(), b = run();
  CHECK(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("elementwise op gradients match finite differences") {
  Rng rng(42);
  for (int trial = 0; trial < 3; ++trial) {
    auto a = oracle::rand_tensor_no_kink<double>(rng, {2, 3, 3}, true);
    auto b = oracle::rand_tensor_no_kink<double>(rng, {2, 3, 3}, true);
    oracle::check_gradients(
        [&] {
          auto p = mul(add(a, b), sub(a, b));
          auto q = div(sigmoid(a), add_scalar(mul(b, b), 1.0));
          auto r = leaky_relu(tanh(scale(a, 0.7)), 0.1);
          return add(mean(p), add(sum(q), mean(r)));
        },
        {a, b}, rng);
  }
}

TEST_CASE("sqrt gradient matches finite differences") {
  Rng rng(43);
  auto a = oracle::rand_tensor<double>(rng, {7}, 0.2, 3.0, true);
  oracle::check_gradients([&] { return mean(sreg::sqrt(a)); }, {a}, rng);
}

TEST_CASE("reshape concat slice crop gradients match finite differences") {
  Rng rng(44);
  auto a = oracle::rand_tensor<double>(rng, {2, 4, 4}, -1, 1, true);
  auto b = oracle::rand_tensor<double>(rng, {3, 4, 4}, -1, 1, true);
  oracle::check_gradients(
      [&] {
        auto cat = concat_channels<double>({a, b});
        auto piece = slice_channels(cat, 1, 4);
        auto flat = reshape(piece, {3 * 4, 4});
        auto window = crop2d(flat, 2, 9, 1, 4);
        return mean(mul(window, window));
      },
      {a, b}, rng);
}
