#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

#include "oracles.hpp"
#include "searchreg/adam.hpp"
#include "searchreg/errors.hpp"
#include "searchreg/ops.hpp"
#include "searchreg/tnsr_io.hpp"

using namespace sreg;

TEST_CASE("adam first step moves a unit-gradient scalar by ~lr") {
  auto theta = Tensor<double>::filled({}, 1.0, true);
  theta.grad_mut()[0] = 1.0;
  AdamState<double> state;
  state.learning_rate = 1e-3;
  std::vector<Tensor<double>> params{theta};
  adam_step(state, params);
  // mhat = vhat = 1 at t=1, so the step is lr / (1 + eps)
  CHECK(std::abs(theta.item() - 0.999) <= 1e-6);
  CHECK(state.step == 1);
  // gradient zeroed after the update
  CHECK(theta.grad()[0] == 0.0);
}

TEST_CASE("adam leaves parameters unchanged for zero gradients") {
  Rng rng(21);
  auto p = oracle::rand_tensor<float>(rng, {3, 3}, -1, 1, true);
  const std::vector<float> before(p.values().begin(), p.values().end());
  p.zero_grad();
  p.grad();  // materialize zeros
  AdamState<float> state;
  std::vector<Tensor<float>> params{p};
  adam_step(state, params);
  CHECK(std::memcmp(before.data(), p.values().data(),
                    before.size() * sizeof(float)) == 0);
}

TEST_CASE("adam trajectories are bitwise deterministic") {
  auto run = [] {
    Rng rng(5);
    auto p = oracle::rand_tensor<float>(rng, {4}, -1, 1, true);
    AdamState<float> state;
    std::vector<Tensor<float>> params{p};
    for (int step = 0; step < 20; ++step) {
      {
        GradientTape<float> tape;
        backward(sum(mul(p, p)));
      }
      adam_step(state, params);
    }
    return std::vector<float>(p.values().begin(), p.values().end());
  };
  const auto a = run(), b = run();
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("adam rejects parameters with no populated gradient") {
  auto p = Tensor<float>::filled({2}, 1.0f, true);
  AdamState<float> state;
  std::vector<Tensor<float>> params{p};
  CHECK_THROWS_AS(adam_step(state, params), std::invalid_argument);
}

TEST_CASE("adam converges on a quadratic") {
  auto p = Tensor<float>::from_data({2}, {3.0f, -2.0f}, true);
  AdamState<float> state;
  state.learning_rate = 0.05f;
  std::vector<Tensor<float>> params{p};
  for (int step = 0; step < 400; ++step) {
    {
      GradientTape<float> tape;
      backward(sum(mul(p, p)));
    }
    adam_step(state, params);
  }
  CHECK(std::abs(p.values()[0]) < 1e-2);
  CHECK(std::abs(p.values()[1]) < 1e-2);
}

TEST_CASE("TNSR round-trips bit exactly") {
  Rng rng(31);
  auto t = oracle::rand_tensor<float>(rng, {2, 3, 4}, -10, 10);
  std::stringstream buf;
  write_tnsr(buf, t);
  auto back = read_tnsr(buf);
  CHECK(back.shape() == t.shape());
  CHECK(std::memcmp(back.values().data(), t.values().data(),
                    std::size_t(t.numel()) * 4) == 0);

  auto scalar = Tensor<float>::filled({}, 3.5f);
  std::stringstream buf2;
  write_tnsr(buf2, scalar);
  CHECK(read_tnsr(buf2).item() == 3.5f);
}

TEST_CASE("TNSR rejects bad magic and truncated payloads") {
  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_tnsr(bad), DataError);

  auto t = Tensor<float>::filled({4}, 1.0f);
  std::stringstream buf;
  write_tnsr(buf, t);
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 7);  // cut into the payload
  std::stringstream truncated(bytes);
  CHECK_THROWS_AS(read_tnsr(truncated), DataError);
}

TEST_CASE("TNSR file helpers work") {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "sreg_test_tensor.tnsr";
  auto t = Tensor<float>::from_data({2, 2}, {1, 2, 3, 4});
  save_tnsr(path.string(), t);
  auto back = load_tnsr(path.string());
  CHECK(back.shape() == t.shape());
  CHECK(back.values()[3] == 4.0f);
  fs::remove(path);
  CHECK_THROWS_AS(load_tnsr(path.string()), DataError);
}
