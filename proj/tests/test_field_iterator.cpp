#include <doctest.h>

#include <cstring>

#include "oracles.hpp"
#include "searchreg/model.hpp"
#include "searchreg/warp_loss.hpp"

using namespace sreg;

namespace {

RegistrationConfig small_cfg(int iters = 4) {
  RegistrationConfig cfg = desk_preset();
  cfg.image_height = 16;
  cfg.image_width = 16;
  cfg.num_iters = iters;
  return cfg;
}

template <typename T>
void zero_all(RegistrationModel<T>& model) {
  for (auto& [name, tensor] : model.parameters()) {
    auto v = tensor.values_mut();
    std::fill(v.begin(), v.end(), T(0));
  }
}

}  // namespace

TEST_CASE("zero network produces exactly zero fields at every step") {
  RegistrationModel<float> model(small_cfg(), 11);
  zero_all(model);
  Rng rng(300);
  auto moving = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
  auto fixed = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
  auto result = model.forward(moving, fixed, false);
  CHECK(result.steps.size() == 4);
  for (const auto& step : result.steps) {
    for (float v : step.fx.values()) CHECK(v == 0.0f);
    for (float v : step.fy.values()) CHECK(v == 0.0f);
  }
  for (float v : result.full.fx.values()) CHECK(v == 0.0f);
  for (float v : result.full.fy.values()) CHECK(v == 0.0f);
  CHECK(result.full.resolution == FieldResolution::full);
  CHECK(result.full.rows() == 16);
}

TEST_CASE("default iteration count is 4") {
  CHECK(RegistrationConfig{}.num_iters == 4);
  CHECK(small_cfg().num_iters == 4);
}

TEST_CASE("one iteration equals the manual composition of the pieces") {
  RegistrationConfig cfg = small_cfg(1);
  RegistrationModel<float> model(cfg, 17);
  Rng rng(301);
  auto moving = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
  auto fixed = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);

  auto result = model.forward(moving, fixed, false);

  // by hand: lookup at the zero field, gru, flow head
  auto fm = encode(moving, fixed, model.encoder, false);
  auto pyr = build_pyramid(
      compute_cost_volume(fm.moving_feat, fm.fixed_feat, cfg.normalize_cost_volume));
  auto fx0 = Tensor<float>::zeros({8, 8});
  auto fy0 = Tensor<float>::zeros({8, 8});
  auto smap = search_lookup(pyr, fx0, fy0, cfg.radius);
  auto hidden0 = Tensor<float>::zeros({RegistrationModel<float>::kHiddenChannels, 8, 8});
  auto hidden = gru_cell(concat_channels<float>({smap, fm.context}), hidden0, model.gru);
  auto delta = flow_head(hidden, model.head);

  const auto got_fx = result.steps[0].fx.values();
  const auto got_fy = result.steps[0].fy.values();
  for (int i = 0; i < 64; ++i) {
    CHECK(got_fx[std::size_t(i)] ==
          doctest::Approx(delta.values()[std::size_t(i)]).epsilon(1e-6));
    CHECK(got_fy[std::size_t(i)] ==
          doctest::Approx(delta.values()[std::size_t(64 + i)]).epsilon(1e-6));
  }
}

TEST_CASE("iterate counts one search-map lookup per iteration") {
  for (int iters : {1, 3, 4}) {
    RegistrationModel<float> model(small_cfg(iters), 23);
    Rng rng(302);
    auto moving = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
    auto fixed = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
    auto result = model.forward(moving, fixed, false);
    CHECK(result.lookup_count == iters);
    CHECK(int(result.steps.size()) == iters);
  }
}

TEST_CASE("iterate validates its configuration") {
  RegistrationModel<float> model(small_cfg(), 29);
  Rng rng(303);
  auto moving = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
  auto fixed = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
  auto fm = encode(moving, fixed, model.encoder, false);
  auto pyr = build_pyramid(compute_cost_volume(fm.moving_feat, fm.fixed_feat));
  RegistrationConfig bad = small_cfg();
  bad.num_iters = 0;
  CHECK_THROWS_AS(iterate(fm, pyr, model.gru, model.head, bad),
                  std::invalid_argument);
}

TEST_CASE("finalize doubles a constant field and its resolution") {
  DeformationField<float> half{Tensor<float>::filled({4, 4}, 1.0f),
                               Tensor<float>::zeros({4, 4}),
                               FieldResolution::half};
  auto full = finalize(half);
  CHECK(full.resolution == FieldResolution::full);
  CHECK(full.fx.shape() == Shape{8, 8});
  for (float v : full.fx.values()) CHECK(v == doctest::Approx(2.0f));
  for (float v : full.fy.values()) CHECK(v == 0.0f);
  CHECK_THROWS_AS(finalize(full), std::invalid_argument);
}

TEST_CASE("finalize of the zero field is zero") {
  auto full = finalize(zero_field<float>(5, 7));
  for (float v : full.fx.values()) CHECK(v == 0.0f);
  for (float v : full.fy.values()) CHECK(v == 0.0f);
}

TEST_CASE("finalize of a linear ramp matches the scalar oracle") {
  std::vector<float> ramp(16);
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 4; ++u) ramp[std::size_t(v) * 4 + u] = float(u);
  DeformationField<float> half{Tensor<float>::from_data({4, 4}, std::move(ramp)),
                               Tensor<float>::zeros({4, 4}),
                               FieldResolution::half};
  auto full = finalize(half);
  for (int oy = 0; oy < 8; ++oy)
    for (int ox = 0; ox < 8; ++ox) {
      const float expect = 2.0f * oracle::bilinear_clamped(
                                      half.fx.values().data(), 4, 4,
                                      0.5f * ox - 0.25f, 0.5f * oy - 0.25f);
      CHECK(full.fx.at({oy, ox}) == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("gradients reach encoder, gru and flow head through the loop") {
  RegistrationConfig cfg = small_cfg(2);
  RegistrationModel<double> model(cfg, 31);
  Rng rng(304);
  auto moving = oracle::rand_tensor<double>(rng, {1, 16, 16}, 0, 1);
  auto fixed = oracle::rand_tensor<double>(rng, {1, 16, 16}, 0, 1);
  {
    GradientTape<double> tape;
    auto result = model.forward(moving, fixed, true);
    auto loss = total_loss(moving, fixed, result.full, loss_config_from(cfg));
    backward(loss);
  }
  for (auto& [name, tensor] : model.parameters()) {
    double mag = 0;
    for (double g : tensor.grad()) mag = std::max(mag, std::abs(g));
    INFO("parameter ", name);
    CHECK(mag > 0.0);
  }
}

TEST_CASE("iteration is deterministic") {
  auto run = [] {
    RegistrationModel<float> model(small_cfg(), 37);
    Rng rng(305);
    auto moving = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
    auto fixed = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
    auto result = model.forward(moving, fixed, false);
    return std::vector<float>(result.full.fx.values().begin(),
                              result.full.fx.values().end());
  };
  const auto a = run(), b = run();
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("field input flag widens the gru input") {
  RegistrationConfig cfg = small_cfg();
  cfg.gru_field_input = true;
  RegistrationModel<float> model(cfg, 41);
  CHECK(model.gru_input_channels() == model.search_map_channels() + 32 + 2);
  Rng rng(306);
  auto moving = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
  auto fixed = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
  auto result = model.forward(moving, fixed, false);  // runs end to end
  CHECK(result.full.rows() == 16);
}
