#include <doctest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "searchreg/encoder.hpp"
#include "searchreg/gru.hpp"

using namespace sreg;

namespace {

template <typename T>
Tensor<T> deep_copy(const Tensor<T>& t) {
  return Tensor<T>::from_data(
      t.shape(), std::vector<T>(t.values().begin(), t.values().end()),
      t.requires_grad());
}

template <typename T>
EncoderParams<T> copy_params(const EncoderParams<T>& p) {
  EncoderParams<T> out;
  auto copy_layer = [](const ConvBnLayer<T>& l) {
    ConvBnLayer<T> c;
    c.w = deep_copy(l.w);
    c.gamma = deep_copy(l.gamma);
    c.beta = deep_copy(l.beta);
    c.running_mean = deep_copy(l.running_mean);
    c.running_var = deep_copy(l.running_var);
    c.stride = l.stride;
    c.padding = l.padding;
    return c;
  };
  out.stem = copy_layer(p.stem);
  out.down1 = copy_layer(p.down1);
  out.conv1 = copy_layer(p.conv1);
  out.down2 = copy_layer(p.down2);
  out.conv2 = copy_layer(p.conv2);
  out.fuse = copy_layer(p.fuse);
  out.feat_w = deep_copy(p.feat_w);
  out.feat_b = deep_copy(p.feat_b);
  out.ctx_w = deep_copy(p.ctx_w);
  out.ctx_b = deep_copy(p.ctx_b);
  return out;
}

template <typename T>
std::vector<Tensor<T>> trunk_tensors(EncoderParams<T>& p) {
  std::vector<Tensor<T>> out;
  for (ConvBnLayer<T>* l :
       {&p.stem, &p.down1, &p.conv1, &p.down2, &p.conv2, &p.fuse}) {
    out.push_back(l->w);
    out.push_back(l->gamma);
    out.push_back(l->beta);
  }
  return out;
}

}  // namespace

TEST_CASE("encoding identical images gives identical feature maps") {
  Rng rng(100);
  auto params = make_encoder_params<float>(rng);
  auto img = oracle::rand_tensor<float>(rng, {1, 32, 32}, 0, 1);
  auto fm = encode(img, img, params, false);  // batch norm in eval mode
  CHECK(oracle::max_abs_diff(fm.moving_feat.values(), fm.fixed_feat.values()) <=
        1e-6);
}

TEST_CASE("encoder output geometry at the echo image size") {
  Rng rng(101);
  auto params = make_encoder_params<float>(rng);
  auto moving = oracle::rand_tensor<float>(rng, {1, 160, 160}, 0, 1);
  auto fixed = oracle::rand_tensor<float>(rng, {1, 160, 160}, 0, 1);
  auto fm = encode(moving, fixed, params, false);
  CHECK(fm.moving_feat.shape() == Shape{4, 80, 80});
  CHECK(fm.fixed_feat.shape() == Shape{4, 80, 80});
  CHECK(fm.context.shape() == Shape{32, 80, 80});
}

TEST_CASE("encode rejects sizes not divisible by 4") {
  Rng rng(102);
  auto params = make_encoder_params<float>(rng);
  auto img = oracle::rand_tensor<float>(rng, {1, 10, 10}, 0, 1);
  CHECK_THROWS_WITH_AS(encode(img, img, params, false),
                       doctest::Contains("pad"), std::invalid_argument);
}

TEST_CASE("gradient reaches every encoder parameter") {
  Rng rng(103);
  auto params = make_encoder_params<double>(rng);
  auto moving = oracle::rand_tensor<double>(rng, {1, 16, 16}, 0, 1);
  auto fixed = oracle::rand_tensor<double>(rng, {1, 16, 16}, 0, 1);
  {
    GradientTape<double> tape;
    auto fm = encode(moving, fixed, params, true);
    auto loss = add(sum(fm.moving_feat), add(sum(fm.fixed_feat), sum(fm.context)));
    backward(loss);
  }
  auto all = trunk_tensors(params);
  all.push_back(params.feat_w);
  all.push_back(params.feat_b);
  all.push_back(params.ctx_w);
  all.push_back(params.ctx_b);
  for (std::size_t i = 0; i < all.size(); ++i) {
    double mag = 0;
    for (double g : all[i].grad()) mag = std::max(mag, std::abs(g));
    INFO("parameter ", i);
    CHECK(mag > 0.0);
  }
}

TEST_CASE("shared trunk accumulates gradients from both heads") {
  Rng rng(104);
  auto combined = make_encoder_params<double>(rng);
  auto feat_only = copy_params(combined);
  auto ctx_only = copy_params(combined);
  auto moving = oracle::rand_tensor<double>(rng, {1, 16, 16}, 0, 1);
  auto fixed = oracle::rand_tensor<double>(rng, {1, 16, 16}, 0, 1);

  {
    GradientTape<double> tape;
    auto fm = encode(moving, fixed, combined, true);
    backward(add(sum(fm.moving_feat), add(sum(fm.fixed_feat), sum(fm.context))));
  }
  {
    GradientTape<double> tape;
    auto tf = encoder_trunk(fixed, feat_only, true);
    auto tm = encoder_trunk(moving, feat_only, true);
    backward(add(sum(feature_head(tf, feat_only)),
                 sum(feature_head(tm, feat_only))));
  }
  {
    GradientTape<double> tape;
    auto tf = encoder_trunk(fixed, ctx_only, true);
    auto tm = encoder_trunk(moving, ctx_only, true);
    backward(add(sum(context_head(tf, ctx_only)),
                 sum(context_head(tm, ctx_only))));
  }

  auto a = trunk_tensors(combined);
  auto b = trunk_tensors(feat_only);
  auto c = trunk_tensors(ctx_only);
  for (std::size_t t = 0; t < a.size(); ++t) {
    const auto ga = a[t].grad();
    const auto gb = b[t].grad();
    const auto gc = c[t].grad();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double expect = gb[i] + gc[i];
      CHECK(ga[i] == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("encode is deterministic in eval mode") {
  Rng rng(105);
  auto params = make_encoder_params<float>(rng);
  auto moving = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
  auto fixed = oracle::rand_tensor<float>(rng, {1, 16, 16}, 0, 1);
  auto a = encode(moving, fixed, params, false);
  auto b = encode(moving, fixed, params, false);
  CHECK(std::memcmp(a.context.values().data(), b.context.values().data(),
                    std::size_t(a.context.numel()) * 4) == 0);
  CHECK(std::memcmp(a.moving_feat.values().data(), b.moving_feat.values().data(),
                    std::size_t(a.moving_feat.numel()) * 4) == 0);
}

namespace {

GruParams<float> zero_gru(int in_ch, int hidden) {
  Rng rng(0);
  auto p = make_gru_params<float>(rng, in_ch, hidden);
  for (Tensor<float>* t : {&p.wxr, &p.whr, &p.br, &p.wxz, &p.whz, &p.bz,
                           &p.wxh, &p.whh, &p.bh}) {
    auto v = t->values_mut();
    std::fill(v.begin(), v.end(), 0.0f);
  }
  return p;
}

}  // namespace

TEST_CASE("gru with all-zero weights halves the previous hidden state") {
  Rng rng(106);
  auto p = zero_gru(5, 3);
  auto x = oracle::rand_tensor<float>(rng, {5, 4, 4}, -1, 1);
  auto h = oracle::rand_tensor<float>(rng, {3, 4, 4}, -1, 1);
  auto out = gru_cell(x, h, p);
  for (std::size_t i = 0; i < out.values().size(); ++i)
    CHECK(out.values()[i] == 0.5f * h.values()[i]);
}

TEST_CASE("gru with a saturated update gate returns the candidate") {
  Rng rng(107);
  auto p = zero_gru(5, 3);
  {
    auto v = p.bz.values_mut();
    std::fill(v.begin(), v.end(), 30.0f);  // z -> 1
  }
  {
    auto v = p.bh.values_mut();
    std::fill(v.begin(), v.end(), 0.8f);  // candidate = tanh(0.8)
  }
  auto x = oracle::rand_tensor<float>(rng, {5, 4, 4}, -1, 1);
  auto h = oracle::rand_tensor<float>(rng, {3, 4, 4}, -1, 1);
  auto out = gru_cell(x, h, p);
  const float cand = std::tanh(0.8f);
  for (float v : out.values()) CHECK(std::abs(v - cand) <= 1e-4f);
}

TEST_CASE("gru output stays inside the hull of hidden state and (-1,1)") {
  Rng rng(108);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = make_gru_params<float>(rng, 4, 3);
    // widen the random range beyond init scale
    for (Tensor<float>* t : {&p.wxr, &p.whr, &p.wxz, &p.whz, &p.wxh, &p.whh}) {
      auto v = t->values_mut();
      for (auto& x : v) x = float(rng.uniform(-1.5, 1.5));
    }
    auto x = oracle::rand_tensor<float>(rng, {4, 3, 3}, -3, 3);
    auto h = oracle::rand_tensor<float>(rng, {3, 3, 3}, -2, 2);
    float hmax = 1.0f;
    for (float v : h.values()) hmax = std::max(hmax, std::abs(v));
    auto out = gru_cell(x, h, p);
    for (float v : out.values()) CHECK(std::abs(v) <= hmax + 1e-6f);
  }
}

TEST_CASE("gru fixed point: candidate equal to hidden keeps it exactly") {
  auto p = zero_gru(2, 3);
  {
    auto v = p.bh.values_mut();
    std::fill(v.begin(), v.end(), 0.3f);
  }
  // zero weights make the candidate tanh(0.3) everywhere; seed the hidden
  // state with exactly that value
  const float fp = std::tanh(0.3f);
  auto x = Tensor<float>::zeros({2, 4, 4});
  auto h = Tensor<float>::filled({3, 4, 4}, fp);
  auto out = gru_cell(x, h, p);
  for (float v : out.values()) CHECK(v == fp);
}

TEST_CASE("gru rejects channel mismatches") {
  Rng rng(109);
  auto p = make_gru_params<float>(rng, 5, 3);
  auto x_bad = Tensor<float>::zeros({4, 4, 4});
  auto h = Tensor<float>::zeros({3, 4, 4});
  CHECK_THROWS_AS(gru_cell(x_bad, h, p), std::invalid_argument);
  auto x = Tensor<float>::zeros({5, 4, 4});
  auto h_bad = Tensor<float>::zeros({2, 4, 4});
  CHECK_THROWS_AS(gru_cell(x, h_bad, p), std::invalid_argument);
}

TEST_CASE("gru gradients match finite differences") {
  Rng rng(110);
  auto p = make_gru_params<double>(rng, 3, 2);
  auto x = oracle::rand_tensor<double>(rng, {3, 4, 4}, -1, 1, true);
  auto h = oracle::rand_tensor<double>(rng, {2, 4, 4}, -1, 1, true);
  auto weights = oracle::rand_tensor<double>(rng, {2, 4, 4}, -1, 1);
  oracle::check_gradients(
      [&] { return sum(mul(gru_cell(x, h, p), weights)); },
      {x, h, p.wxr, p.whr, p.br, p.wxz, p.whz, p.bz, p.wxh, p.whh, p.bh}, rng,
      4);
}

TEST_CASE("flow head with zero weights emits a zero update") {
  Rng rng(111);
  auto p = make_flow_head_params<float>(rng, 8);
  for (Tensor<float>* t : {&p.w1, &p.b1, &p.w2, &p.b2}) {
    auto v = t->values_mut();
    std::fill(v.begin(), v.end(), 0.0f);
  }
  auto h = oracle::rand_tensor<float>(rng, {8, 5, 5}, -1, 1);
  auto delta = flow_head(h, p);
  CHECK(delta.shape() == Shape{2, 5, 5});
  for (float v : delta.values()) CHECK(v == 0.0f);
}

TEST_CASE("flow head maps 64-channel hidden states to 2-channel updates") {
  Rng rng(112);
  auto p = make_flow_head_params<float>(rng, 64);
  for (int h : {4, 7}) {
    auto hidden = oracle::rand_tensor<float>(rng, {64, h, h + 1}, -1, 1);
    CHECK(flow_head(hidden, p).shape() == Shape{2, h, h + 1});
  }
}

TEST_CASE("flow head gradients match finite differences") {
  Rng rng(113);
  auto p = make_flow_head_params<double>(rng, 6, 5);
  auto h = oracle::rand_tensor<double>(rng, {6, 4, 4}, -1, 1, true);
  auto weights = oracle::rand_tensor<double>(rng, {2, 4, 4}, -1, 1);
  oracle::check_gradients(
      [&] { return sum(mul(flow_head(h, p), weights)); },
      {h, p.w1, p.b1, p.w2, p.b2}, rng);
}
