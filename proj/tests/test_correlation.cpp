#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "searchreg/correlation.hpp"
#include "searchreg/ops.hpp"

using namespace sreg;

TEST_CASE("cost volume of a single pixel pair is the channel inner product") {
  auto m = Tensor<float>::from_data({2, 1, 1}, {1, 2});
  auto f = Tensor<float>::from_data({2, 1, 1}, {3, 4});
  auto cv = compute_cost_volume(m, f);
  CHECK(cv.values.shape() == Shape{1, 1, 1, 1});
  CHECK(cv.values.item() == 11.0f);
}

TEST_CASE("orthonormal one-hot features produce a 0/1 cost volume") {
  // basis assignment per pixel: (0,0)->e0, (0,1)->e1, (1,0)->e2, (1,1)->e0
  std::vector<float> mv(4 * 2 * 2, 0.0f), fv(4 * 2 * 2, 0.0f);
  const int basis[4] = {0, 1, 2, 0};
  for (int p = 0; p < 4; ++p) {
    mv[std::size_t(basis[p]) * 4 + p] = 1.0f;
    fv[std::size_t(basis[p]) * 4 + p] = 1.0f;
  }
  auto m = Tensor<float>::from_data({4, 2, 2}, std::move(mv));
  auto f = Tensor<float>::from_data({4, 2, 2}, std::move(fv));
  auto cv = compute_cost_volume(m, f);
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) {
      const float expect = basis[p] == basis[q] ? 1.0f : 0.0f;
      CHECK(cv.values.values()[std::size_t(p) * 4 + q] == expect);
    }
}

TEST_CASE("cost volume matches brute force on every small shape") {
  Rng rng(200);
  for (int h = 1; h <= 6; ++h)
    for (int w = 1; w <= 6; ++w)
      for (int d = 1; d <= 4; ++d) {
        auto m = oracle::rand_tensor<float>(rng, {d, h, w}, -1, 1);
        auto f = oracle::rand_tensor<float>(rng, {d, h, w}, -1, 1);
        auto cv = compute_cost_volume(m, f);
        const auto brute = oracle::brute_force_cost_volume(m, f);
        CHECK(oracle::max_abs_diff(cv.values.values(), brute) < 1e-5);
      }
}

TEST_CASE("cost volume is symmetric under swapping inputs and indices") {
  Rng rng(201);
  auto m = oracle::rand_tensor<float>(rng, {3, 4, 5}, -1, 1);
  auto f = oracle::rand_tensor<float>(rng, {3, 4, 5}, -1, 1);
  auto a = compute_cost_volume(m, f);
  auto b = compute_cost_volume(f, m);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 5; ++l)
          CHECK(a.values.at({i, j, k, l}) ==
                doctest::Approx(b.values.at({k, l, i, j})).epsilon(1e-6));
}

TEST_CASE("cost volume normalization divides by sqrt(D)") {
  Rng rng(202);
  auto m = oracle::rand_tensor<float>(rng, {4, 3, 3}, -1, 1);
  auto f = oracle::rand_tensor<float>(rng, {4, 3, 3}, -1, 1);
  auto plain = compute_cost_volume(m, f, false);
  auto normed = compute_cost_volume(m, f, true);
  for (std::size_t i = 0; i < plain.values.values().size(); ++i)
    CHECK(normed.values.values()[i] ==
          doctest::Approx(plain.values.values()[i] / 2.0f).epsilon(1e-6));
}

TEST_CASE("cost volume rejects shape mismatches") {
  auto m = Tensor<float>::zeros({2, 3, 3});
  auto f = Tensor<float>::zeros({2, 3, 4});
  CHECK_THROWS_AS(compute_cost_volume(m, f), std::invalid_argument);
}

TEST_CASE("cost volume gradients match finite differences") {
  Rng rng(203);
  auto m = oracle::rand_tensor<double>(rng, {3, 3, 4}, -1, 1, true);
  auto f = oracle::rand_tensor<double>(rng, {3, 3, 4}, -1, 1, true);
  auto weights = oracle::rand_tensor<double>(rng, {3, 4, 3, 4}, -1, 1);
  oracle::check_gradients(
      [&] { return sum(mul(compute_cost_volume(m, f, true).values, weights)); },
      {m, f}, rng);
}

TEST_CASE("pyramid of a constant volume stays constant on every level") {
  auto cv = CostVolume<float>{Tensor<float>::filled({3, 3, 3, 3}, 1.25f)};
  auto pyr = build_pyramid(cv);
  for (const auto& level : pyr.levels)
    for (float v : level.values()) CHECK(v == doctest::Approx(1.25f));
}

TEST_CASE("pyramid level shapes halve the trailing dims") {
  Rng rng(204);
  auto m = oracle::rand_tensor<float>(rng, {2, 8, 8}, -1, 1);
  auto f = oracle::rand_tensor<float>(rng, {2, 8, 8}, -1, 1);
  auto pyr = build_pyramid(compute_cost_volume(m, f));
  CHECK(pyr.levels[0].shape() == Shape{8, 8, 8, 8});
  CHECK(pyr.levels[1].shape() == Shape{8, 8, 4, 4});
  CHECK(pyr.levels[2].shape() == Shape{8, 8, 2, 2});
  CHECK(pyr.levels[3].shape() == Shape{8, 8, 1, 1});
}

TEST_CASE("pyramid level 1 equals 2x2 block means of level 0") {
  Rng rng(205);
  auto m = oracle::rand_tensor<float>(rng, {2, 4, 4}, -1, 1);
  auto f = oracle::rand_tensor<float>(rng, {2, 4, 4}, -1, 1);
  auto pyr = build_pyramid(compute_cost_volume(m, f));
  const auto& c0 = pyr.levels[0];
  const auto& c1 = pyr.levels[1];
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          const float mean4 =
              (c0.at({i, j, 2 * k, 2 * l}) + c0.at({i, j, 2 * k, 2 * l + 1}) +
               c0.at({i, j, 2 * k + 1, 2 * l}) +
               c0.at({i, j, 2 * k + 1, 2 * l + 1})) /
              4.0f;
          CHECK(c1.at({i, j, k, l}) == doctest::Approx(mean4).epsilon(1e-6));
        }
}

TEST_CASE("diamond neighborhood has the right size and order") {
  for (int r = 1; r <= 4; ++r) {
    auto hood = SearchNeighborhood::make(r);
    CHECK(int(hood.offsets.size()) == 2 * r * r + 2 * r + 1);
    // lexicographic by (dy, dx), includes the center
    bool has_center = false;
    for (std::size_t i = 1; i < hood.offsets.size(); ++i) {
      const auto [dx0, dy0] = hood.offsets[i - 1];
      const auto [dx1, dy1] = hood.offsets[i];
      CHECK((dy1 > dy0 || (dy1 == dy0 && dx1 > dx0)));
    }
    for (auto [dx, dy] : hood.offsets) {
      CHECK(std::abs(dx) + std::abs(dy) <= r);
      if (dx == 0 && dy == 0) has_center = true;
    }
    CHECK(has_center);
  }
  CHECK_THROWS_AS(SearchNeighborhood::make(0), std::invalid_argument);
}

TEST_CASE("search map channel count is 4 levels x diamond size") {
  Rng rng(206);
  auto m = oracle::rand_tensor<float>(rng, {2, 6, 6}, -1, 1);
  auto f = oracle::rand_tensor<float>(rng, {2, 6, 6}, -1, 1);
  auto pyr = build_pyramid(compute_cost_volume(m, f));
  auto fx = Tensor<float>::zeros({6, 6});
  auto fy = Tensor<float>::zeros({6, 6});
  CHECK(search_lookup(pyr, fx, fy, 1).dim(0) == 20);
  CHECK(search_lookup(pyr, fx, fy, 2).dim(0) == 52);
  CHECK_THROWS_AS(search_lookup(pyr, fx, fy, 0), std::invalid_argument);
}

TEST_CASE("delta cost volume puts 1 in the center channel at zero field") {
  // C0[i,j,k,l] = 1 iff (i,j) == (k,l)
  const int h = 5, w = 5;
  std::vector<float> cvv(std::size_t(h) * w * h * w, 0.0f);
  for (int p = 0; p < h * w; ++p)
    cvv[std::size_t(p) * h * w + p] = 1.0f;
  auto pyr = build_pyramid(
      CostVolume<float>{Tensor<float>::from_data({h, w, h, w}, std::move(cvv))});
  auto fx = Tensor<float>::zeros({h, w});
  auto fy = Tensor<float>::zeros({h, w});
  auto smap = search_lookup(pyr, fx, fy, 1);
  const auto hood = SearchNeighborhood::make(1);
  int center = -1;
  for (std::size_t o = 0; o < hood.offsets.size(); ++o)
    if (hood.offsets[o] == std::pair<int, int>{0, 0}) center = int(o);
  REQUIRE(center >= 0);
  for (int v = 1; v < h - 1; ++v)
    for (int u = 1; u < w - 1; ++u) {
      CHECK(smap.at({center, v, u}) == doctest::Approx(1.0f));
      for (std::size_t o = 0; o < hood.offsets.size(); ++o)
        if (int(o) != center) CHECK(smap.at({int(o), v, u}) == 0.0f);
    }
}

TEST_CASE("search lookup matches the naive oracle") {
  Rng rng(207);
  for (int r : {1, 2}) {
    const int h = 7, w = 6;
    auto m = oracle::rand_tensor<float>(rng, {3, h, w}, -1, 1);
    auto f = oracle::rand_tensor<float>(rng, {3, h, w}, -1, 1);
    auto pyr = build_pyramid(compute_cost_volume(m, f));
    auto fx = oracle::rand_tensor<float>(rng, {h, w}, -2, 2);
    auto fy = oracle::rand_tensor<float>(rng, {h, w}, -2, 2);
    auto smap = search_lookup(pyr, fx, fy, r);
    const auto naive = oracle::naive_search_lookup(pyr, fx, fy, r);
    CHECK(oracle::max_abs_diff(smap.values(), naive) < 1e-5);
  }
}

TEST_CASE("constant cost volumes make the search map level-independent") {
  auto pyr =
      build_pyramid(CostVolume<float>{Tensor<float>::filled({4, 4, 4, 4}, 0.7f)});
  auto fx = Tensor<float>::filled({4, 4}, 0.3f);
  auto fy = Tensor<float>::filled({4, 4}, -0.6f);
  auto smap = search_lookup(pyr, fx, fy, 2);
  for (float v : smap.values()) CHECK(v == doctest::Approx(0.7f).epsilon(1e-6));
}

TEST_CASE("a peak at L1 distance 3r registers only beyond level 0") {
  for (int r : {1, 2, 3}) {
    const int h = 16, w = 48;  // wide enough for u0 + 3r at every r
    const int v0 = 7, u0 = 11;  // odd column
    std::vector<float> cvv(std::size_t(h) * w * h * w, 0.0f);
    const std::size_t pix = std::size_t(v0) * w + u0;
    cvv[(pix * h + v0) * w + (u0 + 3 * r)] = 5.0f;
    auto pyr = build_pyramid(CostVolume<float>{
        Tensor<float>::from_data({h, w, h, w}, std::move(cvv))});
    auto fx = Tensor<float>::zeros({h, w});
    auto fy = Tensor<float>::zeros({h, w});
    auto smap = search_lookup(pyr, fx, fy, r);
    const int noff = 2 * r * r + 2 * r + 1;
    float level0_max = 0, coarse_max = 0;
    for (int c = 0; c < 4 * noff; ++c) {
      const float v = std::abs(smap.at({c, v0, u0}));
      if (c < noff)
        level0_max = std::max(level0_max, v);
      else
        coarse_max = std::max(coarse_max, v);
    }
    INFO("radius ", r);
    CHECK(level0_max == 0.0f);
    CHECK(coarse_max > 0.0f);
  }
}

TEST_CASE("integer shifts of the fixed features shift the argmax") {
  Rng rng(208);
  const int h = 5, w = 8, d = 3, s = 2;
  auto m = oracle::rand_tensor<float>(rng, {d, h, w}, 0.5, 1.0);
  auto f = oracle::rand_tensor<float>(rng, {d, h, w}, 0.5, 1.0);
  // shifted fixed features: f2(k, l) = f(k, l - s); first s columns zero
  std::vector<float> f2v(std::size_t(d) * h * w, 0.0f);
  for (int c = 0; c < d; ++c)
    for (int k = 0; k < h; ++k)
      for (int l = s; l < w; ++l)
        f2v[(std::size_t(c) * h + k) * w + l] = f.at({c, k, l - s});
  auto f2 = Tensor<float>::from_data({d, h, w}, std::move(f2v));
  auto c1 = compute_cost_volume(m, f);
  auto c2 = compute_cost_volume(m, f2);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      int bk = 0, bl = 0;
      float best = -1e30f;
      for (int k = 0; k < h; ++k)
        for (int l = 0; l < w; ++l)
          if (c1.values.at({i, j, k, l}) > best) {
            best = c1.values.at({i, j, k, l});
            bk = k;
            bl = l;
          }
      if (bl + s >= w) continue;  // discard argmaxes shifted off the border
      int bk2 = 0, bl2 = 0;
      float best2 = -1e30f;
      for (int k = 0; k < h; ++k)
        for (int l = 0; l < w; ++l)
          if (c2.values.at({i, j, k, l}) > best2) {
            best2 = c2.values.at({i, j, k, l});
            bk2 = k;
            bl2 = l;
          }
      CHECK(bk2 == bk);
      CHECK(bl2 == bl + s);
    }
}

TEST_CASE("search lookup field gradients match finite differences") {
  Rng rng(209);
  const int h = 6, w = 5;
  auto m = oracle::rand_tensor<double>(rng, {2, h, w}, -1, 1, true);
  auto f = oracle::rand_tensor<double>(rng, {2, h, w}, -1, 1, true);
  auto fx = oracle::rand_field_component<double>(rng, h, w, true, true);
  auto fy = oracle::rand_field_component<double>(rng, h, w, false, true);
  auto weights = oracle::rand_tensor<double>(rng, {52, h, w}, -1, 1);
  oracle::check_gradients(
      [&] {
        auto pyr = build_pyramid(compute_cost_volume(m, f));
        return sum(mul(search_lookup(pyr, fx, fy, 2), weights));
      },
      {fx, fy, m, f}, rng, 5);
}
