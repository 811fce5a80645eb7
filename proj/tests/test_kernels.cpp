#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "emllm/kernels.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace emllm;
using testing_support::random_vector;

namespace {

nn::ConvGeom random_conv(Rng& rng, size_t max_len) {
  nn::ConvGeom g;
  g.in_ch = 1 + rng.below(6);
  g.out_ch = 1 + rng.below(8);
  g.kernel = 1 + rng.below(5);
  g.stride = 1 + rng.below(4);
  g.in_len = g.kernel + rng.below(max_len);
  return g;
}

}  // namespace

TEST_CASE("output length law") {
  Rng rng(1);
  for (int n = 0; n < 1000; ++n) {
    const size_t w = 1 + rng.below(10);
    const size_t s = 1 + rng.below(6);
    const size_t l = w + rng.below(200);
    const size_t expect = static_cast<size_t>(std::floor((double(l) - double(w)) / double(s))) + 1;
    CHECK(nn::output_length(l, w, s) == expect);
  }
  CHECK_THROWS_AS(nn::output_length(2, 3, 1), ShapeError);
  CHECK_THROWS_AS(nn::output_length(5, 3, 0), ShapeError);
  CHECK(nn::output_length(240, 3, 1) == 238);
  CHECK(nn::output_length(3840, 3, 16) == 240);
}

TEST_CASE("conv1d forward matches oracle and reference exactly") {
  Rng rng(2);
  for (int n = 0; n < 200; ++n) {
    // Every tenth shape is large enough to take the parallel path.
    const auto g = random_conv(rng, n % 10 == 0 ? 6000 : 64);
    const auto x = random_vector(rng, g.in_ch * g.in_len);
    const auto w = random_vector(rng, g.weight_count());
    const auto b = random_vector(rng, g.out_ch);
    std::vector<double> y(g.out_ch * g.out_len()), yr(y.size());
    nn::conv1d_forward(g, x, w, b, y);
    nn::reference::conv1d_forward(g, x, w, b, yr);
    const auto expect = oracle::flatten(oracle::conv1d(oracle::reshape(x, g.in_ch, g.in_len),
                                                       oracle::reshape(w, g.out_ch, g.in_ch, g.kernel),
                                                       b, g.stride));
    REQUIRE(y == expect);
    REQUIRE(yr == expect);
  }
}

TEST_CASE("conv1d backward matches brute-force sums and reference") {
  Rng rng(3);
  for (int n = 0; n < 100; ++n) {
    const auto g = random_conv(rng, n % 10 == 0 ? 6000 : 48);
    const size_t ol = g.out_len();
    const auto x = random_vector(rng, g.in_ch * g.in_len);
    const auto w = random_vector(rng, g.weight_count());
    const auto dy = random_vector(rng, g.out_ch * ol);
    std::vector<double> dx(x.size(), 7.0), dw(w.size(), 0.0), db(g.out_ch, 0.0);
    std::vector<double> dxr(x.size(), -3.0), dwr(w.size(), 0.0), dbr(g.out_ch, 0.0);
    nn::conv1d_backward(g, x, w, dy, dx, dw, db);
    nn::reference::conv1d_backward(g, x, w, dy, dxr, dwr, dbr);
    REQUIRE(dx == dxr);
    REQUIRE(dw == dwr);
    REQUIRE(db == dbr);

    for (size_t o = 0; o < g.out_ch; ++o) {
      double sb = 0.0;
      for (size_t j = 0; j < ol; ++j) sb += dy[o * ol + j];
      CHECK(db[o] == doctest::Approx(sb).epsilon(1e-12));
      for (size_t i = 0; i < g.in_ch; ++i) {
        for (size_t t = 0; t < g.kernel; ++t) {
          double s = 0.0;
          for (size_t j = 0; j < ol; ++j) s += dy[o * ol + j] * x[i * g.in_len + j * g.stride + t];
          CHECK(dw[(o * g.in_ch + i) * g.kernel + t] == doctest::Approx(s).epsilon(1e-12));
        }
      }
    }
    for (size_t i = 0; i < g.in_ch; ++i) {
      for (size_t p = 0; p < g.in_len; ++p) {
        double s = 0.0;
        for (size_t o = 0; o < g.out_ch; ++o) {
          for (size_t j = 0; j < ol; ++j) {
            if (p >= j * g.stride && p < j * g.stride + g.kernel) {
              s += w[(o * g.in_ch + i) * g.kernel + (p - j * g.stride)] * dy[o * ol + j];
            }
          }
        }
        CHECK(dx[i * g.in_len + p] == doctest::Approx(s).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("conv1d backward accumulates into dw and db and can skip dx") {
  const nn::ConvGeom g{1, 1, 5, 3, 1};
  const std::vector<double> x{1, 2, 3, 4, 5}, w{1, 0, -1}, dy{1, 1, 1};
  std::vector<double> dw{10, 10, 10}, db{1};
  nn::conv1d_backward(g, x, w, dy, {}, dw, db);
  CHECK(dw == std::vector<double>{16, 19, 22});
  CHECK(db == std::vector<double>{4});
}

TEST_CASE("maxpool matches oracle, ties go to the lowest index") {
  Rng rng(4);
  for (int n = 0; n < 200; ++n) {
    nn::PoolGeom g;
    g.channels = 1 + rng.below(8);
    g.size = 1 + rng.below(5);
    g.stride = 1 + rng.below(5);
    g.in_len = g.size + rng.below(n % 10 == 0 ? 8000 : 60);
    // Coarse values make ties common.
    std::vector<double> x(g.channels * g.in_len);
    for (auto& v : x) v = static_cast<double>(rng.below(4));
    std::vector<double> y(g.channels * g.out_len()), yr(y.size());
    std::vector<uint32_t> a(y.size()), ar(y.size());
    nn::maxpool_forward(g, x, y, a);
    nn::reference::maxpool_forward(g, x, yr, ar);
    const auto o = oracle::maxpool(oracle::reshape(x, g.channels, g.in_len), g.size, g.stride);
    REQUIRE(y == oracle::flatten(o.values));
    REQUIRE(yr == y);
    REQUIRE(ar == a);
    for (size_t c = 0; c < g.channels; ++c) {
      for (size_t j = 0; j < o.argmax[c].size(); ++j) {
        REQUIRE(a[c * g.out_len() + j] == c * g.in_len + o.argmax[c][j]);
      }
    }

    const auto dy = random_vector(rng, y.size());
    std::vector<double> dx(x.size(), 9.0), dxr(x.size(), -9.0), expect(x.size(), 0.0);
    nn::maxpool_backward(g, dy, a, dx);
    nn::reference::maxpool_backward(g, dy, a, dxr);
    for (size_t k = 0; k < dy.size(); ++k) expect[a[k]] += dy[k];
    REQUIRE(dx == dxr);
    REQUIRE(dx == expect);
  }
}

TEST_CASE("dense matches oracle and reference") {
  Rng rng(5);
  for (int n = 0; n < 200; ++n) {
    nn::DenseGeom g;
    g.in = 1 + rng.below(n % 10 == 0 ? 3000 : 50);
    g.out = 1 + rng.below(n % 10 == 0 ? 130 : 12);
    const auto x = random_vector(rng, g.in);
    const auto w = random_vector(rng, g.in * g.out);
    const auto b = random_vector(rng, g.out);
    std::vector<double> y(g.out), yr(g.out);
    nn::dense_forward(g, x, w, b, y);
    nn::reference::dense_forward(g, x, w, b, yr);
    const auto expect = oracle::dense(x, oracle::reshape(w, g.out, g.in), b);
    REQUIRE(y == expect);
    REQUIRE(yr == expect);

    const auto dy = random_vector(rng, g.out);
    std::vector<double> dx(g.in), dw(w.size(), 0.0), db(g.out, 0.0);
    std::vector<double> dxr(g.in), dwr(w.size(), 0.0), dbr(g.out, 0.0);
    nn::dense_backward(g, x, w, dy, dx, dw, db);
    nn::reference::dense_backward(g, x, w, dy, dxr, dwr, dbr);
    REQUIRE(dx == dxr);
    REQUIRE(dw == dwr);
    REQUIRE(db == dbr);
    for (size_t i = 0; i < g.in; ++i) {
      double s = 0.0;
      for (size_t o = 0; o < g.out; ++o) s += w[o * g.in + i] * dy[o];
      CHECK(dx[i] == doctest::Approx(s).epsilon(1e-12));
    }
    CHECK(dw[0] == dy[0] * x[0]);
  }
}

TEST_CASE("shape errors") {
  const nn::ConvGeom g{2, 3, 10, 3, 1};
  std::vector<double> x(19), w(g.weight_count()), b(3), y(3 * 8);
  CHECK_THROWS_AS(nn::conv1d_forward(g, x, w, b, y), ShapeError);
  CHECK_THROWS_AS(nn::reference::conv1d_forward(g, x, w, b, y), ShapeError);
  const nn::DenseGeom d{4, 2};
  std::vector<double> dx(4), dw(7), db(2), dy(2);
  CHECK_THROWS_AS(nn::dense_forward(d, dx, dw, db, dy), ShapeError);
}

TEST_CASE("value wrappers") {
  const Tensor1 x(1, 5, {1, 2, 3, 4, 5});
  const auto y = nn::conv1d_forward(x, {1, 1, 1}, 1, 3, {0.5}, 2);
  CHECK(y.channels == 1);
  CHECK(y.data == std::vector<double>{6.5, 12.5});

  const auto [p, idx] = nn::maxpool1d(Tensor1(1, 4, {3, 3, 1, 2}), 2, 2);
  CHECK(p.data == std::vector<double>{3, 2});
  CHECK(idx == std::vector<uint32_t>{0, 3});

  CHECK(nn::dense_forward({1, 2}, {{1, 1}, {2, -1}}, {0, 1}) == std::vector<double>{3, 1});
  CHECK(nn::relu(Tensor1(1, 3, {-1, 0, 2})).data == std::vector<double>{0, 0, 2});
  CHECK_THROWS_AS(nn::conv1d_forward(x, {1, 1}, 1, 3, {0.0}, 1), ShapeError);
}

TEST_CASE("activations and loss") {
  CHECK(nn::sigmoid(0.0) == 0.5);
  CHECK(nn::sigmoid(-1000.0) == 0.0);
  CHECK(nn::sigmoid(1000.0) == 1.0);
  CHECK(std::isfinite(nn::sigmoid(-745.0)));
  CHECK(nn::sigmoid(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));

  std::vector<double> v{-1, 0, 3};
  nn::relu_inplace(v);
  CHECK(v == std::vector<double>{0, 0, 3});
  std::vector<double> g{5, 5, 5};
  nn::relu_backward(v, g);
  CHECK(g == std::vector<double>{0, 0, 5});

  const auto l0 = nn::bce_loss(0.0, 1);
  CHECK(std::isfinite(l0.loss));
  CHECK(l0.loss == doctest::Approx(-std::log(nn::kProbClamp)));
  CHECK(nn::bce_loss(0.25, 0).loss == doctest::Approx(-std::log(0.75)));
  CHECK(nn::bce_loss(0.25, 1).grad == doctest::Approx(-4.0));
  const std::vector<double> p{0.9, 0.2};
  const std::vector<int> y{1, 0};
  CHECK(nn::bce_mean(p, y) == doctest::Approx(-(std::log(0.9) + std::log(0.8)) / 2));
  CHECK_THROWS(require_finite(std::vector<double>{1.0, std::nan("")}, "x"));
}
