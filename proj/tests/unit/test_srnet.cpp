#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fd_oracle.hpp"
#include "medsr/adam.hpp"
#include "medsr/checkpoint.hpp"
#include "medsr/srnet.hpp"

using namespace medsr;
using medsr::testing::max_gradient_error;
using medsr::testing::random_tensor;

namespace {

SRNetConfig micro_config(std::size_t r = 2, AxisMode mode = AxisMode::TwoAxes) {
  SRNetConfig c;
  c.scale_factor = r;
  c.axis_mode = mode;
  c.base_filters = 4;
  return c;
}

// Small random biases so ReLUs are not all aligned at zero.
SRNet64 randomized(SRNet64 net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (auto& l : net.mutable_layers())
    for (auto& b : l.bias.data()) b = dist(rng);
  return net;
}

}  // namespace

TEST_CASE("pixel_shuffle_2d index law") {
  // r = 1 is the identity
  std::mt19937_64 rng(1);
  const auto one = random_tensor({2, 1, 3, 4}, rng);
  CHECK(pixel_shuffle_2d(one, 1) == one);

  // h = w = 1, channels (a,b,c,d) -> [[a,b],[c,d]]
  const Tensor64 maps({1, 4, 1, 1}, {1.0, 2.0, 3.0, 4.0});
  const auto out = pixel_shuffle_2d(maps, 2);
  REQUIRE(out.shape() == Shape{1, 1, 2, 2});
  CHECK(out.at(0, 0, 0, 0) == 1.0);
  CHECK(out.at(0, 0, 0, 1) == 2.0);
  CHECK(out.at(0, 0, 1, 0) == 3.0);
  CHECK(out.at(0, 0, 1, 1) == 4.0);

  CHECK_THROWS_AS(pixel_shuffle_2d(Tensor64({1, 3, 2, 2}), 2), std::invalid_argument);
}

TEST_CASE("pixel shuffles are value-preserving bijections with exact inverses") {
  std::mt19937_64 rng(2);
  for (std::size_t r : {1u, 2u, 4u}) {
    const auto maps = random_tensor({2, r * r, 3, 5}, rng);
    const auto hr = pixel_shuffle_2d(maps, r);
    auto a = std::vector<double>(maps.data().begin(), maps.data().end());
    auto b = std::vector<double>(hr.data().begin(), hr.data().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    CHECK(pixel_unshuffle_2d(hr, r) == maps);

    for (auto axis : {ShuffleAxis::Rows, ShuffleAxis::Cols}) {
      const auto m1 = random_tensor({1, r, 4, 3}, rng);
      CHECK(pixel_unshuffle_1d(pixel_shuffle_1d(m1, r, axis), r, axis) == m1);
      const auto img = random_tensor({1, 1, axis == ShuffleAxis::Rows ? 4 * r : 4, axis == ShuffleAxis::Rows ? 3 : 3 * r}, rng);
      CHECK(pixel_shuffle_1d(pixel_unshuffle_1d(img, r, axis), r, axis) == img);
    }
  }
}

TEST_CASE("pixel_shuffle_1d index law and shapes") {
  const Tensor64 ab({1, 2, 1, 1}, {5.0, 6.0});
  const auto col = pixel_shuffle_1d(ab, 2, ShuffleAxis::Rows);
  REQUIRE(col.shape() == Shape{1, 1, 2, 1});
  CHECK(col[0] == 5.0);
  CHECK(col[1] == 6.0);
  const auto row = pixel_shuffle_1d(ab, 2, ShuffleAxis::Cols);
  REQUIRE(row.shape() == Shape{1, 1, 1, 2});
  CHECK(row[0] == 5.0);
  CHECK(row[1] == 6.0);

  CHECK(pixel_shuffle_1d(Tensor64({1, 2, 3, 5}), 2, ShuffleAxis::Rows).shape() == Shape{1, 1, 6, 5});
  std::mt19937_64 rng(3);
  const auto m = random_tensor({1, 1, 3, 3}, rng);
  CHECK(pixel_shuffle_1d(m, 1, ShuffleAxis::Rows) == m);
  CHECK_THROWS_AS(pixel_shuffle_1d(Tensor64({1, 4, 2, 2}), 2, ShuffleAxis::Rows), std::invalid_argument);
}

TEST_CASE("build_network topology") {
  SRNetConfig c;
  const auto net = build_network<float>(c, 7);
  REQUIRE(net.layers().size() == 10);
  CHECK(net.layers()[5].out_channels() == 4);
  CHECK(net.layers()[9].out_channels() == 1);
  for (std::size_t i : {0u, 1u, 2u, 3u, 4u, 6u, 7u, 8u}) CHECK(net.layers()[i].out_channels() == 32);

  c.axis_mode = AxisMode::OneAxis;
  CHECK(build_network<float>(c, 7).layers()[5].out_channels() == 2);
  c.scale_factor = 4;
  CHECK(build_network<float>(c, 7).layers()[5].out_channels() == 4);
  c.axis_mode = AxisMode::TwoAxes;
  CHECK(build_network<float>(c, 7).layers()[5].out_channels() == 16);

  c.enable_second_block = false;
  CHECK(build_network<float>(c, 7).layers().size() == 6);

  SRNetConfig bad;
  bad.scale_factor = 3;
  CHECK_THROWS_AS(build_network<float>(bad, 1), std::invalid_argument);
  bad.scale_factor = 2;
  bad.base_filters = 0;
  CHECK_THROWS_AS(build_network<float>(bad, 1), std::invalid_argument);
}

TEST_CASE("build_network is deterministic in the seed") {
  SRNetConfig c;
  CHECK(build_network<float>(c, 99) == build_network<float>(c, 99));
  CHECK_FALSE(build_network<float>(c, 99) == build_network<float>(c, 100));
}

TEST_CASE("forward shapes") {
  SRNetConfig c;
  c.base_filters = 8;
  const auto net = build_network<float>(c, 1);
  auto t = forward(net, Tensor({7, 7}, 0.5f));
  CHECK(t.final_hr.shape() == Shape{1, 1, 14, 14});
  CHECK(t.intermediate_hr.shape() == t.final_hr.shape());
  CHECK(infer(net, Tensor({3, 1, 5, 9}, 0.5f)).shape() == Shape{3, 1, 10, 18});

  c.axis_mode = AxisMode::OneAxis;
  const auto rows = build_network<float>(c, 1);
  CHECK(forward(rows, Tensor({7, 7}, 0.5f)).final_hr.shape() == Shape{1, 1, 14, 7});
  c.shuffle_axis = ShuffleAxis::Cols;
  CHECK(infer(build_network<float>(c, 1), Tensor({7, 7}, 0.5f)).shape() == Shape{1, 1, 7, 14});

  c = SRNetConfig{};
  c.enable_second_block = false;
  const auto espcn = build_network<float>(c, 1);
  const auto te = forward(espcn, Tensor({5, 5}, 0.3f));
  CHECK(te.final_hr == te.intermediate_hr);
}

TEST_CASE("forward and infer agree") {
  std::mt19937_64 rng(5);
  const auto net = build_network<float>(micro_config(), 3);
  const auto x = medsr::testing::random_tensor_f({2, 1, 6, 7}, rng);
  CHECK(forward(net, x).final_hr == infer(net, x));
}

TEST_CASE("loss_full combines the two L1 terms") {
  std::mt19937_64 rng(6);
  const auto net = build_network<double>(micro_config(), 4);
  const auto x = random_tensor({1, 1, 5, 5}, rng, 0, 1);
  const auto y = random_tensor({1, 1, 10, 10}, rng, 0, 1);
  const auto t = forward(net, x);
  const double a = l1_loss(t.final_hr, y), b = l1_loss(t.intermediate_hr, y);
  CHECK(loss_full(t, y, 0.0) == a);
  CHECK(loss_full(t, y, 1.0) == doctest::Approx(a + b).epsilon(1e-15));
  CHECK(loss_full(t, t.final_hr, 0.0) == 0.0);
  CHECK_THROWS_AS(loss_full(t, Tensor64({1, 1, 10, 9}), 1.0), std::invalid_argument);
}

TEST_CASE("backward matches finite differences on a 4-filter micro network") {
  for (auto mode : {AxisMode::TwoAxes, AxisMode::OneAxis}) {
    std::mt19937_64 rng(8);
    auto net = randomized(build_network<double>(micro_config(2, mode), 12), 13);
    const auto x = random_tensor({1, 1, 8, 8}, rng, 0, 1);
    const Shape hr = mode == AxisMode::TwoAxes ? Shape{1, 1, 16, 16} : Shape{1, 1, 16, 8};
    const auto y = random_tensor(hr, rng, 0, 1);
    const auto grads = backward(net, forward(net, x), y, 1.0);
    auto& layers = net.mutable_layers();
    const auto f = [&] { return loss_full(forward(net, x), y, 1.0); };
    for (std::size_t i = 0; i < layers.size(); ++i) {
      CAPTURE(i);
      CHECK(max_gradient_error(layers[i].weights, grads[i].weights, f) < 1e-4);
      CHECK(max_gradient_error(layers[i].bias, grads[i].bias, f) < 1e-4);
    }
  }
}

TEST_CASE("lambda = 0: block-1 gradient is the standard-loss gradient; block 2 never sees the intermediate term") {
  std::mt19937_64 rng(9);
  const auto net = randomized(build_network<double>(micro_config(), 21), 22);
  const auto x = random_tensor({2, 1, 6, 6}, rng, 0, 1);
  const auto y = random_tensor({2, 1, 12, 12}, rng, 0, 1);
  const auto t = forward(net, x);
  const auto g0 = backward(net, t, y, 0.0);
  const auto g1 = backward(net, t, y, 1.0);
  for (std::size_t i = 6; i < 10; ++i) CHECK(g0[i].weights == g1[i].weights);
  bool differs = false;
  for (std::size_t i = 0; i < 6; ++i) differs |= !(g0[i].weights == g1[i].weights);
  CHECK(differs);
}

TEST_CASE("second block disabled equals an independently wired 6-layer network") {
  std::mt19937_64 rng(10);
  auto cfg = micro_config();
  cfg.enable_second_block = false;
  cfg.enable_intermediate_loss = false;
  auto net = randomized(build_network<double>(cfg, 31), 32);
  const auto x = random_tensor({1, 1, 6, 6}, rng, 0, 1);
  const auto y = random_tensor({1, 1, 12, 12}, rng, 0, 1);

  auto& L = net.mutable_layers();
  const auto plain = [&] {
    const auto a1 = relu(conv2d_forward(x, L[0]));
    const auto a2 = relu(conv2d_forward(a1, L[1]));
    const auto a3 = relu(add(conv2d_forward(a2, L[2]), a1));
    const auto a4 = relu(conv2d_forward(a3, L[3]));
    const auto a5 = relu(add(conv2d_forward(a4, L[4]), a1));
    return pixel_shuffle_2d(conv2d_forward(a5, L[5]), 2);
  };
  const auto trace = forward(net, x);
  CHECK(trace.final_hr == plain());
  const auto grads = backward(net, trace, y, cfg.effective_lambda());
  const auto f = [&] { return l1_loss(plain(), y); };
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(max_gradient_error(L[i].weights, grads[i].weights, f) < 1e-4);
    CHECK(max_gradient_error(L[i].bias, grads[i].bias, f) < 1e-4);
  }
}

TEST_CASE("backward rejects a stale trace") {
  auto net = build_network<double>(micro_config(), 1);
  const auto t = forward(net, Tensor64({1, 1, 4, 4}, 0.5));
  const Tensor64 y({1, 1, 8, 8}, 0.5);
  CHECK_NOTHROW(backward(net, t, y, 1.0));
  net.mutable_layers()[0].bias[0] += 0.1;
  CHECK_THROWS_AS(backward(net, t, y, 1.0), std::invalid_argument);
  const auto other = build_network<double>(micro_config(), 1);
  CHECK_THROWS_AS(backward(other, t, y, 1.0), std::invalid_argument);
}

TEST_CASE("a small Adam step on loss_full decreases the loss in >= 95% of trials") {
  int decreased = 0;
  const int trials = 40;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(1000 + trial);
    auto net = build_network<double>(micro_config(), 500 + trial);
    const auto x = random_tensor({4, 1, 5, 5}, rng, 0, 1);
    const auto y = random_tensor({4, 1, 10, 10}, rng, 0, 1);
    const auto t = forward(net, x);
    const double before = loss_full(t, y, 1.0);
    const auto grads = backward(net, t, y, 1.0);
    auto& layers = net.mutable_layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      AdamState<double> sw(layers[i].weights.shape(), 1e-4), sb(layers[i].bias.shape(), 1e-4);
      adam_step(layers[i].weights, grads[i].weights, sw);
      adam_step(layers[i].bias, grads[i].bias, sb);
    }
    if (loss_full(forward(net, x), y, 1.0) < before) ++decreased;
  }
  CHECK(decreased >= 38);
}

TEST_CASE("checkpoint round trip and validation") {
  auto cfg = micro_config(4, AxisMode::OneAxis);
  cfg.shuffle_axis = ShuffleAxis::Cols;
  cfg.enable_short_skips = false;
  cfg.lambda = 0.5;
  const auto net = build_network<float>(cfg, 77);
  const auto bytes = serialize_checkpoint(net);
  const auto back = deserialize_checkpoint(bytes);
  CHECK(back == net);
  CHECK(serialize_checkpoint(back) == bytes);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(deserialize_checkpoint(truncated), std::runtime_error);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), std::runtime_error);
  auto bad_version = bytes;
  bad_version[8] = 9;
  CHECK_THROWS_AS(deserialize_checkpoint(bad_version), std::runtime_error);
}
