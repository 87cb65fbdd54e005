#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "csifb/adam.hpp"
#include "csifb/gradcheck.hpp"
#include "csifb/graph.hpp"
#include "csifb/rng.hpp"

using namespace csifb;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& x : t.v) x = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("conv2d with a center-1 identity kernel is the identity map") {
  Rng rng(7);
  Tensor in = random_tensor({1, 5, 4}, rng);
  Tensor k({1, 1, 3, 3});
  k.v[4] = 1.0;  // center tap
  Tensor b({1});
  Graph g;
  const VarId out = g.conv2d(g.input(in), g.input(k), g.input(b));
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(g.value(out).v[i] == in.v[i]);
}

TEST_CASE("conv2d hand values: all-ones 3x3 image and kernel") {
  Tensor in({1, 3, 3}, std::vector<double>(9, 1.0));
  Tensor k({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  Tensor b({1});
  Graph g;
  const auto& out = g.value(g.conv2d(g.input(in), g.input(k), g.input(b))).v;
  // corners see a 2x2 window, edge centers 2x3, the center the full 3x3
  CHECK(out[0] == 4.0);
  CHECK(out[1] == 6.0);
  CHECK(out[2] == 4.0);
  CHECK(out[3] == 6.0);
  CHECK(out[4] == 9.0);
  CHECK(out[5] == 6.0);
  CHECK(out[6] == 4.0);
  CHECK(out[7] == 6.0);
  CHECK(out[8] == 4.0);
}

TEST_CASE("conv2d shape contract and channel mismatch") {
  Rng rng(3);
  Tensor in = random_tensor({2, 8, 8}, rng);
  Tensor k = random_tensor({16, 2, 3, 3}, rng);
  Tensor b({16});
  Graph g;
  const VarId out = g.conv2d(g.input(in), g.input(k), g.input(b));
  CHECK(g.value(out).shape == std::vector<int>{16, 8, 8});

  Tensor bad_k = random_tensor({4, 3, 3, 3}, rng);
  CHECK_THROWS_AS(g.conv2d(g.input(in), g.input(bad_k), g.input(Tensor({4}))),
                  std::invalid_argument);
}

TEST_CASE("dense identity, hand arithmetic, and dimension errors") {
  Graph g;
  Tensor w_id({2, 2}, {1, 0, 0, 1});
  Tensor x({2}, {3.5, -2.0});
  Tensor b0({2});
  const auto& y = g.value(g.dense(g.input(w_id), g.input(x), g.input(b0))).v;
  CHECK(y[0] == 3.5);
  CHECK(y[1] == -2.0);

  Tensor w({2, 2}, {1, 1, 0, 1});
  Tensor x2({2}, {1, 2});
  Tensor b({2}, {1, 0});
  const auto& y2 = g.value(g.dense(g.input(w), g.input(x2), g.input(b))).v;
  CHECK(y2[0] == 4.0);
  CHECK(y2[1] == 2.0);

  CHECK_THROWS_AS(g.dense(g.input(w), g.input(Tensor({3})), g.input(b)),
                  std::invalid_argument);
}

TEST_CASE("activation closed forms") {
  Graph g;
  Tensor x({3}, {0.0, 0.0, -1.0});
  CHECK(g.value(g.sigmoid(g.input(x))).v[0] == 0.5);
  CHECK(g.value(g.tanh(g.input(x))).v[1] == 0.0);
  CHECK(g.value(g.leaky_relu(g.input(x))).v[2] == doctest::Approx(-0.3));

  Rng rng(11);
  Tensor wide = random_tensor({64}, rng, -40.0, 40.0);
  const auto& s = g.value(g.sigmoid(g.input(wide))).v;
  for (double v : s) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("activation gradients match finite differences at the pinned points") {
  for (const double x0 : {-2.0, -0.5, 0.1, 3.0}) {
    for (const auto kind : {Graph::Act::kLeakyRelu, Graph::Act::kSigmoid, Graph::Act::kTanh}) {
      Tensor x({1}, {x0});
      const auto rep = grad_check(
          [kind](Graph& g, const std::vector<Tensor*>& p) {
            return g.sum(g.activation(g.param(*p[0]), kind));
          },
          {&x});
      CHECK(rep.max_rel_err < 1e-6);
    }
  }
}

TEST_CASE("dense gradients match finite differences") {
  Rng rng(5);
  Tensor w = random_tensor({3, 2}, rng);
  Tensor x = random_tensor({2}, rng);
  Tensor b = random_tensor({3}, rng);
  const auto rep = grad_check(
      [](Graph& g, const std::vector<Tensor*>& p) {
        return g.sum(g.dense(g.param(*p[0]), g.param(*p[1]), g.param(*p[2])));
      },
      {&w, &x, &b});
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(6);
  Tensor in = random_tensor({2, 4, 4}, rng);
  Tensor k = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  const auto rep = grad_check(
      [](Graph& g, const std::vector<Tensor*>& p) {
        return g.sum(g.tanh(g.conv2d(g.param(*p[0]), g.param(*p[1]), g.param(*p[2]))));
      },
      {&in, &k, &b});
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("lstm_cell zero-weight and forget-saturation cases") {
  const int d = 3, n = 2;
  auto make_cell = [&](Graph& g, std::vector<Tensor>& store, double forget_bias) {
    store.clear();
    store.reserve(8);
    for (int i = 0; i < 4; ++i) store.emplace_back(std::vector<int>{d, n + d});
    for (int i = 0; i < 4; ++i) store.emplace_back(std::vector<int>{d});
    std::fill(store[5].v.begin(), store[5].v.end(), forget_bias);
    Graph::LstmCellParams cell{g.param(store[0]), g.param(store[1]), g.param(store[2]),
                               g.param(store[3]), g.param(store[4]), g.param(store[5]),
                               g.param(store[6]), g.param(store[7])};
    return cell;
  };

  SUBCASE("all zeros in, zeros out") {
    Graph g;
    std::vector<Tensor> store;
    const auto cell = make_cell(g, store, 0.0);
    const VarId x = g.input(Tensor({n}));
    const VarId h = g.input(Tensor({d}));
    const VarId c = g.input(Tensor({d}));
    const auto [h2, c2] = g.lstm_cell(x, h, c, cell);
    for (double v : g.value(h2).v) CHECK(v == 0.0);
    for (double v : g.value(c2).v) CHECK(v == 0.0);
  }

  SUBCASE("saturated forget gate preserves the cell") {
    Graph g;
    std::vector<Tensor> store;
    const auto cell = make_cell(g, store, 10.0);
    const VarId x = g.input(Tensor({n}));
    const VarId h = g.input(Tensor({d}));
    const VarId c = g.input(Tensor({d}, {1.0, 1.0, 1.0}));
    const auto [h2, c2] = g.lstm_cell(x, h, c, cell);
    for (double v : g.value(c2).v) CHECK(v == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("lstm_cell gradients match finite differences on a d=3 n=2 cell") {
  Rng rng(9);
  std::vector<Tensor> store;
  const int d = 3, n = 2;
  for (int i = 0; i < 4; ++i) store.push_back(random_tensor({d, n + d}, rng));
  for (int i = 0; i < 4; ++i) store.push_back(random_tensor({d}, rng));
  Tensor x = random_tensor({n}, rng);
  Tensor h = random_tensor({d}, rng);
  Tensor c = random_tensor({d}, rng);
  std::vector<Tensor*> params;
  for (auto& t : store) params.push_back(&t);
  params.push_back(&x);
  params.push_back(&h);
  params.push_back(&c);
  const auto rep = grad_check(
      [&](Graph& g, const std::vector<Tensor*>& p) {
        Graph::LstmCellParams cell{g.param(*p[0]), g.param(*p[1]), g.param(*p[2]),
                                   g.param(*p[3]), g.param(*p[4]), g.param(*p[5]),
                                   g.param(*p[6]), g.param(*p[7])};
        const auto [h2, c2] = g.lstm_cell(g.param(*p[8]), g.param(*p[9]), g.param(*p[10]), cell);
        return g.sum(g.add(h2, c2));
      },
      params);
  CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("mse_loss pinned values") {
  Graph g;
  Tensor a({1, 2}, {1.0, -1.0});
  Tensor zero({1, 2});

  CHECK(g.value(g.mse_loss(g.input(a), a, 1)).v[0] == 0.0);
  CHECK(g.value(g.mse_loss(g.input(a), zero, 1)).v[0] == 2.0);

  // two samples with per-sample squared norms 2 and 4 -> mean 3
  Tensor batch({2, 2}, {1.0, -1.0, 2.0, 0.0});
  Tensor target({2, 2});
  CHECK(g.value(g.mse_loss(g.input(batch), target, 2)).v[0] == 3.0);

  CHECK_THROWS_AS(g.mse_loss(g.input(a), Tensor({3}), 1), std::invalid_argument);
}

TEST_CASE("mse_loss is non-negative and zero only at equality") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    Tensor pred = random_tensor({1, 6}, rng);
    Tensor target = random_tensor({1, 6}, rng);
    const double loss = g.value(g.mse_loss(g.input(pred), target, 1)).v[0];
    CHECK(loss >= 0.0);
    if (pred.v != target.v) CHECK(loss > 0.0);
  }
}

TEST_CASE("backward of sum gives all-ones gradient") {
  Rng rng(13);
  Tensor x = random_tensor({7}, rng);
  Graph g;
  g.backward(g.sum(g.param(x)));
  for (double v : x.g) CHECK(v == 1.0);
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor x({3}, {1, 2, 3});
  Graph g;
  const VarId id = g.param(x);
  CHECK_THROWS_AS(g.backward(id), std::invalid_argument);
}

TEST_CASE("backward of mse over dense matches finite differences") {
  Rng rng(17);
  Tensor w = random_tensor({3, 2}, rng);
  Tensor x = random_tensor({2}, rng);
  Tensor b = random_tensor({3}, rng);
  Tensor y = random_tensor({3}, rng);
  const auto rep = grad_check(
      [&](Graph& g, const std::vector<Tensor*>& p) {
        return g.mse_loss(g.dense(g.param(*p[0]), g.param(*p[1]), g.param(*p[2])), y, 1);
      },
      {&w, &x, &b});
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("two backward passes accumulate gradients exactly twice") {
  Rng rng(19);
  Tensor w = random_tensor({3, 3}, rng);
  Tensor x = random_tensor({3}, rng);
  Tensor b = random_tensor({3}, rng);

  Graph g;
  const VarId loss =
      g.sum(g.sigmoid(g.dense(g.param(w), g.param(x), g.param(b))));
  g.backward(loss);
  const std::vector<double> once = w.g;
  g.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.g[i] == 2.0 * once[i]);
}

TEST_CASE("every op matches finite differences across 20 random seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    // composite touching dense, conv, all activations, mul, concat, mse
    Tensor in = random_tensor({2, 3, 3}, rng);
    Tensor k = random_tensor({2, 2, 3, 3}, rng);
    Tensor kb = random_tensor({2}, rng);
    Tensor w = random_tensor({4, 18}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor gate = random_tensor({4}, rng);
    Tensor target({1, 8}, std::vector<double>(8, 0.25));
    const auto rep = grad_check(
        [&](Graph& g, const std::vector<Tensor*>& p) {
          VarId conv = g.leaky_relu(g.conv2d(g.param(*p[0]), g.param(*p[1]), g.param(*p[2])));
          VarId feat = g.tanh(g.dense(g.param(*p[3]), g.flatten(conv), g.param(*p[4])));
          VarId gated = g.mul(feat, g.sigmoid(g.param(*p[5])));
          VarId both = g.reshape(g.concat(gated, feat), {1, 8});
          return g.mse_loss(both, target, 1);
        },
        {&in, &k, &kb, &w, &b, &gate});
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("adam first step matches the hand-evaluated update") {
  Tensor theta({1});
  AdamState adam({&theta});
  theta.g[0] = 4.0;
  adam.step(1e-3);
  CHECK(theta.v[0] == doctest::Approx(-0.000999999998).epsilon(1e-9));
  CHECK(adam.step_count() == 1);
}

TEST_CASE("adam with zero gradient leaves fresh parameters unchanged") {
  Tensor theta({3}, {1.0, -2.0, 0.5});
  AdamState adam({&theta});
  adam.step(1e-2);
  CHECK(theta.v == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam update opposes the gradient sign on a fresh state") {
  Rng rng(23);
  Tensor theta({8});
  AdamState adam({&theta});
  for (auto& g : theta.g) g = rng.uniform(-2.0, 2.0);
  const std::vector<double> grads = theta.g;
  adam.step(1e-3);
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (grads[i] != 0.0) CHECK(theta.v[i] * grads[i] < 0.0);
}

TEST_CASE("grad_check flags a corrupted backward implementation") {
  Rng rng(29);
  Tensor w = random_tensor({3, 3}, rng);
  Tensor x = random_tensor({3}, rng);
  Tensor b = random_tensor({3}, rng);
  Graph::inject_dense_fault(1.25);
  const auto rep = grad_check(
      [](Graph& g, const std::vector<Tensor*>& p) {
        return g.sum(g.dense(g.param(*p[0]), g.param(*p[1]), g.param(*p[2])));
      },
      {&w, &x, &b});
  Graph::inject_dense_fault(1.0);
  CHECK(rep.max_rel_err > 1e-3);
}
