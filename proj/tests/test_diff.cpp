#include <doctest.h>

#include <cmath>
#include <numeric>

#include "crowdsac/diff/adam.hpp"
#include "crowdsac/diff/graph.hpp"
#include "crowdsac/diff/nn.hpp"
#include "crowdsac/diff/serialize.hpp"
#include "crowdsac/errors.hpp"
#include "crowdsac/harness/checks.hpp"

using namespace crowdsac;
using namespace crowdsac::diff;

namespace {

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return v;
}

// Plain loops, no Eigen.
std::vector<double> affine_oracle(const std::vector<double>& w, const std::vector<double>& b,
                                  const std::vector<double>& x, std::size_t in, std::size_t out, bool relu) {
  std::vector<double> y(out);
  for (std::size_t j = 0; j < out; ++j) {
    double s = b[j];
    for (std::size_t i = 0; i < in; ++i) s += x[i] * w[i * out + j];
    y[j] = relu ? std::max(0.0, s) : s;
  }
  return y;
}

double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_SUITE("mlp") {
  TEST_CASE("zero weights give a zero vector") {
    ParameterStore p;
    const LayerSpec layers[] = {{3, 4, Activation::kRelu}, {4, 2, Activation::kNone}};
    p.add("m.l0.w", {3, 4}, std::vector<double>(12, 0.0));
    p.add("m.l0.b", {4}, std::vector<double>(4, 0.0));
    p.add("m.l1.w", {4, 2}, std::vector<double>(8, 0.0));
    p.add("m.l1.b", {2}, std::vector<double>(2, 0.0));
    const auto y = mlp_forward(p, "m.", layers, std::vector<double>{1.5, -2.0, 7.0});
    CHECK(y == std::vector<double>{0.0, 0.0});
  }

  TEST_CASE("identity layer returns its input") {
    ParameterStore p;
    const LayerSpec layers[] = {{3, 3, Activation::kNone}};
    p.add("m.l0.w", {3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    p.add("m.l0.b", {3}, {0, 0, 0});
    const std::vector<double> v{0.25, -4.0, 9.5};
    CHECK(mlp_forward(p, "m.", layers, v) == v);
  }

  TEST_CASE("4-3-2 net matches a loop oracle to 1e-12") {
    Rng rng(11);
    ParameterStore p;
    const LayerSpec layers[] = {{4, 3, Activation::kRelu}, {3, 2, Activation::kNone}};
    init_mlp(p, "m.", layers, rng);
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = random_vector(4, rng);
      const auto h = affine_oracle(p.at("m.l0.w").values, p.at("m.l0.b").values, x, 4, 3, true);
      const auto want = affine_oracle(p.at("m.l1.w").values, p.at("m.l1.b").values, h, 3, 2, false);
      const auto got = mlp_forward(p, "m.", layers, x);
      REQUIRE(got.size() == 2);
      for (std::size_t i = 0; i < 2; ++i) CHECK(std::fabs(got[i] - want[i]) < 1e-12);
    }
  }

  TEST_CASE("input width mismatch names the layer") {
    Rng rng(1);
    ParameterStore p;
    const LayerSpec layers[] = {{4, 3, Activation::kRelu}};
    init_mlp(p, "m.", layers, rng);
    try {
      mlp_forward(p, "m.", layers, std::vector<double>{1.0, 2.0});
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("m. layer 0") != std::string::npos);
    }
  }

  TEST_CASE("init bounds are 1/sqrt(fan_in)") {
    Rng rng(3);
    ParameterStore p;
    const LayerSpec layers[] = {{16, 8, Activation::kRelu}};
    init_mlp(p, "m.", layers, rng);
    for (double w : p.at("m.l0.w").values) CHECK(std::fabs(w) <= 0.25);
  }
}

TEST_SUITE("lstm") {
  TEST_CASE("zero weights and zero inputs give h = 0") {
    ParameterStore p;
    p.add("l.wx", {3, 200}, std::vector<double>(600, 0.0));
    p.add("l.wh", {50, 200}, std::vector<double>(10000, 0.0));
    p.add("l.b", {200}, std::vector<double>(200, 0.0));
    const auto h = lstm_forward(p, "l.", {{0, 0, 0}, {0, 0, 0}});
    REQUIRE(h.size() == 50);
    for (double x : h) CHECK(x == 0.0);
  }

  TEST_CASE("single step matches a one-cell closed form to 1e-12") {
    Rng rng(5);
    ParameterStore p;
    const std::size_t in = 3, hid = 4;
    init_lstm(p, "l.", in, hid, rng);
    const auto x = random_vector(in, rng);
    const auto& wx = p.at("l.wx").values;
    const auto& b = p.at("l.b").values;
    // h0 = c0 = 0, so wh drops out.
    auto pre = [&](std::size_t gate, std::size_t j) {
      double s = b[gate * hid + j];
      for (std::size_t i = 0; i < in; ++i) s += x[i] * wx[i * 4 * hid + gate * hid + j];
      return s;
    };
    const auto h = lstm_forward(p, "l.", {x});
    for (std::size_t j = 0; j < hid; ++j) {
      const double c = sigmoid_d(pre(0, j)) * std::tanh(pre(2, j));
      const double want = sigmoid_d(pre(3, j)) * std::tanh(c);
      CHECK(std::fabs(h[j] - want) < 1e-12);
    }
  }

  TEST_CASE("order sensitivity") {
    Rng rng(9);
    ParameterStore p;
    init_lstm(p, "l.", 5, 50, rng);
    const auto u = random_vector(5, rng);
    const auto v = random_vector(5, rng);
    const auto a = lstm_forward(p, "l.", {u, v});
    const auto b = lstm_forward(p, "l.", {v, u});
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(std::sqrt(d) > 1e-9);
  }

  TEST_CASE("empty sequence is invalid input") {
    Rng rng(9);
    ParameterStore p;
    init_lstm(p, "l.", 5, 50, rng);
    CHECK_THROWS_AS(lstm_forward(p, "l.", {}), InvalidInput);
  }
}

TEST_SUITE("softmax") {
  TEST_CASE("constant vector is uniform") {
    const auto p = softmax(std::vector<double>(7, 3.25));
    for (double x : p) CHECK(x == doctest::Approx(1.0 / 7).epsilon(1e-15));
  }

  TEST_CASE("[0, ln 2] -> [1/3, 2/3]") {
    const auto p = softmax(std::vector<double>{0.0, std::log(2.0)});
    CHECK(std::fabs(p[0] - 1.0 / 3) < 1e-15);
    CHECK(std::fabs(p[1] - 2.0 / 3) < 1e-15);
  }

  TEST_CASE("shift invariance and validity on random inputs") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      auto v = random_vector(1 + trial % 13, rng);
      for (auto& x : v) x *= 50.0;
      const double c = uniform(rng, -500.0, 500.0);
      auto shifted = v;
      for (auto& x : shifted) x += c;
      const auto p = softmax(v);
      const auto q = softmax(shifted);
      const double sum = std::accumulate(p.begin(), p.end(), 0.0);
      CHECK(std::fabs(sum - 1.0) < 1e-9);
      for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p[i] > 0.0);
        CHECK(std::fabs(p[i] - q[i]) < 1e-12);
      }
    }
  }

  TEST_CASE("huge logits stay finite") {
    const auto p = softmax(std::vector<double>{1000.0, 0.0});
    CHECK(p[0] == 1.0);
    CHECK(std::isfinite(p[1]));
  }
}

TEST_SUITE("backward") {
  TEST_CASE("grad of |w|^2/2 is w") {
    Rng rng(4);
    ParameterStore p;
    p.add("w", {2, 3}, random_vector(6, rng));
    Graph g(p);
    const auto grads = g.backward(scale(sum_all(square(g.param("w"))), 0.5));
    CHECK(grads.at("w").values == p.at("w").values);
  }

  TEST_CASE("softmax cross-entropy gradient is softmax - onehot") {
    Rng rng(8);
    for (int k = 0; k < 6; ++k) {
      ParameterStore p;
      p.add("z", {1, 6}, random_vector(6, rng));
      Graph g(p);
      const auto logp = row_log_softmax(g.param("z"));
      const auto loss = scale(sum_all(gather_cols(logp, {k})), -1.0);
      const auto grads = g.backward(loss);
      const auto sm = softmax(p.at("z").values);
      for (int i = 0; i < 6; ++i) {
        const double want = sm[i] - (i == k ? 1.0 : 0.0);
        CHECK(std::fabs(grads.at("z").values[i] - want) < 1e-10);
      }
    }
  }

  TEST_CASE("non-scalar loss is a usage error") {
    ParameterStore p;
    p.add("w", {1, 2}, {1.0, 2.0});
    Graph g(p);
    CHECK_THROWS_AS(g.backward(g.param("w")), UsageError);
  }

  TEST_CASE("NaN gradient names the parameter") {
    ParameterStore p;
    p.add("bad.w", {1, 1}, {0.0});  // d log(x)/dx = inf at 0
    Graph g(p);
    try {
      g.backward(sum_all(log(g.param("bad.w"))));
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("bad.w") != std::string::npos);
    }
  }

  TEST_CASE("untouched parameters are absent from the gradient") {
    ParameterStore p;
    p.add("a", {1, 1}, {2.0});
    p.add("b", {1, 1}, {3.0});
    Graph g(p);
    const auto grads = g.backward(sum_all(square(g.param("a"))));
    CHECK(grads.contains("a"));
    CHECK_FALSE(grads.contains("b"));
  }

  TEST_CASE("frozen graphs carry no gradient") {
    ParameterStore p;
    p.add("a", {1, 1}, {2.0});
    Graph g(p, GradMode::kFrozen);
    CHECK_FALSE(g.param("a").requires_grad());
  }

  TEST_CASE("mlp + lstm + softmax composite passes finite differences") {
    Rng rng(21);
    ParameterStore p;
    const LayerSpec layers[] = {{5, 8, Activation::kRelu}, {8, 6, Activation::kNone}};
    init_mlp(p, "m.", layers, rng);
    init_lstm(p, "l.", 6, 7, rng);
    Matrix xs[3];
    for (auto& x : xs) {
      x.resize(2, 5);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -1.0, 1.0);
    }
    Matrix c(2, 7);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = uniform(rng, -1.0, 1.0);
    auto loss = [&](Graph& g) {
      std::vector<Var> steps;
      for (const auto& x : xs) steps.push_back(mlp(g, "m.", layers, g.constant(x)));
      return sum_all(mul(row_softmax(lstm(g, "l.", steps)), g.constant(c)));
    };
    const auto stats = harness::finite_difference_check(p, loss, {"m.", "l."}, 64, 1e-5, rng);
    CHECK(stats.coordinates == 64);
    CHECK(stats.max_rel_error < 1e-4);
  }
}

TEST_SUITE("adam") {
  TEST_CASE("zero gradients leave parameters unchanged") {
    Rng rng(6);
    ParameterStore p;
    p.add("w", {3}, random_vector(3, rng));
    const auto before = p;
    OptimizerState opt(p, {"w"});
    GradientStore g;
    g.accumulate("w", {3}, std::vector<double>{0.0, 0.0, 0.0});
    for (int i = 0; i < 5; ++i) adam_step(p, g, opt);
    CHECK(p == before);
    CHECK(opt.step() == 5);
  }

  TEST_CASE("first step moves by about lr") {
    for (double gval : {1e-3, 0.5, -7.0, 1e4}) {
      ParameterStore p;
      p.add("w", {1}, {0.0});
      OptimizerState opt(p, {"w"});
      GradientStore g;
      g.accumulate("w", {1}, std::vector<double>{gval});
      adam_step(p, g, opt);
      const double delta = std::fabs(p.at("w").values[0]);
      CHECK(delta >= 0.99 * 3e-4);
      CHECK(delta <= 3e-4);
      CHECK(p.at("w").values[0] * gval < 0.0);
    }
  }

  TEST_CASE("10 steps match a hand-coded recurrence to 1e-10") {
    Rng rng(12);
    ParameterStore p;
    p.add("w", {4}, random_vector(4, rng));
    std::vector<double> w = p.at("w").values, m(4, 0.0), v(4, 0.0);
    OptimizerState opt(p, {"w"});
    const double lr = 3e-4, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 10; ++t) {
      const auto grad = random_vector(4, rng);
      GradientStore g;
      g.accumulate("w", {4}, grad);
      adam_step(p, g, opt);
      for (int i = 0; i < 4; ++i) {
        m[i] = b1 * m[i] + (1 - b1) * grad[i];
        v[i] = b2 * v[i] + (1 - b2) * grad[i] * grad[i];
        const double mh = m[i] / (1 - std::pow(b1, t));
        const double vh = v[i] / (1 - std::pow(b2, t));
        w[i] -= lr * mh / (std::sqrt(vh) + eps);
      }
    }
    for (int i = 0; i < 4; ++i) CHECK(std::fabs(p.at("w").values[i] - w[i]) < 1e-10);
  }

  TEST_CASE("gradient for an untracked key is a config error") {
    ParameterStore p;
    p.add("w", {1}, {0.0});
    p.add("u", {1}, {0.0});
    OptimizerState opt(p, {"w"});
    GradientStore g;
    g.accumulate("u", {1}, std::vector<double>{1.0});
    CHECK_THROWS_AS(adam_step(p, g, opt), ConfigError);
  }
}

TEST_SUITE("serialize") {
  ParameterStore sample_store() {
    Rng rng(31);
    ParameterStore p;
    p.add("a.w", {3, 2}, random_vector(6, rng));
    p.add("a.b", {2}, random_vector(2, rng));
    p.add("t", {2, 1, 2}, {std::nan(""), -0.0, 1e-308, -1e308});
    p.set_log_alpha(std::log(0.2));
    return p;
  }

  TEST_CASE("round trip is bit exact") {
    const auto p = sample_store();
    const auto bytes = serialize_params(p);
    const auto q = deserialize_params(bytes);
    REQUIRE(q.size() == p.size());
    for (const auto& [name, e] : p.entries()) {
      const auto& f = q.at(name);
      CHECK(f.shape == e.shape);
      CHECK(std::memcmp(f.values.data(), e.values.data(), e.values.size() * sizeof(double)) == 0);
    }
    CHECK(serialize_params(q) == bytes);
  }

  TEST_CASE("header layout") {
    ParameterStore p;
    p.add("x", {1}, {1.0});
    const auto bytes = serialize_params(p);
    // magic, u32 version, u64 count, u32 len, "x", u32 rank, u64 dim, f64
    REQUIRE(bytes.size() == 8 + 4 + 8 + 4 + 1 + 4 + 8 + 8);
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "CSACPARM");
    CHECK(bytes[8] == 1);
    CHECK(bytes[12] == 1);
    // 1.0 little-endian
    CHECK(bytes[bytes.size() - 1] == 0x3F);
    CHECK(bytes[bytes.size() - 2] == 0xF0);
  }

  TEST_CASE("parse errors are distinct") {
    auto expect = [](std::vector<std::uint8_t> bytes, const std::string& what) {
      try {
        deserialize_params(bytes);
        FAIL("expected ParseError");
      } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(what) != std::string::npos);
      }
    };
    expect({}, "bad magic");
    auto bytes = serialize_params(sample_store());
    auto wrong_version = bytes;
    wrong_version[8] = 2;
    expect(wrong_version, "unsupported version");
    bytes.pop_back();
    expect(bytes, "truncated");
  }

  TEST_CASE("file round trip") {
    const auto p = sample_store();
    const auto path = std::filesystem::temp_directory_path() / "crowdsac_test_params.ckpt";
    save_params(p, path);
    const auto q = load_params(path);
    CHECK(serialize_params(q) == serialize_params(p));
    std::filesystem::remove(path);
  }
}

TEST_SUITE("params") {
  TEST_CASE("length must match shape") {
    ParameterStore p;
    CHECK_THROWS_AS(p.add("w", {2, 2}, {1.0, 2.0, 3.0}), ConfigError);
    p.add("w", {2, 2}, {1, 2, 3, 4});
    CHECK_THROWS_AS(p.set_values("w", std::vector<double>{1.0}), ConfigError);
    CHECK_THROWS(p.add("w", {4}, {1, 2, 3, 4}));
  }

  TEST_CASE("alpha is exp(log_alpha)") {
    ParameterStore p;
    p.set_log_alpha(std::log(0.2));
    CHECK(p.alpha() == doctest::Approx(0.2).epsilon(1e-15));
    CHECK_THROWS_AS(p.set_log_alpha(std::nan("")), NumericError);
  }
}
