#include <doctest.h>

#include <cmath>
#include <numeric>

#include "crowdsac/enc/encoders.hpp"
#include "crowdsac/errors.hpp"
#include "crowdsac/harness/checks.hpp"

using namespace crowdsac;
using namespace crowdsac::enc;
using diff::Matrix;

namespace {

sim::JointObservation fixture(int n, Rng& rng) {
  sim::JointObservation obs;
  obs.robot_full = {uniform(rng, -1, 1), -4 + uniform(rng, -1, 1), uniform(rng, -0.7, 0.7), uniform(rng, -0.7, 0.7),
                    0.3, uniform(rng, -1, 1), 4.0, 1.0, uniform(rng, -M_PI, M_PI)};
  for (int i = 0; i < n; ++i) {
    obs.obstacles.push_back({uniform(rng, -4, 4), uniform(rng, -4, 4), uniform(rng, -1, 1), uniform(rng, -1, 1), 0.3});
  }
  return obs;
}

ParameterStore init(EncoderVariant v, Rng& rng, PoolMode pool = PoolMode::kRobLstmObs, int n = 2) {
  EncoderSpec spec;
  spec.variant = v;
  spec.pool = pool;
  spec.n_obstacles = n;
  ParameterStore p;
  init_encoder(spec, "e.", p, rng);
  return p;
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> dense(const ParameterStore& p, const std::string& name, const std::vector<double>& x, bool relu) {
  const auto& w = p.at(name + ".w");
  const auto& b = p.at(name + ".b");
  const std::size_t out = w.cols();
  std::vector<double> y(out);
  for (std::size_t j = 0; j < out; ++j) {
    double s = b.values[j];
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w.values[i * out + j];
    y[j] = relu ? std::max(0.0, s) : s;
  }
  return y;
}

// Zero-state LSTM, loops only; gates ordered i, f, g, o.
std::vector<double> lstm_oracle(const ParameterStore& p, const std::string& prefix,
                                const std::vector<std::vector<double>>& seq) {
  const auto& wx = p.at(prefix + "wx");
  const auto& wh = p.at(prefix + "wh");
  const auto& b = p.at(prefix + "b").values;
  const std::size_t H = wh.rows();
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (const auto& x : seq) {
    std::vector<double> z(b.begin(), b.end());
    for (std::size_t j = 0; j < 4 * H; ++j) {
      for (std::size_t i = 0; i < x.size(); ++i) z[j] += x[i] * wx.values[i * 4 * H + j];
      for (std::size_t i = 0; i < H; ++i) z[j] += h[i] * wh.values[i * 4 * H + j];
    }
    for (std::size_t j = 0; j < H; ++j) {
      c[j] = sigmoid_d(z[H + j]) * c[j] + sigmoid_d(z[j]) * std::tanh(z[2 * H + j]);
      h[j] = sigmoid_d(z[3 * H + j]) * std::tanh(c[j]);
    }
  }
  return h;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  CHECK(worst < tol);
}

}  // namespace

TEST_SUITE("robot feature") {
  TEST_CASE("goal frame fixture") {
    sim::JointObservation obs;
    // goal straight up: rotation pi/2
    obs.robot_full = {1, 1, 0.0, 0.5, 0.3, 1, 5, 1.0, M_PI / 2};
    obs.obstacles = {{1, 3, 0.5, 0.0, 0.3}};
    const auto f = robot_feature(obs);
    CHECK(f[0] == doctest::Approx(4.0));
    CHECK(f[1] == 1.0);
    CHECK(f[2] == doctest::Approx(0.5));
    CHECK(std::fabs(f[3]) < 1e-15);
    CHECK(f[4] == 0.3);
    CHECK(std::fabs(f[5]) < 1e-15);
    const auto o = relative_obstacle(obs, 0);
    CHECK(o[0] == doctest::Approx(2.0));
    CHECK(std::fabs(o[1]) < 1e-15);
    CHECK(std::fabs(o[2]) < 1e-15);
    CHECK(o[3] == doctest::Approx(-0.5));
    CHECK(o[4] == 0.3);
  }
}

TEST_SUITE("attention encoders") {
  TEST_CASE("embed_pairwise: width, zeros, composition") {
    Rng rng(1);
    auto p = init(EncoderVariant::kLSA, rng);
    const auto obs = fixture(1, rng);
    const auto r = robot_feature(obs);
    const auto o = relative_obstacle(obs, 0);
    const auto e = embed_pairwise(p, "e.", r, o);
    CHECK(e.size() == 100);
    const auto pair = concat(r, o);
    check_close(e, dense(p, "e.pair.l1", dense(p, "e.pair.l0", pair, false), true), 1e-12);

    for (const auto& [name, entry] : p.entries()) {
      if (name.rfind("e.pair.", 0) == 0) p.set_values(name, std::vector<double>(entry.values.size(), 0.0));
    }
    const auto z = embed_pairwise(p, "e.", r, o);
    CHECK(std::all_of(z.begin(), z.end(), [](double x) { return x == 0.0; }));
  }

  TEST_CASE("interaction: plain 100 -> 50, skip 111 -> 50") {
    CHECK(interaction_layers(InteractionMode::kPlain).front().in == 100);
    CHECK(interaction_layers(InteractionMode::kSkip).front().in == 111);
    Rng rng(2);
    auto skip = init(EncoderVariant::kSA, rng);
    std::vector<double> e(100);
    for (auto& x : e) x = uniform(rng, -1, 1);
    const std::vector<double> zero_pair(11, 0.0);
    // Zero the skip rows, then copy the embedded rows into a plain-mode store.
    auto w = skip.at("e.interact.l0.w").values;
    for (std::size_t row = 100; row < 111; ++row) {
      for (std::size_t j = 0; j < 50; ++j) w[row * 50 + j] = 0.0;
    }
    skip.set_values("e.interact.l0.w", w);
    ParameterStore plain;
    plain.add("e.interact.l0.w", {100, 50}, std::vector<double>(w.begin(), w.begin() + 100 * 50));
    plain.add("e.interact.l0.b", {50}, skip.at("e.interact.l0.b").values);
    const auto a = interaction_feature(skip, "e.", e, zero_pair, InteractionMode::kSkip);
    const auto b = interaction_feature(plain, "e.", e, {}, InteractionMode::kPlain);
    CHECK(a.size() == 50);
    CHECK(a == b);
    CHECK_THROWS_AS(interaction_feature(skip, "e.", e, {}, InteractionMode::kSkip), ConfigError);
  }

  TEST_CASE("attention scores: symmetry, single obstacle, shift invariance") {
    Rng rng(3);
    auto p = init(EncoderVariant::kAW, rng);
    std::vector<double> e(100);
    for (auto& x : e) x = uniform(rng, -1, 1);
    const auto same = attention_scores(p, "e.", {e, e, e, e});
    for (double w : same.weights) CHECK(w == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(attention_scores(p, "e.", {e}).weights == std::vector<double>{1.0});

    std::vector<std::vector<double>> es(3, std::vector<double>(100));
    for (auto& v : es) for (auto& x : v) x = uniform(rng, -1, 1);
    const auto before = attention_scores(p, "e.", es);
    auto bias = p.at("e.score.l1.b").values;
    bias[0] += 3.7;
    p.set_values("e.score.l1.b", bias);
    const auto after = attention_scores(p, "e.", es);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(after.scores[i] == doctest::Approx(before.scores[i] + 3.7).epsilon(1e-12));
      CHECK(std::fabs(after.weights[i] - before.weights[i]) < 1e-12);
    }
  }

  TEST_CASE("pooling: sum is order-free and collapses (3,1) vs (2,2); LSTM separates them") {
    Rng rng(4);
    const auto p = init(EncoderVariant::kLSA, rng);
    std::vector<double> a(50), b(50);
    for (auto& x : a) x = uniform(rng, -1, 1);
    for (auto& x : b) x = uniform(rng, -1, 1);
    CHECK(pool_obstacles(p, "e.", {a, b}, PoolOp::kSum) == pool_obstacles(p, "e.", {b, a}, PoolOp::kSum));
    const std::vector<double> v3(50, 3.0), v1(50, 1.0), v2(50, 2.0);
    CHECK(pool_obstacles(p, "e.", {v3, v1}, PoolOp::kSum) == pool_obstacles(p, "e.", {v2, v2}, PoolOp::kSum));
    int separated = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto w = harness::injectivity_witness(seed);
      CHECK(w.sum_distance == 0.0);
      separated += w.lstm_distance > 1e-6;
    }
    CHECK(separated >= 19);
    CHECK_THROWS_AS(pool_obstacles(p, "e.", {}, PoolOp::kSum), InvalidInput);
  }

  TEST_CASE("56-wide output, zero obstacles give a zero pooled block") {
    Rng rng(5);
    for (auto v : {EncoderVariant::kAW, EncoderVariant::kSA, EncoderVariant::kLSA}) {
      const auto p = init(v, rng);
      for (int n : {0, 1, 3}) {
        const auto obs = fixture(n, rng);
        const auto enc = encode_attention(p, "e.", obs, v);
        REQUIRE(enc.state.size() == 56);
        CHECK(std::all_of(enc.state.begin(), enc.state.end(), [](double x) { return std::isfinite(x); }));
        CHECK(enc.report.weights.size() == static_cast<std::size_t>(n));
        if (n == 0) {
          const auto r = robot_feature(obs);
          CHECK(std::equal(r.begin(), r.end(), enc.state.begin()));
          CHECK(std::all_of(enc.state.begin() + 6, enc.state.end(), [](double x) { return x == 0.0; }));
        }
        if (n == 1) CHECK(enc.report.weights[0] == 1.0);
      }
    }
  }

  TEST_CASE("LSA pipeline equals the hand-chained composition") {
    Rng rng(6);
    const auto p = init(EncoderVariant::kLSA, rng);
    const auto obs = fixture(2, rng);
    const auto r = robot_feature(obs);
    std::vector<std::vector<double>> es, hs;
    std::vector<double> scores;
    for (std::size_t i = 0; i < 2; ++i) {
      const auto pair = concat(r, relative_obstacle(obs, i));
      const auto e = dense(p, "e.pair.l1", dense(p, "e.pair.l0", pair, false), true);
      hs.push_back(dense(p, "e.interact.l0", concat(e, pair), false));
      scores.push_back(dense(p, "e.score.l1", dense(p, "e.score.l0", e, true), false)[0]);
      es.push_back(e);
    }
    const double m = std::max(scores[0], scores[1]);
    const double z = std::exp(scores[0] - m) + std::exp(scores[1] - m);
    std::vector<std::vector<double>> weighted;
    for (std::size_t i = 0; i < 2; ++i) {
      const double w = std::exp(scores[i] - m) / z;
      std::vector<double> v = hs[i];
      for (auto& x : v) x *= w;
      weighted.push_back(v);
    }
    const auto want = concat(r, lstm_oracle(p, "e.pool.", weighted));
    const auto got = encode_attention(p, "e.", obs, EncoderVariant::kLSA);
    check_close(got.state, want, 1e-12);
    check_close(got.report.scores, scores, 1e-12);
  }

  TEST_CASE("weights are a permutation-equivariant distribution; sum pooling is order-free") {
    Rng rng(7);
    for (auto v : {EncoderVariant::kAW, EncoderVariant::kSA, EncoderVariant::kLSA}) {
      const auto p = init(v, rng);
      for (int trial = 0; trial < 10; ++trial) {
        auto obs = fixture(4, rng);
        const auto a = encode_attention(p, "e.", obs, v);
        const double sum = std::accumulate(a.report.weights.begin(), a.report.weights.end(), 0.0);
        CHECK(std::fabs(sum - 1.0) < 1e-9);
        for (double w : a.report.weights) CHECK(w > 0.0);
        std::swap(obs.obstacles[0], obs.obstacles[3]);
        const auto b = encode_attention(p, "e.", obs, v);
        CHECK(std::fabs(a.report.weights[0] - b.report.weights[3]) < 1e-14);
        CHECK(std::fabs(a.report.weights[3] - b.report.weights[0]) < 1e-14);
        double diff = 0.0;
        for (std::size_t i = 0; i < 56; ++i) diff = std::max(diff, std::fabs(a.state[i] - b.state[i]));
        if (v == EncoderVariant::kLSA) {
          CHECK(diff > 1e-9);
        } else {
          CHECK(diff < 1e-12);
        }
      }
    }
  }

  TEST_CASE("batched encoding matches one-at-a-time, including mixed obstacle counts") {
    Rng rng(8);
    EncoderSpec spec;
    spec.variant = EncoderVariant::kLSA;
    ParameterStore p;
    init_encoder(spec, "e.", p, rng);
    std::vector<sim::JointObservation> obs;
    for (int n : {2, 0, 3, 2, 1}) obs.push_back(fixture(n, rng));
    std::vector<const sim::JointObservation*> batch;
    for (const auto& o : obs) batch.push_back(&o);
    diff::Graph g(p, diff::GradMode::kFrozen);
    const auto enc = encode(g, spec, "e.", batch);
    REQUIRE(enc.state.rows() == 5);
    for (std::size_t b = 0; b < obs.size(); ++b) {
      const auto single = encode_attention(p, "e.", obs[b], EncoderVariant::kLSA).state;
      for (std::size_t j = 0; j < 56; ++j) CHECK(std::fabs(enc.state.value()(Eigen::Index(b), Eigen::Index(j)) - single[j]) < 1e-12);
    }
  }
}

TEST_SUITE("relational graph") {
  // Builds X, A and two propagation rounds with plain loops.
  std::vector<std::vector<double>> rg_oracle(const ParameterStore& p, const sim::JointObservation& obs) {
    const auto r = robot_feature(obs);
    std::vector<std::vector<double>> x;
    x.push_back(dense(p, "e.robot_embed.l1", dense(p, "e.robot_embed.l0", {r.begin(), r.end()}, true), false));
    for (std::size_t i = 0; i < obs.obstacles.size(); ++i) {
      const auto o = relative_obstacle(obs, i);
      x.push_back(dense(p, "e.obstacle_embed.l1", dense(p, "e.obstacle_embed.l0", {o.begin(), o.end()}, true), false));
    }
    const std::size_t k = x.size(), d = x[0].size();
    std::vector<std::vector<double>> a(k, std::vector<double>(k));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) a[i][j] = dense(p, "e.relation.l0", concat(x[i], x[j]), false)[0];
    }
    auto h = x;
    for (int round = 0; round < 2; ++round) {
      const auto& w = p.at("e.gcn" + std::to_string(round) + ".w").values;
      std::vector<std::vector<double>> ah(k, std::vector<double>(d, 0.0));
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
          for (std::size_t c = 0; c < d; ++c) ah[i][c] += a[i][j] * h[j][c];
      auto next = h;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
          double s = 0.0;
          for (std::size_t q = 0; q < d; ++q) s += ah[i][q] * w[q * d + c];
          next[i][c] = std::max(0.0, s) + h[i][c];
        }
      }
      h = next;
    }
    return h;
  }

  std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
  }

  TEST_CASE("two rounds on a 3-agent fixture match a loop oracle to 1e-10") {
    Rng rng(9);
    const auto p = init(EncoderVariant::kRG, rng, PoolMode::kRobObs, 2);
    const auto obs = fixture(2, rng);
    const auto h = rg_oracle(p, obs);
    CHECK(h.size() == 3);
    check_close(pool_ablation(obs, p, "e.", PoolMode::kRobObs), flatten(h), 1e-10);
  }

  TEST_CASE("zero propagation weights keep H = X") {
    Rng rng(10);
    auto p = init(EncoderVariant::kRG, rng, PoolMode::kRobObs, 3);
    for (int round = 0; round < 2; ++round) {
      const auto name = "e.gcn" + std::to_string(round) + ".w";
      p.set_values(name, std::vector<double>(p.at(name).values.size(), 0.0));
    }
    const auto obs = fixture(3, rng);
    const auto r = robot_feature(obs);
    std::vector<double> x = dense(p, "e.robot_embed.l1", dense(p, "e.robot_embed.l0", {r.begin(), r.end()}, true), false);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto o = relative_obstacle(obs, i);
      const auto xo = dense(p, "e.obstacle_embed.l1", dense(p, "e.obstacle_embed.l0", {o.begin(), o.end()}, true), false);
      x.insert(x.end(), xo.begin(), xo.end());
    }
    check_close(pool_ablation(obs, p, "e.", PoolMode::kRobObs), x, 1e-15);
  }

  TEST_CASE("ablation modes") {
    Rng rng(11);
    const auto obs = fixture(2, rng);
    const auto p = init(EncoderVariant::kRG, rng, PoolMode::kRobLstmObs, 2);
    const auto h = rg_oracle(p, obs);
    CHECK(pool_ablation(obs, p, "e.", PoolMode::kRob).size() == h[0].size());
    check_close(pool_ablation(obs, p, "e.", PoolMode::kRob), h[0], 1e-10);
    std::vector<double> sum(h[0].size(), 0.0);
    for (const auto& row : h)
      for (std::size_t c = 0; c < row.size(); ++c) sum[c] += row[c];
    check_close(pool_ablation(obs, p, "e.", PoolMode::kSumRobObs), sum, 1e-10);
    const auto rg = encode_rg(p, "e.", obs);
    CHECK(rg.size() == 56);
    CHECK(rg == pool_ablation(obs, p, "e.", PoolMode::kRobLstmObs));
    check_close(rg, concat(h[0], lstm_oracle(p, "e.pool.", {h[1], h[2]})), 1e-10);
    CHECK_THROWS_AS(parse_pool_mode("rob+attention(obs)"), ConfigError);
  }

  TEST_CASE("zero obstacles give [H0, 0]") {
    Rng rng(12);
    const auto p = init(EncoderVariant::kRG, rng);
    const auto obs = fixture(0, rng);
    const auto rg = encode_rg(p, "e.", obs);
    REQUIRE(rg.size() == 56);
    check_close({rg.begin(), rg.begin() + 6}, rg_oracle(p, obs)[0], 1e-12);
    CHECK(std::all_of(rg.begin() + 6, rg.end(), [](double x) { return x == 0.0; }));
  }

  TEST_CASE("every ablation mode builds and stays finite") {
    Rng rng(13);
    for (auto mode : {PoolMode::kRob, PoolMode::kRobObs, PoolMode::kSumRobObs, PoolMode::kRobMlpObs,
                      PoolMode::kMlpRobObs, PoolMode::kLstmRobObs, PoolMode::kRobLstmObs}) {
      EncoderSpec spec;
      spec.variant = EncoderVariant::kRG;
      spec.pool = mode;
      spec.n_obstacles = 3;
      ParameterStore p;
      init_encoder(spec, "e.", p, rng);
      const auto out = pool_ablation(fixture(3, rng), p, "e.", mode);
      CHECK(out.size() == spec.output_width());
      CHECK(std::all_of(out.begin(), out.end(), [](double x) { return std::isfinite(x); }));
      CHECK(parse_pool_mode(to_string(mode)) == mode);
    }
  }
}
