#include "crowdsac/harness/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "crowdsac/errors.hpp"

namespace crowdsac::harness {

using diff::Graph;
using diff::Matrix;
using diff::ParameterStore;
using diff::Var;

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

// Observations with moving agents: spawn, then a few random steps.
std::vector<sim::JointObservation> random_observations(int count, int obstacles, Rng& rng) {
  sim::SimConfig config;
  config.n_obstacles = obstacles;
  std::vector<sim::JointObservation> out;
  const auto policy = orca::obstacle_policy();
  while (static_cast<int>(out.size()) < count) {
    auto world = sim::spawn(config, rng);
    const int warmup = std::uniform_int_distribution<int>(1, 6)(rng);
    for (int k = 0; k < warmup && !world.terminated; ++k) {
      const int a = std::uniform_int_distribution<int>(0, sim::kActionCount - 1)(rng);
      world = sim::step(world, sim::Action{a}, policy).first;
    }
    out.push_back(sim::observe(world));
  }
  return out;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -1.0, 1.0);
  return m;
}

CheckReport grad_suite() {
  CheckReport report{"grad", {}};
  constexpr int kCoords = 64;
  constexpr double kStep = 1e-5;
  constexpr double kTol = 1e-4;
  const enc::EncoderVariant variants[] = {enc::EncoderVariant::kRG, enc::EncoderVariant::kAW,
                                          enc::EncoderVariant::kSA, enc::EncoderVariant::kLSA};
  for (auto variant : variants) {
    Rng rng(derive_seed(7, static_cast<std::uint64_t>(variant)));
    enc::EncoderSpec spec;
    spec.variant = variant;
    spec.n_obstacles = 2;
    dsac::DsacConfig config;
    dsac::Agent agent(spec, config, rng);
    const auto obs = random_observations(3, 2, rng);
    std::vector<const sim::JointObservation*> batch;
    for (const auto& o : obs) batch.push_back(&o);
    const Matrix c1 = random_matrix(3, config.n_actions, rng);
    const Matrix c2 = random_matrix(3, config.n_actions, rng);
    // Zero-sum rows keep the policy loss near 0, which keeps finite-difference
    // round-off well below the smallest gradients being checked.
    const Matrix c1_centered = c1.colwise() - c1.rowwise().mean();

    auto critic_loss = [&](Graph& g) {
      auto e = enc::encode(g, spec, dsac::kCriticEncoder, batch);
      auto q = dsac::critic_heads(g, dsac::kCriticRoot, config, e.state);
      return diff::add(diff::sum_all(diff::mul(q.q1, g.constant(c1))),
                       diff::sum_all(diff::mul(q.q2, g.constant(c2))));
    };
    auto policy_loss = [&](Graph& g) {
      auto e = enc::encode(g, spec, dsac::kPolicyEncoder, batch);
      auto p = dsac::policy_head(g, config, e.state);
      return diff::scale(diff::sum_all(diff::mul(p.probs, g.constant(c1_centered))), config.n_actions);
    };
    const std::string name(enc::to_string(variant));
    const auto critic = finite_difference_check(agent.params(), critic_loss, {"critic."}, kCoords, kStep, rng);
    const auto policy = finite_difference_check(agent.params(), policy_loss, {"policy."}, kCoords, kStep, rng);
    report.results.push_back({name + "+critic", critic.max_rel_error < kTol,
                              fmt("max rel err %.3e over 64 coords (tol 1e-4)", critic.max_rel_error) +
                                  " worst " + critic.worst});
    report.results.push_back({name + "+policy", policy.max_rel_error < kTol,
                              fmt("max rel err %.3e over 64 coords (tol 1e-4)", policy.max_rel_error) +
                                  " worst " + policy.worst});
  }
  return report;
}

CheckReport tabular_suite() {
  CheckReport report{"tabular", {}};
  const auto mdp = default_tabular_mdp();
  const auto run = train_tabular(mdp, 1500, 11, 100);
  report.results.push_back({"soft-VI agreement", run.max_q_error < 1e-2,
                            fmt("max |Q - Q_soft-VI| = %.3e (tol 1e-2)", run.max_q_error)});
  double worst_drop = 0.0;
  for (std::size_t i = 1; i < run.soft_objective.size(); ++i) {
    worst_drop = std::max(worst_drop, run.soft_objective[i - 1] - run.soft_objective[i]);
  }
  report.results.push_back({"soft objective monotone", worst_drop <= 1e-2,
                            fmt("largest decrease between checkpoints %.3e (tol 1e-2)", worst_drop)});
  return report;
}

CheckReport reward_suite() {
  CheckReport report{"reward", {}};
  Rng rng(2024);
  constexpr int kSamples = 100000;
  int mismatches = 0;
  int branch[5] = {0, 0, 0, 0, 0};  // goal, discomfort, collision, timeout, otherwise
  sim::SimConfig config;
  for (int i = 0; i < kSamples; ++i) {
    sim::WorldState w;
    w.t_max = config.t_max;
    w.dt = config.dt;
    w.robot.position = {uniform(rng, -5, 5), uniform(rng, -5, 5)};
    w.robot.goal = {uniform(rng, -5, 5), uniform(rng, -5, 5)};
    const int mode = std::uniform_int_distribution<int>(0, 4)(rng);
    if (mode == 0) w.robot.position = w.robot.goal + sim::Vec2{uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2)};
    sim::AgentState o;
    const double clearance = mode == 1 ? uniform(rng, 0.0, 0.2) : mode == 2 ? uniform(rng, -0.5, 0.0)
                                                                              : uniform(rng, -0.5, 3.0);
    const double ang = uniform(rng, 0, 2 * M_PI);
    o.position = w.robot.position + (w.robot.radius + o.radius + clearance) * sim::Vec2{std::cos(ang), std::sin(ang)};
    w.obstacles.push_back(o);
    w.steps = mode == 3 ? static_cast<int>(std::lround(config.t_max / config.dt))
                        : std::uniform_int_distribution<int>(0, 100)(rng);
    w.t = w.steps * w.dt;
    const double dsg = uniform(rng, 0.5, 10.0);
    const auto ev = sim::terminal_check(w);
    const double got = sim::reward(ev, w, dsg);
    const double d = sim::min_clearance(w);
    const double remaining = (w.robot.goal - w.robot.position).norm();
    const bool goal = d >= 0.0 && remaining <= w.robot.radius;
    const bool timeout = !goal && d >= 0.0 && w.t >= w.t_max - 1e-9;
    const double want = reward_oracle(goal, timeout, d, dsg, remaining);
    if (got != want) ++mismatches;
    if (goal) ++branch[0];
    else if (d > 0.0 && d < 0.2) ++branch[1];
    else if (d < 0.0) ++branch[2];
    else if (timeout) ++branch[3];
    else ++branch[4];
  }
  report.results.push_back({"exact match", mismatches == 0,
                            std::to_string(mismatches) + " mismatches over " + std::to_string(kSamples)});
  const char* names[] = {"goal", "discomfort", "collision", "timeout", "otherwise"};
  for (int b = 0; b < 5; ++b) {
    report.results.push_back({std::string("branch ") + names[b] + " coverage", branch[b] >= 1000,
                              std::to_string(branch[b]) + " hits (need 1000)"});
  }
  return report;
}

CheckReport orca_suite() {
  CheckReport report{"orca", {}};
  int clean = 0;
  for (int seed = 0; seed < 100; ++seed) {
    if (orca_circle_rollout(4, 4.0, static_cast<std::uint64_t>(seed)) >= 0.0) ++clean;
  }
  report.results.push_back({"4-agent circle", clean >= 95, std::to_string(clean) + "/100 seeds clean (need 95)"});
  int head_on = 0;
  for (int seed = 0; seed < 100; ++seed) {
    if (orca_head_on_rollout(static_cast<std::uint64_t>(seed)) >= 0.0) ++head_on;
  }
  report.results.push_back({"2-agent head-on", head_on == 100, std::to_string(head_on) + "/100 seeds clean (need 100)"});
  return report;
}

CheckReport inject_suite() {
  CheckReport report{"inject", {}};
  int separated = 0;
  bool sum_equal = true;
  for (int seed = 0; seed < 20; ++seed) {
    const auto w = injectivity_witness(static_cast<std::uint64_t>(seed));
    if (w.lstm_distance > 1e-6) ++separated;
    if (w.sum_distance != 0.0) sum_equal = false;
  }
  report.results.push_back({"lstm separates {3,1} vs {2,2}", separated >= 19,
                            std::to_string(separated) + "/20 inits (need 19)"});
  report.results.push_back({"sum collapses {3,1} vs {2,2}", sum_equal, sum_equal ? "distance 0" : "nonzero distance"});
  return report;
}

}  // namespace

bool CheckReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

void print_report(std::ostream& out, const CheckReport& report) {
  for (const auto& r : report.results) {
    out << (r.passed ? "PASS " : "FAIL ") << report.suite << "/" << r.name << ": " << r.detail << "\n";
  }
  out << report.suite << ": " << (report.passed() ? "all checks passed" : "FAILED") << "\n";
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"grad", "tabular", "reward", "orca", "inject"};
  return names;
}

CheckReport run_suite(const std::string& suite) {
  if (suite == "grad") return grad_suite();
  if (suite == "tabular") return tabular_suite();
  if (suite == "reward") return reward_suite();
  if (suite == "orca") return orca_suite();
  if (suite == "inject") return inject_suite();
  throw UsageError("unknown oracle suite '" + suite + "' (grad, tabular, reward, orca, inject)");
}

GradCheckStats finite_difference_check(ParameterStore params, const std::function<Var(Graph&)>& loss,
                                       const std::vector<std::string>& prefixes, int count, double step,
                                       Rng& rng, double floor) {
  GradCheckStats stats;
  diff::GradientStore grads;
  {
    Graph g(params, diff::GradMode::kTrack);
    grads = g.backward(loss(g));
  }
  std::vector<std::pair<std::string, std::size_t>> coords;
  for (const auto& [name, entry] : params.entries()) {
    const bool wanted = std::any_of(prefixes.begin(), prefixes.end(),
                                    [&](const std::string& p) { return name.rfind(p, 0) == 0; });
    if (!wanted) continue;
    for (std::size_t i = 0; i < entry.values.size(); ++i) coords.emplace_back(name, i);
  }
  if (coords.empty()) throw UsageError("finite_difference_check: no parameters match");
  auto eval = [&]() {
    Graph g(params, diff::GradMode::kFrozen);
    return loss(g).scalar();
  };
  for (int k = 0; k < count; ++k) {
    const auto& [name, index] =
        coords[std::uniform_int_distribution<std::size_t>(0, coords.size() - 1)(rng)];
    auto values = params.values(name);
    const double saved = values[index];
    values[index] = saved + step;
    const double up = eval();
    values[index] = saved - step;
    const double down = eval();
    values[index] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = grads.contains(name) ? grads.at(name).values[index] : 0.0;
    const double err =
        std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), floor});
    if (err >= stats.max_rel_error) {
      stats.max_rel_error = err;
      stats.worst = name + "[" + std::to_string(index) + "]";
    }
    ++stats.coordinates;
  }
  return stats;
}

// ---- tabular ----------------------------------------------------------------

TabularMdp default_tabular_mdp() {
  TabularMdp m;
  m.next = {{1, 2}, {0, 2}, {2, 0}};
  m.reward = {{0.0, 1.0}, {0.5, -0.2}, {1.0, 0.0}};
  return m;
}

std::vector<std::vector<double>> soft_value_iteration(const TabularMdp& mdp, double alpha, double gamma,
                                                      double tol) {
  std::vector<std::vector<double>> q(mdp.states, std::vector<double>(mdp.actions, 0.0));
  std::vector<double> v(mdp.states, 0.0);
  for (int iter = 0; iter < 100000; ++iter) {
    for (int s = 0; s < mdp.states; ++s) {
      const double m = *std::max_element(q[s].begin(), q[s].end());
      double z = 0.0;
      for (double x : q[s]) z += std::exp((x - m) / alpha);
      v[s] = m + alpha * std::log(z);
    }
    double change = 0.0;
    for (int s = 0; s < mdp.states; ++s) {
      for (int a = 0; a < mdp.actions; ++a) {
        const double nq = mdp.reward[s][a] + gamma * v[mdp.next[s][a]];
        change = std::max(change, std::fabs(nq - q[s][a]));
        q[s][a] = nq;
      }
    }
    if (change < tol) return q;
  }
  throw NumericError("soft value iteration did not converge");
}

sim::JointObservation TabularEnvironment::observe(int state) const {
  sim::JointObservation obs;
  obs.robot_full.fill(0.0);
  obs.robot_full.at(static_cast<std::size_t>(state)) = 1.0;
  return obs;
}

sim::JointObservation TabularEnvironment::reset(Rng&) {
  state_ = mdp_.start;
  t_ = 0;
  return observe(state_);
}

dsac::Environment::StepResult TabularEnvironment::step(int action) {
  if (action < 0 || action >= mdp_.actions) throw InvalidInput("tabular action out of range");
  StepResult r;
  r.reward = mdp_.reward[state_][action];
  state_ = mdp_.next[state_][action];
  ++t_;
  r.obs = observe(state_);
  r.truncated = t_ >= mdp_.horizon;
  if (r.truncated) r.outcome = dsac::Outcome::kTimeout;
  return r;
}

dsac::DsacConfig tabular_dsac_config() {
  dsac::DsacConfig c;
  c.gamma = 0.9;
  c.tau = 0.05;
  c.lr = 3e-3;
  c.batch_size = 32;
  c.alpha0 = 0.5;
  c.auto_entropy = false;
  c.replay_capacity = 5000;
  c.n_actions = 2;
  c.head_hidden = {};
  return c;
}

enc::EncoderSpec tabular_encoder(const TabularMdp& mdp) {
  enc::EncoderSpec spec;
  spec.variant = enc::EncoderVariant::kIdentity;
  spec.identity_width = static_cast<std::size_t>(mdp.states);
  spec.n_obstacles = 0;
  return spec;
}

double soft_policy_value(const TabularMdp& mdp, const std::vector<std::vector<double>>& policy, double alpha,
                         double gamma) {
  std::vector<double> v(mdp.states, 0.0);
  for (int iter = 0; iter < 100000; ++iter) {
    double change = 0.0;
    std::vector<double> nv(mdp.states, 0.0);
    for (int s = 0; s < mdp.states; ++s) {
      for (int a = 0; a < mdp.actions; ++a) {
        const double p = policy[s][a];
        if (p <= 0.0) continue;
        nv[s] += p * (mdp.reward[s][a] - alpha * std::log(p) + gamma * v[mdp.next[s][a]]);
      }
      change = std::max(change, std::fabs(nv[s] - v[s]));
    }
    v = nv;
    if (change < 1e-12) break;
  }
  return v[mdp.start];
}

TabularRun train_tabular(const TabularMdp& mdp, int episodes, std::uint64_t seed, int checkpoint_every) {
  const auto config = tabular_dsac_config();
  const auto spec = tabular_encoder(mdp);
  Rng init(derive_seed(seed, 0));
  dsac::Agent agent(spec, config, init);
  TabularEnvironment env(mdp);
  TabularRun run;
  auto snapshot_policy = [&](const dsac::Agent& a) {
    std::vector<std::vector<double>> pi;
    for (int s = 0; s < mdp.states; ++s) pi.push_back(a.policy(env.observe(s)).probs);
    return pi;
  };
  dsac::TrainingOptions options;
  options.episodes = episodes;
  options.seed = seed;
  options.on_episode = [&](const dsac::EpisodeLog& log, const dsac::Agent& a) {
    if (log.updates > 0 && (log.episode + 1) % checkpoint_every == 0) {
      run.soft_objective.push_back(soft_policy_value(mdp, snapshot_policy(a), config.alpha0, config.gamma));
    }
  };
  dsac::train_agent(agent, env, options);

  run.q_oracle = soft_value_iteration(mdp, config.alpha0, config.gamma);
  for (int s = 0; s < mdp.states; ++s) {
    const auto obs = env.observe(s);
    std::vector<double> onehot(static_cast<std::size_t>(mdp.states), 0.0);
    onehot[static_cast<std::size_t>(s)] = 1.0;
    const auto q = dsac::critic_forward(agent.params(), dsac::kCriticRoot, config, onehot);
    run.q1.push_back(q.q1);
    run.q2.push_back(q.q2);
    for (int a = 0; a < mdp.actions; ++a) {
      run.max_q_error = std::max({run.max_q_error, std::fabs(q.q1[a] - run.q_oracle[s][a]),
                                  std::fabs(q.q2[a] - run.q_oracle[s][a])});
    }
  }
  return run;
}

// ---- reward -------------------------------------------------------------------

double reward_oracle(bool goal, bool timed_out, double d_min, double start_to_goal, double remaining) {
  if (goal) return 1.0;
  if (0.0 < d_min && d_min < 0.2) return -0.1 + d_min / 2.0;
  if (d_min < 0.0) return -0.25;
  if (timed_out) return (start_to_goal - remaining) / start_to_goal * 0.5;
  return 0.0;
}

// ---- ORCA rollouts -----------------------------------------------------------------

namespace {

double rollout(std::vector<sim::AgentState> agents, int max_steps) {
  const sim::OrcaParams params;
  const double dt = 0.25;
  double worst = std::numeric_limits<double>::infinity();
  for (int step = 0; step < max_steps; ++step) {
    std::vector<sim::Vec2> v(agents.size());
    for (std::size_t i = 0; i < agents.size(); ++i) v[i] = orca::orca_velocity(agents, i, params, dt);
    bool all_home = true;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      agents[i].velocity = v[i];
      agents[i].position += dt * v[i];
      if ((agents[i].goal - agents[i].position).norm() > 1e-6) all_home = false;
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
      for (std::size_t j = i + 1; j < agents.size(); ++j) {
        const double c = (agents[i].position - agents[j].position).norm() - agents[i].radius - agents[j].radius;
        worst = std::min(worst, c);
      }
    }
    if (all_home) break;
  }
  return worst;
}

}  // namespace

double orca_circle_rollout(int agents, double radius, std::uint64_t seed, int max_steps) {
  Rng rng(seed);
  const double offset = uniform(rng, 0.0, 2.0 * M_PI);
  std::vector<sim::AgentState> state;
  for (int i = 0; i < agents; ++i) {
    const double ang = offset + 2.0 * M_PI * i / agents + uniform(rng, -M_PI / 18, M_PI / 18);
    sim::AgentState a;
    a.position = {radius * std::cos(ang), radius * std::sin(ang)};
    a.goal = -a.position;
    state.push_back(a);
  }
  return rollout(std::move(state), max_steps);
}

double orca_head_on_rollout(std::uint64_t seed, int max_steps) {
  Rng rng(seed);
  const double lateral = uniform(rng, -0.05, 0.05);
  sim::AgentState a, b;
  a.position = {-4.0, lateral};
  a.goal = {4.0, lateral};
  b.position = {4.0, 0.0};
  b.goal = {-4.0, 0.0};
  return rollout({a, b}, max_steps);
}

// ---- injectivity -----------------------------------------------------------------

InjectWitness injectivity_witness(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  ParameterStore params;
  diff::init_lstm(params, "pool.", enc::kInteractionDim, enc::kPooledDim, rng);
  auto broadcast = [](double s) { return std::vector<double>(enc::kInteractionDim, s); };
  const std::vector<std::vector<double>> a = {broadcast(3.0), broadcast(1.0)};
  const std::vector<std::vector<double>> b = {broadcast(2.0), broadcast(2.0)};
  InjectWitness w;
  const auto la = enc::pool_obstacles(params, "", a, enc::PoolOp::kLstm);
  const auto lb = enc::pool_obstacles(params, "", b, enc::PoolOp::kLstm);
  const auto sa = enc::pool_obstacles(params, "", a, enc::PoolOp::kSum);
  const auto sb = enc::pool_obstacles(params, "", b, enc::PoolOp::kSum);
  for (std::size_t i = 0; i < la.size(); ++i) {
    w.lstm_distance += (la[i] - lb[i]) * (la[i] - lb[i]);
    w.sum_distance += (sa[i] - sb[i]) * (sa[i] - sb[i]);
  }
  w.lstm_distance = std::sqrt(w.lstm_distance);
  w.sum_distance = std::sqrt(w.sum_distance);
  return w;
}

}  // namespace crowdsac::harness
