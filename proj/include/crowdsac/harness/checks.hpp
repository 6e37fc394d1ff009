#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "crowdsac/dsac/dsac.hpp"
#include "crowdsac/orca/orca.hpp"

namespace crowdsac::harness {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckReport {
  std::string suite;
  std::vector<CheckResult> results;
  bool passed() const;
};

void print_report(std::ostream& out, const CheckReport& report);

// grad | tabular | reward | orca | inject. Unknown names throw UsageError.
CheckReport run_suite(const std::string& suite);
const std::vector<std::string>& suite_names();

// ---- finite differences ---------------------------------------------------

struct GradCheckStats {
  int coordinates = 0;
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]"
};

/// Central differences of `loss` on `count` random coordinates drawn from the
/// parameters whose names start with one of `prefixes`. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradCheckStats finite_difference_check(diff::ParameterStore params,
                                       const std::function<diff::Var(diff::Graph&)>& loss,
                                       const std::vector<std::string>& prefixes, int count,
                                       double step, Rng& rng, double floor = 1e-6);

// ---- tabular MDP ------------------------------------------------------------

/// Deterministic finite MDP; state s is observed as the one-hot in robot_full.
struct TabularMdp {
  int states = 3;
  int actions = 2;
  std::vector<std::vector<int>> next;        // [s][a]
  std::vector<std::vector<double>> reward;   // [s][a]
  int start = 0;
  int horizon = 20;  // episodes are truncated (bootstrapped) after this many steps
};

TabularMdp default_tabular_mdp();

// Q* of the soft Bellman backup at fixed alpha, iterated until the sup-norm
// change drops below tol.
std::vector<std::vector<double>> soft_value_iteration(const TabularMdp& mdp, double alpha, double gamma,
                                                      double tol = 1e-10);

class TabularEnvironment : public dsac::Environment {
 public:
  explicit TabularEnvironment(TabularMdp mdp) : mdp_(std::move(mdp)) {}
  sim::JointObservation reset(Rng& rng) override;
  StepResult step(int action) override;
  sim::JointObservation observe(int state) const;

 private:
  TabularMdp mdp_;
  int state_ = 0;
  int t_ = 0;
};

struct TabularRun {
  double max_q_error = 0.0;  // max over (s, a, critic)
  std::vector<std::vector<double>> q_oracle;
  std::vector<std::vector<double>> q1, q2;
  std::vector<double> soft_objective;  // J(pi) at each checkpoint
};

dsac::DsacConfig tabular_dsac_config();
enc::EncoderSpec tabular_encoder(const TabularMdp& mdp);

// Exact soft return of the policy from `start`, horizon-free discounting.
double soft_policy_value(const TabularMdp& mdp, const std::vector<std::vector<double>>& policy, double alpha,
                         double gamma);

TabularRun train_tabular(const TabularMdp& mdp, int episodes, std::uint64_t seed, int checkpoint_every);

// ---- reward -----------------------------------------------------------------

// Straight transcription of the piecewise reward, independent of sim::reward.
double reward_oracle(bool goal, bool timed_out, double d_min, double start_to_goal, double remaining);

// ---- ORCA rollouts ------------------------------------------------------------

// Every agent runs ORCA toward its antipodal goal; returns the smallest
// pairwise clearance seen over the rollout.
double orca_circle_rollout(int agents, double radius, std::uint64_t seed, int max_steps = 400);
double orca_head_on_rollout(std::uint64_t seed, int max_steps = 200);

// ---- LSTM injectivity ---------------------------------------------------------

struct InjectWitness {
  double lstm_distance = 0.0;
  double sum_distance = 0.0;
};

// Pools {3,1} and {2,2} broadcast to the interaction width.
InjectWitness injectivity_witness(std::uint64_t seed);

}  // namespace crowdsac::harness
