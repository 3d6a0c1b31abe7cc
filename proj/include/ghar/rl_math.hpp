#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ghar {

enum class CriticTarget { kRewardToGo, kImmediate };

std::string_view to_string(CriticTarget target) noexcept;
CriticTarget parse_critic_target(std::string_view text);

struct RLConfig {
  double gamma = 0.99;
  double lam = 0.95;
  double epsilon = 0.2;
  CriticTarget critic_target = CriticTarget::kRewardToGo;

  void validate() const;
};

/// Sum_t gamma^t r_t.
double discounted_return(std::span<const double> rewards, double gamma);

/// Discounted reward-to-go for every step.
std::vector<double> rewards_to_go(std::span<const double> rewards, double gamma);

/// delta_t = r_t + gamma V(s_{t+1}) - V(s_t), with V = 0 past the last step.
std::vector<double> td_errors(std::span<const double> rewards, std::span<const double> values, double gamma);

/// A_t = sum_l (gamma lam)^l delta_{t+l}, by backward recursion.
std::vector<double> gae(std::span<const double> deltas, double gamma, double lam);

/// min(r A, clip(r, 1-eps, 1+eps) A) for one step.
double clipped_surrogate(double ratio, double advantage, double epsilon);

/// Mean clipped surrogate with ratio exp(action_lp - ref_lp). The training
/// loss is its negation. Throws kNumeric naming the step on a non-finite
/// ratio; 0 for empty input.
double ppo_actor_objective(std::span<const double> action_log_probs, std::span<const double> ref_log_probs,
                           std::span<const double> advantages, double epsilon);

/// Sum_t (V_t - target_t)^2.
double critic_loss(std::span<const double> values, std::span<const double> targets);

/// (-actor_objective) + critic.
double total_loss(double actor_objective, double critic);

struct TrajectoryScores {
  std::string episode_id;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> action_log_probs;
  std::vector<double> ref_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;
  double actor_objective = 0.0;
  double critic_loss = 0.0;
  double total_loss = 0.0;
};

/// Runs the whole pass: TD errors, GAE, critic targets and losses.
TrajectoryScores score(std::string episode_id, std::vector<double> rewards, std::vector<double> values,
                       std::vector<double> action_log_probs, std::vector<double> ref_log_probs,
                       const RLConfig& config);

}  // namespace ghar
