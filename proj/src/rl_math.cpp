#include "ghar/rl_math.hpp"

#include <algorithm>
#include <cmath>

#include "ghar/error.hpp"

namespace ghar {

std::string_view to_string(CriticTarget target) noexcept {
  return target == CriticTarget::kRewardToGo ? "reward_to_go" : "immediate";
}

CriticTarget parse_critic_target(std::string_view text) {
  if (text == "reward_to_go") return CriticTarget::kRewardToGo;
  if (text == "immediate") return CriticTarget::kImmediate;
  throw Error(ErrorCode::kConfig, "unknown critic target '" + std::string(text) + "'");
}

void RLConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorCode::kConfig, "gamma must lie in [0, 1]");
  if (!(lam >= 0.0 && lam <= 1.0)) throw Error(ErrorCode::kConfig, "lambda must lie in [0, 1]");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::kConfig, "epsilon must be positive");
}

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kShape, std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                                       std::to_string(b) + ")");
  }
}

}  // namespace

double discounted_return(std::span<const double> rewards, double gamma) {
  double total = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) total = rewards[t] + gamma * total;
  return total;
}

std::vector<double> rewards_to_go(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + gamma * running;
    out[t] = running;
  }
  return out;
}

std::vector<double> td_errors(std::span<const double> rewards, std::span<const double> values, double gamma) {
  require_same_length(rewards.size(), values.size(), "td_errors");
  std::vector<double> deltas(rewards.size());
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    double next = t + 1 < values.size() ? values[t + 1] : 0.0;
    deltas[t] = rewards[t] + gamma * next - values[t];
  }
  return deltas;
}

std::vector<double> gae(std::span<const double> deltas, double gamma, double lam) {
  std::vector<double> adv(deltas.size());
  double running = 0.0;
  for (std::size_t t = deltas.size(); t-- > 0;) {
    running = deltas[t] + gamma * lam * running;
    adv[t] = running;
  }
  return adv;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

double ppo_actor_objective(std::span<const double> action_log_probs, std::span<const double> ref_log_probs,
                           std::span<const double> advantages, double epsilon) {
  require_same_length(action_log_probs.size(), ref_log_probs.size(), "ppo_actor_objective");
  require_same_length(action_log_probs.size(), advantages.size(), "ppo_actor_objective");
  if (advantages.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < advantages.size(); ++t) {
    double ratio = std::exp(action_log_probs[t] - ref_log_probs[t]);
    if (!std::isfinite(ratio) || !std::isfinite(advantages[t])) {
      throw Error(ErrorCode::kNumeric, "non-finite probability ratio at step " + std::to_string(t));
    }
    sum += clipped_surrogate(ratio, advantages[t], epsilon);
  }
  return sum / static_cast<double>(advantages.size());
}

double critic_loss(std::span<const double> values, std::span<const double> targets) {
  require_same_length(values.size(), targets.size(), "critic_loss");
  double loss = 0.0;
  for (std::size_t t = 0; t < values.size(); ++t) {
    double err = values[t] - targets[t];
    loss += err * err;
  }
  return loss;
}

double total_loss(double actor_objective, double critic) { return -actor_objective + critic; }

TrajectoryScores score(std::string episode_id, std::vector<double> rewards, std::vector<double> values,
                       std::vector<double> action_log_probs, std::vector<double> ref_log_probs,
                       const RLConfig& config) {
  config.validate();
  require_same_length(rewards.size(), values.size(), "score");
  TrajectoryScores s;
  s.episode_id = std::move(episode_id);
  s.rewards = std::move(rewards);
  s.values = std::move(values);
  s.action_log_probs = std::move(action_log_probs);
  s.ref_log_probs = std::move(ref_log_probs);

  s.advantages = gae(td_errors(s.rewards, s.values, config.gamma), config.gamma, config.lam);
  s.returns = config.critic_target == CriticTarget::kRewardToGo ? rewards_to_go(s.rewards, config.gamma)
                                                                 : s.rewards;
  s.actor_objective = ppo_actor_objective(s.action_log_probs, s.ref_log_probs, s.advantages, config.epsilon);
  s.critic_loss = critic_loss(s.values, s.returns);
  s.total_loss = total_loss(s.actor_objective, s.critic_loss);
  return s;
}

}  // namespace ghar
