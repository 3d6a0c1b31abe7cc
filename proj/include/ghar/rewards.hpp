#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ghar/kg_store.hpp"

namespace ghar {

enum class Normalization { kNone, kClamp, kRunningZscore };
enum class RankMode { kLiteral, kMargin };

std::string_view to_string(Normalization mode) noexcept;
Normalization parse_normalization(std::string_view text);
std::string_view to_string(RankMode mode) noexcept;
RankMode parse_rank_mode(std::string_view text);

struct RewardConfig {
  int expected_reason_length = 3;  // L
  double eta = 5.0;                // weight on the outcome reward
  double alpha = 0.1;              // ranking floor / margin
  Normalization normalization = Normalization::kNone;
  RankMode rank_mode = RankMode::kLiteral;

  void validate() const;
};

struct RewardIndicators {
  int answer_correct = 0;
  int answer_format = 0;
  int action_format = 0;

  bool operator==(const RewardIndicators&) const = default;
};

struct RewardBreakdown {
  double r_reason = 0.0;
  double r_path = 0.0;
  double r_rel = 0.0;
  double r_cost = 0.0;
  double r_orm = 0.0;
  double r_rank = 0.0;
  double r_all = 0.0;  // pre-normalization
  RewardIndicators indicators;

  bool operator==(const RewardBreakdown&) const = default;
};

struct ReferenceTrajectories {
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
};

/// JSON Lines {"polarity": "pos"|"neg", "history": "..."}.
ReferenceTrajectories load_references(std::string_view jsonl);
ReferenceTrajectories load_references_file(const std::string& path);

/// Jaccard overlap of lowercased whitespace-token sets; 0 when either side
/// has no tokens.
double sim(std::string_view a, std::string_view b);

double reward_reason(std::size_t history_len, int expected_len);
double reward_path(const MetaPathSelection& selection);
double reward_path(std::size_t correct, std::size_t erroneous, std::size_t repeated);
double reward_rel(std::string_view answer, std::string_view sub_query, std::string_view corpus_text);
double reward_orm(bool answer_correct, bool answer_format, bool steps_format_ok);

/// Literal: max(alpha, sim_pos - sim_neg). Margin: max(0, alpha - (sim_pos - sim_neg)).
double reward_rank_from_sims(double sim_pos, double sim_neg, double alpha, RankMode mode);
/// sim_pos/sim_neg are taken against the most similar reference of each polarity.
double reward_rank(std::string_view history_text, const ReferenceTrajectories& refs, double alpha,
                   RankMode mode = RankMode::kLiteral);

double reward_all(double r_cost, double r_orm, double r_rank, double eta);

/// Fills r_cost and r_all from the component fields.
void compose(RewardBreakdown& b, double eta);

/// Streaming normalizer; running_zscore keeps Welford state across calls.
class RewardNormalizer {
 public:
  static constexpr double kClampBound = 5.0;
  static constexpr double kStdFloor = 1e-8;

  explicit RewardNormalizer(Normalization mode = Normalization::kNone) : mode_(mode) {}

  double operator()(double x);
  std::vector<double> apply(std::span<const double> xs);

 private:
  Normalization mode_;
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace ghar
