#include "ghar/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ghar/error.hpp"
#include "strings.hpp"

namespace ghar {

std::string_view to_string(Normalization mode) noexcept {
  switch (mode) {
    case Normalization::kNone: return "none";
    case Normalization::kClamp: return "clamp";
    case Normalization::kRunningZscore: return "running_zscore";
  }
  return "none";
}

Normalization parse_normalization(std::string_view text) {
  if (text == "none") return Normalization::kNone;
  if (text == "clamp") return Normalization::kClamp;
  if (text == "running_zscore") return Normalization::kRunningZscore;
  throw Error(ErrorCode::kConfig, "unknown normalization '" + std::string(text) + "'");
}

std::string_view to_string(RankMode mode) noexcept {
  return mode == RankMode::kLiteral ? "literal" : "margin";
}

RankMode parse_rank_mode(std::string_view text) {
  if (text == "literal") return RankMode::kLiteral;
  if (text == "margin") return RankMode::kMargin;
  throw Error(ErrorCode::kConfig, "unknown rank mode '" + std::string(text) + "'");
}

void RewardConfig::validate() const {
  if (expected_reason_length < 1) throw Error(ErrorCode::kConfig, "expected reason length L must be >= 1");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::kConfig, "eta must be a finite non-negative number");
  if (!std::isfinite(alpha)) throw Error(ErrorCode::kConfig, "alpha must be finite");
}

ReferenceTrajectories load_references(std::string_view jsonl) {
  ReferenceTrajectories refs;
  std::size_t line_no = 0;
  for (auto line : detail::split_lines(jsonl)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto polarity = j.at("polarity").get<std::string>();
      auto history = j.at("history").get<std::string>();
      if (polarity == "pos") {
        refs.positives.push_back(std::move(history));
      } else if (polarity == "neg") {
        refs.negatives.push_back(std::move(history));
      } else {
        throw ParseError("reference line " + std::to_string(line_no) + ": polarity must be pos or neg", line_no);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("reference line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return refs;
}

ReferenceTrajectories load_references_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open reference trajectories '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_references(ss.str());
}

double sim(std::string_view a, std::string_view b) {
  auto ta = detail::whitespace_tokens(a);
  auto tb = detail::whitespace_tokens(b);
  std::set<std::string> sa(ta.begin(), ta.end());
  std::set<std::string> sb(tb.begin(), tb.end());
  if (sa.empty() || sb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double reward_reason(std::size_t history_len, int expected_len) {
  if (expected_len < 1) throw Error(ErrorCode::kInvalidArgument, "expected reason length must be >= 1");
  return 1.0 - std::abs(static_cast<double>(history_len) / expected_len - 1.0);
}

double reward_path(std::size_t correct, std::size_t erroneous, std::size_t repeated) {
  return static_cast<double>(correct) - 0.5 * static_cast<double>(erroneous) -
         0.5 * static_cast<double>(repeated);
}

double reward_path(const MetaPathSelection& selection) {
  return reward_path(selection.correct.size(), selection.erroneous.size(), selection.repeated.size());
}

double reward_rel(std::string_view answer, std::string_view sub_query, std::string_view corpus_text) {
  return sim(answer, sub_query) + sim(answer, corpus_text);
}

double reward_orm(bool answer_correct, bool answer_format, bool steps_format_ok) {
  return static_cast<double>(answer_correct) + static_cast<double>(answer_format) +
         static_cast<double>(steps_format_ok);
}

double reward_rank_from_sims(double sim_pos, double sim_neg, double alpha, RankMode mode) {
  double gap = sim_pos - sim_neg;
  if (mode == RankMode::kLiteral) return std::max(alpha, gap);
  return std::max(0.0, alpha - gap);
}

double reward_rank(std::string_view history_text, const ReferenceTrajectories& refs, double alpha,
                   RankMode mode) {
  auto nearest = [&](const std::vector<std::string>& pool) {
    double best = 0.0;
    for (const auto& h : pool) best = std::max(best, sim(history_text, h));
    return best;
  };
  return reward_rank_from_sims(nearest(refs.positives), nearest(refs.negatives), alpha, mode);
}

double reward_all(double r_cost, double r_orm, double r_rank, double eta) {
  return r_cost + eta * r_orm + r_rank;
}

void compose(RewardBreakdown& b, double eta) {
  b.r_cost = b.r_reason + b.r_path + b.r_rel;
  b.r_all = reward_all(b.r_cost, b.r_orm, b.r_rank, eta);
}

double RewardNormalizer::operator()(double x) {
  switch (mode_) {
    case Normalization::kNone:
      return x;
    case Normalization::kClamp:
      return std::clamp(x, -kClampBound, kClampBound);
    case Normalization::kRunningZscore: {
      ++count_;
      double delta = x - mean_;
      mean_ += delta / static_cast<double>(count_);
      m2_ += delta * (x - mean_);
      double sd = std::sqrt(m2_ / static_cast<double>(count_));
      return (x - mean_) / std::max(sd, kStdFloor);
    }
  }
  return x;
}

std::vector<double> RewardNormalizer::apply(std::span<const double> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back((*this)(x));
  return out;
}

}  // namespace ghar
