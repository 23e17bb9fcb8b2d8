#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vqa/scene.hpp"

namespace vqa {

// Consensus score min(#matching human answers / 3, 1); all strings normalized.
double vqa_accuracy(const std::string& prediction,
                    const std::vector<std::string>& human_answers);

struct AnswerBreakdown {
  long long count = 0;
  double mean_score = 0.0;  // percentage
};

struct EvalReport {
  double overall = 0.0;  // mean per-item vqa accuracy x100
  long long n_items = 0;
  std::map<std::string, AnswerBreakdown> by_majority_answer;
  std::optional<double> pair_accuracy;  // absent when no qualifying pairs
  long long n_qualifying_pairs = 0;
  double frac_without_complement = 0.0;
  double frac_pairs_not_opposite = 0.0;
};

using Predictions = std::map<std::string, std::string>;  // question_id -> answer

EvalReport evaluate(const Predictions& predictions, const Corpus& corpus);

// Fraction of complementary pairs with opposite majority answers where both
// members are predicted correctly. nullopt when no pair qualifies.
std::optional<double> pair_accuracy(const Predictions& predictions, const Corpus& corpus,
                                    long long* n_pairs_out = nullptr);

struct PrefixStat {
  std::string prefix;
  long long count = 0;
  std::string majority;
  double majority_share = 0.0;
  double entropy_bits = 0.0;
};

struct BalanceStats {
  long long n_items = 0;
  long long n_linked_pairs = 0;
  double frac_without_complement = 0.0;
  double frac_pairs_not_opposite = 0.0;
  double yes_fraction = 0.0;  // of per-item majority answers
  std::vector<PrefixStat> prefixes;  // sorted by count, descending
};

BalanceStats balance_audit(const Corpus& corpus);

Predictions load_predictions(const std::string& path);
void write_predictions(const Predictions& preds, const std::string& path,
                       const std::string& provenance_header = "");

std::string format_report(const EvalReport& report);
std::string format_balance_stats(const BalanceStats& stats, size_t max_prefixes = 20);

}  // namespace vqa
