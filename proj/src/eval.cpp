#include "vqa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vqa/baselines.hpp"
#include "vqa/util.hpp"

namespace vqa {

double vqa_accuracy(const std::string& prediction,
                    const std::vector<std::string>& human_answers) {
  if (human_answers.size() != 10)
    throw std::runtime_error("vqa_accuracy: expected 10 human answers, got " +
                             std::to_string(human_answers.size()));
  std::string pred = normalize_answer(prediction);
  int matches = 0;
  for (const auto& a : human_answers)
    if (normalize_answer(a) == pred) ++matches;
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

namespace {

// complement pairs, each listed once, restricted to members present in corpus
std::vector<std::pair<const QAItem*, const QAItem*>> linked_pairs(const Corpus& corpus) {
  std::map<std::string, const QAItem*> by_id;
  for (const auto& item : corpus.items) by_id[item.question_id] = &item;
  std::vector<std::pair<const QAItem*, const QAItem*>> pairs;
  for (const auto& item : corpus.items) {
    if (!item.complement_of) continue;
    auto it = by_id.find(*item.complement_of);
    if (it == by_id.end()) continue;
    if (item.question_id < it->second->question_id) pairs.emplace_back(&item, it->second);
  }
  return pairs;
}

}  // namespace

EvalReport evaluate(const Predictions& predictions, const Corpus& corpus) {
  EvalReport report;
  std::vector<std::string> missing;
  double total = 0.0;
  std::map<std::string, std::pair<long long, double>> by_gt;
  for (const auto& item : corpus.items) {
    auto it = predictions.find(item.question_id);
    if (it == predictions.end()) {
      missing.push_back(item.question_id);
      continue;
    }
    double score = vqa_accuracy(it->second, item.human_answers);
    total += score;
    auto& slot = by_gt[majority_answer(item)];
    ++slot.first;
    slot.second += score;
  }
  if (!missing.empty()) {
    std::string ids;
    for (size_t i = 0; i < missing.size() && i < 10; ++i) ids += (i ? ", " : "") + missing[i];
    if (missing.size() > 10) ids += ", ...";
    throw std::runtime_error("evaluate: missing predictions for " +
                             std::to_string(missing.size()) + " items: " + ids);
  }
  report.n_items = static_cast<long long>(corpus.items.size());
  report.overall = corpus.items.empty() ? 0.0 : 100.0 * total / static_cast<double>(corpus.items.size());
  for (const auto& [answer, slot] : by_gt)
    report.by_majority_answer[answer] = {slot.first,
                                         100.0 * slot.second / static_cast<double>(slot.first)};

  auto stats = balance_audit(corpus);
  report.frac_without_complement = stats.frac_without_complement;
  report.frac_pairs_not_opposite = stats.frac_pairs_not_opposite;
  report.pair_accuracy = pair_accuracy(predictions, corpus, &report.n_qualifying_pairs);
  return report;
}

std::optional<double> pair_accuracy(const Predictions& predictions, const Corpus& corpus,
                                    long long* n_pairs_out) {
  long long qualifying = 0, correct = 0;
  for (const auto& [a, b] : linked_pairs(corpus)) {
    std::string ma = majority_answer(*a), mb = majority_answer(*b);
    if (ma == mb) continue;  // only opposite-answer pairs qualify
    ++qualifying;
    auto pa = predictions.find(a->question_id);
    auto pb = predictions.find(b->question_id);
    if (pa == predictions.end() || pb == predictions.end()) continue;
    if (normalize_answer(pa->second) == ma && normalize_answer(pb->second) == mb) ++correct;
  }
  if (n_pairs_out) *n_pairs_out = qualifying;
  if (qualifying == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(qualifying);
}

BalanceStats balance_audit(const Corpus& corpus) {
  BalanceStats stats;
  stats.n_items = static_cast<long long>(corpus.items.size());
  long long without = 0, yes = 0;
  std::map<std::string, std::pair<long long, long long>> prefix_counts;
  for (const auto& item : corpus.items) {
    if (!item.complement_of) ++without;
    bool is_yes = majority_answer(item) == "yes";
    if (is_yes) ++yes;
    auto key = ngram_prefix(item.question_text);
    if (is_yes)
      ++prefix_counts[key].first;
    else
      ++prefix_counts[key].second;
  }
  if (stats.n_items > 0) {
    stats.frac_without_complement =
        static_cast<double>(without) / static_cast<double>(stats.n_items);
    stats.yes_fraction = static_cast<double>(yes) / static_cast<double>(stats.n_items);
  }

  auto pairs = linked_pairs(corpus);
  stats.n_linked_pairs = static_cast<long long>(pairs.size());
  long long not_opposite = 0;
  for (const auto& [a, b] : pairs)
    if (majority_answer(*a) == majority_answer(*b)) ++not_opposite;
  if (!pairs.empty())
    stats.frac_pairs_not_opposite =
        static_cast<double>(not_opposite) / static_cast<double>(pairs.size());

  for (const auto& [prefix, yn] : prefix_counts) {
    PrefixStat p;
    p.prefix = prefix;
    p.count = yn.first + yn.second;
    p.majority = yn.first >= yn.second ? "yes" : "no";
    double py = static_cast<double>(yn.first) / static_cast<double>(p.count);
    p.majority_share = std::max(py, 1.0 - py);
    auto h = [](double q) { return q > 0.0 ? -q * std::log2(q) : 0.0; };
    p.entropy_bits = h(py) + h(1.0 - py);
    stats.prefixes.push_back(std::move(p));
  }
  std::stable_sort(stats.prefixes.begin(), stats.prefixes.end(),
                   [](const PrefixStat& a, const PrefixStat& b) {
                     if (a.count != b.count) return a.count > b.count;
                     return a.prefix < b.prefix;
                   });
  return stats;
}

Predictions load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions file: " + path);
  Predictions preds;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_char(line, '\t');
    if (cols.size() != 2)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 2 columns");
    preds[cols[0]] = cols[1];
  }
  return preds;
}

void write_predictions(const Predictions& preds, const std::string& path,
                       const std::string& provenance_header) {
  std::ostringstream out;
  out << provenance_header;
  for (const auto& [qid, answer] : preds) out << qid << '\t' << answer << '\n';
  write_text_file(path, out.str());
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "items evaluated      " << report.n_items << "\n";
  out << "vqa accuracy         " << report.overall << "\n";
  for (const auto& [answer, b] : report.by_majority_answer)
    out << "  majority=" << answer << "      " << b.mean_score << "  (" << b.count << " items)\n";
  if (report.pair_accuracy)
    out << "pair accuracy        " << 100.0 * *report.pair_accuracy << "  ("
        << report.n_qualifying_pairs << " qualifying pairs)\n";
  else
    out << "pair accuracy        n/a (no qualifying pairs)\n";
  out << "without complement   " << 100.0 * report.frac_without_complement << "%\n";
  out << "pairs not opposite   " << 100.0 * report.frac_pairs_not_opposite << "%\n";
  return out.str();
}

std::string format_balance_stats(const BalanceStats& stats, size_t max_prefixes) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "items                    " << stats.n_items << "\n";
  out << "linked pairs             " << stats.n_linked_pairs << "\n";
  out << "frac without complement  " << stats.frac_without_complement << "\n";
  out << "frac pairs not opposite  " << stats.frac_pairs_not_opposite << "\n";
  out << "yes fraction             " << stats.yes_fraction << "\n";
  out << "top question prefixes (count, majority, share, entropy bits):\n";
  for (size_t i = 0; i < stats.prefixes.size() && i < max_prefixes; ++i) {
    const auto& p = stats.prefixes[i];
    out << "  \"" << p.prefix << "\"  " << p.count << "  " << p.majority << "  "
        << p.majority_share << "  " << p.entropy_bits << "\n";
  }
  return out.str();
}

}  // namespace vqa
