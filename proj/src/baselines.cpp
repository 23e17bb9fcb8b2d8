#include "vqa/baselines.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vqa/util.hpp"

namespace vqa {

std::string prior_baseline(const std::vector<QAItem>& train_items) {
  if (train_items.empty()) throw std::runtime_error("prior_baseline: empty training set");
  long long yes = 0, no = 0;
  for (const auto& item : train_items) {
    if (majority_answer(item) == "yes")
      ++yes;
    else
      ++no;
  }
  return yes >= no ? "yes" : "no";
}

std::string ngram_prefix(const std::string& question) {
  auto tokens = split_ws(to_lower(strip_punct(question)));
  size_t n = std::min<size_t>(4, tokens.size());
  tokens.resize(n);
  return join(tokens);
}

NgramTable fit_ngram(const std::vector<QAItem>& train_items) {
  if (train_items.empty()) throw std::runtime_error("fit_ngram: empty training set");
  std::map<std::string, std::pair<long long, long long>> counts;  // prefix -> (yes, no)
  for (const auto& item : train_items) {
    auto key = ngram_prefix(item.question_text);
    if (key.empty()) continue;
    if (majority_answer(item) == "yes")
      ++counts[key].first;
    else
      ++counts[key].second;
  }
  NgramTable table;
  for (const auto& [key, yn] : counts) {
    NgramEntry e;
    e.answer = yn.first >= yn.second ? "yes" : "no";
    e.count = std::max(yn.first, yn.second);
    table.prefixes.emplace(key, e);
  }
  return table;
}

std::string ngram_predict(const NgramTable& table, const std::string& question) {
  auto it = table.prefixes.find(ngram_prefix(question));
  return it == table.prefixes.end() ? "yes" : it->second.answer;
}

void write_ngram_table(const NgramTable& table, const std::string& path,
                       const std::string& provenance_header) {
  std::ostringstream out;
  out << provenance_header;
  for (const auto& [prefix, e] : table.prefixes)
    out << prefix << '\t' << e.answer << '\t' << e.count << '\n';
  write_text_file(path, out.str());
}

NgramTable load_ngram_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open n-gram table: " + path);
  NgramTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_char(line, '\t');
    if (cols.size() != 3)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 3 columns");
    table.prefixes[cols[0]] = {cols[1], std::stoll(cols[2])};
  }
  return table;
}

VerifierModel blind_variant(Variant variant, int embed_dim, int hidden, double dropout,
                            uint64_t seed) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.feature_mode = FeatureMode::none;
  cfg.embed_dim = embed_dim;
  cfg.hidden = hidden;
  cfg.image_dim = 0;
  cfg.dropout = dropout;
  return make_model(cfg, seed);
}

}  // namespace vqa
