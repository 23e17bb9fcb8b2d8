#pragma once

#include <map>
#include <string>
#include <vector>

#include "vqa/model.hpp"
#include "vqa/scene.hpp"

namespace vqa {

// Majority of per-item majority answers; ties go to "yes".
std::string prior_baseline(const std::vector<QAItem>& train_items);

// First min(4, length) lowercase tokens after punctuation stripping.
std::string ngram_prefix(const std::string& question);

struct NgramEntry {
  std::string answer = "yes";
  long long count = 0;
};

struct NgramTable {
  std::map<std::string, NgramEntry> prefixes;
};

NgramTable fit_ngram(const std::vector<QAItem>& train_items);

// Total function: unseen prefixes predict "yes".
std::string ngram_predict(const NgramTable& table, const std::string& question);

void write_ngram_table(const NgramTable& table, const std::string& path,
                       const std::string& provenance_header = "");
NgramTable load_ngram_table(const std::string& path);

// Language-only verifier: same architecture with the image branch removed.
VerifierModel blind_variant(Variant variant, int embed_dim, int hidden = 256,
                            double dropout = 0.5, uint64_t seed = 1);

}  // namespace vqa
