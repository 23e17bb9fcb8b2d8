#pragma once

#include <map>
#include <string>
#include <vector>

#include "vqa/parse.hpp"

namespace vqa {

struct EmbeddingTable {
  std::map<std::string, std::vector<double>> vectors;  // keys case-folded
  int dim = 0;

  // nullptr when the token is unknown
  const std::vector<double>* lookup(const std::string& token) const;
};

// One token per line: token followed by `dim` decimals, space separated.
// Duplicate tokens keep the first vector (with a warning).
EmbeddingTable load_embeddings(const std::string& path);

// Mean of known-word vectors; all-unknown (or empty) phrases give zeros.
std::vector<double> embed_phrase(const std::vector<std::string>& words,
                                 const EmbeddingTable& table);

// concat(mean P, mean R, mean S): 3 x dim
std::vector<double> embed_tuple(const TupleStrings& tuple, const EmbeddingTable& table);

std::vector<std::string> question_tokens(const std::string& text);

// Per-token vectors for the recurrent branch; unknown tokens map to zeros.
std::vector<std::vector<double>> embed_tokens(const std::vector<std::string>& tokens,
                                              const EmbeddingTable& table);

}  // namespace vqa
