#include "vqa/embeddings.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "vqa/util.hpp"

namespace vqa {

const std::vector<double>* EmbeddingTable::lookup(const std::string& token) const {
  auto it = vectors.find(to_lower(token));
  return it == vectors.end() ? nullptr : &it->second;
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings file: " + path);
  EmbeddingTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream iss(line);
    std::string token;
    iss >> token;
    std::vector<double> v;
    double x;
    while (iss >> x) v.push_back(x);
    if (v.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": no vector values");
    if (table.dim == 0) table.dim = static_cast<int>(v.size());
    if (static_cast<int>(v.size()) != table.dim)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": vector has " +
                               std::to_string(v.size()) + " values, expected " +
                               std::to_string(table.dim));
    auto key = to_lower(token);
    if (table.vectors.count(key)) {
      std::cerr << "[embeddings] warning: duplicate token \"" << key << "\" at line " << lineno
                << ", keeping first\n";
      continue;
    }
    table.vectors.emplace(std::move(key), std::move(v));
  }
  if (table.vectors.empty()) throw std::runtime_error("empty embeddings file: " + path);
  return table;
}

std::vector<double> embed_phrase(const std::vector<std::string>& words,
                                 const EmbeddingTable& table) {
  std::vector<double> out(static_cast<size_t>(table.dim), 0.0);
  int known = 0;
  for (const auto& w : words) {
    if (const auto* v = table.lookup(w)) {
      for (size_t i = 0; i < out.size(); ++i) out[i] += (*v)[i];
      ++known;
    }
  }
  if (known > 0)
    for (auto& x : out) x /= known;
  return out;
}

std::vector<double> embed_tuple(const TupleStrings& tuple, const EmbeddingTable& table) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(3 * table.dim));
  for (const auto* arg : {&tuple.p, &tuple.r, &tuple.s}) {
    auto block = embed_phrase(*arg, table);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

std::vector<std::string> question_tokens(const std::string& text) {
  return split_ws(to_lower(strip_punct(text)));
}

std::vector<std::vector<double>> embed_tokens(const std::vector<std::string>& tokens,
                                              const EmbeddingTable& table) {
  std::vector<std::vector<double>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (const auto* v = table.lookup(t))
      out.push_back(*v);
    else
      out.emplace_back(static_cast<size_t>(table.dim), 0.0);
  }
  return out;
}

}  // namespace vqa
