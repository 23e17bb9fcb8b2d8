#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vqa/parse.hpp"
#include "vqa/scene.hpp"

namespace vqa {

// 2x2 mutual information in bits with add-0.5 smoothing per cell. Pairs where
// word and object are negatively correlated are gated to score 0 by the fitter
// so anti-correlated objects are never chosen at alignment time.
double mutual_information(double n11, double n10, double n01, double n00);

struct MiCell {
  long long n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  double mi = 0.0;
};

struct AlignmentTable {
  struct SubTable {
    // phrase -> per-instance cells (only admissible instances are meaningful)
    std::map<std::string, std::vector<MiCell>> phrases;
    long long total_items = 0;
  };
  SubTable indoor, outdoor;
  int vocab_size = 0;

  const SubTable& sub(SceneType t) const { return t == SceneType::indoor ? indoor : outdoor; }
  SubTable& sub(SceneType t) { return t == SceneType::indoor ? indoor : outdoor; }
};

// Fits per-scene-type MI tables over P/S phrase keys occurring at least twice.
// Each phrase is keyed both whole and by its head nouns.
AlignmentTable fit_alignment(const Corpus& corpus, const std::vector<TupleStrings>& tuples,
                             const Lexicons& lex);

enum class Resolution { mi_match, lexical_fallback, random_fallback, absent };
const char* resolution_name(Resolution r);

struct Alignment {
  std::optional<int> p_object, s_object;  // object indices within the scene
  Resolution p_resolved = Resolution::absent;
  Resolution s_resolved = Resolution::absent;
};

Alignment align(const TupleStrings& tuple, const Scene& scene, const AlignmentTable& table,
                const Vocabulary& vocab, const Lexicons& lex, uint64_t seed);

void write_alignment_table(const AlignmentTable& table, const std::string& path,
                           const std::string& provenance_header = "");
AlignmentTable load_alignment_table(const std::string& path, int vocab_size);

}  // namespace vqa
