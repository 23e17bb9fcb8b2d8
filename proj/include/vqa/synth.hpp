#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqa/parse.hpp"
#include "vqa/scene.hpp"

namespace vqa {

struct PlantedCorrelation {
  std::string word;
  int instance_id = 0;
  double correlation = 1.0;
};

// Settings for the template-based corpus generator. Questions come from two
// templates: "Is there a <X>?" (truth: X present) and "Is the <A> left of the
// <B>?" (truth: x_A < x_B). Per-question-text yes fractions are hit with exact
// counts; human answers are the truth with independent per-annotator flips.
struct GeneratorSpec {
  int num_scenes = 200;
  int questions_per_scene = 3;
  double outdoor_fraction = 0.5;
  int objects_min = 3;
  int objects_max = 6;
  double balance = 0.5;            // target yes fraction per question text
  double bias_strength = -1.0;     // >=0: per-text target becomes this or 1-this
  double bias_yes_fraction = 0.5;  // share of texts biased toward yes
  double disagreement = 0.0;       // per-annotator flip probability
  double complement_fraction = 0.0;
  bool strict_balance = false;     // fail instead of rounding infeasible targets
  bool use_exists = true;
  bool use_left_of = true;
  int word_pool = 12;              // distinct target words drawn from the vocabulary
  int embedding_dim = 64;
  std::vector<PlantedCorrelation> planted;
};

GeneratorSpec load_generator_spec(const std::string& path);

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<ParsedQuestion> parses;  // aligned with corpus.items
};

SyntheticCorpus generate_synthetic_corpus(const GeneratorSpec& spec, const Vocabulary& vocab,
                                          uint64_t seed);

void write_questions_tsv(const Corpus& corpus, const std::string& path,
                         const std::string& provenance_header = "");
void write_parses_file(const std::vector<ParsedQuestion>& parses, const std::string& path,
                       const std::string& provenance_header = "");

// One deterministic pseudo-random vector per distinct question token.
void write_synthetic_embeddings(const Corpus& corpus, int dim, uint64_t seed,
                                const std::string& path);

}  // namespace vqa
