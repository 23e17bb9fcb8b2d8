#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vqa/align.hpp"
#include "vqa/baselines.hpp"
#include "vqa/embeddings.hpp"
#include "vqa/eval.hpp"
#include "vqa/features.hpp"
#include "vqa/model.hpp"
#include "vqa/parse.hpp"
#include "vqa/scene.hpp"
#include "vqa/synth.hpp"

namespace vqa {

inline constexpr const char* kToolVersion = "absvqa 0.1.0";

std::string provenance_header(uint64_t config_hash, uint64_t seed);

struct PipelineConfig {
  std::string corpus, parses, embeddings, lexicons, vocab, out_dir;
  uint64_t seed = 1;
  SplitFractions splits;
  std::string variant = "ensemble";       // tuple | q | ensemble
  std::string feature_mode = "attended";  // attended | holistic | none
  bool ablation = false;                  // run q-only, tuple-only and the ensemble
  TrainConfig train;
  uint64_t config_hash = 0;  // filled on load
};

PipelineConfig load_pipeline_config(const std::string& path);

// parse -> tuples, in corpus item order
std::vector<TupleStrings> parse_stage(const Corpus& corpus,
                                      const std::vector<ParsedQuestion>& parses,
                                      const Lexicons& lex);

std::map<std::string, Alignment> align_stage(const Corpus& corpus,
                                             const std::vector<TupleStrings>& tuples,
                                             const AlignmentTable& table, const Lexicons& lex,
                                             uint64_t seed);

// P-S offsets of aligned pairs, the preferred samples for the relative mixture
std::vector<Point2> alignment_offsets(const Corpus& corpus,
                                      const std::map<std::string, Alignment>& alignments);

FeatureFile feature_stage(const Corpus& corpus, const std::map<std::string, Alignment>& alignments,
                          const GmmBank* gmms, const PoseClusterBank* poses, FeatureMode mode);

// Examples carry tuple vector, token sequence and image row together; each
// model variant consumes the parts it needs. Image may be absent (blind).
std::vector<Example> build_examples(const Corpus& corpus, const std::vector<TupleStrings>& tuples,
                                    const EmbeddingTable& emb, const FeatureFile* feats,
                                    const Lexicons& lex);

Predictions predict_examples(const VerifierModel& m, const std::vector<Example>& data);
Predictions predict_ensemble(const VerifierModel& a, const VerifierModel& b,
                             const std::vector<Example>& data);

// Runs parse, alignment, gmm/pose fitting, features, training and evaluation,
// caching each stage by a content hash of its inputs. Writes report.json and
// report.txt into out_dir.
void run_pipeline(const PipelineConfig& cfg);

}  // namespace vqa
