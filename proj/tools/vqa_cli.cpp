// Command-line front end: each subcommand wraps one library operation, plus
// `run` which drives the whole experimental pipeline from a config file.

#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "vqa/pipeline.hpp"
#include "vqa/util.hpp"

namespace fs = std::filesystem;
using namespace vqa;

namespace {

std::string default_data_dir() { return std::string(ABSVQA_SOURCE_DIR) + "/data"; }

std::string flags_header(const std::string& subcommand, uint64_t seed) {
  return provenance_header(fnv1a64(subcommand), seed);
}

struct CommonPaths {
  std::string lexicons = default_data_dir() + "/lexicons";
  std::string vocab = default_data_dir() + "/vocabulary.tsv";
};

int cmd_gen_synthetic(const std::string& spec_path, const std::string& vocab_path,
                      const std::string& out_dir, uint64_t seed) {
  GeneratorSpec spec;
  if (!spec_path.empty()) spec = load_generator_spec(spec_path);
  Vocabulary vocab = load_vocabulary(vocab_path);
  auto synth = generate_synthetic_corpus(spec, vocab, seed);
  fs::create_directories(out_dir);
  std::string header = flags_header("gen-synthetic", seed);
  write_corpus(synth.corpus, out_dir + "/corpus.jsonl", header);
  write_questions_tsv(synth.corpus, out_dir + "/questions.tsv", header);
  write_parses_file(synth.parses, out_dir + "/parses.txt", header);
  write_synthetic_embeddings(synth.corpus, spec.embedding_dim, seed,
                             out_dir + "/embeddings.txt");
  std::cout << "wrote " << synth.corpus.items.size() << " items over "
            << synth.corpus.scenes.size() << " scenes to " << out_dir << "\n";
  return 0;
}

int cmd_parse(const std::string& questions_path, const std::string& parses_path,
              const std::string& lexicons_dir, const std::string& out_path) {
  Lexicons lex = load_lexicons(lexicons_dir);
  auto parses = load_parses(parses_path);
  std::vector<std::pair<std::string, std::string>> questions;
  for (const auto& line : split_char(read_text_file(questions_path), '\n')) {
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_char(line, '\t');
    if (cols.size() != 2) throw std::runtime_error("questions file: expected 2 columns");
    questions.emplace_back(cols[0], cols[1]);
  }
  if (questions.size() != parses.size())
    throw std::runtime_error("questions/parses size mismatch: " +
                             std::to_string(questions.size()) + " vs " +
                             std::to_string(parses.size()));
  std::vector<TupleStrings> tuples;
  for (size_t i = 0; i < questions.size(); ++i) {
    Tuple t = parse_question(questions[i].second, parses[i], lex);
    tuples.push_back(to_strings(t, questions[i].first));
  }
  write_tuples_tsv(tuples, out_path, flags_header("parse", 0));
  std::cout << "wrote " << tuples.size() << " tuples to " << out_path << "\n";
  return 0;
}

int cmd_fit_alignment(const std::string& corpus_path, const std::string& tuples_path,
                      const std::string& vocab_path, const std::string& lexicons_dir,
                      const std::string& out_path) {
  Vocabulary vocab = load_vocabulary(vocab_path);
  Corpus corpus = load_corpus(corpus_path, vocab);
  Lexicons lex = load_lexicons(lexicons_dir);
  auto tuples = load_tuples_tsv(tuples_path);
  auto table = fit_alignment(corpus, tuples, lex);
  write_alignment_table(table, out_path, flags_header("fit-alignment", 0));
  std::cout << "wrote alignment table to " << out_path << "\n";
  return 0;
}

int cmd_fit_gmms(const std::string& corpus_path, const std::string& vocab_path,
                 const std::string& tuples_path, const std::string& table_path,
                 const std::string& lexicons_dir, const std::string& out_gmms,
                 const std::string& out_poses, uint64_t seed) {
  Vocabulary vocab = load_vocabulary(vocab_path);
  Corpus corpus = load_corpus(corpus_path, vocab);
  std::string header = flags_header("fit-gmms", seed);
  std::vector<Point2> offsets;
  if (!tuples_path.empty() && !table_path.empty()) {
    Lexicons lex = load_lexicons(lexicons_dir);
    auto tuples = load_tuples_tsv(tuples_path);
    auto table = load_alignment_table(table_path, vocab.size());
    auto alignments = align_stage(corpus, tuples, table, lex, derive_seed(seed, "align-stage"));
    offsets = alignment_offsets(corpus, alignments);
    if (offsets.size() < 24) offsets.clear();
  }
  if (!out_gmms.empty()) {
    auto bank = fit_gmms(corpus, derive_seed(seed, "fit-gmms"), offsets);
    write_gmm_bank(bank, out_gmms, header);
    std::cout << "wrote mixtures to " << out_gmms << "\n";
  }
  if (!out_poses.empty()) {
    auto poses = fit_pose_clusters(corpus, derive_seed(seed, "fit-poses"));
    write_pose_clusters(poses, out_poses, header);
    std::cout << "wrote pose clusters to " << out_poses << "\n";
  }
  return 0;
}

int cmd_features(const std::string& corpus_path, const std::string& vocab_path,
                 const std::string& tuples_path, const std::string& table_path,
                 const std::string& gmms_path, const std::string& poses_path,
                 const std::string& lexicons_dir, const std::string& mode_name,
                 const std::string& out_path, uint64_t seed) {
  Vocabulary vocab = load_vocabulary(vocab_path);
  Corpus corpus = load_corpus(corpus_path, vocab);
  FeatureMode mode = feature_mode_from_name(mode_name);
  std::map<std::string, Alignment> alignments;
  GmmBank gmms;
  PoseClusterBank poses;
  if (mode == FeatureMode::attended) {
    Lexicons lex = load_lexicons(lexicons_dir);
    auto tuples = load_tuples_tsv(tuples_path);
    auto table = load_alignment_table(table_path, vocab.size());
    alignments = align_stage(corpus, tuples, table, lex, derive_seed(seed, "align-stage"));
    gmms = load_gmm_bank(gmms_path);
  } else {
    poses = load_pose_clusters(poses_path);
  }
  auto feats = feature_stage(corpus, alignments, mode == FeatureMode::attended ? &gmms : nullptr,
                             mode == FeatureMode::holistic ? &poses : nullptr, mode);
  write_feature_file(feats, out_path, flags_header("features", seed));
  std::cout << "wrote " << feats.question_ids.size() << " x " << feats.cols << " features to "
            << out_path << "\n";
  return 0;
}

struct TrainArgs {
  std::string corpus, vocab, lexicons, tuples, feats, embeddings, config, out;
  std::string variant = "tuple";
  std::string features_mode = "attended";
  uint64_t seed = 1;
};

// shared by `train`, `predict` and the blind baselines
struct LoadedData {
  Corpus corpus;
  CorpusSplits splits;
  std::vector<TupleStrings> tuples;
  EmbeddingTable emb;
  FeatureFile feats;
  bool blind = false;
  std::vector<Example> train, val, test;
};

LoadedData load_training_data(const TrainArgs& a) {
  LoadedData d;
  Vocabulary vocab = load_vocabulary(a.vocab);
  d.corpus = load_corpus(a.corpus, vocab);
  Lexicons lex = load_lexicons(a.lexicons);
  d.tuples = load_tuples_tsv(a.tuples);
  d.emb = load_embeddings(a.embeddings);
  d.blind = a.features_mode == "none";
  if (!d.blind) d.feats = load_feature_file(a.feats);
  d.splits = split_corpus(d.corpus, SplitFractions{}, a.seed);
  const FeatureFile* f = d.blind ? nullptr : &d.feats;
  d.train = build_examples(d.splits.train, d.tuples, d.emb, f, lex);
  d.val = build_examples(d.splits.val, d.tuples, d.emb, f, lex);
  d.test = build_examples(d.splits.test, d.tuples, d.emb, f, lex);
  return d;
}

TrainConfig load_train_config(const std::string& path, uint64_t seed) {
  TrainConfig tc;
  tc.seed = seed;
  if (path.empty()) return tc;
  auto j = nlohmann::json::parse(read_text_file(path), nullptr, true, true);
  tc.batch_size = j.value("batch_size", 32);
  tc.lr = j.value("lr", 0.01);
  tc.decay = j.value("decay", 0.5);
  tc.decay_every = j.value("decay_every", 10);
  tc.max_epochs = j.value("max_epochs", 100);
  tc.patience = j.value("patience", 5);
  tc.dropout = j.value("dropout", 0.5);
  return tc;
}

VerifierModel train_one(const LoadedData& d, Variant v, const std::string& features_mode,
                        const TrainConfig& tc0, uint64_t seed, const std::string& name) {
  ModelConfig mc;
  mc.variant = v;
  mc.feature_mode = feature_mode_from_name(features_mode);
  mc.embed_dim = d.emb.dim;
  mc.image_dim = d.blind ? 0 : d.feats.cols;
  TrainConfig tc = tc0;
  tc.seed = derive_seed(seed, "train:" + name);
  mc.dropout = tc.dropout;
  auto result = train(make_model(mc, tc.seed), d.train, d.val, tc);
  std::cerr << "trained " << name << ": best epoch " << result.best_epoch << ", val loss "
            << result.best_val_loss << "\n";
  return std::move(result.model);
}

int cmd_train(const TrainArgs& a) {
  LoadedData d = load_training_data(a);
  TrainConfig tc = load_train_config(a.config, a.seed);
  std::string header = flags_header("train", a.seed);
  if (a.variant == "ensemble") {
    auto mt = train_one(d, Variant::tuple_model, a.features_mode, tc, a.seed, "tuple");
    auto mq = train_one(d, Variant::q_model, a.features_mode, tc, a.seed, "q");
    save_model(mt, a.out + ".tuple.ckpt", header);
    save_model(mq, a.out + ".q.ckpt", header);
    std::cout << "wrote " << a.out << ".tuple.ckpt and " << a.out << ".q.ckpt\n";
  } else {
    auto m = train_one(d, variant_from_name(a.variant), a.features_mode, tc, a.seed, a.variant);
    save_model(m, a.out, header);
    std::cout << "wrote " << a.out << "\n";
  }
  return 0;
}

int cmd_baseline(const std::string& kind, const TrainArgs& a, const std::string& out_preds) {
  std::string header = flags_header("baseline", a.seed);
  if (kind == "prior" || kind == "ngram") {
    Vocabulary vocab = load_vocabulary(a.vocab);
    Corpus corpus = load_corpus(a.corpus, vocab);
    auto splits = split_corpus(corpus, SplitFractions{}, a.seed);
    Predictions preds;
    if (kind == "prior") {
      std::string answer = prior_baseline(splits.train.items);
      for (const auto& item : splits.test.items) preds[item.question_id] = answer;
    } else {
      auto table = fit_ngram(splits.train.items);
      for (const auto& item : splits.test.items)
        preds[item.question_id] = ngram_predict(table, item.question_text);
    }
    write_predictions(preds, out_preds, header);
    EvalReport r = evaluate(preds, splits.test);
    std::cout << format_report(r);
    return 0;
  }
  // blind model baselines
  TrainArgs blind = a;
  blind.features_mode = "none";
  LoadedData d = load_training_data(blind);
  TrainConfig tc = load_train_config(a.config, a.seed);
  Predictions preds;
  if (kind == "blind-q") {
    preds = predict_examples(train_one(d, Variant::q_model, "none", tc, a.seed, "blind-q"), d.test);
  } else if (kind == "blind-tuple") {
    preds = predict_examples(
        train_one(d, Variant::tuple_model, "none", tc, a.seed, "blind-tuple"), d.test);
  } else if (kind == "blind-ensemble") {
    auto mt = train_one(d, Variant::tuple_model, "none", tc, a.seed, "blind-tuple");
    auto mq = train_one(d, Variant::q_model, "none", tc, a.seed, "blind-q");
    preds = predict_ensemble(mt, mq, d.test);
  } else {
    throw std::runtime_error("unknown baseline kind: " + kind);
  }
  write_predictions(preds, out_preds, header);
  EvalReport r = evaluate(preds, d.splits.test);
  std::cout << format_report(r);
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& model2_path,
                const TrainArgs& a, const std::string& out_preds) {
  LoadedData d = load_training_data(a);
  Predictions preds;
  if (model2_path.empty()) {
    preds = predict_examples(load_model(model_path), d.test);
  } else {
    preds = predict_ensemble(load_model(model_path), load_model(model2_path), d.test);
  }
  write_predictions(preds, out_preds, flags_header("predict", a.seed));
  std::cout << "wrote predictions for " << preds.size() << " items to " << out_preds << "\n";
  return 0;
}

int cmd_eval(const std::string& corpus_path, const std::string& vocab_path,
             const std::string& preds_path, bool pairs, const std::string& out_path) {
  Vocabulary vocab = load_vocabulary(vocab_path);
  Corpus corpus = load_corpus(corpus_path, vocab);
  Predictions preds = load_predictions(preds_path);
  EvalReport r = evaluate(preds, corpus);
  std::cout << format_report(r);
  if (pairs) {
    if (r.pair_accuracy)
      std::cout << "pair accuracy: " << 100.0 * *r.pair_accuracy << " over "
                << r.n_qualifying_pairs << " pairs\n";
    else
      std::cout << "pair accuracy: undefined (no qualifying pairs)\n";
  }
  if (!out_path.empty()) {
    nlohmann::json j;
    j["vqa_accuracy"] = r.overall;
    j["n_items"] = r.n_items;
    if (r.pair_accuracy) j["pair_accuracy"] = *r.pair_accuracy * 100.0;
    j["n_qualifying_pairs"] = r.n_qualifying_pairs;
    write_text_file(out_path, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_audit(const std::string& corpus_path, const std::string& vocab_path,
              const std::string& out_path) {
  Vocabulary vocab = load_vocabulary(vocab_path);
  Corpus corpus = load_corpus(corpus_path, vocab);
  auto stats = balance_audit(corpus);
  std::cout << format_balance_stats(stats);
  if (!out_path.empty()) write_text_file(out_path, format_balance_stats(stats, 1u << 20));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"binary visual question answering over abstract scenes"};
  app.require_subcommand(1);
  CommonPaths common;

  // gen-synthetic
  std::string gs_spec, gs_out = "synthetic";
  uint64_t gs_seed = 1;
  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic corpus with parses");
  gen->add_option("--spec", gs_spec, "generator spec file (json)");
  gen->add_option("--vocab", common.vocab, "vocabulary file");
  gen->add_option("--out-dir", gs_out, "output directory");
  gen->add_option("--seed", gs_seed, "seed")->required();

  // parse
  std::string p_questions, p_parses, p_out = "tuples.tsv";
  auto* parse_cmd = app.add_subcommand("parse", "extract tuples from questions");
  parse_cmd->add_option("--questions", p_questions, "question_id<TAB>text file")->required();
  parse_cmd->add_option("--parses", p_parses, "dependency parse sidecar")->required();
  parse_cmd->add_option("--lexicons", common.lexicons, "lexicon directory");
  parse_cmd->add_option("--out", p_out, "output tuples tsv");

  // fit-alignment
  std::string fa_corpus, fa_tuples, fa_out = "alignment.tsv";
  auto* fa = app.add_subcommand("fit-alignment", "fit mutual-information alignment table");
  fa->add_option("--corpus", fa_corpus)->required();
  fa->add_option("--tuples", fa_tuples)->required();
  fa->add_option("--vocab", common.vocab);
  fa->add_option("--lexicons", common.lexicons);
  fa->add_option("--out", fa_out);

  // fit-gmms
  std::string fg_corpus, fg_tuples, fg_table, fg_gmms = "gmms.txt", fg_poses = "pose_clusters.txt";
  uint64_t fg_seed = 1;
  auto* fg = app.add_subcommand("fit-gmms", "fit location mixtures and pose clusters");
  fg->add_option("--corpus", fg_corpus)->required();
  fg->add_option("--vocab", common.vocab);
  fg->add_option("--tuples", fg_tuples, "tuples tsv (enables aligned-pair offsets)");
  fg->add_option("--table", fg_table, "alignment table (enables aligned-pair offsets)");
  fg->add_option("--lexicons", common.lexicons);
  fg->add_option("--out-gmms", fg_gmms);
  fg->add_option("--out-poses", fg_poses);
  fg->add_option("--seed", fg_seed)->required();

  // features
  std::string ft_corpus, ft_tuples, ft_table, ft_gmms, ft_poses, ft_mode = "attended",
                                                                  ft_out = "features.bin";
  uint64_t ft_seed = 1;
  auto* ft = app.add_subcommand("features", "extract feature vectors");
  ft->add_option("--corpus", ft_corpus)->required();
  ft->add_option("--vocab", common.vocab);
  ft->add_option("--tuples", ft_tuples);
  ft->add_option("--alignments", ft_table, "fitted alignment table");
  ft->add_option("--gmms", ft_gmms);
  ft->add_option("--poses", ft_poses);
  ft->add_option("--lexicons", common.lexicons);
  ft->add_option("--mode", ft_mode, "attended|holistic");
  ft->add_option("--out", ft_out);
  ft->add_option("--seed", ft_seed)->required();

  // train
  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train a verifier model");
  tr->add_option("--variant", ta.variant, "tuple|q|ensemble");
  tr->add_option("--features", ta.features_mode, "attended|holistic|none");
  tr->add_option("--corpus", ta.corpus)->required();
  tr->add_option("--vocab", ta.vocab)->default_val(common.vocab);
  tr->add_option("--lexicons", ta.lexicons)->default_val(common.lexicons);
  tr->add_option("--tuples", ta.tuples)->required();
  tr->add_option("--feats", ta.feats, "feature file (unless --features none)");
  tr->add_option("--embeddings", ta.embeddings)->required();
  tr->add_option("--config", ta.config, "training config json");
  tr->add_option("--seed", ta.seed)->required();
  tr->add_option("--out", ta.out)->required();

  // baseline
  std::string bl_kind = "prior", bl_out = "preds.tsv";
  TrainArgs bl;
  auto* blc = app.add_subcommand("baseline", "run a reference system");
  blc->add_option("--kind", bl_kind, "prior|ngram|blind-q|blind-tuple|blind-ensemble")->required();
  blc->add_option("--corpus", bl.corpus)->required();
  blc->add_option("--vocab", bl.vocab)->default_val(common.vocab);
  blc->add_option("--lexicons", bl.lexicons)->default_val(common.lexicons);
  blc->add_option("--tuples", bl.tuples);
  blc->add_option("--embeddings", bl.embeddings);
  blc->add_option("--config", bl.config);
  blc->add_option("--seed", bl.seed)->required();
  blc->add_option("--out", bl_out);

  // predict
  std::string pr_model, pr_model2, pr_out = "preds.tsv";
  TrainArgs pr;
  auto* prc = app.add_subcommand("predict", "predict answers with trained models");
  prc->add_option("--model", pr_model)->required();
  prc->add_option("--model2", pr_model2, "second model for a product ensemble");
  prc->add_option("--corpus", pr.corpus)->required();
  prc->add_option("--vocab", pr.vocab)->default_val(common.vocab);
  prc->add_option("--lexicons", pr.lexicons)->default_val(common.lexicons);
  prc->add_option("--tuples", pr.tuples)->required();
  prc->add_option("--feats", pr.feats);
  prc->add_option("--features", pr.features_mode, "attended|holistic|none");
  prc->add_option("--embeddings", pr.embeddings)->required();
  prc->add_option("--seed", pr.seed)->required();
  prc->add_option("--out", pr_out);

  // eval
  std::string ev_corpus, ev_preds, ev_out;
  bool ev_pairs = false;
  auto* ev = app.add_subcommand("eval", "score predictions");
  ev->add_option("--corpus", ev_corpus)->required();
  ev->add_option("--vocab", common.vocab);
  ev->add_option("--preds", ev_preds)->required();
  ev->add_flag("--pairs", ev_pairs, "report complementary-pair accuracy");
  ev->add_option("--out", ev_out, "also write a json report");

  // audit-balance
  std::string ab_corpus, ab_out;
  auto* ab = app.add_subcommand("audit-balance", "dataset balance diagnostics");
  ab->add_option("--corpus", ab_corpus)->required();
  ab->add_option("--vocab", common.vocab);
  ab->add_option("--out", ab_out);

  // run
  std::string run_config;
  auto* rn = app.add_subcommand("run", "run the full pipeline from a config file");
  rn->add_option("--config", run_config)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_synthetic(gs_spec, common.vocab, gs_out, gs_seed);
    if (parse_cmd->parsed()) return cmd_parse(p_questions, p_parses, common.lexicons, p_out);
    if (fa->parsed())
      return cmd_fit_alignment(fa_corpus, fa_tuples, common.vocab, common.lexicons, fa_out);
    if (fg->parsed())
      return cmd_fit_gmms(fg_corpus, common.vocab, fg_tuples, fg_table, common.lexicons, fg_gmms,
                          fg_poses, fg_seed);
    if (ft->parsed())
      return cmd_features(ft_corpus, common.vocab, ft_tuples, ft_table, ft_gmms, ft_poses,
                          common.lexicons, ft_mode, ft_out, ft_seed);
    if (tr->parsed()) return cmd_train(ta);
    if (blc->parsed()) return cmd_baseline(bl_kind, bl, bl_out);
    if (prc->parsed()) return cmd_predict(pr_model, pr_model2, pr, pr_out);
    if (ev->parsed()) return cmd_eval(ev_corpus, common.vocab, ev_preds, ev_pairs, ev_out);
    if (ab->parsed()) return cmd_audit(ab_corpus, common.vocab, ab_out);
    if (rn->parsed()) {
      run_pipeline(load_pipeline_config(run_config));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
