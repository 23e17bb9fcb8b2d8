#include "vqa/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "vqa/util.hpp"

namespace vqa {

namespace fs = std::filesystem;
using nlohmann::json;

std::string provenance_header(uint64_t config_hash, uint64_t seed) {
  std::ostringstream out;
  out << "# " << kToolVersion << "\n";
  out << "# config_hash " << std::hex << config_hash << std::dec << "\n";
  out << "# seed " << seed << "\n";
  return out.str();
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::string text = read_text_file(path);
  json j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  PipelineConfig cfg;
  cfg.config_hash = fnv1a64(text);
  cfg.corpus = j.value("corpus", "");
  cfg.parses = j.value("parses", "");
  cfg.embeddings = j.value("embeddings", "");
  cfg.lexicons = j.value("lexicons", "");
  cfg.vocab = j.value("vocab", "");
  cfg.out_dir = j.value("out_dir", "out");
  if (!j.contains("seed")) throw std::runtime_error(path + ": config must set a seed");
  cfg.seed = j["seed"].get<uint64_t>();
  if (j.contains("splits")) {
    cfg.splits.train = j["splits"].value("train", 0.7);
    cfg.splits.val = j["splits"].value("val", 0.1);
    cfg.splits.test = j["splits"].value("test", 0.2);
  }
  cfg.variant = j.value("variant", "ensemble");
  cfg.feature_mode = j.value("feature_mode", "attended");
  cfg.ablation = j.value("ablation", false);
  if (j.contains("train")) {
    const auto& t = j["train"];
    cfg.train.batch_size = t.value("batch_size", 32);
    cfg.train.lr = t.value("lr", 0.01);
    cfg.train.decay = t.value("decay", 0.5);
    cfg.train.decay_every = t.value("decay_every", 10);
    cfg.train.max_epochs = t.value("max_epochs", 100);
    cfg.train.patience = t.value("patience", 5);
    cfg.train.dropout = t.value("dropout", 0.5);
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

std::vector<TupleStrings> parse_stage(const Corpus& corpus,
                                      const std::vector<ParsedQuestion>& parses,
                                      const Lexicons& lex) {
  if (parses.size() != corpus.items.size())
    throw std::runtime_error("parse_stage: " + std::to_string(parses.size()) +
                             " parse blocks for " + std::to_string(corpus.items.size()) +
                             " questions");
  std::vector<TupleStrings> out;
  out.reserve(corpus.items.size());
  for (size_t i = 0; i < corpus.items.size(); ++i) {
    const auto& item = corpus.items[i];
    Tuple t = parse_question(item.question_text, parses[i], lex);
    out.push_back(to_strings(t, item.question_id));
  }
  return out;
}

std::map<std::string, Alignment> align_stage(const Corpus& corpus,
                                             const std::vector<TupleStrings>& tuples,
                                             const AlignmentTable& table, const Lexicons& lex,
                                             uint64_t seed) {
  std::map<std::string, const QAItem*> by_id;
  for (const auto& item : corpus.items) by_id[item.question_id] = &item;
  std::map<std::string, Alignment> out;
  for (const auto& t : tuples) {
    auto it = by_id.find(t.question_id);
    if (it == by_id.end()) continue;
    const Scene& scene = corpus.scene_of(*it->second);
    out[t.question_id] =
        align(t, scene, table, corpus.vocab, lex, derive_seed(seed, t.question_id));
  }
  return out;
}

std::vector<Point2> alignment_offsets(const Corpus& corpus,
                                      const std::map<std::string, Alignment>& alignments) {
  std::map<std::string, const QAItem*> by_id;
  for (const auto& item : corpus.items) by_id[item.question_id] = &item;
  std::vector<Point2> offsets;
  for (const auto& [qid, a] : alignments) {
    if (!a.p_object || !a.s_object) continue;
    auto it = by_id.find(qid);
    if (it == by_id.end()) continue;
    const Scene& scene = corpus.scene_of(*it->second);
    const auto& p = scene.objects[static_cast<size_t>(*a.p_object)];
    const auto& s = scene.objects[static_cast<size_t>(*a.s_object)];
    offsets.push_back({s.x - p.x, s.y - p.y});
  }
  return offsets;
}

FeatureFile feature_stage(const Corpus& corpus, const std::map<std::string, Alignment>& alignments,
                          const GmmBank* gmms, const PoseClusterBank* poses, FeatureMode mode) {
  FeatureFile out;
  out.mode = feature_mode_name(mode);
  FeatureLayout layout = mode == FeatureMode::attended ? FeatureLayout::attended(corpus.vocab)
                                                       : FeatureLayout::holistic(corpus.vocab);
  out.blocks = layout.blocks;
  out.cols = layout.total;
  for (const auto& item : corpus.items) {
    const Scene& scene = corpus.scene_of(item);
    std::vector<double> row;
    if (mode == FeatureMode::attended) {
      if (!gmms) throw std::runtime_error("feature_stage: attended mode needs fitted mixtures");
      auto it = alignments.find(item.question_id);
      if (it == alignments.end())
        throw std::runtime_error("feature_stage: no alignment for " + item.question_id);
      row = attended_features(scene, it->second, *gmms, corpus.vocab);
    } else if (mode == FeatureMode::holistic) {
      if (!poses) throw std::runtime_error("feature_stage: holistic mode needs pose clusters");
      row = holistic_features(scene, *poses, corpus.vocab);
    } else {
      throw std::runtime_error("feature_stage: blind mode has no features");
    }
    out.question_ids.push_back(item.question_id);
    for (double v : row) out.data.push_back(static_cast<float>(v));
  }
  return out;
}

std::vector<Example> build_examples(const Corpus& corpus, const std::vector<TupleStrings>& tuples,
                                    const EmbeddingTable& emb, const FeatureFile* feats,
                                    const Lexicons& lex) {
  std::map<std::string, const TupleStrings*> tuple_by_id;
  for (const auto& t : tuples) tuple_by_id[t.question_id] = &t;
  std::map<std::string, size_t> row_by_id;
  if (feats)
    for (size_t i = 0; i < feats->question_ids.size(); ++i)
      row_by_id[feats->question_ids[i]] = i;

  std::vector<Example> out;
  out.reserve(corpus.items.size());
  for (const auto& item : corpus.items) {
    auto tit = tuple_by_id.find(item.question_id);
    if (tit == tuple_by_id.end())
      throw std::runtime_error("build_examples: no tuple for " + item.question_id);
    Example ex;
    ex.question_id = item.question_id;
    ex.label = majority_answer(item) == "yes" ? 0 : 1;
    ex.tuple_vec = embed_tuple(*tit->second, emb);
    std::string text;
    try {
      text = preprocess(item.question_text, lex);
    } catch (const std::runtime_error&) {
      text = item.question_text;
    }
    ex.q_tokens = embed_tokens(question_tokens(text), emb);
    if (feats) {
      auto rit = row_by_id.find(item.question_id);
      if (rit == row_by_id.end())
        throw std::runtime_error("build_examples: no feature row for " + item.question_id);
      ex.image = feats->row(rit->second);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

Predictions predict_examples(const VerifierModel& m, const std::vector<Example>& data) {
  Predictions out;
  for (const auto& ex : data) out[ex.question_id] = predict_answer(forward(m, ex, false, 0));
  return out;
}

Predictions predict_ensemble(const VerifierModel& a, const VerifierModel& b,
                             const std::vector<Example>& data) {
  Predictions out;
  for (const auto& ex : data) {
    auto pa = forward(a, ex, false, 0);
    auto pb = forward(b, ex, false, 0);
    out[ex.question_id] = predict_answer(ensemble_predict(pa, pb));
  }
  return out;
}

namespace {

// content-hash keyed stage cache: a stage is skipped when its key file matches
// and every output exists
class StageCache {
 public:
  explicit StageCache(const std::string& out_dir) : dir_(out_dir + "/cache") {
    fs::create_directories(dir_);
  }

  bool hit(const std::string& stage, uint64_t key, const std::vector<std::string>& outputs) const {
    fs::path keyfile = fs::path(dir_) / (stage + ".key");
    if (!fs::exists(keyfile)) return false;
    std::string stored = read_text_file(keyfile.string());
    if (stored != std::to_string(key)) return false;
    for (const auto& o : outputs)
      if (!fs::exists(o)) return false;
    return true;
  }

  void commit(const std::string& stage, uint64_t key) const {
    fs::path keyfile = fs::path(dir_) / (stage + ".key");
    write_text_file(keyfile.string(), std::to_string(key));
  }

 private:
  std::string dir_;
};

uint64_t chain(std::initializer_list<std::string> parts) {
  uint64_t h = fnv1a64(std::string(kToolVersion));
  for (const auto& p : parts) h = fnv1a64(p, h);
  return h;
}

json report_entry(const EvalReport& r) {
  json j;
  j["vqa_accuracy"] = r.overall;
  j["n_items"] = r.n_items;
  for (const auto& [answer, b] : r.by_majority_answer) {
    j["by_majority"][answer]["count"] = b.count;
    j["by_majority"][answer]["mean_score"] = b.mean_score;
  }
  if (r.pair_accuracy)
    j["pair_accuracy"] = *r.pair_accuracy * 100.0;
  else
    j["pair_accuracy"] = nullptr;
  j["n_qualifying_pairs"] = r.n_qualifying_pairs;
  return j;
}

}  // namespace

void run_pipeline(const PipelineConfig& cfg) {
  // pre-flight checks before any compute
  bool trains_models = true;  // every configured variant trains at least one model
  std::vector<std::pair<std::string, std::string>> required = {
      {"corpus", cfg.corpus}, {"parses", cfg.parses}, {"vocab", cfg.vocab}};
  required.emplace_back("lexicons", cfg.lexicons);
  if (trains_models) required.emplace_back("embeddings", cfg.embeddings);
  for (const auto& [what, path] : required) {
    if (path.empty())
      throw std::runtime_error("pipeline config: missing required path for " + what);
    if (!fs::exists(path))
      throw std::runtime_error("pipeline config: " + what + " path does not exist: " + path);
  }
  if (cfg.variant != "tuple" && cfg.variant != "q" && cfg.variant != "ensemble")
    throw std::runtime_error("pipeline config: unknown variant " + cfg.variant);
  FeatureMode mode = feature_mode_from_name(cfg.feature_mode);

  fs::create_directories(cfg.out_dir);
  StageCache cache(cfg.out_dir);
  std::string header = provenance_header(cfg.config_hash, cfg.seed);
  auto out_path = [&](const std::string& name) { return cfg.out_dir + "/" + name; };

  Vocabulary vocab = load_vocabulary(cfg.vocab);
  Corpus corpus = load_corpus(cfg.corpus, vocab);
  Lexicons lex = load_lexicons(cfg.lexicons);
  auto parses = load_parses(cfg.parses);
  CorpusSplits splits = split_corpus(corpus, cfg.splits, cfg.seed);
  std::cerr << "[pipeline] corpus: " << corpus.items.size() << " items, "
            << corpus.scenes.size() << " scenes (train/val/test " << splits.train.items.size()
            << "/" << splits.val.items.size() << "/" << splits.test.items.size() << ")\n";

  uint64_t corpus_hash = hash_file(cfg.corpus);
  uint64_t seed_tag = cfg.seed;

  // ---- parse stage
  std::string tuples_path = out_path("tuples.tsv");
  uint64_t parse_key = chain({"parse", std::to_string(corpus_hash),
                              std::to_string(hash_file(cfg.parses)), cfg.lexicons});
  std::vector<TupleStrings> tuples;
  if (cache.hit("parse", parse_key, {tuples_path})) {
    std::cerr << "[pipeline] parse: cache hit\n";
    tuples = load_tuples_tsv(tuples_path);
  } else {
    tuples = parse_stage(corpus, parses, lex);
    write_tuples_tsv(tuples, tuples_path, header);
    cache.commit("parse", parse_key);
  }

  // ---- alignment table (fitted on the train split only)
  std::string table_path = out_path("alignment.tsv");
  uint64_t table_key = chain({"fit-alignment", std::to_string(hash_file(tuples_path)),
                              std::to_string(corpus_hash), std::to_string(seed_tag)});
  AlignmentTable table;
  {
    std::set<std::string> train_ids;
    for (const auto& item : splits.train.items) train_ids.insert(item.question_id);
    std::vector<TupleStrings> train_tuples;
    for (const auto& t : tuples)
      if (train_ids.count(t.question_id)) train_tuples.push_back(t);
    if (cache.hit("fit-alignment", table_key, {table_path})) {
      std::cerr << "[pipeline] fit-alignment: cache hit\n";
      table = load_alignment_table(table_path, vocab.size());
    } else {
      table = fit_alignment(splits.train, train_tuples, lex);
      write_alignment_table(table, table_path, header);
      cache.commit("fit-alignment", table_key);
    }
  }

  // per-question alignments for every item
  auto alignments = align_stage(corpus, tuples, table, lex, derive_seed(cfg.seed, "align-stage"));
  {
    std::ostringstream out;
    out << header;
    for (const auto& [qid, a] : alignments)
      out << qid << '\t' << (a.p_object ? *a.p_object : -1) << '\t'
          << resolution_name(a.p_resolved) << '\t' << (a.s_object ? *a.s_object : -1) << '\t'
          << resolution_name(a.s_resolved) << '\n';
    write_text_file(out_path("alignments.tsv"), out.str());
  }

  // ---- mixtures and pose clusters (train scenes only)
  Corpus train_fit;
  train_fit.vocab = vocab;
  train_fit.items = splits.train.items;
  for (const auto& item : splits.train.items)
    train_fit.scenes.emplace(item.scene_id, corpus.scenes.at(item.scene_id));

  GmmBank gmms;
  PoseClusterBank poses;
  bool need_gmms = mode == FeatureMode::attended;
  bool need_poses = mode == FeatureMode::holistic;
  std::string gmms_path = out_path("gmms.txt");
  std::string poses_path = out_path("pose_clusters.txt");
  if (need_gmms) {
    uint64_t key = chain({"fit-gmms", std::to_string(corpus_hash), std::to_string(seed_tag)});
    if (cache.hit("fit-gmms", key, {gmms_path})) {
      std::cerr << "[pipeline] fit-gmms: cache hit\n";
      gmms = load_gmm_bank(gmms_path);
    } else {
      std::map<std::string, Alignment> train_align;
      for (const auto& item : splits.train.items) {
        auto it = alignments.find(item.question_id);
        if (it != alignments.end()) train_align.emplace(it->first, it->second);
      }
      auto offsets = alignment_offsets(corpus, train_align);
      if (offsets.size() < 24) offsets.clear();  // fall back to all object pairs
      gmms = fit_gmms(train_fit, derive_seed(cfg.seed, "fit-gmms"), offsets);
      write_gmm_bank(gmms, gmms_path, header);
      cache.commit("fit-gmms", key);
    }
  }
  if (need_poses) {
    uint64_t key = chain({"fit-poses", std::to_string(corpus_hash), std::to_string(seed_tag)});
    if (cache.hit("fit-poses", key, {poses_path})) {
      std::cerr << "[pipeline] fit-poses: cache hit\n";
      poses = load_pose_clusters(poses_path);
    } else {
      poses = fit_pose_clusters(train_fit, derive_seed(cfg.seed, "fit-poses"));
      write_pose_clusters(poses, poses_path, header);
      cache.commit("fit-poses", key);
    }
  }

  // ---- feature extraction for every item
  FeatureFile feats;
  bool blind = mode == FeatureMode::none;
  std::string feats_path = out_path("features." + cfg.feature_mode + ".bin");
  if (!blind) {
    uint64_t key = chain({"features", cfg.feature_mode, std::to_string(corpus_hash),
                          std::to_string(hash_file(tuples_path)), std::to_string(seed_tag)});
    if (cache.hit("features", key, {feats_path})) {
      std::cerr << "[pipeline] features: cache hit\n";
      feats = load_feature_file(feats_path);
    } else {
      feats = feature_stage(corpus, alignments, need_gmms ? &gmms : nullptr,
                            need_poses ? &poses : nullptr, mode);
      write_feature_file(feats, feats_path, header);
      cache.commit("features", key);
    }
  }

  // ---- datasets
  EmbeddingTable emb = load_embeddings(cfg.embeddings);
  const FeatureFile* fptr = blind ? nullptr : &feats;
  auto ex_train = build_examples(splits.train, tuples, emb, fptr, lex);
  auto ex_val = build_examples(splits.val, tuples, emb, fptr, lex);
  auto ex_test = build_examples(splits.test, tuples, emb, fptr, lex);

  // ---- train the required branches
  std::vector<Variant> branches;
  if (cfg.ablation || cfg.variant == "ensemble")
    branches = {Variant::tuple_model, Variant::q_model};
  else
    branches = {variant_from_name(cfg.variant)};

  std::map<Variant, VerifierModel> models;
  for (Variant v : branches) {
    std::string name = variant_name(v);
    std::string ckpt = out_path("model." + name + ".ckpt");
    std::string logf = out_path("train_log." + name + ".tsv");
    uint64_t key = chain({"train", name, cfg.feature_mode, std::to_string(corpus_hash),
                          std::to_string(hash_file(cfg.embeddings)),
                          std::to_string(blind ? 0 : hash_file(feats_path)),
                          std::to_string(seed_tag), std::to_string(cfg.train.batch_size),
                          fmt_double(cfg.train.lr), std::to_string(cfg.train.max_epochs),
                          std::to_string(cfg.train.patience), fmt_double(cfg.train.dropout)});
    if (cache.hit("train-" + name, key, {ckpt, logf})) {
      std::cerr << "[pipeline] train " << name << ": cache hit\n";
      models.emplace(v, load_model(ckpt));
      continue;
    }
    ModelConfig mc;
    mc.variant = v;
    mc.feature_mode = mode;
    mc.embed_dim = emb.dim;
    mc.hidden = 256;
    mc.image_dim = blind ? 0 : feats.cols;
    mc.dropout = cfg.train.dropout;
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "train:" + name);
    auto result = train(make_model(mc, tc.seed), ex_train, ex_val, tc);
    std::cerr << "[pipeline] train " << name << ": best epoch " << result.best_epoch
              << ", val loss " << result.best_val_loss << "\n";
    save_model(result.model, ckpt, header);
    write_text_file(logf, header + format_train_log(result.log));
    cache.commit("train-" + name, key);
    models.emplace(v, std::move(result.model));
  }

  // ---- predictions + evaluation on the test split
  std::vector<std::string> systems;
  if (cfg.ablation || cfg.variant == "ensemble")
    systems = {"tuple", "q", "ensemble"};
  else
    systems = {cfg.variant};

  json report;
  report["tool"] = kToolVersion;
  std::ostringstream hex;
  hex << std::hex << cfg.config_hash;
  report["config_hash"] = hex.str();
  report["seed"] = cfg.seed;
  report["variant"] = cfg.variant;
  report["feature_mode"] = cfg.feature_mode;
  report["splits"]["train_items"] = ex_train.size();
  report["splits"]["val_items"] = ex_val.size();
  report["splits"]["test_items"] = ex_test.size();

  auto audit = balance_audit(splits.test);
  report["balance"]["yes_fraction"] = audit.yes_fraction;
  report["balance"]["frac_without_complement"] = audit.frac_without_complement;
  report["balance"]["frac_pairs_not_opposite"] = audit.frac_pairs_not_opposite;
  report["balance"]["n_linked_pairs"] = audit.n_linked_pairs;

  std::ostringstream txt;
  txt << header;
  for (const auto& sys : systems) {
    Predictions preds;
    if (sys == "ensemble")
      preds = predict_ensemble(models.at(Variant::tuple_model), models.at(Variant::q_model),
                               ex_test);
    else
      preds = predict_examples(models.at(variant_from_name(sys)), ex_test);
    write_predictions(preds, out_path("preds." + sys + ".tsv"), header);
    EvalReport r = evaluate(preds, splits.test);
    report["systems"][sys] = report_entry(r);
    txt << "== system " << sys << " (" << cfg.feature_mode << ")\n" << format_report(r) << "\n";
  }

  write_text_file(out_path("report.json"), report.dump(2) + "\n");
  write_text_file(out_path("report.txt"), txt.str());
  std::cerr << "[pipeline] report written to " << out_path("report.json") << "\n";
}

}  // namespace vqa
