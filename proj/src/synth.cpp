#include "vqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "vqa/util.hpp"

namespace vqa {

using nlohmann::json;

GeneratorSpec load_generator_spec(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, true, /*ignore_comments=*/true);
  GeneratorSpec s;
  if (j.contains("num_scenes")) s.num_scenes = j["num_scenes"].get<int>();
  if (j.contains("questions_per_scene")) s.questions_per_scene = j["questions_per_scene"].get<int>();
  if (j.contains("outdoor_fraction")) s.outdoor_fraction = j["outdoor_fraction"].get<double>();
  if (j.contains("objects_min")) s.objects_min = j["objects_min"].get<int>();
  if (j.contains("objects_max")) s.objects_max = j["objects_max"].get<int>();
  if (j.contains("balance")) s.balance = j["balance"].get<double>();
  if (j.contains("bias_strength")) s.bias_strength = j["bias_strength"].get<double>();
  if (j.contains("bias_yes_fraction")) s.bias_yes_fraction = j["bias_yes_fraction"].get<double>();
  if (j.contains("disagreement")) s.disagreement = j["disagreement"].get<double>();
  if (j.contains("complement_fraction"))
    s.complement_fraction = j["complement_fraction"].get<double>();
  if (j.contains("strict_balance")) s.strict_balance = j["strict_balance"].get<bool>();
  if (j.contains("use_exists")) s.use_exists = j["use_exists"].get<bool>();
  if (j.contains("use_left_of")) s.use_left_of = j["use_left_of"].get<bool>();
  if (j.contains("word_pool")) s.word_pool = j["word_pool"].get<int>();
  if (j.contains("embedding_dim")) s.embedding_dim = j["embedding_dim"].get<int>();
  if (j.contains("planted")) {
    for (const auto& p : j["planted"]) {
      PlantedCorrelation pc;
      pc.word = p.at("word").get<std::string>();
      pc.instance_id = p.at("instance_id").get<int>();
      if (p.contains("correlation")) pc.correlation = p["correlation"].get<double>();
      s.planted.push_back(std::move(pc));
    }
  }
  return s;
}

namespace {

struct Slot {
  int scene = 0;
  bool is_exists = true;
  std::string word_a, word_b;
  std::string text;
  bool answer_yes = true;
  int instance_a = -1, instance_b = -1;  // resolved at realization
  int obj_a = -1, obj_b = -1;            // object indices for left_of
};

std::string article_for(const std::string& word) {
  static const std::string vowels = "aeiou";
  return vowels.find(std::tolower(static_cast<unsigned char>(word[0]))) != std::string::npos
             ? "an"
             : "a";
}

ParsedQuestion exists_parse(const std::string& word, const std::string& article) {
  ParsedQuestion pq;
  pq.tokens = {{"is", "", "VBZ", "root", -1},
               {"there", "", "EX", "expl", 0},
               {article, "", "DT", "det", 3},
               {word, "", "NN", "nsubj", 0}};
  return pq;
}

ParsedQuestion left_of_parse(const std::string& a, const std::string& b) {
  ParsedQuestion pq;
  pq.tokens = {{"is", "", "VBZ", "aux", 3},   {"the", "", "DT", "det", 2},
               {a, "", "NN", "nsubj", 3},     {"left", "", "JJ", "root", -1},
               {"of", "", "IN", "case", 6},   {"the", "", "DT", "det", 6},
               {b, "", "NN", "nmod", 3}};
  return pq;
}

double runif(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

int rint(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

ClipartObject make_object(int instance_id, const Vocabulary& vocab, std::mt19937_64& rng) {
  ClipartObject o;
  o.instance_id = instance_id;
  o.category = vocab.entry(instance_id).category;
  o.flip = runif(rng) < 0.5;
  o.x = 0.02 + 0.96 * runif(rng);
  o.y = 0.02 + 0.96 * runif(rng);
  o.depth = rint(rng, 0, kNumDepths - 1);
  if (o.category == Category::human) {
    std::array<BodyPart, kNumBodyParts> pose;
    for (auto& part : pose) {
      part.x = -0.15 + 0.3 * runif(rng);
      part.y = -0.15 + 0.3 * runif(rng);
      part.angle = -M_PI + 2.0 * M_PI * runif(rng);
    }
    o.pose = pose;
    o.expression_id = rint(rng, 0, vocab.expression_count - 1);
    o.age_id = rint(rng, 0, kNumAges - 1);
    o.gender_id = rint(rng, 0, kNumGenders - 1);
    o.skin_id = rint(rng, 0, kNumSkins - 1);
  } else if (o.category == Category::animal) {
    o.animal_pose_id = rint(rng, 0, kNumAnimalPoses - 1);
  }
  return o;
}

std::vector<std::string> simulate_answers(bool truth, double disagreement,
                                          std::mt19937_64& rng) {
  std::vector<std::string> out;
  out.reserve(10);
  for (int i = 0; i < 10; ++i) {
    bool a = truth;
    if (runif(rng) < disagreement) a = !a;
    out.emplace_back(a ? "yes" : "no");
  }
  return out;
}

std::string scene_label(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%05d", i);
  return buf;
}

std::string question_label(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "q%05d", i);
  return buf;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const GeneratorSpec& spec, const Vocabulary& vocab,
                                          uint64_t seed) {
  if (spec.num_scenes <= 0) throw std::runtime_error("generator: num_scenes must be positive");
  if (!spec.use_exists && !spec.use_left_of)
    throw std::runtime_error("generator: at least one question template must be enabled");
  auto rng = make_rng(derive_seed(seed, "synthetic-corpus"));

  // word pool: planted words first, then both-admissible single-token names
  std::map<std::string, const PlantedCorrelation*> planted_by_word;
  std::set<int> planted_instances;
  for (const auto& p : spec.planted) {
    if (p.instance_id < 0 || p.instance_id >= vocab.size())
      throw std::runtime_error("generator: planted instance_id outside vocabulary");
    planted_by_word[to_lower(p.word)] = &p;
    planted_instances.insert(p.instance_id);
  }
  std::vector<std::string> pool;
  for (const auto& [w, p] : planted_by_word) {
    (void)p;
    pool.push_back(w);
  }
  for (const auto& e : vocab.entries) {
    if (static_cast<int>(pool.size()) >= spec.word_pool + static_cast<int>(planted_by_word.size()))
      break;
    if (!e.indoor || !e.outdoor) continue;
    if (e.name.find(' ') != std::string::npos) continue;
    std::string w = to_lower(e.name);
    if (planted_by_word.count(w) || planted_instances.count(e.instance_id)) continue;
    pool.push_back(w);
  }
  if (pool.size() < 2) throw std::runtime_error("generator: word pool too small");

  // For answer "no" the scene must not contain anything the word could mean.
  auto forbidden_instances = [&](const std::string& word) {
    std::set<int> out;
    auto it = planted_by_word.find(word);
    if (it != planted_by_word.end()) out.insert(it->second->instance_id);
    int named = vocab.find_by_name(word);
    if (named >= 0) out.insert(named);
    return out;
  };
  // Resolves a question word to the instance that realizes a "yes".
  auto resolve_instance = [&](const std::string& word, SceneType type,
                              const std::set<int>& avoid) {
    auto it = planted_by_word.find(word);
    int base = it != planted_by_word.end() ? it->second->instance_id
                                           : vocab.find_by_name(word);
    if (it != planted_by_word.end() && runif(rng) >= it->second->correlation) {
      // substitute a random admissible non-planted instance
      for (int tries = 0; tries < 200; ++tries) {
        int cand = rint(rng, 0, vocab.size() - 1);
        if (!vocab.admissible(cand, type)) continue;
        if (planted_instances.count(cand) || avoid.count(cand) || cand == base) continue;
        return cand;
      }
    }
    if (base < 0)
      throw std::runtime_error("generator: word \"" + word + "\" is not a vocabulary name");
    if (!vocab.admissible(base, type))
      throw std::runtime_error("generator: instance for \"" + word + "\" not admissible in " +
                               scene_type_name(type));
    return base;
  };

  // pass 1: scene types and question slots
  std::vector<SceneType> types(static_cast<size_t>(spec.num_scenes));
  for (auto& t : types)
    t = runif(rng) < spec.outdoor_fraction ? SceneType::outdoor : SceneType::indoor;
  // distinct words per scene keep required/forbidden instance sets disjoint
  size_t words_per_scene =
      static_cast<size_t>(spec.questions_per_scene) * (spec.use_left_of ? 2 : 1);
  if (pool.size() < words_per_scene)
    throw std::runtime_error("generator: word pool of " + std::to_string(pool.size()) +
                             " too small for " + std::to_string(spec.questions_per_scene) +
                             " questions per scene");
  std::vector<Slot> slots;
  for (int si = 0; si < spec.num_scenes; ++si) {
    std::vector<std::string> local = pool;
    std::shuffle(local.begin(), local.end(), rng);
    size_t next_word = 0;
    auto take_word = [&]() { return local[next_word++]; };
    for (int qi = 0; qi < spec.questions_per_scene; ++qi) {
      Slot s;
      s.scene = si;
      bool exists = spec.use_exists && (!spec.use_left_of || runif(rng) < 0.5);
      s.is_exists = exists;
      if (exists) {
        s.word_a = take_word();
        s.text = "Is there " + article_for(s.word_a) + " " + s.word_a + "?";
      } else {
        s.word_a = take_word();
        s.word_b = take_word();
        s.text = "Is the " + s.word_a + " left of the " + s.word_b + "?";
      }
      slots.push_back(std::move(s));
    }
  }

  // pass 2: per-text answer plan with exact counts
  std::map<std::string, std::vector<size_t>> by_text;
  for (size_t i = 0; i < slots.size(); ++i) by_text[slots[i].text].push_back(i);
  for (auto& [text, indices] : by_text) {
    double target = spec.balance;
    if (spec.bias_strength >= 0.0) {
      auto trng = make_rng(derive_seed(seed, "bias-direction:" + text));
      target = runif(trng) < spec.bias_yes_fraction ? spec.bias_strength
                                                    : 1.0 - spec.bias_strength;
    }
    double exact = target * static_cast<double>(indices.size());
    auto n_yes = static_cast<size_t>(std::llround(exact));
    if (spec.strict_balance && std::abs(exact - static_cast<double>(n_yes)) > 1e-9)
      throw std::runtime_error("generator: target yes fraction " + std::to_string(target) +
                               " infeasible for " + std::to_string(indices.size()) +
                               " occurrences of \"" + text + "\"");
    std::shuffle(indices.begin(), indices.end(), rng);
    for (size_t k = 0; k < indices.size(); ++k) slots[indices[k]].answer_yes = k < n_yes;
  }

  // pass 3: realize scenes
  SyntheticCorpus out;
  out.corpus.vocab = vocab;
  std::vector<Scene> scenes(static_cast<size_t>(spec.num_scenes));
  for (int si = 0; si < spec.num_scenes; ++si) {
    Scene& scene = scenes[static_cast<size_t>(si)];
    scene.scene_id = scene_label(si);
    scene.scene_type = types[static_cast<size_t>(si)];
    std::set<int> forbidden;
    for (auto& s : slots) {
      if (s.scene != si) continue;
      if (s.is_exists && !s.answer_yes) {
        auto f = forbidden_instances(s.word_a);
        forbidden.insert(f.begin(), f.end());
      }
    }
    std::set<int> used;
    for (auto& s : slots) {
      if (s.scene != si) continue;
      if (s.is_exists) {
        if (!s.answer_yes) continue;
        s.instance_a = resolve_instance(s.word_a, scene.scene_type, forbidden);
        auto o = make_object(s.instance_a, vocab, rng);
        s.obj_a = static_cast<int>(scene.objects.size());
        scene.objects.push_back(o);
        used.insert(s.instance_a);
      } else {
        s.instance_a = resolve_instance(s.word_a, scene.scene_type, forbidden);
        s.instance_b = resolve_instance(s.word_b, scene.scene_type, forbidden);
        auto a = make_object(s.instance_a, vocab, rng);
        auto b = make_object(s.instance_b, vocab, rng);
        a.x = 0.25 + 0.5 * runif(rng);
        double dx = 0.05 + 0.17 * runif(rng);
        b.x = s.answer_yes ? a.x + dx : a.x - dx;
        b.y = std::clamp(a.y - 0.15 + 0.3 * runif(rng), 0.0, 1.0);
        s.obj_a = static_cast<int>(scene.objects.size());
        scene.objects.push_back(a);
        s.obj_b = static_cast<int>(scene.objects.size());
        scene.objects.push_back(b);
        used.insert(s.instance_a);
        used.insert(s.instance_b);
      }
    }
    int want = rint(rng, spec.objects_min, spec.objects_max);
    int missing = want - static_cast<int>(scene.objects.size());
    for (int k = 0; k < missing; ++k) {
      for (int tries = 0; tries < 200; ++tries) {
        int cand = rint(rng, 0, vocab.size() - 1);
        if (!vocab.admissible(cand, scene.scene_type)) continue;
        if (forbidden.count(cand) || used.count(cand) || planted_instances.count(cand)) continue;
        scene.objects.push_back(make_object(cand, vocab, rng));
        break;
      }
    }
  }

  // pass 4: emit items, complements, parses
  for (auto& scene : scenes) out.corpus.scenes.emplace(scene.scene_id, scene);
  int qcount = 0;
  for (const auto& s : slots) {
    QAItem item;
    item.question_id = question_label(qcount++);
    item.scene_id = scene_label(s.scene);
    item.question_text = s.text;
    item.human_answers = simulate_answers(s.answer_yes, spec.disagreement, rng);
    ParsedQuestion pq = s.is_exists ? exists_parse(s.word_a, article_for(s.word_a))
                                    : left_of_parse(s.word_a, s.word_b);

    if (runif(rng) < spec.complement_fraction) {
      Scene comp = scenes[static_cast<size_t>(s.scene)];
      comp.scene_id = "c" + item.question_id;
      if (s.is_exists) {
        if (s.answer_yes) {
          comp.objects.erase(
              std::remove_if(comp.objects.begin(), comp.objects.end(),
                             [&](const ClipartObject& o) { return o.instance_id == s.instance_a; }),
              comp.objects.end());
        } else {
          int inst = resolve_instance(s.word_a, comp.scene_type, {});
          comp.objects.push_back(make_object(inst, vocab, rng));
        }
      } else {
        std::swap(comp.objects[static_cast<size_t>(s.obj_a)].x,
                  comp.objects[static_cast<size_t>(s.obj_b)].x);
      }
      QAItem citem;
      citem.question_id = item.question_id + "c";
      citem.scene_id = comp.scene_id;
      citem.question_text = s.text;
      citem.human_answers = simulate_answers(!s.answer_yes, spec.disagreement, rng);
      citem.complement_of = item.question_id;
      item.complement_of = citem.question_id;
      out.corpus.scenes.emplace(comp.scene_id, std::move(comp));
      out.corpus.items.push_back(item);
      out.parses.push_back(pq);
      out.corpus.items.push_back(std::move(citem));
      out.parses.push_back(std::move(pq));
    } else {
      out.corpus.items.push_back(std::move(item));
      out.parses.push_back(std::move(pq));
    }
  }

  for (const auto& [id, scene] : out.corpus.scenes) {
    auto violations = validate_scene(scene, vocab);
    if (!violations.empty())
      throw std::runtime_error("generator produced invalid scene " + id + ": " +
                               violations.front());
  }
  return out;
}

void write_questions_tsv(const Corpus& corpus, const std::string& path,
                         const std::string& provenance_header) {
  std::ostringstream out;
  out << provenance_header;
  for (const auto& item : corpus.items) out << item.question_id << '\t' << item.question_text << '\n';
  write_text_file(path, out.str());
}

void write_parses_file(const std::vector<ParsedQuestion>& parses, const std::string& path,
                       const std::string& provenance_header) {
  std::ostringstream out;
  out << provenance_header;
  for (const auto& pq : parses) out << format_parse(pq) << '\n';
  write_text_file(path, out.str());
}

void write_synthetic_embeddings(const Corpus& corpus, int dim, uint64_t seed,
                                const std::string& path) {
  std::set<std::string> words;
  for (const auto& item : corpus.items)
    for (const auto& w : split_ws(to_lower(strip_punct(item.question_text)))) words.insert(w);
  std::ostringstream out;
  for (const auto& w : words) {
    auto rng = make_rng(derive_seed(seed, "embedding:" + w));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    out << w;
    for (int d = 0; d < dim; ++d) out << ' ' << fmt_double(normal(rng));
    out << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace vqa
