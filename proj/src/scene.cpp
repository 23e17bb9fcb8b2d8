#include "vqa/scene.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "vqa/util.hpp"

namespace vqa {

using nlohmann::json;

const char* category_name(Category c) {
  switch (c) {
    case Category::human: return "human";
    case Category::animal: return "animal";
    case Category::large_object: return "large_object";
    case Category::small_object: return "small_object";
  }
  return "?";
}

Category category_from_name(const std::string& name) {
  if (name == "human") return Category::human;
  if (name == "animal") return Category::animal;
  if (name == "large_object") return Category::large_object;
  if (name == "small_object") return Category::small_object;
  throw std::runtime_error("unknown category: " + name);
}

const char* scene_type_name(SceneType t) {
  return t == SceneType::indoor ? "indoor" : "outdoor";
}

SceneType scene_type_from_name(const std::string& name) {
  if (name == "indoor") return SceneType::indoor;
  if (name == "outdoor") return SceneType::outdoor;
  throw std::runtime_error("unknown scene_type: " + name);
}

bool Vocabulary::admissible(int instance_id, SceneType t) const {
  if (instance_id < 0 || instance_id >= size()) return false;
  const auto& e = entries[static_cast<size_t>(instance_id)];
  return t == SceneType::indoor ? e.indoor : e.outdoor;
}

const VocabEntry& Vocabulary::entry(int instance_id) const {
  if (instance_id < 0 || instance_id >= size())
    throw std::runtime_error("instance_id out of range: " + std::to_string(instance_id));
  return entries[static_cast<size_t>(instance_id)];
}

int Vocabulary::find_by_name(const std::string& name) const {
  std::string key = to_lower(name);
  for (const auto& e : entries)
    if (to_lower(e.name) == key) return e.instance_id;
  return -1;
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
  Vocabulary vocab;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      // optional directive: "# expressions=8"
      auto pos = line.find("expressions=");
      if (pos != std::string::npos)
        vocab.expression_count = std::stoi(line.substr(pos + 12));
      continue;
    }
    auto cols = split_char(line, '\t');
    if (cols.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 4 tab-separated columns");
    VocabEntry e;
    e.instance_id = std::stoi(cols[0]);
    e.name = cols[1];
    e.category = category_from_name(cols[2]);
    if (cols[3] == "indoor") {
      e.indoor = true;
    } else if (cols[3] == "outdoor") {
      e.outdoor = true;
    } else if (cols[3] == "both") {
      e.indoor = e.outdoor = true;
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": admissibility must be indoor|outdoor|both");
    }
    if (e.instance_id != static_cast<int>(vocab.entries.size()))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": instance_id out of order (expected " +
                               std::to_string(vocab.entries.size()) + ")");
    vocab.entries.push_back(std::move(e));
  }
  if (vocab.entries.empty()) throw std::runtime_error("empty vocabulary file: " + path);
  return vocab;
}

void write_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ostringstream out;
  out << "# expressions=" << vocab.expression_count << "\n";
  for (const auto& e : vocab.entries) {
    const char* adm = e.indoor && e.outdoor ? "both" : (e.indoor ? "indoor" : "outdoor");
    out << e.instance_id << '\t' << e.name << '\t' << category_name(e.category) << '\t' << adm
        << '\n';
  }
  write_text_file(path, out.str());
}

const Scene& Corpus::scene_of(const QAItem& item) const {
  auto it = scenes.find(item.scene_id);
  if (it == scenes.end())
    throw std::runtime_error("item " + item.question_id + " references unknown scene " +
                             item.scene_id);
  return it->second;
}

std::string majority_answer(const QAItem& item) {
  int yes = 0, no = 0;
  for (const auto& a : item.human_answers) {
    if (normalize_answer(a) == "yes")
      ++yes;
    else
      ++no;
  }
  return yes >= no ? "yes" : "no";
}

namespace {

std::string record_err(const std::string& path, int lineno, const std::string& msg) {
  return path + ":" + std::to_string(lineno) + ": " + msg;
}

ClipartObject object_from_json(const json& j, double canvas_w, double canvas_h) {
  ClipartObject o;
  o.category = category_from_name(j.at("category").get<std::string>());
  o.instance_id = j.at("instance_id").get<int>();
  o.flip = j.at("flip").get<bool>();
  o.x = j.at("x").get<double>() / canvas_w;
  o.y = j.at("y").get<double>() / canvas_h;
  o.depth = j.at("depth").get<int>();
  if (j.contains("pose")) {
    const auto& p = j.at("pose");
    if (p.size() != kNumBodyParts)
      throw std::runtime_error("pose must have " + std::to_string(kNumBodyParts) + " parts");
    std::array<BodyPart, kNumBodyParts> pose;
    for (size_t i = 0; i < pose.size(); ++i) {
      pose[i].x = p[i][0].get<double>() / canvas_w;
      pose[i].y = p[i][1].get<double>() / canvas_h;
      pose[i].angle = p[i][2].get<double>();
    }
    o.pose = pose;
  }
  if (j.contains("expression_id")) o.expression_id = j.at("expression_id").get<int>();
  if (j.contains("age_id")) o.age_id = j.at("age_id").get<int>();
  if (j.contains("gender_id")) o.gender_id = j.at("gender_id").get<int>();
  if (j.contains("skin_id")) o.skin_id = j.at("skin_id").get<int>();
  if (j.contains("animal_pose_id")) o.animal_pose_id = j.at("animal_pose_id").get<int>();
  return o;
}

json object_to_json(const ClipartObject& o) {
  json j;
  j["category"] = category_name(o.category);
  j["instance_id"] = o.instance_id;
  j["flip"] = o.flip;
  j["x"] = o.x;
  j["y"] = o.y;
  j["depth"] = o.depth;
  if (o.pose) {
    json p = json::array();
    for (const auto& part : *o.pose) p.push_back({part.x, part.y, part.angle});
    j["pose"] = p;
  }
  if (o.expression_id) j["expression_id"] = *o.expression_id;
  if (o.age_id) j["age_id"] = *o.age_id;
  if (o.gender_id) j["gender_id"] = *o.gender_id;
  if (o.skin_id) j["skin_id"] = *o.skin_id;
  if (o.animal_pose_id) j["animal_pose_id"] = *o.animal_pose_id;
  return j;
}

}  // namespace

Corpus load_corpus(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  Corpus corpus;
  corpus.vocab = vocab;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(record_err(path, lineno, std::string("malformed record: ") + e.what()));
    }
    try {
      std::string kind = j.at("kind").get<std::string>();
      if (kind == "scene") {
        Scene s;
        s.scene_id = j.at("scene_id").get<std::string>();
        s.scene_type = scene_type_from_name(j.at("scene_type").get<std::string>());
        double cw = 1.0, ch = 1.0;
        if (j.contains("canvas")) {
          cw = j["canvas"].at("width").get<double>();
          ch = j["canvas"].at("height").get<double>();
        }
        for (const auto& jo : j.at("objects")) s.objects.push_back(object_from_json(jo, cw, ch));
        if (corpus.scenes.count(s.scene_id))
          throw std::runtime_error("duplicate scene_id " + s.scene_id);
        auto violations = validate_scene(s, vocab);
        if (!violations.empty())
          throw std::runtime_error("scene " + s.scene_id + ": " + violations.front());
        corpus.scenes.emplace(s.scene_id, std::move(s));
      } else if (kind == "qa") {
        QAItem item;
        item.question_id = j.at("question_id").get<std::string>();
        item.scene_id = j.at("scene_id").get<std::string>();
        item.question_text = j.at("question_text").get<std::string>();
        item.human_answers = j.at("human_answers").get<std::vector<std::string>>();
        if (j.contains("complement_of"))
          item.complement_of = j.at("complement_of").get<std::string>();
        if (item.human_answers.size() != 10)
          throw std::runtime_error("item " + item.question_id + " has " +
                                   std::to_string(item.human_answers.size()) +
                                   " answers, expected 10");
        corpus.items.push_back(std::move(item));
      } else {
        throw std::runtime_error("unknown record kind: " + kind);
      }
    } catch (const json::exception& e) {
      throw std::runtime_error(record_err(path, lineno, std::string("bad field: ") + e.what()));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(record_err(path, lineno, e.what()));
    }
  }
  // cross-record checks
  for (const auto& item : corpus.items) {
    if (!corpus.scenes.count(item.scene_id))
      throw std::runtime_error(path + ": item " + item.question_id +
                               " references unknown scene " + item.scene_id);
  }
  std::map<std::string, const QAItem*> by_id;
  for (const auto& item : corpus.items) by_id[item.question_id] = &item;
  for (const auto& item : corpus.items) {
    if (!item.complement_of) continue;
    auto it = by_id.find(*item.complement_of);
    if (it == by_id.end())
      throw std::runtime_error(path + ": item " + item.question_id +
                               " links to unknown complement " + *item.complement_of);
    const QAItem* other = it->second;
    if (!other->complement_of || *other->complement_of != item.question_id)
      throw std::runtime_error(path + ": complement link " + item.question_id + " -> " +
                               *item.complement_of + " is not symmetric");
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& path,
                  const std::string& provenance_header) {
  std::ostringstream out;
  if (!provenance_header.empty()) out << provenance_header;
  for (const auto& [id, s] : corpus.scenes) {
    json j;
    j["kind"] = "scene";
    j["scene_id"] = s.scene_id;
    j["scene_type"] = scene_type_name(s.scene_type);
    json objs = json::array();
    for (const auto& o : s.objects) objs.push_back(object_to_json(o));
    j["objects"] = objs;
    out << j.dump() << '\n';
  }
  for (const auto& item : corpus.items) {
    json j;
    j["kind"] = "qa";
    j["question_id"] = item.question_id;
    j["scene_id"] = item.scene_id;
    j["question_text"] = item.question_text;
    j["human_answers"] = item.human_answers;
    if (item.complement_of) j["complement_of"] = *item.complement_of;
    out << j.dump() << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<std::string> validate_scene(const Scene& scene, const Vocabulary& vocab) {
  std::vector<std::string> violations;
  auto bad = [&](size_t i, const std::string& msg) {
    violations.push_back("object " + std::to_string(i) + ": " + msg);
  };
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    if (o.instance_id < 0 || o.instance_id >= vocab.size()) {
      bad(i, "instance_id " + std::to_string(o.instance_id) + " outside vocabulary");
      continue;
    }
    const auto& e = vocab.entry(o.instance_id);
    if (e.category != o.category)
      bad(i, "category " + std::string(category_name(o.category)) + " does not match vocabulary (" +
                 category_name(e.category) + ")");
    if (!vocab.admissible(o.instance_id, scene.scene_type))
      bad(i, "instance \"" + e.name + "\" not admissible in " +
                 scene_type_name(scene.scene_type) + " scenes");
    if (o.x < 0.0 || o.x > 1.0 || o.y < 0.0 || o.y > 1.0)
      bad(i, "position outside [0,1]");
    if (o.depth < 0 || o.depth >= kNumDepths) bad(i, "depth outside 0..4");
    bool is_human = o.category == Category::human;
    bool is_animal = o.category == Category::animal;
    if (o.pose.has_value() != is_human)
      bad(i, is_human ? "human without pose" : "pose on non-human");
    if (o.expression_id.has_value() != is_human)
      bad(i, is_human ? "human without expression_id" : "expression_id on non-human");
    if (o.age_id.has_value() != is_human || o.gender_id.has_value() != is_human ||
        o.skin_id.has_value() != is_human)
      bad(i, is_human ? "human missing age/gender/skin" : "age/gender/skin on non-human");
    if (o.animal_pose_id.has_value() != is_animal)
      bad(i, is_animal ? "animal without animal_pose_id" : "animal_pose_id on non-animal");
    if (is_human) {
      if (o.expression_id && (*o.expression_id < 0 || *o.expression_id >= vocab.expression_count))
        bad(i, "expression_id outside 0.." + std::to_string(vocab.expression_count - 1));
      if (o.age_id && (*o.age_id < 0 || *o.age_id >= kNumAges)) bad(i, "age_id outside 0..4");
      if (o.gender_id && (*o.gender_id < 0 || *o.gender_id >= kNumGenders))
        bad(i, "gender_id outside 0..1");
      if (o.skin_id && (*o.skin_id < 0 || *o.skin_id >= kNumSkins)) bad(i, "skin_id outside 0..2");
    }
    if (is_animal && o.animal_pose_id &&
        (*o.animal_pose_id < 0 || *o.animal_pose_id >= kNumAnimalPoses))
      bad(i, "animal_pose_id outside 0..9");
  }
  return violations;
}

CorpusSplits split_corpus(const Corpus& corpus, const SplitFractions& fractions, uint64_t seed) {
  // union complementary pairs into one unit so pair evaluation stays within a split
  std::map<std::string, size_t> index_of;
  for (size_t i = 0; i < corpus.items.size(); ++i) index_of[corpus.items[i].question_id] = i;
  std::vector<int> unit(corpus.items.size(), -1);
  std::vector<std::vector<size_t>> units;
  for (size_t i = 0; i < corpus.items.size(); ++i) {
    if (unit[i] >= 0) continue;
    std::vector<size_t> members{i};
    unit[i] = static_cast<int>(units.size());
    const auto& c = corpus.items[i].complement_of;
    if (c) {
      size_t j = index_of.at(*c);
      if (unit[j] < 0) {
        unit[j] = unit[i];
        members.push_back(j);
      }
    }
    units.push_back(std::move(members));
  }
  std::vector<size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(derive_seed(seed, "corpus-split"));
  std::shuffle(order.begin(), order.end(), rng);

  double total = fractions.train + fractions.val + fractions.test;
  size_t n = units.size();
  size_t n_train = static_cast<size_t>(fractions.train / total * static_cast<double>(n));
  size_t n_val = static_cast<size_t>(fractions.val / total * static_cast<double>(n));

  CorpusSplits out;
  out.train.vocab = out.val.vocab = out.test.vocab = corpus.vocab;
  out.train.scenes = out.val.scenes = out.test.scenes = corpus.scenes;
  for (size_t k = 0; k < n; ++k) {
    Corpus& dst = k < n_train ? out.train : (k < n_train + n_val ? out.val : out.test);
    for (size_t idx : units[order[k]]) dst.items.push_back(corpus.items[idx]);
  }
  return out;
}

}  // namespace vqa
