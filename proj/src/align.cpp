#include "vqa/align.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vqa/util.hpp"

namespace vqa {

double mutual_information(double n11, double n10, double n01, double n00) {
  double n = n11 + n10 + n01 + n00;
  if (n <= 0.0) throw std::runtime_error("mutual information undefined for empty counts");
  const double c11 = n11 + 0.5, c10 = n10 + 0.5, c01 = n01 + 0.5, c00 = n00 + 0.5;
  const double t = n + 2.0;
  const double p11 = c11 / t, p10 = c10 / t, p01 = c01 / t, p00 = c00 / t;
  const double pw1 = p11 + p10, pw0 = p01 + p00;
  const double po1 = p11 + p01, po0 = p10 + p00;
  auto term = [](double p, double pw, double po) {
    if (p <= 0.0) return 0.0;
    return p * std::log2(p / (pw * po));
  };
  return term(p11, pw1, po1) + term(p10, pw1, po0) + term(p01, pw0, po1) +
         term(p00, pw0, po0);
}

const char* resolution_name(Resolution r) {
  switch (r) {
    case Resolution::mi_match: return "mi_match";
    case Resolution::lexical_fallback: return "lexical_fallback";
    case Resolution::random_fallback: return "random_fallback";
    case Resolution::absent: return "absent";
  }
  return "?";
}

namespace {

// whole-phrase key plus head-noun key, deduplicated
std::vector<std::string> phrase_keys(const std::vector<std::string>& phrase, const Lexicons& lex) {
  std::vector<std::string> keys;
  if (phrase.empty()) return keys;
  std::string whole = to_lower(join(phrase));
  std::string head = alignment_key(phrase, lex);
  keys.push_back(whole);
  if (head != whole && !head.empty()) keys.push_back(head);
  return keys;
}

}  // namespace

AlignmentTable fit_alignment(const Corpus& corpus, const std::vector<TupleStrings>& tuples,
                             const Lexicons& lex) {
  if (tuples.empty()) throw std::runtime_error("fit_alignment: empty training set");
  AlignmentTable table;
  table.vocab_size = corpus.vocab.size();

  std::map<std::string, const QAItem*> item_by_id;
  for (const auto& item : corpus.items) item_by_id[item.question_id] = &item;

  for (SceneType type : {SceneType::indoor, SceneType::outdoor}) {
    auto& sub = table.sub(type);
    std::vector<char> admissible(static_cast<size_t>(corpus.vocab.size()), 0);
    for (int i = 0; i < corpus.vocab.size(); ++i)
      admissible[static_cast<size_t>(i)] = corpus.vocab.admissible(i, type) ? 1 : 0;

    // per-item presence sets and per-instance presence totals
    std::vector<std::set<int>> present;
    std::vector<long long> present_total(static_cast<size_t>(corpus.vocab.size()), 0);
    std::map<std::string, long long> occ;
    std::map<std::string, std::vector<long long>> n11;

    for (const auto& tuple : tuples) {
      auto it = item_by_id.find(tuple.question_id);
      if (it == item_by_id.end())
        throw std::runtime_error("fit_alignment: tuple for unknown question " + tuple.question_id);
      const Scene& scene = corpus.scene_of(*it->second);
      if (scene.scene_type != type) continue;

      std::set<int> ids;
      for (const auto& o : scene.objects) ids.insert(o.instance_id);
      for (int i : ids) ++present_total[static_cast<size_t>(i)];

      std::set<std::string> keys;
      for (const auto& k : phrase_keys(tuple.p, lex)) keys.insert(k);
      for (const auto& k : phrase_keys(tuple.s, lex)) keys.insert(k);
      for (const auto& k : keys) {
        ++occ[k];
        auto& row = n11[k];
        if (row.empty()) row.assign(static_cast<size_t>(corpus.vocab.size()), 0);
        for (int i : ids) ++row[static_cast<size_t>(i)];
      }
      present.push_back(std::move(ids));
    }
    sub.total_items = static_cast<long long>(present.size());
    if (sub.total_items == 0) continue;

    for (const auto& [key, count] : occ) {
      if (count < 2) continue;  // phrases must occur at least twice
      const auto& row = n11[key];
      std::vector<MiCell> cells(static_cast<size_t>(corpus.vocab.size()));
      for (int i = 0; i < corpus.vocab.size(); ++i) {
        if (!admissible[static_cast<size_t>(i)]) continue;
        MiCell c;
        c.n11 = row[static_cast<size_t>(i)];
        c.n10 = count - c.n11;
        c.n01 = present_total[static_cast<size_t>(i)] - c.n11;
        c.n00 = sub.total_items - c.n11 - c.n10 - c.n01;
        // positive-correlation gate: p(1,1) must exceed p(w)p(o)
        double lhs = static_cast<double>(c.n11) * static_cast<double>(sub.total_items);
        double rhs = static_cast<double>(count) * static_cast<double>(present_total[static_cast<size_t>(i)]);
        c.mi = lhs > rhs ? mutual_information(static_cast<double>(c.n11), static_cast<double>(c.n10),
                                              static_cast<double>(c.n01), static_cast<double>(c.n00))
                         : 0.0;
        cells[static_cast<size_t>(i)] = c;
      }
      sub.phrases.emplace(key, std::move(cells));
    }
  }
  return table;
}

namespace {

constexpr double kMiFloor = 1e-3;  // below this the table lookup is uninformative

std::optional<int> pick_object_of_instance(const Scene& scene, int instance_id,
                                           const std::set<int>& excluded,
                                           std::mt19937_64& rng) {
  std::vector<int> candidates;
  for (size_t i = 0; i < scene.objects.size(); ++i)
    if (scene.objects[i].instance_id == instance_id && !excluded.count(static_cast<int>(i)))
      candidates.push_back(static_cast<int>(i));
  if (candidates.empty()) return std::nullopt;
  if (candidates.size() == 1) return candidates[0];
  return candidates[std::uniform_int_distribution<size_t>(0, candidates.size() - 1)(rng)];
}

struct Resolved {
  int object = -1;
  Resolution how = Resolution::absent;
};

Resolved resolve_argument(const std::vector<std::string>& phrase, const Scene& scene,
                          const AlignmentTable::SubTable& sub, const Vocabulary& vocab,
                          const Lexicons& lex, const std::set<int>& excluded,
                          std::mt19937_64& rng) {
  // 1. table lookup, whole phrase preferred over head key
  for (const auto& key : phrase_keys(phrase, lex)) {
    auto it = sub.phrases.find(key);
    if (it == sub.phrases.end()) continue;
    const auto& cells = it->second;
    int best = -1;
    double best_mi = kMiFloor;
    for (size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].mi > best_mi) {
        best = static_cast<int>(i);
        best_mi = cells[i].mi;
      }
    }
    if (best < 0) continue;  // uninformative row
    if (auto obj = pick_object_of_instance(scene, best, excluded, rng))
      return {*obj, Resolution::mi_match};
    break;  // best instance not depicted; fall through
  }
  // 2. lexical fallback: exact vocabulary name match
  for (const auto& key : phrase_keys(phrase, lex)) {
    int inst = vocab.find_by_name(key);
    if (inst < 0) continue;
    if (auto obj = pick_object_of_instance(scene, inst, excluded, rng))
      return {*obj, Resolution::lexical_fallback};
  }
  // 3. seeded-random object
  std::vector<int> candidates;
  for (size_t i = 0; i < scene.objects.size(); ++i)
    if (!excluded.count(static_cast<int>(i))) candidates.push_back(static_cast<int>(i));
  if (candidates.empty())
    for (size_t i = 0; i < scene.objects.size(); ++i) candidates.push_back(static_cast<int>(i));
  int obj = candidates.size() == 1
                ? candidates[0]
                : candidates[std::uniform_int_distribution<size_t>(0, candidates.size() - 1)(rng)];
  return {obj, Resolution::random_fallback};
}

}  // namespace

Alignment align(const TupleStrings& tuple, const Scene& scene, const AlignmentTable& table,
                const Vocabulary& vocab, const Lexicons& lex, uint64_t seed) {
  if (scene.objects.empty())
    throw std::runtime_error("align: scene " + scene.scene_id + " has no objects");
  auto rng = make_rng(derive_seed(seed, "align:" + scene.scene_id));
  const auto& sub = table.sub(scene.scene_type);

  Alignment out;
  auto p = resolve_argument(tuple.p, scene, sub, vocab, lex, {}, rng);
  out.p_object = p.object;
  out.p_resolved = p.how;

  if (tuple.s.empty()) return out;
  std::set<int> excluded;
  if (scene.objects.size() >= 2) excluded.insert(p.object);
  auto s = resolve_argument(tuple.s, scene, sub, vocab, lex, excluded, rng);
  out.s_object = s.object;
  out.s_resolved = s.how;
  return out;
}

void write_alignment_table(const AlignmentTable& table, const std::string& path,
                           const std::string& provenance_header) {
  std::ostringstream out;
  out << provenance_header;
  for (SceneType type : {SceneType::indoor, SceneType::outdoor}) {
    const auto& sub = table.sub(type);
    for (const auto& [phrase, cells] : sub.phrases) {
      for (size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        if (c.n11 + c.n10 + c.n01 + c.n00 == 0) continue;  // inadmissible instance
        out << scene_type_name(type) << '\t' << phrase << '\t' << i << '\t' << fmt_double(c.mi)
            << '\t' << c.n11 << '\t' << c.n10 << '\t' << c.n01 << '\t' << c.n00 << '\n';
      }
    }
  }
  write_text_file(path, out.str());
}

AlignmentTable load_alignment_table(const std::string& path, int vocab_size) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open alignment table: " + path);
  AlignmentTable table;
  table.vocab_size = vocab_size;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_char(line, '\t');
    if (cols.size() != 8)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 8 columns");
    auto& sub = table.sub(scene_type_from_name(cols[0]));
    auto& cells = sub.phrases[cols[1]];
    if (cells.empty()) cells.assign(static_cast<size_t>(vocab_size), MiCell{});
    int inst = std::stoi(cols[2]);
    if (inst < 0 || inst >= vocab_size)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": instance out of range");
    MiCell c;
    c.mi = std::stod(cols[3]);
    c.n11 = std::stoll(cols[4]);
    c.n10 = std::stoll(cols[5]);
    c.n01 = std::stoll(cols[6]);
    c.n00 = std::stoll(cols[7]);
    cells[static_cast<size_t>(inst)] = c;
    sub.total_items = c.n11 + c.n10 + c.n01 + c.n00;
  }
  return table;
}

}  // namespace vqa
