#include "vqa/parse.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vqa/util.hpp"

namespace vqa {

std::vector<std::string> surfaces(const std::vector<SummaryWord>& words) {
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(w.surface);
  return out;
}

std::string phrase_text(const std::vector<SummaryWord>& words) { return join(surfaces(words)); }

TupleStrings to_strings(const Tuple& tuple, const std::string& question_id) {
  TupleStrings out;
  out.question_id = question_id;
  out.p = surfaces(tuple.p);
  out.r = surfaces(tuple.r);
  out.s = surfaces(tuple.s);
  out.negated = tuple.negated;
  return out;
}

namespace {

std::vector<std::string> read_lexicon_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon file: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto entry = join(split_ws(to_lower(line)));
    if (!entry.empty()) out.push_back(entry);
  }
  return out;
}

std::set<std::string> read_lexicon_set(const std::string& path) {
  auto lines = read_lexicon_lines(path);
  return {lines.begin(), lines.end()};
}

}  // namespace

Lexicons load_lexicons(const std::string& dir) {
  Lexicons lex;
  lex.drop_phrases = read_lexicon_lines(dir + "/drop_phrases.txt");
  lex.entity_keep_list = read_lexicon_set(dir + "/entity_keep_list.txt");
  lex.pronoun_stop_list = read_lexicon_set(dir + "/pronoun_stop_list.txt");
  lex.real_object_list = read_lexicon_set(dir + "/real_object_list.txt");
  lex.location_list = read_lexicon_set(dir + "/location_list.txt");
  lex.special_skip_phrases = read_lexicon_lines(dir + "/special_skip_phrases.txt");
  lex.negation_markers = read_lexicon_set(dir + "/negation_markers.txt");
  lex.prepositions = read_lexicon_set(dir + "/prepositions.txt");
  return lex;
}

std::string dep_base(const std::string& label) {
  auto dash = label.rfind('-');
  if (dash == std::string::npos || dash + 1 >= label.size()) return label;
  for (size_t i = dash + 1; i < label.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(label[i]))) return label;
  return label.substr(0, dash);
}

bool is_noun_tag(const std::string& pos) { return pos.rfind("NN", 0) == 0; }
bool is_pronoun_tag(const std::string& pos) {
  return pos == "PRP" || pos == "PRP$" || pos == "WP";
}
bool is_adjective_tag(const std::string& pos) { return pos.rfind("JJ", 0) == 0; }

std::string preprocess(const std::string& raw, const Lexicons& lex) {
  auto words = split_ws(strip_punct(raw));
  if (words.empty()) throw std::runtime_error("empty question after preprocessing: \"" + raw + "\"");

  // drop phrases longest-first so "does it look like" wins over any prefix of it
  std::vector<std::vector<std::string>> phrases;
  for (const auto& p : lex.drop_phrases) phrases.push_back(split_ws(p));
  std::stable_sort(phrases.begin(), phrases.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  for (const auto& phrase : phrases) {
    if (phrase.empty() || phrase.size() > words.size()) continue;
    std::vector<std::string> kept;
    size_t i = 0;
    while (i < words.size()) {
      bool match = i + phrase.size() <= words.size();
      for (size_t k = 0; match && k < phrase.size(); ++k)
        if (to_lower(words[i + k]) != phrase[k]) match = false;
      if (match) {
        i += phrase.size();
      } else {
        kept.push_back(words[i]);
        ++i;
      }
    }
    words = std::move(kept);
  }
  if (words.empty()) throw std::runtime_error("empty question after preprocessing: \"" + raw + "\"");

  std::string out = to_lower(join(words));
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out + "?";
}

std::vector<ParsedQuestion> load_parses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open parse file: " + path);
  std::vector<ParsedQuestion> out;
  ParsedQuestion cur;
  std::string line;
  int lineno = 0;
  auto flush = [&]() {
    if (cur.tokens.empty()) return;
    // canonicalize duplicate labels: first bare, then label-1, label-2, ...
    std::map<std::string, int> seen;
    int roots = 0;
    for (auto& t : cur.tokens) {
      std::string base = dep_base(t.dep);
      int k = seen[base]++;
      t.dep = k == 0 ? base : base + "-" + std::to_string(k);
      if (base == "root") ++roots;
    }
    if (roots != 1)
      throw std::runtime_error(path + ": parse block ending at line " + std::to_string(lineno) +
                               " has " + std::to_string(roots) + " root tokens, expected 1");
    out.push_back(std::move(cur));
    cur = ParsedQuestion{};
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    auto cols = split_char(line, '\t');
    if (cols.size() != 5)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 5 tab-separated columns");
    ParseToken t;
    int index = std::stoi(cols[0]);
    if (index != static_cast<int>(cur.tokens.size()))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": token index " + cols[0] +
                               " out of order");
    t.surface = cols[1];
    t.pos = cols[2];
    t.dep = cols[3];
    t.head = std::stoi(cols[4]);
    cur.tokens.push_back(std::move(t));
  }
  flush();
  return out;
}

std::string format_parse(const ParsedQuestion& pq) {
  std::ostringstream out;
  for (size_t i = 0; i < pq.tokens.size(); ++i) {
    const auto& t = pq.tokens[i];
    out << i << '\t' << t.surface << '\t' << t.pos << '\t' << t.dep << '\t' << t.head << '\n';
  }
  return out.str();
}

namespace {

bool acceptable_anchor(const ParseToken& t, const Lexicons& lex) {
  if (is_noun_tag(t.pos)) return true;
  if (is_pronoun_tag(t.pos) && !lex.pronoun_stop_list.count(to_lower(t.surface))) return true;
  return false;
}

}  // namespace

Summary summarize(const ParsedQuestion& pq, const Lexicons& lex) {
  const auto& toks = pq.tokens;
  int n = static_cast<int>(toks.size());
  int subj = -1;
  for (int i = 0; i < n; ++i) {
    auto base = dep_base(toks[i].dep);
    if (base == "nsubj" || base == "nsubjpass") {
      subj = i;
      break;
    }
  }

  int anchor = -1;
  if (subj >= 0) {
    if (is_noun_tag(toks[subj].pos)) {
      anchor = subj;
    } else if (is_pronoun_tag(toks[subj].pos) &&
               !lex.pronoun_stop_list.count(to_lower(toks[subj].surface))) {
      anchor = subj;
    } else {
      // subject word is unusable; fall back to the nearest usable word after it,
      // then anywhere in the question
      for (int i = subj + 1; i < n && anchor < 0; ++i)
        if (acceptable_anchor(toks[i], lex)) anchor = i;
      for (int i = 0; i < subj && anchor < 0; ++i)
        if (acceptable_anchor(toks[i], lex)) anchor = i;
    }
  } else {
    for (int i = 0; i < n && anchor < 0; ++i)
      if (acceptable_anchor(toks[i], lex)) anchor = i;
  }
  if (anchor < 0) throw std::runtime_error("no noun or pronoun anchor in question");

  Summary out;
  for (int i = anchor; i < n; ++i) {
    auto base = dep_base(toks[i].dep);
    if (!lex.entity_keep_list.count(base)) continue;
    out.words.push_back({i, to_lower(toks[i].surface), toks[i].pos, base});
  }
  if (out.words.empty()) throw std::runtime_error("summary empty after entity filtering");
  return out;
}

namespace {

// Matches a one- or two-word lexicon entry starting at position i; returns the
// number of words consumed (0 if no match). Two-word entries win.
int match_listed_noun(const std::vector<SummaryWord>& w, size_t i, const Lexicons& lex) {
  if (i + 1 < w.size()) {
    std::string two = to_lower(w[i].surface) + " " + to_lower(w[i + 1].surface);
    if (lex.real_object_list.count(two) || lex.location_list.count(two)) return 2;
  }
  if (i < w.size()) {
    std::string one = to_lower(w[i].surface);
    if (lex.real_object_list.count(one) || lex.location_list.count(one)) return 1;
  }
  return 0;
}

int match_skip_phrase(const std::vector<SummaryWord>& w, size_t i, const Lexicons& lex) {
  for (const auto& phrase : lex.special_skip_phrases) {
    auto parts = split_ws(phrase);
    if (parts.empty() || i + parts.size() > w.size()) continue;
    bool match = true;
    for (size_t k = 0; k < parts.size() && match; ++k)
      if (to_lower(w[i + k].surface) != parts[k]) match = false;
    if (match) return static_cast<int>(parts.size());
  }
  return 0;
}

}  // namespace

Tuple extract_tuple(const Summary& summary, const ParsedQuestion& pq, const Lexicons& lex) {
  (void)pq;
  const auto& w = summary.words;
  if (w.empty()) throw std::runtime_error("cannot extract tuple from empty summary");

  size_t p_start = 0, p_end = 0;  // half-open
  int subj = -1;
  for (size_t i = 0; i < w.size(); ++i) {
    if (w[i].dep == "nsubj" || w[i].dep == "nsubjpass") {
      subj = static_cast<int>(i);
      break;
    }
  }
  if (subj >= 0) {
    p_end = static_cast<size_t>(subj) + 1;
    // extend to "subject + preposition + listed noun" unless the noun ends the summary
    if (is_noun_tag(w[static_cast<size_t>(subj)].pos) && p_end < w.size() &&
        w[p_end].pos == "IN") {
      int consumed = match_listed_noun(w, p_end + 1, lex);
      if (consumed > 0 && p_end + 1 + static_cast<size_t>(consumed) < w.size())
        p_end = p_end + 1 + static_cast<size_t>(consumed);
    }
  } else {
    size_t first_noun = w.size();
    for (size_t i = 0; i < w.size(); ++i) {
      if (is_noun_tag(w[i].pos)) {
        first_noun = i;
        break;
      }
    }
    if (first_noun == w.size()) throw std::runtime_error("no subject or noun available for P");
    p_start = first_noun;
    p_end = first_noun;
    while (p_end < w.size() && is_noun_tag(w[p_end].pos)) ++p_end;
  }

  Tuple t;
  for (size_t i = p_start; i < p_end; ++i) t.p.push_back(w[i]);

  // S: first noun after P (skip phrases skipped, adjectives attached)
  size_t s_start = w.size();
  size_t i = p_end;
  while (i < w.size()) {
    int skip = match_skip_phrase(w, i, lex);
    if (skip > 0) {
      i += static_cast<size_t>(skip);
      continue;
    }
    if (is_noun_tag(w[i].pos)) {
      s_start = i;
      while (s_start > p_end && is_adjective_tag(w[s_start - 1].pos)) --s_start;
      break;
    }
    ++i;
  }
  for (size_t k = 0; k < p_start; ++k) t.r.push_back(w[k]);
  for (size_t k = p_end; k < w.size(); ++k) {
    if (k < s_start)
      t.r.push_back(w[k]);
    else
      t.s.push_back(w[k]);
  }
  if (t.p.empty()) throw std::runtime_error("empty P argument");
  return t;
}

bool detect_negation(const std::string& raw, const Lexicons& lex) {
  auto words = split_ws(to_lower(strip_punct(raw, /*keep_apostrophe=*/true)));
  auto squeeze = [](const std::string& s) {
    std::string out;
    for (char c : s)
      if (c != '\'') out.push_back(c);
    return out;
  };
  std::set<std::string> markers;
  for (const auto& m : lex.negation_markers) markers.insert(squeeze(m));
  for (const auto& word : words)
    if (markers.count(squeeze(word))) return true;
  return false;
}

Tuple parse_question(const std::string& raw, const ParsedQuestion& pq, const Lexicons& lex) {
  Tuple t;
  try {
    Summary summary = summarize(pq, lex);
    t = extract_tuple(summary, pq, lex);
  } catch (const std::runtime_error&) {
    // fallback: entity-filter without anchoring; P = first noun, R = the rest
    std::vector<SummaryWord> words;
    for (size_t i = 0; i < pq.tokens.size(); ++i) {
      const auto& tok = pq.tokens[i];
      auto base = dep_base(tok.dep);
      if (!lex.entity_keep_list.count(base)) continue;
      words.push_back({static_cast<int>(i), to_lower(tok.surface), tok.pos, base});
    }
    if (words.empty())
      for (size_t i = 0; i < pq.tokens.size(); ++i)
        words.push_back({static_cast<int>(i), to_lower(pq.tokens[i].surface), pq.tokens[i].pos,
                         dep_base(pq.tokens[i].dep)});
    size_t noun = words.size();
    for (size_t i = 0; i < words.size(); ++i) {
      if (is_noun_tag(words[i].pos)) {
        noun = i;
        break;
      }
    }
    t = Tuple{};
    if (noun == words.size()) {
      t.p = words;
    } else {
      t.p.push_back(words[noun]);
      for (size_t i = 0; i < words.size(); ++i)
        if (i != noun) t.r.push_back(words[i]);
    }
  }
  t.negated = detect_negation(raw, lex);
  return t;
}

std::string alignment_key(const std::vector<std::string>& phrase, const Lexicons& lex) {
  std::vector<std::string> kept;
  for (const auto& w : phrase) {
    std::string lw = to_lower(w);
    if (lex.prepositions.count(lw)) break;
    if (lex.location_list.count(lw)) continue;
    kept.push_back(lw);
  }
  if (kept.empty()) {
    for (const auto& w : phrase) {
      std::string lw = to_lower(w);
      if (lex.location_list.count(lw)) continue;
      kept.push_back(lw);
    }
  }
  if (kept.empty() && !phrase.empty()) kept.push_back(to_lower(phrase.front()));
  return join(kept);
}

void write_tuples_tsv(const std::vector<TupleStrings>& tuples, const std::string& path,
                      const std::string& provenance_header) {
  std::ostringstream out;
  out << provenance_header;
  for (const auto& t : tuples)
    out << t.question_id << '\t' << join(t.p) << '\t' << join(t.r) << '\t' << join(t.s) << '\t'
        << (t.negated ? 1 : 0) << '\n';
  write_text_file(path, out.str());
}

std::vector<TupleStrings> load_tuples_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tuples file: " + path);
  std::vector<TupleStrings> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_char(line, '\t');
    if (cols.size() != 5)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 5 columns");
    TupleStrings t;
    t.question_id = cols[0];
    t.p = split_ws(cols[1]);
    t.r = split_ws(cols[2]);
    t.s = split_ws(cols[3]);
    t.negated = cols[4] == "1" || cols[4] == "true";
    if (t.p.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty P argument");
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace vqa
