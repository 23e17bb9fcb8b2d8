#pragma once

#include <set>
#include <string>
#include <vector>

namespace vqa {

struct ParseToken {
  std::string surface;
  std::string lemma;  // may be empty
  std::string pos;    // Penn tag
  std::string dep;    // possibly suffixed for duplicates: nsubj, nsubj-1, ...
  int head = -1;      // token index; -1 for root
};

struct ParsedQuestion {
  std::vector<ParseToken> tokens;
};

// A word surviving summarization, with its source token index.
struct SummaryWord {
  int index = 0;
  std::string surface;
  std::string pos;
  std::string dep;
};

struct Summary {
  std::vector<SummaryWord> words;
  bool empty() const { return words.empty(); }
};

struct Tuple {
  std::vector<SummaryWord> p, r, s;
  bool negated = false;
};

// Surface-only view of a tuple, the interchange form used by alignment,
// embeddings and the tuples TSV.
struct TupleStrings {
  std::string question_id;
  std::vector<std::string> p, r, s;
  bool negated = false;
};

std::vector<std::string> surfaces(const std::vector<SummaryWord>& words);
std::string phrase_text(const std::vector<SummaryWord>& words);
TupleStrings to_strings(const Tuple& tuple, const std::string& question_id = "");

struct Lexicons {
  std::vector<std::string> drop_phrases;          // removed during preprocessing
  std::set<std::string> entity_keep_list;         // dependency labels kept in summaries
  std::set<std::string> pronoun_stop_list;        // pronouns too weak to anchor a summary
  std::set<std::string> real_object_list;         // noun lexicon (may hold two-word entries)
  std::set<std::string> location_list;
  std::vector<std::string> special_skip_phrases;  // skipped while locating S
  std::set<std::string> negation_markers;
  std::set<std::string> prepositions;             // function words ending a primary noun phrase
};

// Reads the fixed file set (one entry per line, '#' comments) from a directory.
Lexicons load_lexicons(const std::string& dir);

// dep label with any duplicate suffix ("-1", "-2", ...) removed
std::string dep_base(const std::string& label);

bool is_noun_tag(const std::string& pos);
bool is_pronoun_tag(const std::string& pos);
bool is_adjective_tag(const std::string& pos);

// Keeps letters/digits/spaces, removes drop phrases, lowercases, capitalizes
// the first letter and appends a single question mark. Idempotent.
std::string preprocess(const std::string& raw, const Lexicons& lex);

// CoNLL-like sidecar: blank-line separated blocks, one token per line:
// index<TAB>surface<TAB>pos<TAB>dep_label<TAB>head_index
std::vector<ParsedQuestion> load_parses(const std::string& path);
std::string format_parse(const ParsedQuestion& pq);

Summary summarize(const ParsedQuestion& pq, const Lexicons& lex);
Tuple extract_tuple(const Summary& summary, const ParsedQuestion& pq, const Lexicons& lex);
bool detect_negation(const std::string& raw, const Lexicons& lex);

// Full per-question path with the documented fallbacks; never fails on a
// non-empty parse. Sets Tuple::negated from the raw question.
Tuple parse_question(const std::string& raw, const ParsedQuestion& pq, const Lexicons& lex);

// Table key for a P/S phrase: words before the first preposition, minus
// location words ("lady on couch" -> "lady").
std::string alignment_key(const std::vector<std::string>& phrase, const Lexicons& lex);

// question_id<TAB>P<TAB>R<TAB>S<TAB>negated
void write_tuples_tsv(const std::vector<TupleStrings>& tuples, const std::string& path,
                      const std::string& provenance_header = "");
std::vector<TupleStrings> load_tuples_tsv(const std::string& path);

}  // namespace vqa
