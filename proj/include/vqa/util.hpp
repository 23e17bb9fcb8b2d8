#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace vqa {

// FNV-1a, used for cache keys and named seed derivation.
uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL);
uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL);
uint64_t hash_file(const std::string& path);

// All randomness in the toolkit flows from one base seed through named streams.
uint64_t derive_seed(uint64_t base, const std::string& stream_name);

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

std::string to_lower(const std::string& s);
std::vector<std::string> split_ws(const std::string& s);
std::vector<std::string> split_char(const std::string& s, char sep);
std::string join(const std::vector<std::string>& words, const std::string& sep = " ");

// Drops everything but letters/digits/whitespace.
std::string strip_punct(const std::string& s, bool keep_apostrophe = false);

// lowercase, strip non-alphanumerics, collapse internal whitespace
std::string normalize_answer(const std::string& s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

std::string fmt_double(double v);  // round-trip-exact decimal form

}  // namespace vqa
