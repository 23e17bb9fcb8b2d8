#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vqa {

enum class Category { human, animal, large_object, small_object };
enum class SceneType { indoor, outdoor };

const char* category_name(Category c);
Category category_from_name(const std::string& name);
const char* scene_type_name(SceneType t);
SceneType scene_type_from_name(const std::string& name);

inline constexpr int kNumDepths = 5;
inline constexpr int kNumBodyParts = 15;
inline constexpr int kNumAnimalPoses = 10;
inline constexpr int kNumAges = 5;
inline constexpr int kNumGenders = 2;
inline constexpr int kNumSkins = 3;

// One deformable body part: offset from the object anchor plus a global angle.
struct BodyPart {
  double x = 0.0;
  double y = 0.0;
  double angle = 0.0;
  bool operator==(const BodyPart&) const = default;
};

struct ClipartObject {
  Category category = Category::small_object;
  int instance_id = 0;
  bool flip = false;
  double x = 0.0;  // normalized [0,1]
  double y = 0.0;  // normalized [0,1]
  int depth = 0;   // 0..4
  std::optional<std::array<BodyPart, kNumBodyParts>> pose;  // humans only
  std::optional<int> expression_id;                          // humans only
  std::optional<int> age_id, gender_id, skin_id;             // humans only
  std::optional<int> animal_pose_id;                         // animals only
  bool operator==(const ClipartObject&) const = default;
};

struct Scene {
  std::string scene_id;
  SceneType scene_type = SceneType::indoor;
  std::vector<ClipartObject> objects;
  bool operator==(const Scene&) const = default;
};

struct QAItem {
  std::string question_id;
  std::string scene_id;
  std::string question_text;
  std::vector<std::string> human_answers;  // exactly 10
  std::optional<std::string> complement_of;
  bool operator==(const QAItem&) const = default;
};

struct VocabEntry {
  int instance_id = 0;
  std::string name;
  Category category = Category::small_object;
  bool indoor = false;
  bool outdoor = false;
  bool operator==(const VocabEntry&) const = default;
};

// Clipart vocabulary is data, not code: instance names, categories and
// per-scene-type admissibility all come from a vocabulary file.
struct Vocabulary {
  std::vector<VocabEntry> entries;  // indexed by instance_id
  int expression_count = 8;

  int size() const { return static_cast<int>(entries.size()); }
  bool admissible(int instance_id, SceneType t) const;
  const VocabEntry& entry(int instance_id) const;
  // -1 when no instance has this (case-folded) name
  int find_by_name(const std::string& name) const;
  bool operator==(const Vocabulary&) const = default;
};

Vocabulary load_vocabulary(const std::string& path);
void write_vocabulary(const Vocabulary& vocab, const std::string& path);

struct Corpus {
  std::map<std::string, Scene> scenes;
  std::vector<QAItem> items;
  Vocabulary vocab;

  const Scene& scene_of(const QAItem& item) const;
  bool operator==(const Corpus&) const = default;
};

// Majority of the item's 10 normalized answers; ties go to "yes".
std::string majority_answer(const QAItem& item);

// Line-delimited records, one JSON object per line, discriminated by "kind"
// ("scene" or "qa"). Lines starting with '#' are header comments.
Corpus load_corpus(const std::string& path, const Vocabulary& vocab);
void write_corpus(const Corpus& corpus, const std::string& path,
                  const std::string& provenance_header = "");

std::vector<std::string> validate_scene(const Scene& scene, const Vocabulary& vocab);

// Deterministic grouped split: complementary pairs always land in one split.
struct SplitFractions {
  double train = 0.7, val = 0.1, test = 0.2;
};
struct CorpusSplits {
  Corpus train, val, test;
};
CorpusSplits split_corpus(const Corpus& corpus, const SplitFractions& fractions, uint64_t seed);

}  // namespace vqa
