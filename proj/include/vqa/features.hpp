#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vqa/align.hpp"
#include "vqa/gmm.hpp"
#include "vqa/scene.hpp"

namespace vqa {

// fixed object-block widths; the shipped vocabulary must fit inside them
inline constexpr int kCategoryWidth = 4;
inline constexpr int kInstanceWidth = 254;
inline constexpr int kAbsLocationWidth = 50;   // 5 depths x (9 responsibilities + presence bit)
inline constexpr int kPoseWidth = 224;         // 45 raw + 60 per-part trig + zero padding
inline constexpr int kExpressionWidth = 10;
inline constexpr int kHumanWidth = 244;        // age 5 + gender 2 + skin 3 + pose + expression
inline constexpr int kAnimalWidth = 10;
inline constexpr int kObjectWidth = 563;
inline constexpr int kRelativeWidth = 48;      // 24 components x 2 orderings
inline constexpr int kContextWidth = 258;
inline constexpr int kAttendedWidth = 1432;
inline constexpr int kPoseClusterCount = 7;
inline constexpr int kPoseVectorDim = 45;

struct GmmBank {
  std::array<DiagGmm, kNumDepths> absolute;  // 9 components per depth
  DiagGmm relative;                          // 24 components over P-S offsets
};

struct PoseClusterBank {
  std::vector<std::vector<double>> centroids;  // 7 x 45
};

struct FeatureBlock {
  std::string name;
  int width = 0;
  int offset = 0;
};

struct FeatureLayout {
  std::vector<FeatureBlock> blocks;
  int total = 0;
  static FeatureLayout attended(const Vocabulary& vocab);
  static FeatureLayout holistic(const Vocabulary& vocab);
};

// Absolute-location mixtures per depth from all objects; the relative mixture
// from given P-S offsets, or from all ordered object pairs when none given.
GmmBank fit_gmms(const Corpus& corpus, uint64_t seed,
                 const std::vector<Point2>& aligned_offsets = {});

PoseClusterBank fit_pose_clusters(const Corpus& corpus, uint64_t seed);

std::vector<double> pose_vector(const ClipartObject& human);

std::vector<double> object_features(const Scene& scene, int obj, const GmmBank& bank,
                                    const Vocabulary& vocab);
std::vector<double> relative_features(const Scene& scene, int p, std::optional<int> s,
                                      const GmmBank& bank);
std::vector<double> scene_context_features(const Scene& scene, int p, std::optional<int> s,
                                           const Vocabulary& vocab);
std::vector<double> attended_features(const Scene& scene, const Alignment& alignment,
                                      const GmmBank& bank, const Vocabulary& vocab);
std::vector<double> holistic_features(const Scene& scene, const PoseClusterBank& clusters,
                                      const Vocabulary& vocab);

void write_gmm_bank(const GmmBank& bank, const std::string& path,
                    const std::string& provenance_header = "");
GmmBank load_gmm_bank(const std::string& path);
void write_pose_clusters(const PoseClusterBank& bank, const std::string& path,
                         const std::string& provenance_header = "");
PoseClusterBank load_pose_clusters(const std::string& path);

// Row-per-question feature matrix: text header then little-endian float32.
struct FeatureFile {
  std::string mode;
  std::vector<FeatureBlock> blocks;
  std::vector<std::string> question_ids;
  int cols = 0;
  std::vector<float> data;  // row-major

  std::vector<double> row(size_t i) const;
};

void write_feature_file(const FeatureFile& f, const std::string& path,
                        const std::string& provenance_header = "");
FeatureFile load_feature_file(const std::string& path);

}  // namespace vqa
