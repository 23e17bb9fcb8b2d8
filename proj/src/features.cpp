#include "vqa/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vqa/util.hpp"

namespace vqa {

namespace {

constexpr int kAbsComponents = 9;
constexpr int kRelComponents = 24;

void check_vocab_fits(const Vocabulary& vocab) {
  if (vocab.size() > kInstanceWidth)
    throw std::runtime_error("vocabulary has " + std::to_string(vocab.size()) +
                             " instances, more than the instance block width " +
                             std::to_string(kInstanceWidth));
  if (vocab.expression_count > kExpressionWidth)
    throw std::runtime_error("expression count exceeds the expression block width");
}

}  // namespace

FeatureLayout FeatureLayout::attended(const Vocabulary& vocab) {
  check_vocab_fits(vocab);
  FeatureLayout layout;
  auto add = [&](const std::string& name, int width) {
    layout.blocks.push_back({name, width, layout.total});
    layout.total += width;
  };
  for (const char* side : {"p", "s"}) {
    std::string prefix(side);
    add(prefix + "_category", kCategoryWidth);
    add(prefix + "_instance", kInstanceWidth);
    add(prefix + "_flip", 1);
    add(prefix + "_abs_location", kAbsLocationWidth);
    add(prefix + "_human", kHumanWidth);
    add(prefix + "_animal", kAnimalWidth);
  }
  add("relative", kRelativeWidth);
  add("context_category", kCategoryWidth);
  add("context_instance", kInstanceWidth);
  return layout;
}

FeatureLayout FeatureLayout::holistic(const Vocabulary& vocab) {
  FeatureLayout layout;
  auto add = [&](const std::string& name, int width) {
    layout.blocks.push_back({name, width, layout.total});
    layout.total += width;
  };
  for (const char* region : {"full", "q0", "q1", "q2", "q3"}) {
    std::string prefix(region);
    add(prefix + "_instance", vocab.size());
    add(prefix + "_expression", vocab.expression_count);
    add(prefix + "_pose_cluster", kPoseClusterCount);
  }
  return layout;
}

GmmBank fit_gmms(const Corpus& corpus, uint64_t seed, const std::vector<Point2>& aligned_offsets) {
  std::array<std::vector<Point2>, kNumDepths> by_depth;
  for (const auto& [id, scene] : corpus.scenes)
    for (const auto& o : scene.objects)
      by_depth[static_cast<size_t>(o.depth)].push_back({o.x, o.y});

  GmmBank bank;
  for (int d = 0; d < kNumDepths; ++d) {
    const auto& samples = by_depth[static_cast<size_t>(d)];
    if (static_cast<int>(samples.size()) < kAbsComponents)
      throw std::runtime_error("fit_gmms: depth " + std::to_string(d) + " has only " +
                               std::to_string(samples.size()) + " objects, need at least " +
                               std::to_string(kAbsComponents));
    bank.absolute[static_cast<size_t>(d)] =
        fit_diag_gmm(samples, kAbsComponents, derive_seed(seed, "abs-gmm-" + std::to_string(d)));
  }

  std::vector<Point2> offsets = aligned_offsets;
  if (offsets.empty()) {
    for (const auto& [id, scene] : corpus.scenes)
      for (size_t a = 0; a < scene.objects.size(); ++a)
        for (size_t b = 0; b < scene.objects.size(); ++b) {
          if (a == b) continue;
          offsets.push_back(
              {scene.objects[b].x - scene.objects[a].x, scene.objects[b].y - scene.objects[a].y});
        }
  }
  if (static_cast<int>(offsets.size()) < kRelComponents)
    throw std::runtime_error("fit_gmms: only " + std::to_string(offsets.size()) +
                             " offset samples, need at least " + std::to_string(kRelComponents));
  bank.relative = fit_diag_gmm(offsets, kRelComponents, derive_seed(seed, "rel-gmm"));
  return bank;
}

std::vector<double> pose_vector(const ClipartObject& human) {
  if (!human.pose) throw std::runtime_error("pose_vector: object has no pose");
  std::vector<double> v;
  v.reserve(kPoseVectorDim);
  for (const auto& part : *human.pose) {
    v.push_back(part.x);
    v.push_back(part.y);
    v.push_back(part.angle);
  }
  return v;
}

PoseClusterBank fit_pose_clusters(const Corpus& corpus, uint64_t seed) {
  std::vector<std::vector<double>> poses;
  for (const auto& [id, scene] : corpus.scenes)
    for (const auto& o : scene.objects)
      if (o.category == Category::human) poses.push_back(pose_vector(o));
  if (static_cast<int>(poses.size()) < kPoseClusterCount)
    throw std::runtime_error("fit_pose_clusters: only " + std::to_string(poses.size()) +
                             " human poses, need at least " +
                             std::to_string(kPoseClusterCount));
  auto res = kmeans(poses, kPoseClusterCount, derive_seed(seed, "pose-clusters"), 100);
  PoseClusterBank bank;
  bank.centroids = std::move(res.centroids);
  return bank;
}

std::vector<double> object_features(const Scene& scene, int obj, const GmmBank& bank,
                                    const Vocabulary& vocab) {
  check_vocab_fits(vocab);
  if (obj < 0 || obj >= static_cast<int>(scene.objects.size()))
    throw std::runtime_error("object_features: object index out of range");
  const auto& o = scene.objects[static_cast<size_t>(obj)];
  if (o.instance_id < 0 || o.instance_id >= vocab.size())
    throw std::runtime_error("object_features: instance_id outside vocabulary");

  std::vector<double> f(kObjectWidth, 0.0);
  size_t at = 0;
  f[at + static_cast<size_t>(o.category)] = 1.0;
  at += kCategoryWidth;
  f[at + static_cast<size_t>(o.instance_id)] = 1.0;
  at += kInstanceWidth;
  f[at] = o.flip ? 1.0 : 0.0;
  at += 1;

  // absolute location: per depth, 9 responsibilities + a presence bit
  for (int d = 0; d < kNumDepths; ++d) {
    if (d == o.depth) {
      auto resp = gmm_responsibilities(bank.absolute[static_cast<size_t>(d)], {o.x, o.y});
      for (int c = 0; c < kAbsComponents; ++c) f[at + static_cast<size_t>(c)] = resp[static_cast<size_t>(c)];
      f[at + kAbsComponents] = 1.0;
    }
    at += kAbsComponents + 1;
  }

  if (o.category == Category::human) {
    f[at + static_cast<size_t>(*o.age_id)] = 1.0;
    f[at + kNumAges + static_cast<size_t>(*o.gender_id)] = 1.0;
    f[at + kNumAges + kNumGenders + static_cast<size_t>(*o.skin_id)] = 1.0;
    size_t pose_at = at + kNumAges + kNumGenders + kNumSkins;
    auto pv = pose_vector(o);
    for (int i = 0; i < kPoseVectorDim; ++i) f[pose_at + static_cast<size_t>(i)] = pv[static_cast<size_t>(i)];
    size_t trig_at = pose_at + kPoseVectorDim;
    for (int part = 0; part < kNumBodyParts; ++part) {
      const auto& bp = (*o.pose)[static_cast<size_t>(part)];
      f[trig_at + static_cast<size_t>(4 * part) + 0] = bp.x;
      f[trig_at + static_cast<size_t>(4 * part) + 1] = bp.y;
      f[trig_at + static_cast<size_t>(4 * part) + 2] = std::cos(bp.angle);
      f[trig_at + static_cast<size_t>(4 * part) + 3] = std::sin(bp.angle);
    }
    size_t expr_at = at + kNumAges + kNumGenders + kNumSkins + kPoseWidth;
    f[expr_at + static_cast<size_t>(*o.expression_id)] = 1.0;
  }
  at += kHumanWidth;

  if (o.category == Category::animal) f[at + static_cast<size_t>(*o.animal_pose_id)] = 1.0;
  at += kAnimalWidth;

  if (at != kObjectWidth) throw std::logic_error("object feature layout mismatch");
  return f;
}

std::vector<double> relative_features(const Scene& scene, int p, std::optional<int> s,
                                      const GmmBank& bank) {
  std::vector<double> f(kRelativeWidth, 0.0);
  if (!s) return f;
  const auto& po = scene.objects[static_cast<size_t>(p)];
  const auto& so = scene.objects[static_cast<size_t>(*s)];
  auto fwd = gmm_responsibilities(bank.relative, {so.x - po.x, so.y - po.y});
  auto bwd = gmm_responsibilities(bank.relative, {po.x - so.x, po.y - so.y});
  for (int c = 0; c < kRelComponents; ++c) {
    f[static_cast<size_t>(c)] = fwd[static_cast<size_t>(c)];
    f[static_cast<size_t>(kRelComponents + c)] = bwd[static_cast<size_t>(c)];
  }
  return f;
}

std::vector<double> scene_context_features(const Scene& scene, int p, std::optional<int> s,
                                           const Vocabulary& vocab) {
  check_vocab_fits(vocab);
  std::vector<double> f(kContextWidth, 0.0);
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    if (static_cast<int>(i) == p) continue;
    if (s && static_cast<int>(i) == *s) continue;
    const auto& o = scene.objects[i];
    f[static_cast<size_t>(o.category)] = 1.0;
    f[kCategoryWidth + static_cast<size_t>(o.instance_id)] = 1.0;
  }
  return f;
}

std::vector<double> attended_features(const Scene& scene, const Alignment& alignment,
                                      const GmmBank& bank, const Vocabulary& vocab) {
  if (!alignment.p_object) throw std::runtime_error("attended_features: alignment lacks P object");
  std::vector<double> f;
  f.reserve(kAttendedWidth);
  auto pf = object_features(scene, *alignment.p_object, bank, vocab);
  f.insert(f.end(), pf.begin(), pf.end());
  if (alignment.s_object) {
    auto sf = object_features(scene, *alignment.s_object, bank, vocab);
    f.insert(f.end(), sf.begin(), sf.end());
  } else {
    f.insert(f.end(), kObjectWidth, 0.0);
  }
  auto rf = relative_features(scene, *alignment.p_object, alignment.s_object, bank);
  f.insert(f.end(), rf.begin(), rf.end());
  auto cf = scene_context_features(scene, *alignment.p_object, alignment.s_object, vocab);
  f.insert(f.end(), cf.begin(), cf.end());
  if (static_cast<int>(f.size()) != kAttendedWidth)
    throw std::logic_error("attended feature layout mismatch");
  return f;
}

std::vector<double> holistic_features(const Scene& scene, const PoseClusterBank& clusters,
                                      const Vocabulary& vocab) {
  int v = vocab.size();
  int e = vocab.expression_count;
  int region_width = v + e + kPoseClusterCount;
  std::vector<double> f(static_cast<size_t>(5 * region_width), 0.0);

  auto bump = [&](int region, const ClipartObject& o) {
    size_t base = static_cast<size_t>(region * region_width);
    f[base + static_cast<size_t>(o.instance_id)] += 1.0;
    if (o.category == Category::human) {
      f[base + static_cast<size_t>(v) + static_cast<size_t>(*o.expression_id)] += 1.0;
      int cluster = nearest_centroid(clusters.centroids, pose_vector(o));
      f[base + static_cast<size_t>(v + e) + static_cast<size_t>(cluster)] += 1.0;
    }
  };
  for (const auto& o : scene.objects) {
    bump(0, o);
    // boundary points go to the lower-index quadrant
    int q = (o.x > 0.5 ? 1 : 0) + (o.y > 0.5 ? 2 : 0);
    bump(1 + q, o);
  }
  return f;
}

void write_gmm_bank(const GmmBank& bank, const std::string& path,
                    const std::string& provenance_header) {
  std::ostringstream out;
  out << provenance_header;
  for (int d = 0; d < kNumDepths; ++d) {
    const auto& gmm = bank.absolute[static_cast<size_t>(d)];
    for (int c = 0; c < gmm.size(); ++c) {
      const auto& comp = gmm.components[static_cast<size_t>(c)];
      out << "absolute " << d << ' ' << c << ' ' << fmt_double(comp.weight) << ' '
          << fmt_double(comp.mean[0]) << ' ' << fmt_double(comp.mean[1]) << ' '
          << fmt_double(comp.var[0]) << ' ' << fmt_double(comp.var[1]) << '\n';
    }
  }
  for (int c = 0; c < bank.relative.size(); ++c) {
    const auto& comp = bank.relative.components[static_cast<size_t>(c)];
    out << "relative " << c << ' ' << fmt_double(comp.weight) << ' ' << fmt_double(comp.mean[0])
        << ' ' << fmt_double(comp.mean[1]) << ' ' << fmt_double(comp.var[0]) << ' '
        << fmt_double(comp.var[1]) << '\n';
  }
  write_text_file(path, out.str());
}

GmmBank load_gmm_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gmm bank: " + path);
  GmmBank bank;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream iss(line);
    std::string kind;
    iss >> kind;
    GmmComponent comp;
    if (kind == "absolute") {
      int d, c;
      iss >> d >> c >> comp.weight >> comp.mean[0] >> comp.mean[1] >> comp.var[0] >> comp.var[1];
      auto& gmm = bank.absolute[static_cast<size_t>(d)];
      if (static_cast<int>(gmm.components.size()) != c)
        throw std::runtime_error(path + ": component index out of order");
      gmm.components.push_back(comp);
    } else if (kind == "relative") {
      int c;
      iss >> c >> comp.weight >> comp.mean[0] >> comp.mean[1] >> comp.var[0] >> comp.var[1];
      if (static_cast<int>(bank.relative.components.size()) != c)
        throw std::runtime_error(path + ": component index out of order");
      bank.relative.components.push_back(comp);
    } else {
      throw std::runtime_error(path + ": unknown record kind " + kind);
    }
    if (!iss) throw std::runtime_error(path + ": malformed component line");
  }
  return bank;
}

void write_pose_clusters(const PoseClusterBank& bank, const std::string& path,
                         const std::string& provenance_header) {
  std::ostringstream out;
  out << provenance_header;
  for (size_t c = 0; c < bank.centroids.size(); ++c) {
    out << "centroid " << c;
    for (double v : bank.centroids[c]) out << ' ' << fmt_double(v);
    out << '\n';
  }
  write_text_file(path, out.str());
}

PoseClusterBank load_pose_clusters(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pose clusters: " + path);
  PoseClusterBank bank;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream iss(line);
    std::string kind;
    size_t idx;
    iss >> kind >> idx;
    if (kind != "centroid" || idx != bank.centroids.size())
      throw std::runtime_error(path + ": malformed centroid line");
    std::vector<double> v;
    double x;
    while (iss >> x) v.push_back(x);
    bank.centroids.push_back(std::move(v));
  }
  return bank;
}

std::vector<double> FeatureFile::row(size_t i) const {
  std::vector<double> out(static_cast<size_t>(cols));
  for (int c = 0; c < cols; ++c)
    out[static_cast<size_t>(c)] = data[i * static_cast<size_t>(cols) + static_cast<size_t>(c)];
  return out;
}

void write_feature_file(const FeatureFile& f, const std::string& path,
                        const std::string& provenance_header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write feature file: " + path);
  out << "absvqa-features v1\n" << provenance_header;
  out << "mode " << f.mode << '\n';
  out << "rows " << f.question_ids.size() << '\n';
  out << "cols " << f.cols << '\n';
  for (const auto& b : f.blocks) out << "block " << b.name << ' ' << b.width << '\n';
  for (const auto& q : f.question_ids) out << "row " << q << '\n';
  out << "end_header\n";
  out.write(reinterpret_cast<const char*>(f.data.data()),
            static_cast<std::streamsize>(f.data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

FeatureFile load_feature_file(const std::string& path) {
  std::string all = read_text_file(path);
  const std::string sentinel = "end_header\n";
  auto pos = all.find(sentinel);
  if (pos == std::string::npos) throw std::runtime_error(path + ": missing feature header");
  std::istringstream header(all.substr(0, pos));
  FeatureFile f;
  std::string line;
  size_t rows = 0;
  int offset = 0;
  while (std::getline(header, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream iss(line);
    std::string key;
    iss >> key;
    if (key == "mode") {
      iss >> f.mode;
    } else if (key == "rows") {
      iss >> rows;
    } else if (key == "cols") {
      iss >> f.cols;
    } else if (key == "block") {
      FeatureBlock b;
      iss >> b.name >> b.width;
      b.offset = offset;
      offset += b.width;
      f.blocks.push_back(b);
    } else if (key == "row") {
      std::string qid;
      iss >> qid;
      f.question_ids.push_back(qid);
    }
  }
  if (f.question_ids.size() != rows)
    throw std::runtime_error(path + ": row count does not match header");
  size_t need = rows * static_cast<size_t>(f.cols) * sizeof(float);
  size_t have = all.size() - pos - sentinel.size();
  if (have != need)
    throw std::runtime_error(path + ": payload is " + std::to_string(have) + " bytes, expected " +
                             std::to_string(need));
  f.data.resize(rows * static_cast<size_t>(f.cols));
  std::memcpy(f.data.data(), all.data() + pos + sentinel.size(), need);
  return f;
}

}  // namespace vqa
