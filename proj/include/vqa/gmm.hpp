#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace vqa {

using Point2 = std::array<double, 2>;

struct GmmComponent {
  Point2 mean{0.0, 0.0};
  Point2 var{1.0, 1.0};  // diagonal covariance
  double weight = 1.0;
};

struct DiagGmm {
  std::vector<GmmComponent> components;
  int size() const { return static_cast<int>(components.size()); }
};

struct GmmFitOptions {
  double cov_floor = 1e-4;
  double rel_tol = 1e-6;
  int max_iter = 200;
};

// EM with k-means++ initialization. Deterministic for a fixed seed; throws if
// the log-likelihood ever decreases or there are fewer samples than components.
DiagGmm fit_diag_gmm(const std::vector<Point2>& points, int k, uint64_t seed,
                     const GmmFitOptions& opts = {});

double gmm_log_density(const DiagGmm& gmm, const Point2& p);

// Posterior component memberships; non-negative, sums to 1.
std::vector<double> gmm_responsibilities(const DiagGmm& gmm, const Point2& p);

struct KmeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<int> assignment;
};

// Lloyd iterations over k-means++ seeding; empty clusters are re-seeded from
// the point currently farthest from its centroid.
KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k, uint64_t seed,
                    int max_iter = 100);

int nearest_centroid(const std::vector<std::vector<double>>& centroids,
                     const std::vector<double>& point);

}  // namespace vqa
