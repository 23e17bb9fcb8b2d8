#include "vqa/gmm.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <random>
#include <stdexcept>

#include "vqa/util.hpp"

namespace vqa {

namespace {

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

std::vector<size_t> kmeanspp_seed_indices(const std::vector<std::vector<double>>& points, int k,
                                          std::mt19937_64& rng) {
  size_t n = points.size();
  std::vector<size_t> chosen;
  chosen.push_back(std::uniform_int_distribution<size_t>(0, n - 1)(rng));
  std::vector<double> mind(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(chosen.size()) < k) {
    for (size_t i = 0; i < n; ++i)
      mind[i] = std::min(mind[i], sqdist(points[i], points[chosen.back()]));
    double total = 0.0;
    for (double d : mind) total += d;
    size_t pick;
    if (total <= 0.0) {
      // all remaining points coincide with a chosen center
      pick = std::uniform_int_distribution<size_t>(0, n - 1)(rng);
    } else {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = n - 1;
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) {
        acc += mind[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    }
    chosen.push_back(pick);
  }
  return chosen;
}

constexpr double kLog2Pi = 1.8378770664093453;

double log_normal_diag(const Point2& x, const Point2& mean, const Point2& var) {
  double out = 0.0;
  for (int d = 0; d < 2; ++d) {
    double diff = x[static_cast<size_t>(d)] - mean[static_cast<size_t>(d)];
    double v = var[static_cast<size_t>(d)];
    out += -0.5 * (kLog2Pi + std::log(v) + diff * diff / v);
  }
  return out;
}

}  // namespace

DiagGmm fit_diag_gmm(const std::vector<Point2>& points, int k, uint64_t seed,
                     const GmmFitOptions& opts) {
  size_t n = points.size();
  if (static_cast<int>(n) < k)
    throw std::runtime_error("fit_diag_gmm: " + std::to_string(n) + " samples for " +
                             std::to_string(k) + " components");
  auto rng = make_rng(derive_seed(seed, "gmm-init"));

  std::vector<std::vector<double>> pts(n);
  for (size_t i = 0; i < n; ++i) pts[i] = {points[i][0], points[i][1]};
  auto seeds = kmeanspp_seed_indices(pts, k, rng);

  // global per-dimension variance as the starting spread
  Point2 gmean{0.0, 0.0}, gvar{0.0, 0.0};
  for (const auto& p : points) {
    gmean[0] += p[0];
    gmean[1] += p[1];
  }
  gmean[0] /= static_cast<double>(n);
  gmean[1] /= static_cast<double>(n);
  for (const auto& p : points) {
    gvar[0] += (p[0] - gmean[0]) * (p[0] - gmean[0]);
    gvar[1] += (p[1] - gmean[1]) * (p[1] - gmean[1]);
  }
  gvar[0] = std::max(gvar[0] / static_cast<double>(n), opts.cov_floor);
  gvar[1] = std::max(gvar[1] / static_cast<double>(n), opts.cov_floor);
  if (gvar[0] <= opts.cov_floor && gvar[1] <= opts.cov_floor)
    std::cerr << "[gmm] warning: near-degenerate samples, covariances clamped to floor\n";

  DiagGmm gmm;
  gmm.components.resize(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) {
    gmm.components[static_cast<size_t>(c)].mean = points[seeds[static_cast<size_t>(c)]];
    gmm.components[static_cast<size_t>(c)].var = gvar;
    gmm.components[static_cast<size_t>(c)].weight = 1.0 / static_cast<double>(k);
  }

  std::vector<double> resp(n * static_cast<size_t>(k));
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // E-step
    double ll = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double maxlog = -std::numeric_limits<double>::infinity();
      std::vector<double> logp(static_cast<size_t>(k));
      for (int c = 0; c < k; ++c) {
        const auto& comp = gmm.components[static_cast<size_t>(c)];
        logp[static_cast<size_t>(c)] =
            std::log(std::max(comp.weight, 1e-300)) + log_normal_diag(points[i], comp.mean, comp.var);
        maxlog = std::max(maxlog, logp[static_cast<size_t>(c)]);
      }
      double sum = 0.0;
      for (int c = 0; c < k; ++c) sum += std::exp(logp[static_cast<size_t>(c)] - maxlog);
      double log_point = maxlog + std::log(sum);
      ll += log_point;
      for (int c = 0; c < k; ++c)
        resp[i * static_cast<size_t>(k) + static_cast<size_t>(c)] =
            std::exp(logp[static_cast<size_t>(c)] - log_point);
    }
    if (iter > 0) {
      if (ll < prev_ll - 1e-8 * std::abs(prev_ll) - 1e-12)
        throw std::runtime_error("fit_diag_gmm: log-likelihood decreased at iteration " +
                                 std::to_string(iter));
      double rel = std::abs(ll - prev_ll) / (std::abs(ll) + 1e-12);
      if (rel < opts.rel_tol) break;
    }
    prev_ll = ll;

    // M-step
    for (int c = 0; c < k; ++c) {
      auto& comp = gmm.components[static_cast<size_t>(c)];
      double nk = 0.0;
      Point2 mean{0.0, 0.0};
      for (size_t i = 0; i < n; ++i) {
        double r = resp[i * static_cast<size_t>(k) + static_cast<size_t>(c)];
        nk += r;
        mean[0] += r * points[i][0];
        mean[1] += r * points[i][1];
      }
      if (nk < 1e-12) {
        comp.weight = 1e-12;  // starved component keeps its parameters
        continue;
      }
      mean[0] /= nk;
      mean[1] /= nk;
      Point2 var{0.0, 0.0};
      for (size_t i = 0; i < n; ++i) {
        double r = resp[i * static_cast<size_t>(k) + static_cast<size_t>(c)];
        var[0] += r * (points[i][0] - mean[0]) * (points[i][0] - mean[0]);
        var[1] += r * (points[i][1] - mean[1]) * (points[i][1] - mean[1]);
      }
      comp.mean = mean;
      comp.var[0] = std::max(var[0] / nk, opts.cov_floor);
      comp.var[1] = std::max(var[1] / nk, opts.cov_floor);
      comp.weight = nk / static_cast<double>(n);
    }
    double wsum = 0.0;
    for (const auto& comp : gmm.components) wsum += comp.weight;
    for (auto& comp : gmm.components) comp.weight /= wsum;
  }
  return gmm;
}

double gmm_log_density(const DiagGmm& gmm, const Point2& p) {
  double maxlog = -std::numeric_limits<double>::infinity();
  std::vector<double> logp(gmm.components.size());
  for (size_t c = 0; c < gmm.components.size(); ++c) {
    const auto& comp = gmm.components[c];
    logp[c] = std::log(std::max(comp.weight, 1e-300)) + log_normal_diag(p, comp.mean, comp.var);
    maxlog = std::max(maxlog, logp[c]);
  }
  double sum = 0.0;
  for (double l : logp) sum += std::exp(l - maxlog);
  return maxlog + std::log(sum);
}

std::vector<double> gmm_responsibilities(const DiagGmm& gmm, const Point2& p) {
  std::vector<double> out(gmm.components.size());
  double maxlog = -std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < gmm.components.size(); ++c) {
    const auto& comp = gmm.components[c];
    out[c] = std::log(std::max(comp.weight, 1e-300)) + log_normal_diag(p, comp.mean, comp.var);
    maxlog = std::max(maxlog, out[c]);
  }
  double sum = 0.0;
  for (auto& v : out) {
    v = std::exp(v - maxlog);
    sum += v;
  }
  for (auto& v : out) v /= sum;
  return out;
}

KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k, uint64_t seed,
                    int max_iter) {
  size_t n = points.size();
  if (static_cast<int>(n) < k)
    throw std::runtime_error("kmeans: " + std::to_string(n) + " points for " + std::to_string(k) +
                             " clusters");
  auto rng = make_rng(derive_seed(seed, "kmeans-init"));
  auto seeds = kmeanspp_seed_indices(points, k, rng);

  KmeansResult res;
  res.centroids.resize(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) res.centroids[static_cast<size_t>(c)] = points[seeds[static_cast<size_t>(c)]];
  res.assignment.assign(n, -1);

  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      int best = nearest_centroid(res.centroids, points[i]);
      if (best != res.assignment[i]) {
        res.assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::vector<std::vector<double>> sums(static_cast<size_t>(k),
                                          std::vector<double>(points[0].size(), 0.0));
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (size_t i = 0; i < n; ++i) {
      auto c = static_cast<size_t>(res.assignment[i]);
      ++counts[c];
      for (size_t d = 0; d < points[i].size(); ++d) sums[c][d] += points[i][d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) {
        // re-seed from the point farthest from its centroid
        double worst = -1.0;
        size_t worst_i = 0;
        for (size_t i = 0; i < n; ++i) {
          double d = sqdist(points[i], res.centroids[static_cast<size_t>(res.assignment[i])]);
          if (d > worst) {
            worst = d;
            worst_i = i;
          }
        }
        res.centroids[static_cast<size_t>(c)] = points[worst_i];
        continue;
      }
      for (size_t d = 0; d < sums[static_cast<size_t>(c)].size(); ++d)
        res.centroids[static_cast<size_t>(c)][d] =
            sums[static_cast<size_t>(c)][d] / counts[static_cast<size_t>(c)];
    }
  }
  return res;
}

int nearest_centroid(const std::vector<std::vector<double>>& centroids,
                     const std::vector<double>& point) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < centroids.size(); ++c) {
    double d = sqdist(centroids[c], point);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace vqa
