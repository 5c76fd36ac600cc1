#pragma once
// Lloyd's k-means with k-means++ seeding and restarts, plus the
// cluster-size rule mapping the two clusters onto classes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "callqa/common.hpp"
#include "json.hpp"

namespace callqa {

struct KMeansOptions {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  int max_iter = 300;
  double tol = 1e-6;
  int n_init = 10;
};

struct KMeansModel {
  std::size_t k = 2;
  Matrix centroids;               // k x d
  std::vector<int> cluster_to_class;  // -1 until assign_classes_by_size
  double inertia = 0.0;
  std::uint64_t seed = 0;
  // Inertia of every assignment step of the winning restart, last entry final.
  std::vector<double> inertia_trace;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Nearest centroid, lowest id on ties.
inline std::size_t nearest(const Matrix& centroids, std::span<const double> x, double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    double d = squared_distance(centroids.row(c), x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

inline double assign(const Matrix& x, const Matrix& centroids, std::vector<std::size_t>& labels,
                     std::vector<double>& dists) {
  double inertia = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    labels[r] = nearest(centroids, x.row(r), &dists[r]);
    inertia += dists[r];
  }
  return inertia;
}

template <class Engine>
Matrix kmeans_plus_plus(const Matrix& x, std::size_t k, Engine& rng) {
  const std::size_t n = x.rows();
  Matrix centroids(k, x.cols());
  std::size_t first = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  first = std::min(first, n - 1);
  std::copy(x.row(first).begin(), x.row(first).end(), centroids.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t r = 0; r < n; ++r) d2[r] = squared_distance(x.row(r), centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t r = 0; r < n; ++r) {
        acc += d2[r];
        if (acc > target && d2[r] > 0.0) {
          pick = r;
          break;
        }
      }
    } else {
      pick = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), centroids.row(c).begin());
    for (std::size_t r = 0; r < n; ++r) d2[r] = std::min(d2[r], squared_distance(x.row(r), centroids.row(c)));
  }
  return centroids;
}

struct LloydResult {
  Matrix centroids;
  double inertia = 0.0;
  std::vector<double> trace;
};

inline LloydResult lloyd(const Matrix& x, Matrix centroids, int max_iter, double tol) {
  const std::size_t n = x.rows(), k = centroids.rows(), d = x.cols();
  std::vector<std::size_t> labels(n);
  std::vector<double> dists(n);
  LloydResult res;
  double inertia = assign(x, centroids, labels, dists);
  res.trace.push_back(inertia);
  for (int it = 0; it < max_iter; ++it) {
    Matrix next(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < n; ++r) {
      ++counts[labels[r]];
      auto dst = next.row(labels[r]);
      auto src = x.row(r);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (double& v : next.row(c)) v /= static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: reseed onto the point farthest from its centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t r = 0; r < n; ++r) {
        if (!taken[r] && dists[r] > far_d) {
          far_d = dists[r];
          far = r;
        }
      }
      taken[far] = true;
      std::copy(x.row(far).begin(), x.row(far).end(), next.row(c).begin());
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, squared_distance(next.row(c), centroids.row(c)));
    centroids = std::move(next);
    inertia = assign(x, centroids, labels, dists);
    res.trace.push_back(inertia);
    if (std::sqrt(shift) < tol) break;
  }
  res.centroids = std::move(centroids);
  res.inertia = inertia;
  return res;
}

}  // namespace detail

// Best of n_init k-means++ restarts by inertia (earliest restart on ties).
inline KMeansModel kmeans_fit(const Matrix& x, const KMeansOptions& opt = {}) {
  if (opt.k < 1) throw std::invalid_argument("k must be positive");
  if (x.rows() < opt.k) throw DataError("k-means needs at least k rows");
  if (!all_finite(x.data())) throw DataError("k-means input has non-finite entries");
  KMeansModel best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < std::max(1, opt.n_init); ++restart) {
    std::mt19937_64 rng(derive_seed(opt.seed, kStreamKMeans, static_cast<std::uint64_t>(restart)));
    auto res = detail::lloyd(x, detail::kmeans_plus_plus(x, opt.k, rng), opt.max_iter, opt.tol);
    if (res.inertia < best.inertia) {
      best.centroids = std::move(res.centroids);
      best.inertia = res.inertia;
      best.inertia_trace = std::move(res.trace);
    }
  }
  best.k = opt.k;
  best.seed = opt.seed;
  best.cluster_to_class.assign(opt.k, -1);
  return best;
}

inline std::vector<std::size_t> kmeans_predict(const KMeansModel& m, const Matrix& x) {
  std::vector<std::size_t> out(x.rows());
  if (x.rows() == 0) return out;
  if (x.cols() != m.centroids.cols())
    throw std::invalid_argument("k-means model expects " + std::to_string(m.centroids.cols()) + " columns");
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = detail::nearest(m.centroids, x.row(r));
  return out;
}

// Larger training cluster -> class 0 (non-malpractice), smaller -> class 1.
// Equal sizes map cluster 0 to class 0.
inline KMeansModel assign_classes_by_size(KMeansModel m, std::span<const std::size_t> train_assignments) {
  if (m.k != 2) throw std::invalid_argument("class assignment by size supports k = 2 only");
  if (train_assignments.empty()) throw DataError("no training assignments");
  std::size_t size0 = 0, size1 = 0;
  for (auto a : train_assignments) (a == 0 ? size0 : size1)++;
  bool zero_is_majority = size0 >= size1;
  m.cluster_to_class = {zero_is_majority ? 0 : 1, zero_is_majority ? 1 : 0};
  return m;
}

inline std::vector<int> kmeans_classify(const KMeansModel& m, const Matrix& x) {
  std::vector<int> out;
  for (auto c : kmeans_predict(m, x)) {
    int cls = m.cluster_to_class.at(c);
    if (cls < 0) throw std::logic_error("clusters have not been mapped to classes");
    out.push_back(cls);
  }
  return out;
}

inline nlohmann::json to_json(const KMeansModel& m) {
  std::vector<std::vector<double>> rows;
  for (std::size_t c = 0; c < m.centroids.rows(); ++c)
    rows.emplace_back(m.centroids.row(c).begin(), m.centroids.row(c).end());
  return {{"schema_version", kSchemaVersion}, {"k", m.k},           {"centroids", rows},
          {"cluster_to_class", m.cluster_to_class}, {"inertia", m.inertia}, {"seed", m.seed}};
}

inline KMeansModel kmeans_from_json(const nlohmann::json& j) {
  KMeansModel m;
  m.k = j.at("k").get<std::size_t>();
  m.centroids = Matrix::from_rows(j.at("centroids").get<std::vector<std::vector<double>>>());
  m.cluster_to_class = j.at("cluster_to_class").get<std::vector<int>>();
  m.inertia = j.at("inertia").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  if (m.centroids.rows() != m.k || m.cluster_to_class.size() != m.k)
    throw DataError("k-means model sizes do not match k");
  return m;
}

}  // namespace callqa
