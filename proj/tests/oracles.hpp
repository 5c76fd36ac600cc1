#pragma once
// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library under test.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace oracle {

// Yeo-Johnson written out case by case, straight from the definition.
inline double yeo_johnson(double x, double lambda) {
  if (x >= 0.0) {
    if (lambda != 0.0) return (std::pow(x + 1.0, lambda) - 1.0) / lambda;
    return std::log(x + 1.0);
  }
  if (lambda != 2.0) return -(std::pow(1.0 - x, 2.0 - lambda) - 1.0) / (2.0 - lambda);
  return -std::log(1.0 - x);
}

inline double yj_profile_ll(const std::vector<double>& xs, double lambda) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  std::vector<double> t(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) mean += t[i] = yeo_johnson(xs[i], lambda);
  mean /= n;
  double var = 0.0;
  for (double v : t) var += (v - mean) * (v - mean);
  var /= n;
  double jac = 0.0;
  for (double x : xs) jac += std::copysign(1.0, x) * std::log(std::abs(x) + 1.0);
  return -0.5 * n * std::log(var) + (lambda - 1.0) * jac;
}

// Dense scan over [-5, 5] with step 1e-3; earliest maximum wins.
inline double yj_grid_argmax(const std::vector<double>& xs) {
  double best = -5.0, best_ll = -INFINITY;
  for (int i = 0; i <= 10000; ++i) {
    double lambda = -5.0 + i * 1e-3;
    double ll = yj_profile_ll(xs, lambda);
    if (ll > best_ll) {
      best_ll = ll;
      best = lambda;
    }
  }
  return best;
}

inline double skewness(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : xs) {
    m2 += (x - mean) * (x - mean);
    m3 += (x - mean) * (x - mean) * (x - mean);
  }
  m2 /= n;
  m3 /= n;
  return m3 / std::pow(m2, 1.5);
}

// Plain dense RBM description for the enumeration oracle.
struct Rbm {
  std::size_t nv = 0, nh = 0;
  std::vector<double> w;  // nv x nh row-major
  std::vector<double> b, c;
};

inline double neg_energy(const Rbm& m, std::uint64_t vb, std::uint64_t hb) {
  double e = 0.0;
  for (std::size_t i = 0; i < m.nv; ++i) {
    if (!((vb >> i) & 1u)) continue;
    e += m.b[i];
    for (std::size_t j = 0; j < m.nh; ++j)
      if ((hb >> j) & 1u) e += m.w[i * m.nh + j];
  }
  for (std::size_t j = 0; j < m.nh; ++j)
    if ((hb >> j) & 1u) e += m.c[j];
  return e;
}

// Binary data rows given as bit masks over the visible units.
inline double log_likelihood(const Rbm& m, const std::vector<std::uint64_t>& data) {
  const std::uint64_t NV = std::uint64_t{1} << m.nv, NH = std::uint64_t{1} << m.nh;
  double z = 0.0;
  std::vector<double> pv(NV, 0.0);
  for (std::uint64_t v = 0; v < NV; ++v)
    for (std::uint64_t h = 0; h < NH; ++h) {
      double p = std::exp(neg_energy(m, v, h));
      pv[v] += p;
      z += p;
    }
  double ll = 0.0;
  for (auto v : data) ll += std::log(pv[v] / z);
  return ll;
}

// d mean-LL / dW by enumeration: E_data[v p(h|v)] - E_model[v h].
inline std::vector<double> weight_gradient(const Rbm& m, const std::vector<std::uint64_t>& data) {
  const std::uint64_t NV = std::uint64_t{1} << m.nv, NH = std::uint64_t{1} << m.nh;
  std::vector<double> g(m.nv * m.nh, 0.0);
  for (auto v : data) {
    for (std::size_t j = 0; j < m.nh; ++j) {
      double a = m.c[j];
      for (std::size_t i = 0; i < m.nv; ++i)
        if ((v >> i) & 1u) a += m.w[i * m.nh + j];
      double ph = 1.0 / (1.0 + std::exp(-a));
      for (std::size_t i = 0; i < m.nv; ++i)
        if ((v >> i) & 1u) g[i * m.nh + j] += ph / static_cast<double>(data.size());
    }
  }
  double z = 0.0;
  std::vector<double> model(m.nv * m.nh, 0.0);
  for (std::uint64_t v = 0; v < NV; ++v)
    for (std::uint64_t h = 0; h < NH; ++h) {
      double p = std::exp(neg_energy(m, v, h));
      z += p;
      for (std::size_t i = 0; i < m.nv; ++i)
        for (std::size_t j = 0; j < m.nh; ++j)
          if (((v >> i) & 1u) && ((h >> j) & 1u)) model[i * m.nh + j] += p;
    }
  for (std::size_t k = 0; k < g.size(); ++k) g[k] -= model[k] / z;
  return g;
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts recount(const std::vector<int>& t, const std::vector<int>& p) {
  Counts c;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == 1 && p[i] == 1) ++c.tp;
    if (t[i] == 0 && p[i] == 1) ++c.fp;
    if (t[i] == 1 && p[i] == 0) ++c.fn;
    if (t[i] == 0 && p[i] == 0) ++c.tn;
  }
  return c;
}

}  // namespace oracle
