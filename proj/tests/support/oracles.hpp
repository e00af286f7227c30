// Copyright 2026 The IWR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Independent reference computations for tests. Nothing here calls into the
// library's numerical paths: densities are summed directly in long double
// with a Gauss-Jordan inverse and an LU determinant.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace iwr::testing {

using LdMatrix = std::vector<std::vector<long double>>;

inline LdMatrix to_ld(const Eigen::MatrixXd& m) {
  LdMatrix out(static_cast<std::size_t>(m.rows()), std::vector<long double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

/// Gauss-Jordan inverse with partial pivoting; also returns the determinant.
inline LdMatrix gauss_jordan_inverse(LdMatrix a, long double* determinant = nullptr) {
  const std::size_t n = a.size();
  LdMatrix inv(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0L;
  long double det = 1.0L;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    if (pivot != col) {
      std::swap(a[pivot], a[col]);
      std::swap(inv[pivot], inv[col]);
      det = -det;
    }
    const long double p = a[col][col];
    det *= p;
    for (std::size_t c = 0; c < n; ++c) {
      a[col][c] /= p;
      inv[col][c] /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const long double f = a[r][col];
      for (std::size_t c = 0; c < n; ++c) {
        a[r][c] -= f * a[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }
  if (determinant) *determinant = det;
  return inv;
}

inline long double quadratic_form(const LdMatrix& m, const std::vector<long double>& v) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) acc += v[i] * m[i][j] * v[j];
  return acc;
}

/// log of (1/M) sum_j N(query; support_j, h^2 cov), summed as plain pdfs.
inline long double naive_kde_log_density(const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>& support,
                                         double h, const Eigen::MatrixXd& cov,
                                         std::span<const double> query) {
  LdMatrix kcov = to_ld(cov);
  const long double h2 = static_cast<long double>(h) * h;
  for (auto& row : kcov)
    for (auto& v : row) v *= h2;
  long double det = 0.0L;
  const LdMatrix inv = gauss_jordan_inverse(kcov, &det);
  const std::size_t d = query.size();
  const long double two_pi = 2.0L * 3.141592653589793238462643383279502884L;
  const long double norm = 1.0L / std::sqrt(std::pow(two_pi, static_cast<long double>(d)) * det);
  long double sum = 0.0L;
  std::vector<long double> diff(d);
  for (Eigen::Index j = 0; j < support.rows(); ++j) {
    for (std::size_t k = 0; k < d; ++k) diff[k] = static_cast<long double>(query[k]) - support(j, static_cast<Eigen::Index>(k));
    sum += norm * std::exp(-0.5L * quadratic_form(inv, diff));
  }
  return std::log(sum / static_cast<long double>(support.rows()));
}

inline double brute_min_sq_distance(std::span<const double> p,
                                    const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < set.rows(); ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double diff = p[k] - set(j, static_cast<Eigen::Index>(k));
      acc += diff * diff;
    }
    best = std::min(best, acc);
  }
  return best;
}

/// Radical inverse of `index` in `base` (Halton component).
inline double halton(std::size_t index, std::size_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

inline Eigen::Matrix<double, -1, -1, Eigen::RowMajor> random_matrix(std::mt19937_64& rng, std::size_t n,
                                                                    std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::Matrix<double, -1, -1, Eigen::RowMajor> m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

struct SeparatedFixture {
  Eigen::Matrix<double, -1, -1, Eigen::RowMajor> target;
  Eigen::Matrix<double, -1, -1, Eigen::RowMajor> prior;
};

/// 2-d targets on a jittered grid of spacing 10; each prior point sits at a
/// random target with squared distance 0.05 + 0.01 k for a distinct k, so the
/// nearest-neighbour squared distances are pairwise at least 1e-2 apart.
inline SeparatedFixture separated_fixture(std::mt19937_64& rng, std::size_t n_target, std::size_t n_prior) {
  SeparatedFixture f;
  f.target.resize(static_cast<Eigen::Index>(n_target), 2);
  f.prior.resize(static_cast<Eigen::Index>(n_prior), 2);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979323846);
  const std::size_t side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_target))));
  for (std::size_t j = 0; j < n_target; ++j) {
    f.target(static_cast<Eigen::Index>(j), 0) = 10.0 * static_cast<double>(j % side) + jitter(rng);
    f.target(static_cast<Eigen::Index>(j), 1) = 10.0 * static_cast<double>(j / side) + jitter(rng);
  }
  std::vector<std::size_t> ks(n_prior);
  std::iota(ks.begin(), ks.end(), std::size_t{0});
  std::shuffle(ks.begin(), ks.end(), rng);
  for (std::size_t i = 0; i < n_prior; ++i) {
    const auto j = static_cast<Eigen::Index>(rng() % n_target);
    const double r = std::sqrt(0.05 + 0.01 * static_cast<double>(ks[i]));
    const double a = angle(rng);
    f.prior(static_cast<Eigen::Index>(i), 0) = f.target(j, 0) + r * std::cos(a);
    f.prior(static_cast<Eigen::Index>(i), 1) = f.target(j, 1) + r * std::sin(a);
  }
  return f;
}

/// Indices ordered best-first (value descending, index ascending on ties).
inline std::vector<std::size_t> ranking(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("iwr_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace iwr::testing
