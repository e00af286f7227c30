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
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "iwr/dataset.hpp"

namespace iwr {

/// Scott's-rule bandwidth with a multiplicative constant: h = c * M^(-1/(d+4)).
struct BandwidthSpec {
  double scale_c = 4.0;
};

double scott_bandwidth(const BandwidthSpec& spec, std::size_t count, std::size_t dim);

/// Unbiased (N-1) sample covariance. A single row yields the identity.
Eigen::MatrixXd sample_covariance(const RowMatrix& data);
Eigen::MatrixXd sample_covariance(const EmbeddingDataset& dataset);

/// Ridge schedule applied by fit_kde: Sigma + eps * (trace(Sigma)/d) * I,
/// starting at kRidgeStart and doubling until the Cholesky factorization of
/// h^2 Sigma succeeds or eps exceeds kRidgeLimit.
inline constexpr double kRidgeStart = 1e-9;
inline constexpr double kRidgeLimit = 1e-3;

/// Multivariate Gaussian KDE with a shared kernel covariance h^2 Sigma:
///
///   p(z) = 1/M sum_j N(z; z_j, h^2 Sigma)
///
/// Densities are evaluated in log space. The kernel sum for a query runs in
/// ascending support order, so results are bit-reproducible for a given
/// input regardless of how many threads evaluate the queries.
class GaussianKde {
 public:
  /// Builds a KDE from explicit parameters. No regularization is applied;
  /// throws kCholeskyFailure when h^2 * covariance is not positive definite.
  static GaussianKde from_parameters(RowMatrix support, double bandwidth,
                                     Eigen::MatrixXd covariance);

  std::size_t count() const { return static_cast<std::size_t>(support_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(support_.cols()); }
  const RowMatrix& support() const { return support_; }
  double bandwidth() const { return bandwidth_; }
  /// Sigma after regularization.
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  /// Lower Cholesky factor of h^2 Sigma.
  const Eigen::MatrixXd& chol_lower() const { return chol_lower_; }
  /// -sum_i log L_ii - (d/2) log(2 pi).
  double log_norm() const { return log_norm_; }
  /// Ridge multiplier that was applied (0 for from_parameters).
  double ridge() const { return ridge_; }

  double log_density(std::span<const double> query) const;
  std::vector<double> log_density(const RowMatrix& queries, unsigned threads = 0) const;

  /// Log density with the kernel at support index `excluded` left out, i.e. a
  /// (M-1)-kernel estimate. Requires M >= 2.
  double log_density_excluding(std::span<const double> query, std::size_t excluded) const;

  /// (z - z_c)^T (h^2 Sigma)^-1 (z - z_c) via a triangular solve on the
  /// difference vector.
  double mahalanobis_sq(std::span<const double> query, std::size_t center_index) const;

 private:
  friend GaussianKde fit_kde(const RowMatrix& support, const BandwidthSpec& spec);

  GaussianKde() = default;
  void finish_construction();
  void whiten(std::span<const double> query, double* out) const;
  // Fills exponents[j] = -0.5 * ||L^-1 (z - z_j)||^2 for all j.
  void kernel_exponents(const double* whitened_query, double* exponents) const;

  RowMatrix support_;
  double bandwidth_ = 1.0;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd chol_lower_;
  double log_norm_ = 0.0;
  double ridge_ = 0.0;

  // Support re-expressed as L^-1 (z_j - center_), row-major M x d.
  Eigen::VectorXd center_;
  std::vector<double> whitened_;
};

/// Fits a KDE with Scott's-rule bandwidth (M = rows) and the regularized
/// sample covariance of the data.
GaussianKde fit_kde(const RowMatrix& support, const BandwidthSpec& spec);
GaussianKde fit_kde(const EmbeddingDataset& dataset, const BandwidthSpec& spec);

}  // namespace iwr
