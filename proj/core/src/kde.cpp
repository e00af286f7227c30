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
#include "iwr/kde.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

#include "iwr/error.hpp"
#include "iwr/numeric.hpp"
#include "iwr/parallel.hpp"

namespace iwr {

namespace {

constexpr std::size_t kQueryChunk = 64;

void check_query_dim(std::size_t got, std::size_t want) {
  if (got != want) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query has dimension " + std::to_string(got) + ", kde has " + std::to_string(want));
  }
}

bool try_cholesky(const Eigen::MatrixXd& m, Eigen::MatrixXd& lower) {
  if (!m.allFinite()) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
  }
  return true;
}

}  // namespace

double scott_bandwidth(const BandwidthSpec& spec, std::size_t count, std::size_t dim) {
  if (!(spec.scale_c > 0.0) || !std::isfinite(spec.scale_c)) {
    throw Error(ErrorCode::kInvalidArgument, "bandwidth scale must be positive");
  }
  if (count < 1 || dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "bandwidth needs count >= 1 and dim >= 1");
  }
  return spec.scale_c *
         std::pow(static_cast<double>(count), -1.0 / (static_cast<double>(dim) + 4.0));
}

Eigen::MatrixXd sample_covariance(const RowMatrix& data) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 1) throw Error(ErrorCode::kEmptyDataset, "covariance of an empty matrix");
  if (n == 1) return Eigen::MatrixXd::Identity(d, d);

  const Eigen::RowVectorXd mean = data.colwise().sum() / static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd dev(d);
  for (Eigen::Index r = 0; r < n; ++r) {
    dev = (data.row(r) - mean).transpose();
    cov.selfadjointView<Eigen::Lower>().rankUpdate(dev);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  return cov / static_cast<double>(n - 1);
}

Eigen::MatrixXd sample_covariance(const EmbeddingDataset& dataset) {
  return sample_covariance(dataset.data());
}

GaussianKde GaussianKde::from_parameters(RowMatrix support, double bandwidth,
                                         Eigen::MatrixXd covariance) {
  if (support.rows() < 1 || support.cols() < 1) {
    throw Error(ErrorCode::kEmptyDataset, "kde needs at least one support point");
  }
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw Error(ErrorCode::kInvalidArgument, "bandwidth must be positive");
  }
  if (covariance.rows() != support.cols() || covariance.cols() != support.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "covariance shape does not match support");
  }
  GaussianKde kde;
  kde.support_ = std::move(support);
  kde.bandwidth_ = bandwidth;
  kde.covariance_ = std::move(covariance);
  if (!try_cholesky(bandwidth * bandwidth * kde.covariance_, kde.chol_lower_)) {
    throw Error(ErrorCode::kCholeskyFailure, "h^2 * covariance is not positive definite");
  }
  kde.finish_construction();
  return kde;
}

GaussianKde fit_kde(const RowMatrix& support, const BandwidthSpec& spec) {
  const auto m = static_cast<std::size_t>(support.rows());
  const auto d = static_cast<std::size_t>(support.cols());
  if (m < 1 || d < 1) throw Error(ErrorCode::kEmptyDataset, "kde needs at least one support point");

  GaussianKde kde;
  kde.support_ = support;
  kde.bandwidth_ = scott_bandwidth(spec, m, d);
  const double h2 = kde.bandwidth_ * kde.bandwidth_;

  Eigen::MatrixXd sigma = sample_covariance(support);
  double scale = sigma.trace() / static_cast<double>(d);
  // All rows identical: nothing to regularize against, treat like a single row.
  if (!(scale > 0.0)) {
    sigma = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    scale = 1.0;
  }
  const auto identity = Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols());
  for (double eps = kRidgeStart; eps <= kRidgeLimit; eps *= 2.0) {
    Eigen::MatrixXd regularized = sigma + (eps * scale) * identity;
    if (try_cholesky(h2 * regularized, kde.chol_lower_)) {
      kde.covariance_ = std::move(regularized);
      kde.ridge_ = eps;
      kde.finish_construction();
      return kde;
    }
  }
  throw Error(ErrorCode::kCholeskyFailure,
              "covariance not positive definite after ridge " + std::to_string(kRidgeLimit));
}

GaussianKde fit_kde(const EmbeddingDataset& dataset, const BandwidthSpec& spec) {
  return fit_kde(dataset.data(), spec);
}

void GaussianKde::finish_construction() {
  const std::size_t d = dim();
  double log_diag = 0.0;
  for (std::size_t i = 0; i < d; ++i) log_diag += std::log(chol_lower_(i, i));
  log_norm_ = -log_diag - 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);

  center_ = support_.colwise().sum().transpose() / static_cast<double>(count());
  whitened_.resize(count() * d);
  for (std::size_t j = 0; j < count(); ++j) {
    std::span<const double> row(support_.data() + j * d, d);
    whiten(row, whitened_.data() + j * d);
  }
}

void GaussianKde::whiten(std::span<const double> query, double* out) const {
  // Forward substitution L y = z - center.
  const std::size_t d = dim();
  for (std::size_t i = 0; i < d; ++i) {
    double acc = query[i] - center_[static_cast<Eigen::Index>(i)];
    for (std::size_t k = 0; k < i; ++k) acc -= chol_lower_(i, k) * out[k];
    out[i] = acc / chol_lower_(i, i);
  }
}

void GaussianKde::kernel_exponents(const double* y, double* exponents) const {
  const std::size_t d = dim();
  const std::size_t m = count();
  const double* w = whitened_.data();
  std::size_t j = 0;
  // Four independent accumulators; each pair's sum still runs over k in order.
  for (; j + 4 <= m; j += 4) {
    const double* w0 = w + j * d;
    const double* w1 = w0 + d;
    const double* w2 = w1 + d;
    const double* w3 = w2 + d;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double yk = y[k];
      const double d0 = yk - w0[k];
      const double d1 = yk - w1[k];
      const double d2 = yk - w2[k];
      const double d3 = yk - w3[k];
      a0 += d0 * d0;
      a1 += d1 * d1;
      a2 += d2 * d2;
      a3 += d3 * d3;
    }
    exponents[j] = -0.5 * a0;
    exponents[j + 1] = -0.5 * a1;
    exponents[j + 2] = -0.5 * a2;
    exponents[j + 3] = -0.5 * a3;
  }
  for (; j < m; ++j) {
    const double* wj = w + j * d;
    double a = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = y[k] - wj[k];
      a += diff * diff;
    }
    exponents[j] = -0.5 * a;
  }
}

double GaussianKde::log_density(std::span<const double> query) const {
  check_query_dim(query.size(), dim());
  std::vector<double> y(dim());
  std::vector<double> exponents(count());
  whiten(query, y.data());
  kernel_exponents(y.data(), exponents.data());
  return log_norm_ + log_sum_exp(exponents) - std::log(static_cast<double>(count()));
}

std::vector<double> GaussianKde::log_density(const RowMatrix& queries, unsigned threads) const {
  check_query_dim(static_cast<std::size_t>(queries.cols()), dim());
  const auto q = static_cast<std::size_t>(queries.rows());
  const std::size_t d = dim();
  const double log_count = std::log(static_cast<double>(count()));
  std::vector<double> out(q);
  parallel_for_chunks(
      q, kQueryChunk,
      [&](std::size_t begin, std::size_t end) {
        std::vector<double> y(d);
        std::vector<double> exponents(count());
        for (std::size_t i = begin; i < end; ++i) {
          whiten({queries.data() + i * d, d}, y.data());
          kernel_exponents(y.data(), exponents.data());
          out[i] = log_norm_ + log_sum_exp(exponents) - log_count;
        }
      },
      threads);
  return out;
}

double GaussianKde::log_density_excluding(std::span<const double> query,
                                          std::size_t excluded) const {
  check_query_dim(query.size(), dim());
  if (count() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "leave-one-out density needs at least two kernels");
  }
  if (excluded >= count()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "support index " + std::to_string(excluded) + " of " + std::to_string(count()));
  }
  std::vector<double> y(dim());
  std::vector<double> exponents(count());
  whiten(query, y.data());
  kernel_exponents(y.data(), exponents.data());
  exponents.erase(exponents.begin() + static_cast<std::ptrdiff_t>(excluded));
  return log_norm_ + log_mean_exp(exponents);
}

double GaussianKde::mahalanobis_sq(std::span<const double> query, std::size_t center_index) const {
  check_query_dim(query.size(), dim());
  if (center_index >= count()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "center index " + std::to_string(center_index) + " of " + std::to_string(count()));
  }
  const auto d = static_cast<Eigen::Index>(dim());
  Eigen::VectorXd diff(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    diff[k] = query[static_cast<std::size_t>(k)] - support_(static_cast<Eigen::Index>(center_index), k);
  }
  chol_lower_.triangularView<Eigen::Lower>().solveInPlace(diff);
  return diff.squaredNorm();
}

}  // namespace iwr
