#pragma once

#include "imgseek/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace imgseek {

namespace detail {

template <typename A, typename B>
void requireSameLength(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  if (p.size() != q.size())
    throw Error(ErrorCode::DimensionMismatch,
                "vector lengths differ: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
}

template <typename A>
void requireNonNegative(const Eigen::MatrixBase<A>& p, const char* metric) {
  if ((p.array() < 0).any())
    throw Error(ErrorCode::InvalidParameter, std::string(metric) + " requires non-negative inputs");
}

}  // namespace detail

template <typename A, typename B>
typename A::Scalar euclidean(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  detail::requireSameLength(p, q);
  return (p - q).norm();
}

template <typename A, typename B>
typename A::Scalar manhattan(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  detail::requireSameLength(p, q);
  return (p - q).cwiseAbs().sum();
}

/// Terms with p_i = q_i = 0 contribute 0.
template <typename A, typename B>
typename A::Scalar canberra(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  detail::requireSameLength(p, q);
  using S = typename A::Scalar;
  S sum = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const S den = std::abs(p[i]) + std::abs(q[i]);
    if (den > 0) sum += std::abs(p[i] - q[i]) / den;
  }
  return sum;
}

/// Half the sum of (p_i - q_i)^2 / (p_i + q_i); zero-sum terms contribute 0.
template <typename A, typename B>
typename A::Scalar chi2(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  detail::requireSameLength(p, q);
  detail::requireNonNegative(p, "chi2");
  detail::requireNonNegative(q, "chi2");
  using S = typename A::Scalar;
  S sum = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const S den = p[i] + q[i];
    if (den > 0) sum += (p[i] - q[i]) * (p[i] - q[i]) / den;
  }
  return sum / 2;
}

/// Jeffrey divergence in the form sum(log(2p/(p+q)) + log(2q/(p+q))).
/// This is <= 0 and equals 0 at p = q. Terms where p_i or q_i is 0 are
/// skipped.
template <typename A, typename B>
typename A::Scalar jeffrey(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  detail::requireSameLength(p, q);
  using S = typename A::Scalar;
  S sum = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0 || q[i] <= 0) continue;
    const S m = p[i] + q[i];
    sum += std::log(2 * p[i] / m) + std::log(2 * q[i] / m);
  }
  return sum;
}

/// Conventional Jeffrey divergence sum(p log(2p/(p+q)) + q log(2q/(p+q))),
/// with 0 log 0 = 0.
template <typename A, typename B>
typename A::Scalar jeffreyStandard(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  detail::requireSameLength(p, q);
  detail::requireNonNegative(p, "jeffrey-standard");
  detail::requireNonNegative(q, "jeffrey-standard");
  using S = typename A::Scalar;
  S sum = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const S m = p[i] + q[i];
    if (p[i] > 0) sum += p[i] * std::log(2 * p[i] / m);
    if (q[i] > 0) sum += q[i] * std::log(2 * q[i] / m);
  }
  return sum;
}

template <typename A, typename B>
typename A::Scalar histogramIntersection(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  detail::requireSameLength(p, q);
  detail::requireNonNegative(p, "histogram-intersection");
  detail::requireNonNegative(q, "histogram-intersection");
  return p.cwiseMin(q).sum();
}

/// 0 when either input has zero norm.
template <typename A, typename B>
typename A::Scalar cosine(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  detail::requireSameLength(p, q);
  const auto np = p.norm();
  const auto nq = q.norm();
  if (np == 0 || nq == 0) return 0;
  return p.dot(q) / (np * nq);
}

/// Hamming distance over the supports (non-zero entries) of dense vectors.
template <typename A, typename B>
typename A::Scalar hamming(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  detail::requireSameLength(p, q);
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) n += (p[i] != 0) != (q[i] != 0);
  return static_cast<typename A::Scalar>(n);
}

std::size_t hamming(const BinaryDescriptorVector& p, const BinaryDescriptorVector& q);

/// Number of shared frequent items; frequent-item sets are kept sorted.
std::size_t frequentItemSimilarity(const std::vector<int>& p, const std::vector<int>& q);

/// Frequent-item similarity on indicator vectors: size of the shared support.
template <typename A, typename B>
typename A::Scalar frequentItemSimilarity(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  detail::requireSameLength(p, q);
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) n += (p[i] != 0) && (q[i] != 0);
  return static_cast<typename A::Scalar>(n);
}

/// A named measure with its fixed polarity.
struct Metric {
  std::string name;
  Polarity polarity = Polarity::Distance;
  bool requiresNonNegative = false;
  std::function<double(const Eigen::Ref<const Vector>&, const Eigen::Ref<const Vector>&)> fn;

  double operator()(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q) const { return fn(p, q); }
};

/// Throws UnknownMetric for unregistered names.
const Metric& metricByName(const std::string& name);
std::vector<std::string> metricNames();

}  // namespace imgseek
