#pragma once

#include <span>
#include <vector>

#include "lrcnn/cifar.hpp"

namespace lrcnn {

inline constexpr double kDefaultZcaEpsilon = 1e-2;

/// x -> W (x - mean) with W = U diag(1/sqrt(lambda + eps)) U^T, the symmetric
/// inverse square root of the regularized covariance (C + eps I).
/// Matrices are row-major dim x dim.
struct ZcaTransform {
  std::size_t dim = 0;
  double epsilon = kDefaultZcaEpsilon;
  std::vector<double> mean;
  std::vector<double> whiten;
  std::vector<double> unwhiten;  // (C + eps I)^(1/2)
  friend bool operator==(const ZcaTransform&, const ZcaTransform&) = default;
};

/// Covariance uses the 1/N normalization. Throws std::invalid_argument on an
/// empty set.
ZcaTransform zca_fit(std::span<const double> rows, std::size_t count, std::size_t dim,
                     double epsilon = kDefaultZcaEpsilon);
ZcaTransform zca_fit(const Dataset& data, double epsilon = kDefaultZcaEpsilon);

std::vector<double> zca_apply(const ZcaTransform& t, std::span<const double> x);
std::vector<double> zca_inverse(const ZcaTransform& t, std::span<const double> y);

/// Whitens every image of `data` in place.
void zca_apply(const ZcaTransform& t, Dataset& data);

}  // namespace lrcnn
