#include "lrcnn/zca.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace lrcnn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows are accumulated in blocks so a 50k x 3072 set never needs a dense copy.
constexpr std::size_t kBlock = 512;

template <class RowFn>
ZcaTransform fit(std::size_t count, std::size_t dim, double epsilon, RowFn&& row) {
  if (count == 0 || dim == 0) throw std::invalid_argument("zca_fit: empty training set");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("zca_fit: epsilon must be >= 0");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    const auto r = row(i);
    for (std::size_t j = 0; j < dim; ++j) mean[static_cast<Eigen::Index>(j)] += r[j];
  }
  mean /= static_cast<double>(count);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  RowMatrix block(static_cast<Eigen::Index>(kBlock), static_cast<Eigen::Index>(dim));
  for (std::size_t start = 0; start < count; start += kBlock) {
    const std::size_t n = std::min(kBlock, count - start);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = row(start + i);
      for (std::size_t j = 0; j < dim; ++j) {
        block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            r[j] - mean[static_cast<Eigen::Index>(j)];
      }
    }
    const auto b = block.topRows(static_cast<Eigen::Index>(n));
    cov.selfadjointView<Eigen::Lower>().rankUpdate(b.transpose());
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(count);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("zca_fit: eigendecomposition failed");
  Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0).array() + epsilon;
  if ((lam.array() <= 0.0).any()) {
    throw std::invalid_argument("zca_fit: singular covariance; use epsilon > 0");
  }
  const Eigen::MatrixXd& u = eig.eigenvectors();
  const RowMatrix w = u * lam.cwiseSqrt().cwiseInverse().asDiagonal() * u.transpose();
  const RowMatrix w_inv = u * lam.cwiseSqrt().asDiagonal() * u.transpose();

  ZcaTransform t;
  t.dim = dim;
  t.epsilon = epsilon;
  t.mean.assign(mean.data(), mean.data() + dim);
  t.whiten.assign(w.data(), w.data() + dim * dim);
  t.unwhiten.assign(w_inv.data(), w_inv.data() + dim * dim);
  return t;
}

Eigen::Map<const RowMatrix> as_matrix(const std::vector<double>& m, std::size_t dim) {
  return {m.data(), static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)};
}

void check_dim(const ZcaTransform& t, std::size_t n) {
  if (n != t.dim) {
    throw std::invalid_argument("zca: vector of size " + std::to_string(n) + ", transform expects " +
                                std::to_string(t.dim));
  }
}

}  // namespace

ZcaTransform zca_fit(std::span<const double> rows, std::size_t count, std::size_t dim,
                     double epsilon) {
  if (rows.size() != count * dim) throw std::invalid_argument("zca_fit: rows size != count * dim");
  return fit(count, dim, epsilon, [&](std::size_t i) { return rows.subspan(i * dim, dim); });
}

ZcaTransform zca_fit(const Dataset& data, double epsilon) {
  return fit(data.size(), data.image_size(), epsilon, [&](std::size_t i) { return data.image(i); });
}

std::vector<double> zca_apply(const ZcaTransform& t, std::span<const double> x) {
  check_dim(t, x.size());
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.dim));
  for (std::size_t j = 0; j < t.dim; ++j) v[static_cast<Eigen::Index>(j)] = x[j] - t.mean[j];
  const Eigen::VectorXd y = as_matrix(t.whiten, t.dim) * v;
  return {y.data(), y.data() + t.dim};
}

std::vector<double> zca_inverse(const ZcaTransform& t, std::span<const double> y) {
  check_dim(t, y.size());
  const Eigen::Map<const Eigen::VectorXd> v(y.data(), static_cast<Eigen::Index>(t.dim));
  const Eigen::VectorXd x = as_matrix(t.unwhiten, t.dim) * v;
  std::vector<double> out(t.dim);
  for (std::size_t j = 0; j < t.dim; ++j) out[j] = x[static_cast<Eigen::Index>(j)] + t.mean[j];
  return out;
}

void zca_apply(const ZcaTransform& t, Dataset& data) {
  check_dim(t, data.image_size());
  const auto w = as_matrix(t.whiten, t.dim);
  RowMatrix block(static_cast<Eigen::Index>(kBlock), static_cast<Eigen::Index>(t.dim));
  for (std::size_t start = 0; start < data.size(); start += kBlock) {
    const std::size_t n = std::min(kBlock, data.size() - start);
    for (std::size_t i = 0; i < n; ++i) {
      const auto img = data.image(start + i);
      for (std::size_t j = 0; j < t.dim; ++j) {
        block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = img[j] - t.mean[j];
      }
    }
    // Rows of the block are samples: Y = X W^T, and W is symmetric.
    const RowMatrix y = block.topRows(static_cast<Eigen::Index>(n)) * w.transpose();
    for (std::size_t i = 0; i < n; ++i) {
      auto img = data.image(start + i);
      for (std::size_t j = 0; j < t.dim; ++j) {
        img[j] = static_cast<float>(y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      }
    }
  }
}

}  // namespace lrcnn
