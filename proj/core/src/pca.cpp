#include "chor/pca.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "chor/error.hpp"

namespace chor {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_dim(std::size_t got, std::size_t want, const char* op) {
  if (got != want) {
    throw ShapeError(std::string(op) + ": expected dimension " + std::to_string(want) + ", got " + std::to_string(got));
  }
}

}  // namespace

PcaModel pca_fit(std::span<const double> data, std::size_t rows, std::size_t dim, double variance_target) {
  if (rows < 2) throw InvalidArgument("pca_fit: need at least 2 rows");
  if (dim == 0) throw InvalidArgument("pca_fit: dimension must be positive");
  if (!(variance_target > 0.0 && variance_target <= 1.0)) {
    throw InvalidArgument("pca_fit: variance target must lie in (0, 1]");
  }
  check_dim(data.size(), rows * dim, "pca_fit");

  Eigen::Map<const RowMatrix> x(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centred = x.rowwise() - mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
  const Eigen::VectorXd& singular = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();

  const double n = static_cast<double>(rows);
  std::vector<double> eigen(static_cast<std::size_t>(singular.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < eigen.size(); ++i) {
    eigen[i] = singular[static_cast<Eigen::Index>(i)] * singular[static_cast<Eigen::Index>(i)] / n;
    total += eigen[i];
  }
  const double s_max = singular.size() ? singular[0] : 0.0;
  if (!(total > 0.0) || !(s_max > 0.0)) throw InvalidArgument("pca_fit: data is constant");

  const double rank_tol = static_cast<double>(std::max(rows, dim)) * std::numeric_limits<double>::epsilon() * s_max;
  std::size_t rank = 0;
  while (rank < eigen.size() && singular[static_cast<Eigen::Index>(rank)] > rank_tol) ++rank;

  std::size_t k = 0;
  double cumulative = 0.0;
  while (k < rank) {
    cumulative += eigen[k] / total;
    ++k;
    if (cumulative >= variance_target - 1e-12) break;
  }

  PcaModel model;
  model.mean.assign(mean.data(), mean.data() + dim);
  std::vector<double> comp(k * dim);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t peak = 0;
    for (std::size_t d = 1; d < dim; ++d) {
      if (std::abs(v(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c))) >
          std::abs(v(static_cast<Eigen::Index>(peak), static_cast<Eigen::Index>(c)))) {
        peak = d;
      }
    }
    const double sign = v(static_cast<Eigen::Index>(peak), static_cast<Eigen::Index>(c)) < 0 ? -1.0 : 1.0;
    for (std::size_t d = 0; d < dim; ++d) {
      comp[c * dim + d] = sign * v(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c));
    }
    model.explained_variance.push_back(eigen[c]);
    model.explained_variance_ratio.push_back(eigen[c] / total);
  }
  for (std::size_t i = k; i < eigen.size(); ++i) model.discarded_variance += eigen[i];
  model.components = Tensor::matrix(k, dim, std::move(comp));
  return model;
}

std::vector<double> PcaModel::transform(std::span<const double> x) const {
  check_dim(x.size(), dim(), "pca_transform");
  std::vector<double> y(k(), 0.0);
  auto c = components.data();
  for (std::size_t i = 0; i < k(); ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim(); ++d) acc += c[i * dim() + d] * (x[d] - mean[d]);
    y[i] = acc;
  }
  return y;
}

std::vector<double> PcaModel::transform_rows(std::span<const double> rows) const {
  if (rows.size() % dim() != 0) throw ShapeError("pca_transform: row block is not a multiple of the dimension");
  std::vector<double> out;
  out.reserve(rows.size() / dim() * k());
  for (std::size_t r = 0; r < rows.size() / dim(); ++r) {
    const auto y = transform(rows.subspan(r * dim(), dim()));
    out.insert(out.end(), y.begin(), y.end());
  }
  return out;
}

std::vector<double> PcaModel::inverse(std::span<const double> y) const {
  check_dim(y.size(), k(), "pca_inverse");
  std::vector<double> x(mean);
  auto c = components.data();
  for (std::size_t i = 0; i < k(); ++i) {
    for (std::size_t d = 0; d < dim(); ++d) x[d] += c[i * dim() + d] * y[i];
  }
  return x;
}

std::vector<double> PcaModel::inverse_rows(std::span<const double> rows) const {
  if (k() == 0 || rows.size() % k() != 0) throw ShapeError("pca_inverse: row block is not a multiple of k");
  std::vector<double> out;
  out.reserve(rows.size() / k() * dim());
  for (std::size_t r = 0; r < rows.size() / k(); ++r) {
    const auto x = inverse(rows.subspan(r * k(), k()));
    out.insert(out.end(), x.begin(), x.end());
  }
  return out;
}

}  // namespace chor
