#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dib {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Dense n-dimensional array of doubles, row-major flat storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor from_matrix(const Eigen::Ref<const Matrix>& m);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Rows/cols of the rank<=2 view (scalars are 1x1, vectors are 1xN).
  Eigen::Index rows() const;
  Eigen::Index cols() const;

  Eigen::Map<RowMajorMatrix> matrix();
  Eigen::Map<const RowMajorMatrix> matrix() const;

  bool all_finite() const;
  void set_zero();

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Named parameters plus a gradient buffer of identical shapes.
/// std::map keeps iteration lexicographic by path.
class ParamStore {
 public:
  Tensor& add(const std::string& path, Tensor value);
  bool contains(const std::string& path) const { return params_.count(path) != 0; }

  Tensor& param(const std::string& path);
  const Tensor& param(const std::string& path) const;
  Tensor& grad(const std::string& path);
  const Tensor& grad(const std::string& path) const;

  void zero_grad();
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::vector<std::string> paths() const;

  const std::map<std::string, Tensor>& params() const { return params_; }
  std::map<std::string, Tensor>& params() { return params_; }
  const std::map<std::string, Tensor>& grads() const { return grads_; }

 private:
  std::map<std::string, Tensor> params_;
  std::map<std::string, Tensor> grads_;
};

}  // namespace dib
