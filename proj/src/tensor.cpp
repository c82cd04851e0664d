#include "dib/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace dib {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size()) {
    throw DimensionError("tensor: shape product " + std::to_string(product(shape_)) +
                         " does not match data length " + std::to_string(data_.size()));
  }
}

Tensor Tensor::from_matrix(const Eigen::Ref<const Matrix>& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  t.matrix() = m;
  return t;
}

Eigen::Index Tensor::rows() const {
  if (shape_.size() > 2) throw DimensionError("tensor: matrix view needs rank <= 2");
  return shape_.size() == 2 ? static_cast<Eigen::Index>(shape_[0]) : 1;
}

Eigen::Index Tensor::cols() const {
  if (shape_.empty()) return 1;
  return static_cast<Eigen::Index>(shape_.back());
}

Eigen::Map<RowMajorMatrix> Tensor::matrix() {
  return {data_.data(), rows(), cols()};
}

Eigen::Map<const RowMajorMatrix> Tensor::matrix() const {
  return {data_.data(), rows(), cols()};
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

Tensor& ParamStore::add(const std::string& path, Tensor value) {
  grads_[path] = Tensor::zeros_like(value);
  return params_[path] = std::move(value);
}

Tensor& ParamStore::param(const std::string& path) {
  auto it = params_.find(path);
  if (it == params_.end()) throw ContractError("param store: unknown parameter '" + path + "'");
  return it->second;
}

const Tensor& ParamStore::param(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw ContractError("param store: unknown parameter '" + path + "'");
  return it->second;
}

Tensor& ParamStore::grad(const std::string& path) {
  auto it = grads_.find(path);
  if (it == grads_.end()) throw ContractError("param store: unknown parameter '" + path + "'");
  return it->second;
}

const Tensor& ParamStore::grad(const std::string& path) const {
  auto it = grads_.find(path);
  if (it == grads_.end()) throw ContractError("param store: unknown parameter '" + path + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, g] : grads_) g.set_zero();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.size();
  return n;
}

std::vector<std::string> ParamStore::paths() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, _] : params_) out.push_back(k);
  return out;
}

}  // namespace dib
