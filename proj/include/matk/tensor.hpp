#ifndef MATK_TENSOR_HPP_
#define MATK_TENSOR_HPP_

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace matk {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_to_string(std::span<const int> shape);

// Dense row-major float32 tensor. Shapes are immutable after construction;
// data is mutable through data()/at().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor scalar(float v) { return Tensor({1}, {v}); }
  static Tensor full(std::vector<int> shape, float v);
  static Tensor vector(std::vector<float> v);
  static Tensor matrix(std::initializer_list<std::initializer_list<float>> rows);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  float& at(int64_t i) { return data_[static_cast<size_t>(i)]; }
  float at(int64_t i) const { return data_[static_cast<size_t>(i)]; }
  float& at(int i, int j) { return data_[static_cast<size_t>(i) * dim(1) + j]; }
  float at(int i, int j) const { return data_[static_cast<size_t>(i) * dim(1) + j]; }
  float& at(int i, int j, int k) {
    return data_[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
  }
  float at(int i, int j, int k) const {
    return data_[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  // Same size, new shape; data shared by copy.
  Tensor reshaped(std::vector<int> shape) const;
  std::string shape_str() const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

}  // namespace matk

#endif  // MATK_TENSOR_HPP_
