#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace migate {

// Global numeric precision. f64 is the default and is what every test and
// gradient check runs under; f32 emulates single precision by rounding each
// produced value through a float.
enum class Precision { f32, f64 };

Precision precision();
void set_precision(Precision p);

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major tensor (last axis fastest). Storage is shared on copy;
// mutation detaches.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  static Tensor from(std::vector<int> shape, std::vector<double> values);

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int rank() const { return static_cast<int>(shape_.size()); }
  size_t size() const;
  bool empty() const { return !data_; }

  const double* data() const { return data_ ? data_->data() : nullptr; }
  double* mutable_data();

  double operator[](size_t i) const { return (*data_)[i]; }
  double at(size_t i) const { return (*data_)[i]; }
  void set(size_t i, double v) { mutable_data()[i] = v; }

  // index helpers for K x K x C activation maps
  size_t idx3(int i, int j, int c) const {
    return (static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + c;
  }
  size_t idx2(int i, int j) const {
    return static_cast<size_t>(i) * shape_[1] + j;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

  Tensor clone() const;
  void fill(double v);
  void add_inplace(const Tensor& other);  // shapes must match

  // throws NumericError on NaN/Inf, naming `who`
  void check_finite(const std::string& who) const;
  bool all_finite() const;

  // rounds every value through float when the global precision is f32
  void quantize();

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> data_;
};

std::string shape_str(const std::vector<int>& shape);

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         a.shape_str() + " vs " + b.shape_str());
}

// Deterministic splitmix64 RNG. Uniform values are derived from the raw bits
// so streams do not depend on libstdc++'s distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int uniform_int(int n);                // [0, n)
  Rng fork(uint64_t salt) const;         // independent derived stream

 private:
  uint64_t state_;
};

}  // namespace migate
