#include "migate/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace migate {

namespace {
Precision g_precision = Precision::f64;
}

Precision precision() { return g_precision; }
void set_precision(Precision p) { g_precision = p; }

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  size_t n = 1;
  for (int d : shape_) {
    if (d <= 0) throw DimensionError("tensor extent must be positive, got " + shape_str());
    n *= static_cast<size_t>(d);
  }
  data_ = std::make_shared<std::vector<double>>(n, fill);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  Tensor t(std::move(shape));
  if (t.size() != values.size())
    throw DimensionError("tensor init: " + std::to_string(values.size()) +
                         " values for shape " + t.shape_str());
  *t.data_ = std::move(values);
  return t;
}

size_t Tensor::size() const { return data_ ? data_->size() : 0; }

double* Tensor::mutable_data() {
  if (!data_) throw std::runtime_error("empty tensor");
  if (data_.use_count() > 1)
    data_ = std::make_shared<std::vector<double>>(*data_);
  return data_->data();
}

std::string Tensor::shape_str() const { return migate::shape_str(shape_); }

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  if (data_) t.data_ = std::make_shared<std::vector<double>>(*data_);
  return t;
}

void Tensor::fill(double v) {
  double* p = mutable_data();
  for (size_t i = 0; i < size(); ++i) p[i] = v;
}

void Tensor::add_inplace(const Tensor& other) {
  require_same_shape(*this, other, "add_inplace");
  double* p = mutable_data();
  const double* q = other.data();
  for (size_t i = 0; i < size(); ++i) p[i] += q[i];
}

bool Tensor::all_finite() const {
  const double* p = data();
  for (size_t i = 0; i < size(); ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

void Tensor::check_finite(const std::string& who) const {
  const double* p = data();
  for (size_t i = 0; i < size(); ++i)
    if (!std::isfinite(p[i]))
      throw NumericError(who + ": non-finite value at index " + std::to_string(i));
}

void Tensor::quantize() {
  if (g_precision == Precision::f64) return;
  double* p = mutable_data();
  for (size_t i = 0; i < size(); ++i) p[i] = static_cast<float>(p[i]);
}

uint64_t Rng::next_u64() {
  // splitmix64
  uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::runtime_error("uniform_int: n must be positive");
  // rejection sampling to avoid modulo bias
  uint64_t un = static_cast<uint64_t>(n);
  uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<int>(x % un);
}

Rng Rng::fork(uint64_t salt) const {
  Rng r(state_ ^ (salt * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull));
  r.next_u64();
  return r;
}

}  // namespace migate
