#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace lswap {

using Shape = std::vector<size_t>;

size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

enum class Precision { f64, f32 };

// Global per-run precision switch. f32 rounds the result of every primitive
// to float, so long runs behave like single-precision while keeping one code
// path. Tests and gradient checks run in f64.
Precision precision();
void set_precision(Precision p);

// Dense row-major float64 array. Treated as immutable once built; the mutable
// accessors exist for builders only.
class Array {
  public:
    Array() = default;
    explicit Array(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}
    Array(Shape shape, std::vector<double> data);

    static Array scalar(double v);
    static Array full(Shape shape, double v);

    const Shape& shape() const { return shape_; }
    size_t ndim() const { return shape_.size(); }
    size_t size() const { return data_.size(); }
    size_t dim(size_t i) const { return shape_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    bool is_scalar() const { return shape_.empty(); }
    double scalar_value() const;

    // Contract check: every element finite. `what` names the offender.
    void check_finite(const std::string& what) const;

    // Rounds every element through float when the global precision is f32.
    void apply_precision();

    bool same_shape(const Array& o) const { return shape_ == o.shape_; }
    bool bitwise_equal(const Array& o) const;

  private:
    Shape shape_;
    std::vector<double> data_;
};

void check_same_shape(const char* op, const Array& a, const Array& b);

}  // namespace lswap
