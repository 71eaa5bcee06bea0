#include "core/array.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>

namespace lswap {

namespace {
std::atomic<Precision> g_precision{Precision::f64};
}

Precision precision() { return g_precision.load(std::memory_order_relaxed); }
void set_precision(Precision p) { g_precision.store(p, std::memory_order_relaxed); }

size_t shape_size(const Shape& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << ")";
    return os.str();
}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
        throw DimensionError("array: shape " + shape_str(shape_) + " does not match data length " +
                             std::to_string(data_.size()));
    }
}

Array Array::scalar(double v) {
    Array a;
    a.data_.assign(1, v);
    return a;
}

Array Array::full(Shape shape, double v) {
    Array a(std::move(shape));
    for (auto& x : a.data_) x = v;
    return a;
}

double Array::scalar_value() const {
    if (!is_scalar()) throw ContractError("expected scalar array, got shape " + shape_str(shape_));
    return data_[0];
}

void Array::check_finite(const std::string& what) const {
    for (size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw NumericError(what + ": non-finite value at flat index " + std::to_string(i));
        }
    }
}

void Array::apply_precision() {
    if (precision() == Precision::f32) {
        for (auto& x : data_) x = static_cast<double>(static_cast<float>(x));
    }
}

bool Array::bitwise_equal(const Array& o) const {
    if (shape_ != o.shape_) return false;
    return std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(double)) == 0;
}

void check_same_shape(const char* op, const Array& a, const Array& b) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

}  // namespace lswap
