#pragma once

#include <vector>

#include "core/array.hpp"

namespace lswap {

// Symmetric eigendecomposition by cyclic Jacobi rotations. Rows of `vectors`
// are eigenvectors, ordered by non-increasing eigenvalue.
void eigh(const Array& sym, Array& values, Array& vectors);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // rms of residuals
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lswap
