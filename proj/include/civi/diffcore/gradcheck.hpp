#pragma once

#include <functional>

#include "civi/types.hpp"

namespace civi::diffcore {

/// Central differences of a scalar function, step h per coordinate.
Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h = 1e-5);

/// Fourth-order five-point stencil: truncation error O(h^4), so a larger
/// step keeps round-off small.
Vector five_point_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                             double h = 1e-4);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). Zero for empty vectors.
double max_relative_error(const Vector& a, const Vector& b, double floor = 1e-6);

}  // namespace civi::diffcore
