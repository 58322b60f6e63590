#include "civi/diffcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace civi::diffcore {

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h) {
  Vector g(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

Vector five_point_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                             double h) {
  Vector g(x.size());
  Vector probe = x;
  const auto at = [&](Index i, double offset) {
    probe(i) = x(i) + offset;
    const double v = f(probe);
    probe(i) = x(i);
    return v;
  };
  for (Index i = 0; i < x.size(); ++i) {
    g(i) = (at(i, -2.0 * h) - 8.0 * at(i, -h) + 8.0 * at(i, h) - at(i, 2.0 * h)) / (12.0 * h);
  }
  return g;
}

double max_relative_error(const Vector& a, const Vector& b, double floor) {
  if (a.size() != b.size()) {
    throw DimensionError("max_relative_error: length mismatch");
  }
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    worst = std::max(worst, std::abs(a(i) - b(i)) / denom);
  }
  return worst;
}

}  // namespace civi::diffcore
