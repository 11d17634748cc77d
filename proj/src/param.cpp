#include "dssync/param.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dssync {

namespace {

void require_same_length(const ParamVector& x, const ParamVector& y, const char* what) {
  if (x.size() != y.size()) {
    throw std::invalid_argument(std::string(what) + ": length mismatch (" +
                                std::to_string(x.size()) + " vs " + std::to_string(y.size()) +
                                ")");
  }
}

}  // namespace

bool all_finite(const ParamVector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void require_finite(const ParamVector& v, const char* what) {
  if (!all_finite(v)) {
    throw std::runtime_error(std::string(what) + ": non-finite value in result");
  }
}

ParamVector axpy(double a, const ParamVector& x, const ParamVector& y) {
  require_same_length(x, y, "axpy");
  ParamVector out(y);
  for (size_t i = 0; i < x.size(); ++i) out[i] += a * x[i];
  require_finite(out, "axpy");
  return out;
}

ParamVector mean_of(std::span<const ParamVector> vectors) {
  if (vectors.empty()) throw std::invalid_argument("mean_of: empty input");
  ParamVector acc = vectors[0];
  for (size_t k = 1; k < vectors.size(); ++k) {
    require_same_length(vectors[0], vectors[k], "mean_of");
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += vectors[k][i];
  }
  const double inv = 1.0 / static_cast<double>(vectors.size());
  for (double& x : acc) x *= inv;
  require_finite(acc, "mean_of");
  return acc;
}

ParamVector mean_of(const std::vector<ParamVector>& vectors) {
  return mean_of(std::span<const ParamVector>(vectors));
}

ParamVector mean_of_ptrs(std::span<const ParamVector* const> vectors) {
  if (vectors.empty()) throw std::invalid_argument("mean_of: empty input");
  ParamVector acc = *vectors[0];
  for (size_t k = 1; k < vectors.size(); ++k) {
    require_same_length(*vectors[0], *vectors[k], "mean_of");
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += (*vectors[k])[i];
  }
  const double inv = 1.0 / static_cast<double>(vectors.size());
  for (double& x : acc) x *= inv;
  require_finite(acc, "mean_of");
  return acc;
}

double sq_dist(const ParamVector& x, const ParamVector& y) {
  require_same_length(x, y, "sq_dist");
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

double norm(const ParamVector& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace dssync
