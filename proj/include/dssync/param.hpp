#pragma once

#include <span>
#include <vector>

namespace dssync {

// Flat parameter (or gradient) vector.  All numerics in the library run on
// 64-bit doubles; operations that produce a ParamVector check the result is
// finite and throw std::runtime_error otherwise.
using ParamVector = std::vector<double>;

bool all_finite(const ParamVector& v);

// Throws std::runtime_error mentioning `what` if v contains NaN or Inf.
void require_finite(const ParamVector& v, const char* what);

// y + a * x.  Lengths must match.
ParamVector axpy(double a, const ParamVector& x, const ParamVector& y);

// Arithmetic mean with a pinned summation order: accumulate vectors[0],
// vectors[1], ... left to right, then divide once by the count.  Collectives
// are required to reproduce this result bit for bit, so the order here is
// load-bearing; do not "optimise" into a tree or pairwise sum.
ParamVector mean_of(std::span<const ParamVector> vectors);
ParamVector mean_of(const std::vector<ParamVector>& vectors);

// Same fold over pointers, for callers that hold vectors in worker state
// and do not want to copy them into a contiguous list first.
ParamVector mean_of_ptrs(std::span<const ParamVector* const> vectors);

// Squared Euclidean distance.
double sq_dist(const ParamVector& x, const ParamVector& y);

// Euclidean norm.
double norm(const ParamVector& v);

}  // namespace dssync
