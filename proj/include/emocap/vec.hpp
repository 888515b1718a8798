#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace emocap {

// A point in the D-dimensional latent space. All components finite; the
// all-zero vector is the designated "no content" flag (see embedding).
using SemanticVector = std::vector<double>;

namespace vec {

inline double dot(const SemanticVector& a, const SemanticVector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(const SemanticVector& a) { return std::sqrt(dot(a, a)); }

// The zero-vector flag: anything below this norm carries no usable
// direction and is treated as undefined by cosine consumers.
constexpr double kDegenerateNorm = 1e-12;

inline bool is_degenerate(const SemanticVector& a) {
  return norm(a) < kDegenerateNorm;
}

inline double cosine(const SemanticVector& a, const SemanticVector& b) {
  return dot(a, b) / (norm(a) * norm(b));
}

}  // namespace vec
}  // namespace emocap
