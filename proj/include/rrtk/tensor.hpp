#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "rrtk/errors.hpp"
#include "rrtk/scalar_ops.hpp"

namespace rrtk {

// Dense row-major tensor. Engine kernels use rank 4 [C, D, H, W]; 2D data
// travels as D = 1.
template <class S> struct TensorT {
  std::vector<std::size_t> shape;
  std::vector<S> data;

  TensorT() = default;

  explicit TensorT(std::vector<std::size_t> dims)
      : shape(std::move(dims)),
        data(std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                             std::multiplies<>()),
             S{}) {}

  std::size_t size() const { return data.size(); }

  std::size_t dim(std::size_t i) const { return shape.at(i); }

  // rank-4 accessor
  S& at(std::size_t c, std::size_t z, std::size_t y, std::size_t x) {
    return data[((c * shape[1] + z) * shape[2] + y) * shape[3] + x];
  }
  const S& at(std::size_t c, std::size_t z, std::size_t y,
              std::size_t x) const {
    return data[((c * shape[1] + z) * shape[2] + y) * shape[3] + x];
  }
};

using Tensor = TensorT<double>;

inline TensorT<Audited> to_audited(const Tensor& t) {
  TensorT<Audited> out(t.shape);
  for (std::size_t i = 0; i < t.size(); ++i)
    out.data[i] = {t.data[i]};
  return out;
}

inline Tensor from_audited(const TensorT<Audited>& t) {
  Tensor out(t.shape);
  for (std::size_t i = 0; i < t.size(); ++i)
    out.data[i] = t.data[i].v;
  return out;
}

inline void require_same_shape(const std::vector<std::size_t>& a,
                               const std::vector<std::size_t>& b,
                               const std::string& what) {
  if (a != b)
    throw ValidationError("shape mismatch in " + what);
}

} // namespace rrtk
