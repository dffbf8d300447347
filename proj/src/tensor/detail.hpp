#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "sharpseg/graph.hpp"

namespace sharpseg::detail {

/// Gradient buffer of an input, or an empty span when the input does not
/// lead to any parameter.
inline std::span<double> accum(Graph& g, NodeId id) {
  return g.needs_grad(id) ? g.grad_accumulator(id) : std::span<double>{};
}

/// C[m,n] (+)= op(A) * op(B) on row-major storage. op(A) is [m,k].
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate);

/// Sliding-window geometry shared by conv and transposed conv. The "big"
/// side is the conv input (transposed-conv output); the "small" side is the
/// conv output (transposed-conv input). Unused spatial axes have extent 1.
struct Geometry {
  std::size_t channels = 1;
  std::array<std::size_t, 3> big{1, 1, 1};
  std::array<std::size_t, 3> small{1, 1, 1};
  std::array<std::size_t, 3> kernel{1, 1, 1};
  std::array<std::size_t, 3> stride{1, 1, 1};
  std::array<std::size_t, 3> pad{0, 0, 0};

  std::size_t big_volume() const { return big[0] * big[1] * big[2]; }
  std::size_t small_volume() const { return small[0] * small[1] * small[2]; }
  std::size_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
};

/// big-side [channels, big] -> col [channels * kernel, small].
void im2col(const double* big_side, const Geometry& geo, double* col);
/// Adjoint of im2col: accumulates col into big-side [channels, big].
void col2im(const double* col, const Geometry& geo, double* big_side);

}  // namespace sharpseg::detail
