#include <Eigen/Core>

#include "detail.hpp"

namespace sharpseg::detail {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

template <class L, class R>
void assign(Map& c, const L& l, const R& r, bool accumulate) {
  if (accumulate) {
    c.noalias() += l * r;
  } else {
    c.noalias() = l * r;
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  Map cm(c, M, N);
  if (!trans_a && !trans_b) {
    assign(cm, ConstMap(a, M, K), ConstMap(b, K, N), accumulate);
  } else if (!trans_a && trans_b) {
    assign(cm, ConstMap(a, M, K), ConstMap(b, N, K).transpose(), accumulate);
  } else if (trans_a && !trans_b) {
    assign(cm, ConstMap(a, K, M).transpose(), ConstMap(b, K, N), accumulate);
  } else {
    assign(cm, ConstMap(a, K, M).transpose(), ConstMap(b, N, K).transpose(), accumulate);
  }
}

namespace {

template <bool Scatter>
void window_pass(const Geometry& g, const double* src, double* dst) {
  // Scatter == false: src is the big side, dst the column buffer.
  // Scatter == true: src is the column buffer, dst the big side (+=).
  const std::size_t len = g.small_volume();
  std::size_t row_index = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t a = 0; a < g.kernel[0]; ++a) {
      for (std::size_t b = 0; b < g.kernel[1]; ++b) {
        for (std::size_t e = 0; e < g.kernel[2]; ++e, ++row_index) {
          const std::size_t row_off = row_index * len;
          std::size_t idx = 0;
          for (std::size_t o0 = 0; o0 < g.small[0]; ++o0) {
            const auto i0 = static_cast<std::ptrdiff_t>(o0 * g.stride[0] + a) -
                            static_cast<std::ptrdiff_t>(g.pad[0]);
            const bool in0 = i0 >= 0 && i0 < static_cast<std::ptrdiff_t>(g.big[0]);
            for (std::size_t o1 = 0; o1 < g.small[1]; ++o1) {
              const auto i1 = static_cast<std::ptrdiff_t>(o1 * g.stride[1] + b) -
                              static_cast<std::ptrdiff_t>(g.pad[1]);
              const bool in1 = i1 >= 0 && i1 < static_cast<std::ptrdiff_t>(g.big[1]);
              if (!in0 || !in1) {
                if constexpr (!Scatter) {
                  for (std::size_t o2 = 0; o2 < g.small[2]; ++o2) dst[row_off + idx + o2] = 0.0;
                }
                idx += g.small[2];
                continue;
              }
              const std::size_t base =
                  ((c * g.big[0] + static_cast<std::size_t>(i0)) * g.big[1] + static_cast<std::size_t>(i1)) *
                  g.big[2];
              for (std::size_t o2 = 0; o2 < g.small[2]; ++o2, ++idx) {
                const auto i2 = static_cast<std::ptrdiff_t>(o2 * g.stride[2] + e) -
                                static_cast<std::ptrdiff_t>(g.pad[2]);
                const bool in2 = i2 >= 0 && i2 < static_cast<std::ptrdiff_t>(g.big[2]);
                if constexpr (Scatter) {
                  if (in2) dst[base + static_cast<std::size_t>(i2)] += src[row_off + idx];
                } else {
                  dst[row_off + idx] = in2 ? src[base + static_cast<std::size_t>(i2)] : 0.0;
                }
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

void im2col(const double* big_side, const Geometry& geo, double* col) {
  window_pass<false>(geo, big_side, col);
}

void col2im(const double* col, const Geometry& geo, double* big_side) {
  window_pass<true>(geo, col, big_side);
}

}  // namespace sharpseg::detail
