#pragma once

// 3x3 stride-1 zero-padded convolution on channel-last buffers. Weights are
// laid out [cout][cin][3][3].

#include <cstddef>

namespace sancdifi::detail {

inline void conv3x3_forward(const double* in, int h, int w, int cin, const double* weights,
                            const double* bias, int cout, double* out) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double* o = out + (static_cast<std::size_t>(y) * w + x) * cout;
      for (int k = 0; k < cout; ++k) o[k] = bias ? bias[k] : 0.0;
      for (int ky = 0; ky < 3; ++ky) {
        const int yy = y + ky - 1;
        if (yy < 0 || yy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int xx = x + kx - 1;
          if (xx < 0 || xx >= w) continue;
          const double* src = in + (static_cast<std::size_t>(yy) * w + xx) * cin;
          const int tap = ky * 3 + kx;
          for (int k = 0; k < cout; ++k) {
            const double* wk = weights + static_cast<std::size_t>(k) * cin * 9 + tap;
            double acc = 0.0;
            for (int c = 0; c < cin; ++c) acc += wk[c * 9] * src[c];
            o[k] += acc;
          }
        }
      }
    }
  }
}

// Accumulates into whichever of dweights / dbias / din is non-null.
inline void conv3x3_backward(const double* in, int h, int w, int cin, const double* weights,
                             int cout, const double* dout, double* dweights, double* dbias,
                             double* din) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double* g = dout + (static_cast<std::size_t>(y) * w + x) * cout;
      if (dbias) {
        for (int k = 0; k < cout; ++k) dbias[k] += g[k];
      }
      for (int ky = 0; ky < 3; ++ky) {
        const int yy = y + ky - 1;
        if (yy < 0 || yy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int xx = x + kx - 1;
          if (xx < 0 || xx >= w) continue;
          const std::size_t offset = (static_cast<std::size_t>(yy) * w + xx) * cin;
          const double* src = in + offset;
          double* dsrc = din ? din + offset : nullptr;
          const int tap = ky * 3 + kx;
          for (int k = 0; k < cout; ++k) {
            const double gk = g[k];
            if (gk == 0.0) continue;
            const std::size_t base = static_cast<std::size_t>(k) * cin * 9 + tap;
            if (dweights) {
              for (int c = 0; c < cin; ++c) dweights[base + c * 9] += gk * src[c];
            }
            if (dsrc) {
              for (int c = 0; c < cin; ++c) dsrc[c] += gk * weights[base + c * 9];
            }
          }
        }
      }
    }
  }
}

}  // namespace sancdifi::detail
