#include "fermik/fft.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fermik {

namespace {

void fft_pow2(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n < 2) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / double(len);
    const cdouble wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        cdouble u = a[i + j];
        cdouble v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= double(n);
  }
}

// Bluestein: turns a length-n DFT into a cyclic convolution of length m >= 2n-1.
void fft_bluestein(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  std::size_t m = std::bit_ceil(2 * n + 1);
  std::vector<cdouble> chirp(n);
  const double sgn = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle well conditioned for large n
    std::size_t k2 = (k * k) % (2 * n);
    double ang = sgn * std::numbers::pi * double(k2) / double(n);
    chirp[k] = cdouble(std::cos(ang), std::sin(ang));
  }
  std::vector<cdouble> x(m, cdouble(0.0)), y(m, cdouble(0.0));
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);
  fft_pow2(x, false);
  fft_pow2(y, false);
  for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
  fft_pow2(x, true);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  if (inverse) {
    for (auto& v : a) v /= double(n);
  }
}

}  // namespace

void fft(std::vector<cdouble>& a, bool inverse) {
  if (a.empty()) return;
  if (std::has_single_bit(a.size()))
    fft_pow2(a, inverse);
  else
    fft_bluestein(a, inverse);
}

void fft_nd(std::vector<cdouble>& a, const std::vector<int>& dims, bool inverse) {
  std::size_t total = 1;
  for (int d : dims) total *= std::size_t(d);
  if (total != a.size()) throw std::invalid_argument("fft_nd: size mismatch");
  std::size_t stride = 1;
  for (int axis = int(dims.size()) - 1; axis >= 0; --axis) {
    const std::size_t n = std::size_t(dims[axis]);
    std::vector<cdouble> line(n);
    const std::size_t block = stride * n;
    for (std::size_t base = 0; base < total; base += block) {
      for (std::size_t off = 0; off < stride; ++off) {
        for (std::size_t i = 0; i < n; ++i) line[i] = a[base + off + i * stride];
        fft(line, inverse);
        for (std::size_t i = 0; i < n; ++i) a[base + off + i * stride] = line[i];
      }
    }
    stride = block;
  }
}

}  // namespace fermik
