#pragma once

#include <complex>
#include <vector>

namespace fermik {

using cdouble = std::complex<double>;

// In-place DFT of arbitrary length (radix-2 with a Bluestein fallback).
// Forward convention: X[k] = sum_n x[n] e^{-2pi i kn/N}. The inverse carries
// the 1/N normalisation.
void fft(std::vector<cdouble>& a, bool inverse);

// Row-major multidimensional transform, one pass per axis.
void fft_nd(std::vector<cdouble>& a, const std::vector<int>& dims, bool inverse);

}  // namespace fermik
