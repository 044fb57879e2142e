#pragma once

// Thin FFTW wrapper. Plans are created once per size under a lock and then
// executed with the new-array interface, so calls are safe from any thread.

#include <complex>
#include <span>
#include <vector>

namespace foaground::fft {

// Real-to-complex transform of length n = input.size(); returns n/2 + 1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> input);

// Inverse of rfft for an output of length n, including the 1/n scaling.
std::vector<double> irfft(std::span<const std::complex<double>> bins, std::size_t n);

}  // namespace foaground::fft
