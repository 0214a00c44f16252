// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace symse::dsp {

// Real-input FFT of a fixed even size, backed by FFTW. Plans are created once
// per size behind a lock; execution is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t size);

  std::size_t size() const { return size_; }
  std::size_t bins() const { return size_ / 2 + 1; }

  // in: size() samples; out: bins() values. Unnormalized.
  void forward(std::span<const double> in, std::span<std::complex<double>> out) const;
  // in: bins() values; out: size() samples, scaled by 1/size() so that
  // inverse(forward(x)) == x.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) const;

 private:
  std::size_t size_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace symse::dsp
