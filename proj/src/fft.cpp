// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "symse/errors.hpp"

namespace symse::dsp {

namespace {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Plans live for the whole process; FFTW's planner is not re-entrant.
PlanPair plans_for(std::size_t n) {
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> real(n);
  std::vector<fftw_complex> cplx(n / 2 + 1);
  const int size = static_cast<int>(n);
  PlanPair p;
  p.forward = fftw_plan_dft_r2c_1d(size, real.data(), cplx.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.inverse = fftw_plan_dft_c2r_1d(size, cplx.data(), real.data(),
                                   FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
  cache.emplace(n, p);
  return p;
}

}  // namespace

RealFft::RealFft(std::size_t size) : size_(size) {
  SYMSE_REQUIRE(size >= 2 && size % 2 == 0, "fft: size must be even and >= 2");
  PlanPair p = plans_for(size);
  forward_plan_ = p.forward;
  inverse_plan_ = p.inverse;
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) const {
  SYMSE_REQUIRE(in.size() == size_ && out.size() == bins(), "fft: buffer size mismatch");
  std::vector<double> buf(in.begin(), in.end());
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), buf.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) const {
  SYMSE_REQUIRE(in.size() == bins() && out.size() == size_, "ifft: buffer size mismatch");
  // c2r destroys its input.
  std::vector<std::complex<double>> buf(in.begin(), in.end());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), reinterpret_cast<fftw_complex*>(buf.data()),
                       out.data());
  const double s = 1.0 / static_cast<double>(size_);
  for (double& v : out) v *= s;
}

}  // namespace symse::dsp
