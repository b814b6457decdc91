// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/fft.h"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "nitcg/error.h"

namespace nitcg::dsp {

namespace {

struct Plans {
  fftw_plan forward;
  fftw_plan inverse;
};

// FFTW's planner is not thread-safe; plans live for the process lifetime.
std::mutex g_plan_mutex;
std::map<std::size_t, Plans> g_plans;

Plans plans_for(std::size_t n) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto it = g_plans.find(n);
  if (it != g_plans.end()) return it->second;
  std::vector<double> real(n);
  std::vector<std::complex<double>> spec(n / 2 + 1);
  auto* cplx = reinterpret_cast<fftw_complex*>(spec.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  const int size = static_cast<int>(n);
  Plans p{fftw_plan_dft_r2c_1d(size, real.data(), cplx, flags),
          fftw_plan_dft_c2r_1d(size, cplx, real.data(), flags)};
  g_plans.emplace(n, p);
  return p;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2 || n % 2 != 0) throw InputError("FFT size must be even and >= 2");
  Plans p = plans_for(n);
  forward_plan_ = p.forward;
  inverse_plan_ = p.inverse;
}

void RealFft::forward(const double* in, std::complex<double>* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void RealFft::inverse(const std::complex<double>* in, double* out) const {
  // c2r destroys its input.
  std::vector<std::complex<double>> scratch(in, in + n_ / 2 + 1);
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(scratch.data()), out);
  const double inv = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] *= inv;
}

}  // namespace nitcg::dsp
