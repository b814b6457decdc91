// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_FFT_H_
#define NITCG_FFT_H_

#include <complex>
#include <cstddef>
#include <vector>

namespace nitcg::dsp {

// Real-input DFT of a fixed size backed by FFTW. Plans are cached per size;
// execution is safe from several threads.
class RealFft {
 public:
  explicit RealFft(std::size_t n);

  std::size_t size() const { return n_; }
  // n real samples -> n/2 + 1 bins, unnormalised.
  void forward(const double* in, std::complex<double>* out) const;
  // n/2 + 1 bins -> n real samples, scaled by 1/n.
  void inverse(const std::complex<double>* in, double* out) const;

 private:
  std::size_t n_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace nitcg::dsp

#endif  // NITCG_FFT_H_
