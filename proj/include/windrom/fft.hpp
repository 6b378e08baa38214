#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "windrom/core.hpp"

namespace windrom {

/// Thin RAII wrapper over an FFTW complex-to-complex plan of fixed length.
/// Plans are created with FFTW_ESTIMATE so planning is deterministic.  The
/// planner is not thread-safe; construct plans from one thread.
class FftPlan {
 public:
  FftPlan(std::size_t n, bool inverse) : n_(n), inverse_(inverse) {
    if (n == 0) raise(errc::invalid_argument, "fft length must be positive");
    in_ = fftw_alloc_complex(n);
    out_ = fftw_alloc_complex(n);
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), in_, out_,
                             inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  }

  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  ~FftPlan() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }

  std::size_t size() const { return n_; }

  /// Unnormalized transform; the inverse carries the conventional 1/n.
  void execute(std::span<const std::complex<double>> input,
               std::span<std::complex<double>> output) {
    if (input.size() != n_ || output.size() != n_)
      raise(errc::length_mismatch, "fft buffer length mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
      in_[i][0] = input[i].real();
      in_[i][1] = input[i].imag();
    }
    fftw_execute(plan_);
    const double scale = inverse_ ? 1.0 / static_cast<double>(n_) : 1.0;
    for (std::size_t i = 0; i < n_; ++i)
      output[i] = std::complex<double>(out_[i][0] * scale, out_[i][1] * scale);
  }

 private:
  std::size_t n_;
  bool inverse_;
  fftw_complex* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

/// One-shot forward DFT of a real sequence.
inline std::vector<std::complex<double>> real_dft(std::span<const double> x) {
  FftPlan plan(x.size(), false);
  std::vector<std::complex<double>> in(x.size()), out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) in[i] = {x[i], 0.0};
  plan.execute(in, out);
  return out;
}

}  // namespace windrom
