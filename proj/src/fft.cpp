#include "sonoloc/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <stdexcept>

namespace sonoloc {

Fft::Fft(std::size_t n) : n_(n) {
  if (n == 0) throw std::invalid_argument("Fft: size must be positive");
  buf_in_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n));
  buf_out_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n));
  if (!buf_in_ || !buf_out_) throw std::bad_alloc();
  plan_forward_ = fftw_plan_dft_1d(static_cast<int>(n),
                                   reinterpret_cast<fftw_complex*>(buf_in_),
                                   reinterpret_cast<fftw_complex*>(buf_out_),
                                   FFTW_FORWARD, FFTW_ESTIMATE);
  plan_inverse_ = fftw_plan_dft_1d(static_cast<int>(n),
                                   reinterpret_cast<fftw_complex*>(buf_in_),
                                   reinterpret_cast<fftw_complex*>(buf_out_),
                                   FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft::~Fft() {
  fftw_destroy_plan(static_cast<fftw_plan>(plan_forward_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_inverse_));
  fftw_free(buf_in_);
  fftw_free(buf_out_);
}

void Fft::forward(const std::complex<double>* in, std::complex<double>* out) const {
  std::copy(in, in + n_, buf_in_);
  fftw_execute(static_cast<fftw_plan>(plan_forward_));
  std::copy(buf_out_, buf_out_ + n_, out);
}

void Fft::inverse(const std::complex<double>* in, std::complex<double>* out) const {
  std::copy(in, in + n_, buf_in_);
  fftw_execute(static_cast<fftw_plan>(plan_inverse_));
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = buf_out_[i] * scale;
}

std::vector<std::complex<double>> Fft::forward_real(const std::vector<double>& in) const {
  if (in.size() != n_) throw std::invalid_argument("Fft: input length mismatch");
  std::vector<std::complex<double>> spectrum(n_);
  for (std::size_t i = 0; i < n_; ++i) buf_in_[i] = std::complex<double>(in[i], 0.0);
  fftw_execute(static_cast<fftw_plan>(plan_forward_));
  std::copy(buf_out_, buf_out_ + n_, spectrum.begin());
  return spectrum;
}

}  // namespace sonoloc
