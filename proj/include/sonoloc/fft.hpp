#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace sonoloc {

// Fixed-size complex FFT backed by FFTW. The inverse transform is
// normalized by 1/n so that inverse(forward(x)) == x.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();

  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const { return n_; }

  void forward(const std::complex<double>* in, std::complex<double>* out) const;
  void inverse(const std::complex<double>* in, std::complex<double>* out) const;

  // Forward transform of a real signal (imaginary parts set to zero).
  std::vector<std::complex<double>> forward_real(const std::vector<double>& in) const;

 private:
  std::size_t n_;
  void* plan_forward_;
  void* plan_inverse_;
  std::complex<double>* buf_in_;
  std::complex<double>* buf_out_;
};

}  // namespace sonoloc
