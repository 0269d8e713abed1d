#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "rgflow/lattice.hpp"

namespace rg {

// Complex DFT over the torus sites in their row-major order.
// forward: sum_x v(x) e^{-i p.x};  backward: sum_p v(p) e^{+i p.x} (unnormalised).
class Fft {
 public:
  explicit Fft(const Torus& t);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  long size() const { return n_; }
  void forward(std::span<std::complex<double>> v) const;
  void backward(std::span<std::complex<double>> v) const;

  std::vector<std::complex<double>> forward_real(std::span<const double> v) const;
  // real part of backward(v) / size
  std::vector<double> inverse_real(std::span<const std::complex<double>> v) const;

 private:
  struct Plans;
  long n_;
  std::unique_ptr<Plans> plans_;
};

// Lattice momenta p = 2 pi u / side for every site index (components in (-pi, pi]).
std::vector<std::vector<double>> momenta(const Torus& t);

}  // namespace rg
