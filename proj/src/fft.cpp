#include "rgflow/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>

namespace rg {

namespace {
std::mutex g_plan_mutex;  // FFTW planning is not thread safe
}

struct Fft::Plans {
  fftw_plan fwd = nullptr, bwd = nullptr;
  fftw_complex* scratch = nullptr;
};

Fft::Fft(const Torus& t) : n_(t.sites()), plans_(std::make_unique<Plans>()) {
  std::vector<int> dims(t.d(), static_cast<int>(t.side()));
  std::lock_guard lock(g_plan_mutex);
  plans_->scratch = fftw_alloc_complex(n_);
  plans_->fwd = fftw_plan_dft(t.d(), dims.data(), plans_->scratch, plans_->scratch, FFTW_FORWARD, FFTW_ESTIMATE);
  plans_->bwd = fftw_plan_dft(t.d(), dims.data(), plans_->scratch, plans_->scratch, FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft::~Fft() {
  std::lock_guard lock(g_plan_mutex);
  fftw_destroy_plan(plans_->fwd);
  fftw_destroy_plan(plans_->bwd);
  fftw_free(plans_->scratch);
}

namespace {
// new-array execution needs the same alignment as the planning buffer; copy through an aligned buffer
void run(fftw_plan p, std::span<std::complex<double>> v, long n) {
  fftw_complex* buf = fftw_alloc_complex(n);
  std::memcpy(buf, v.data(), sizeof(fftw_complex) * n);
  fftw_execute_dft(p, buf, buf);
  std::memcpy(static_cast<void*>(v.data()), buf, sizeof(fftw_complex) * n);
  fftw_free(buf);
}
}  // namespace

void Fft::forward(std::span<std::complex<double>> v) const { run(plans_->fwd, v, n_); }
void Fft::backward(std::span<std::complex<double>> v) const { run(plans_->bwd, v, n_); }

std::vector<std::complex<double>> Fft::forward_real(std::span<const double> v) const {
  std::vector<std::complex<double>> c(v.begin(), v.end());
  forward(c);
  return c;
}

std::vector<double> Fft::inverse_real(std::span<const std::complex<double>> v) const {
  std::vector<std::complex<double>> c(v.begin(), v.end());
  backward(c);
  std::vector<double> r(n_);
  for (long i = 0; i < n_; ++i) r[i] = c[i].real() / static_cast<double>(n_);
  return r;
}

std::vector<std::vector<double>> momenta(const Torus& t) {
  std::vector<std::vector<double>> out(t.sites(), std::vector<double>(t.d()));
  const double two_pi = 2.0 * std::acos(-1.0);
  for (long x = 0; x < t.sites(); ++x) {
    auto u = t.coords(x);
    for (int i = 0; i < t.d(); ++i) {
      long v = u[i] > t.side() / 2 ? u[i] - t.side() : u[i];
      out[x][i] = two_pi * static_cast<double>(v) / static_cast<double>(t.side());
    }
  }
  return out;
}

}  // namespace rg
