#ifndef PRIMEQ_FFT_HPP
#define PRIMEQ_FFT_HPP

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

namespace primeq::detail {

/// FFTW plans for one horizontal plane of size nx by ny (x fastest).
/// Plans are created once per size and shared; execution on distinct
/// arrays is thread-safe.
class PlaneFft {
 public:
  PlaneFft(int nx, int ny) : nx_(nx), ny_(ny) {
    const int nxh = nx / 2 + 1;
    double* real = fftw_alloc_real(static_cast<size_t>(nx) * ny);
    fftw_complex* spec = fftw_alloc_complex(static_cast<size_t>(nxh) * ny);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_r2c_2d(ny, nx, real, spec, flags);
    inverse_ = fftw_plan_dft_c2r_2d(ny, nx, spec, real, flags);
    fftw_free(real);
    fftw_free(spec);
  }
  PlaneFft(const PlaneFft&) = delete;
  PlaneFft& operator=(const PlaneFft&) = delete;
  ~PlaneFft() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  int spectral_size() const { return (nx_ / 2 + 1) * ny_; }

  // Unnormalized forward transform.
  void forward(const double* in, std::complex<double>* out) const {
    fftw_execute_dft_r2c(forward_, const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
  }

  // Unnormalized inverse; the input is preserved.
  void inverse(const std::complex<double>* in, double* out) const {
    thread_local std::vector<std::complex<double>> scratch;
    scratch.assign(in, in + spectral_size());
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(scratch.data()), out);
  }

  static const PlaneFft& get(int nx, int ny) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::unique_ptr<PlaneFft>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{nx, ny}];
    if (!slot) slot = std::make_unique<PlaneFft>(nx, ny);
    return *slot;
  }

 private:
  int nx_;
  int ny_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace primeq::detail

#endif  // PRIMEQ_FFT_HPP
