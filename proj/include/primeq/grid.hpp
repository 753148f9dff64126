#ifndef PRIMEQ_GRID_HPP
#define PRIMEQ_GRID_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "primeq/fft.hpp"

namespace primeq {

using Complex = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

/// Slab geometry (-1,1)^2 x (-h,h). The horizontal period is 2 in both
/// directions; the vertical grid is uniform and includes z = +-h.
struct DomainSpec {
  double half_height = 1.0;
  int nx = 16;
  int ny = 16;
  int nz = 17;

  void validate() const {
    std::string err;
    if (!(half_height > 0.0) || !std::isfinite(half_height)) err += " half_height must be positive;";
    if (nx <= 0 || nx % 2 != 0) err += " nx must be even and positive;";
    if (ny <= 0 || ny % 2 != 0) err += " ny must be even and positive;";
    if (nz < 4) err += " nz must be at least 4;";
    if (!err.empty()) throw std::invalid_argument("invalid domain:" + err);
  }

  double dx() const { return 2.0 / nx; }
  double dy() const { return 2.0 / ny; }
  double dz() const { return 2.0 * half_height / (nz - 1); }
  double x(int i) const { return -1.0 + i * dx(); }
  double y(int j) const { return -1.0 + j * dy(); }
  double z(int k) const { return -half_height + k * dz(); }
  double cell_area() const { return dx() * dy(); }
  double area() const { return 4.0; }
  double volume() const { return 8.0 * half_height; }
  std::size_t plane_size() const { return static_cast<std::size_t>(nx) * ny; }
  int nx_half() const { return nx / 2 + 1; }
  std::size_t spectral_plane_size() const { return static_cast<std::size_t>(nx_half()) * ny; }

  bool operator==(const DomainSpec&) const = default;
};

/// Real samples of a horizontally periodic field. Dim == 3 holds nz levels,
/// Dim == 2 a single plane. Storage is x fastest, then y, then z, one block
/// per component.
template <int Dim>
class BasicField {
  static_assert(Dim == 2 || Dim == 3);

 public:
  static constexpr int dimension = Dim;

  BasicField() = default;
  explicit BasicField(const DomainSpec& domain, int components = 1)
      : domain_(domain), components_(components),
        data_(static_cast<std::size_t>(components) * block_size_of(domain), 0.0) {}

  const DomainSpec& domain() const { return domain_; }
  int components() const { return components_; }
  int levels() const { return Dim == 3 ? domain_.nz : 1; }
  std::size_t block_size() const { return block_size_of(domain_); }
  std::size_t size() const { return data_.size(); }

  std::span<double> component(int c) {
    return {data_.data() + c * block_size(), block_size()};
  }
  std::span<const double> component(int c) const {
    return {data_.data() + c * block_size(), block_size()};
  }
  std::span<double> level(int c, int k) {
    return {data_.data() + c * block_size() + k * domain_.plane_size(), domain_.plane_size()};
  }
  std::span<const double> level(int c, int k) const {
    return {data_.data() + c * block_size() + k * domain_.plane_size(), domain_.plane_size()};
  }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator()(int c, int i, int j, int k = 0) { return data_[index(c, i, j, k)]; }
  double operator()(int c, int i, int j, int k = 0) const { return data_[index(c, i, j, k)]; }

  std::size_t index(int c, int i, int j, int k = 0) const {
    return c * block_size() + (static_cast<std::size_t>(k) * domain_.ny + j) * domain_.nx + i;
  }

  /// Fill from f(component, x, y, z); z is ignored for 2D fields.
  template <class F>
  static BasicField sample(const DomainSpec& domain, int components, F&& f) {
    BasicField out(domain, components);
    for (int c = 0; c < components; ++c)
      for (int k = 0; k < out.levels(); ++k)
        for (int j = 0; j < domain.ny; ++j)
          for (int i = 0; i < domain.nx; ++i)
            out(c, i, j, k) = f(c, domain.x(i), domain.y(j), Dim == 3 ? domain.z(k) : 0.0);
    return out;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  BasicField& operator+=(const BasicField& o) {
    check_same(o);
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
    return *this;
  }
  BasicField& operator-=(const BasicField& o) {
    check_same(o);
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] -= o.data_[n];
    return *this;
  }
  BasicField& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }
  /// this += s * o
  BasicField& axpy(double s, const BasicField& o) {
    check_same(o);
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += s * o.data_[n];
    return *this;
  }

  friend BasicField operator+(BasicField a, const BasicField& b) { return a += b; }
  friend BasicField operator-(BasicField a, const BasicField& b) { return a -= b; }
  friend BasicField operator*(double s, BasicField a) { return a *= s; }

  bool operator==(const BasicField&) const = default;

 private:
  static std::size_t block_size_of(const DomainSpec& d) {
    return d.plane_size() * static_cast<std::size_t>(Dim == 3 ? d.nz : 1);
  }
  void check_same(const BasicField& o) const {
    if (o.components_ != components_ || !(o.domain_ == domain_))
      throw std::invalid_argument("field shape mismatch");
  }

  DomainSpec domain_{};
  int components_ = 0;
  std::vector<double> data_;
};

using Field3D = BasicField<3>;
using Field2D = BasicField<2>;

/// Horizontal Fourier coefficients, half spectrum in x (0..nx/2) and full in y.
/// Coefficients are mode amplitudes with phase measured from the grid origin:
/// f(x,y) = sum_k c_k exp(i(kx (x+1) + ky (y+1))), wavenumbers integer multiples of pi.
template <int Dim>
class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(const DomainSpec& domain, int components)
      : domain_(domain), components_(components),
        data_(static_cast<std::size_t>(components) * block_size_of(domain)) {}

  const DomainSpec& domain() const { return domain_; }
  int components() const { return components_; }
  int levels() const { return Dim == 3 ? domain_.nz : 1; }
  std::size_t block_size() const { return block_size_of(domain_); }

  std::span<Complex> level(int c, int k) {
    return {data_.data() + c * block_size() + k * domain_.spectral_plane_size(),
            domain_.spectral_plane_size()};
  }
  std::span<const Complex> level(int c, int k) const {
    return {data_.data() + c * block_size() + k * domain_.spectral_plane_size(),
            domain_.spectral_plane_size()};
  }
  std::span<Complex> values() { return data_; }
  std::span<const Complex> values() const { return data_; }

  /// Stored entry for x index m in [0, nx/2] and y row n in [0, ny).
  Complex& at(int c, int k, int m, int n) { return level(c, k)[n * domain_.nx_half() + m]; }
  Complex at(int c, int k, int m, int n) const { return level(c, k)[n * domain_.nx_half() + m]; }

  /// Coefficient of the signed mode (p, q), i.e. wavenumber (p pi, q pi).
  /// Negative p are recovered from Hermitian symmetry.
  Complex coefficient(int c, int k, int p, int q) const {
    const int nx = domain_.nx, ny = domain_.ny;
    auto wrap = [](int v, int n) { return ((v % n) + n) % n; };
    if (p < 0) return std::conj(at(c, k, wrap(-p, nx), wrap(-q, ny)));
    return at(c, k, wrap(p, nx), wrap(q, ny));
  }

 private:
  static std::size_t block_size_of(const DomainSpec& d) {
    return d.spectral_plane_size() * static_cast<std::size_t>(Dim == 3 ? d.nz : 1);
  }

  DomainSpec domain_{};
  int components_ = 0;
  std::vector<Complex> data_;
};

using SpectralField3D = SpectralField<3>;
using SpectralField2D = SpectralField<2>;

/// Signed integer mode index of stored x column m (always >= 0).
inline int mode_x(const DomainSpec&, int m) { return m; }
/// Signed integer mode index of stored y row n; the Nyquist row is taken positive.
inline int mode_y(const DomainSpec& d, int n) { return n <= d.ny / 2 ? n : n - d.ny; }
inline double wavenumber_x(const DomainSpec& d, int m) { return pi * mode_x(d, m); }
inline double wavenumber_y(const DomainSpec& d, int n) { return pi * mode_y(d, n); }
inline bool is_nyquist_x(const DomainSpec& d, int m) { return m == d.nx / 2; }
inline bool is_nyquist_y(const DomainSpec& d, int n) { return n == d.ny / 2; }

template <int Dim>
SpectralField<Dim> forward_transform(const BasicField<Dim>& f) {
  const DomainSpec& d = f.domain();
  SpectralField<Dim> out(d, f.components());
  const auto& fft = detail::PlaneFft::get(d.nx, d.ny);
  const double scale = 1.0 / static_cast<double>(d.plane_size());
  const int planes = f.components() * f.levels();
#pragma omp parallel for schedule(static)
  for (int pl = 0; pl < planes; ++pl) {
    const int c = pl / f.levels(), k = pl % f.levels();
    auto dst = out.level(c, k);
    fft.forward(f.level(c, k).data(), dst.data());
    for (auto& v : dst) v *= scale;
  }
  return out;
}

template <int Dim>
BasicField<Dim> inverse_transform(const SpectralField<Dim>& s) {
  const DomainSpec& d = s.domain();
  BasicField<Dim> out(d, s.components());
  const auto& fft = detail::PlaneFft::get(d.nx, d.ny);
  const int planes = s.components() * s.levels();
#pragma omp parallel for schedule(static)
  for (int pl = 0; pl < planes; ++pl) {
    const int c = pl / s.levels(), k = pl % s.levels();
    fft.inverse(s.level(c, k).data(), out.level(c, k).data());
  }
  return out;
}

/// True if the signed mode (p, q) is removed by the 2/3 rule.
inline bool is_dealiased_out(const DomainSpec& d, int p, int q) {
  return 3 * std::abs(p) > d.nx || 3 * std::abs(q) > d.ny;
}

/// Zero every coefficient with |kx|/pi > nx/3 or |ky|/pi > ny/3.
template <int Dim>
SpectralField<Dim> dealias(SpectralField<Dim> s) {
  const DomainSpec& d = s.domain();
  for (int c = 0; c < s.components(); ++c)
    for (int k = 0; k < s.levels(); ++k)
      for (int n = 0; n < d.ny; ++n)
        for (int m = 0; m < d.nx_half(); ++m)
          if (is_dealiased_out(d, mode_x(d, m), mode_y(d, n))) s.at(c, k, m, n) = 0.0;
  return s;
}

/// Physical-space convenience: transform, truncate, transform back.
template <int Dim>
BasicField<Dim> dealias(const BasicField<Dim>& f) {
  return inverse_transform(dealias(forward_transform(f)));
}

/// Sum over the full spectrum of |c_k|^2 on one level; half-spectrum columns
/// other than kx = 0 and the x-Nyquist column stand for two modes.
template <int Dim>
double spectral_energy(const SpectralField<Dim>& s, int c, int k) {
  const DomainSpec& d = s.domain();
  double sum = 0.0;
  for (int n = 0; n < d.ny; ++n)
    for (int m = 0; m < d.nx_half(); ++m) {
      const double mult = (m == 0 || is_nyquist_x(d, m)) ? 1.0 : 2.0;
      sum += mult * std::norm(s.at(c, k, m, n));
    }
  return sum;
}

}  // namespace primeq

#endif  // PRIMEQ_GRID_HPP
