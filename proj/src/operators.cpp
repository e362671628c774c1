#include "elfpie/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace elfpie::ops {
namespace {

inline std::size_t wrap_next(std::size_t i, std::size_t n) { return i + 1 == n ? 0 : i + 1; }
inline std::size_t wrap_prev(std::size_t i, std::size_t n) { return i == 0 ? n - 1 : i - 1; }

// c / sqrt(c^2 + e^2): the sign map for |c| >> e, exactly 0 at 0.
inline double smooth_sign(double v, double eps2) { return v / std::sqrt(v * v + eps2); }
// sqrt(c^2 + e^2) - e, whose derivative is smooth_sign.
inline double smooth_abs(double v, double eps) { return v * v / (std::sqrt(v * v + eps * eps) + eps); }

std::size_t resolve_index(long i, std::size_t n, Boundary boundary) {
  const long len = static_cast<long>(n);
  if (boundary == Boundary::periodic) {
    long r = i % len;
    return static_cast<std::size_t>(r < 0 ? r + len : r);
  }
  if (i < 0) return 0;
  if (i >= len) return n - 1;
  return static_cast<std::size_t>(i);
}

template <typename T>
Plane<T> convolve_impl(const Plane<T>& img, const Kernel& kernel, Boundary boundary) {
  if (kernel.size % 2 == 0 || kernel.taps.size() != kernel.size * kernel.size) {
    throw std::invalid_argument("convolve: kernel must be odd-sized and square");
  }
  if (kernel.size > img.width() || kernel.size > img.height()) {
    throw std::invalid_argument("convolve: kernel larger than image");
  }
  const long r = static_cast<long>(kernel.size / 2);
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  Plane<T> out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      T acc{};
      for (std::size_t j = 0; j < kernel.size; ++j) {
        const std::size_t sy = resolve_index(static_cast<long>(y) + static_cast<long>(j) - r, h, boundary);
        for (std::size_t i = 0; i < kernel.size; ++i) {
          const std::size_t sx = resolve_index(static_cast<long>(x) + static_cast<long>(i) - r, w, boundary);
          acc += kernel(i, j) * img(sx, sy);
        }
      }
      out(x, y) = acc;
    }
  }
  return out;
}

}  // namespace

template <typename T>
VectorField2<T> grad(const Plane<T>& img) {
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  VectorField2<T> g{Plane<T>(w, h), Plane<T>(w, h)};
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t yn = wrap_next(y, h);
    for (std::size_t x = 0; x < w; ++x) {
      const T v = img(x, y);
      g.x(x, y) = img(wrap_next(x, w), y) - v;
      g.y(x, y) = img(x, yn) - v;
    }
  }
  return g;
}

template <typename T>
Plane<T> grad_adjoint(const VectorField2<T>& v) {
  require_same_shape(v.x, v.y, "grad_adjoint");
  const std::size_t w = v.x.width();
  const std::size_t h = v.x.height();
  Plane<T> out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t yp = wrap_prev(y, h);
    for (std::size_t x = 0; x < w; ++x) {
      out(x, y) = v.x(wrap_prev(x, w), y) - v.x(x, y) + v.y(x, yp) - v.y(x, y);
    }
  }
  return out;
}

template <typename T>
HessianField3<T> hessian(const Plane<T>& img) {
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  HessianField3<T> out{Plane<T>(w, h), Plane<T>(w, h), Plane<T>(w, h)};
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t yn = wrap_next(y, h);
    const std::size_t yp = wrap_prev(y, h);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t xn = wrap_next(x, w);
      const std::size_t xp = wrap_prev(x, w);
      const T c = img(x, y);
      out.xx(x, y) = img(xn, y) - 2.0 * c + img(xp, y);
      out.yy(x, y) = img(x, yn) - 2.0 * c + img(x, yp);
      out.xy(x, y) = img(xn, yn) - img(xn, y) - img(x, yn) + c;
    }
  }
  return out;
}

template <typename T>
Plane<T> hessian_adjoint(const HessianField3<T>& hf) {
  require_same_shape(hf.xx, hf.yy, "hessian_adjoint");
  require_same_shape(hf.xx, hf.xy, "hessian_adjoint");
  const std::size_t w = hf.xx.width();
  const std::size_t h = hf.xx.height();
  Plane<T> out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t yn = wrap_next(y, h);
    const std::size_t yp = wrap_prev(y, h);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t xn = wrap_next(x, w);
      const std::size_t xp = wrap_prev(x, w);
      // Second differences are self-adjoint; the mixed term transposes to
      // backward differences.
      const T sxx = hf.xx(xn, y) - 2.0 * hf.xx(x, y) + hf.xx(xp, y);
      const T syy = hf.yy(x, yn) - 2.0 * hf.yy(x, y) + hf.yy(x, yp);
      const T sxy = hf.xy(xp, yp) - hf.xy(xp, y) - hf.xy(x, yp) + hf.xy(x, y);
      out(x, y) = sxx + syy + sxy;
    }
  }
  return out;
}

template VectorField2<double> grad(const Plane<double>&);
template VectorField2<Complex> grad(const Plane<Complex>&);
template Plane<double> grad_adjoint(const VectorField2<double>&);
template Plane<Complex> grad_adjoint(const VectorField2<Complex>&);
template HessianField3<double> hessian(const Plane<double>&);
template HessianField3<Complex> hessian(const Plane<Complex>&);
template Plane<double> hessian_adjoint(const HessianField3<double>&);
template Plane<Complex> hessian_adjoint(const HessianField3<Complex>&);

VectorField2<double> omega(const VectorField2<double>& v, OmegaMode mode, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("omega: epsilon must be positive");
  VectorField2<double> out{RealPlane(v.x.width(), v.x.height()),
                           RealPlane(v.x.width(), v.x.height())};
  const double eps2 = epsilon * epsilon;
  for (std::size_t i = 0; i < v.x.size(); ++i) {
    if (mode == OmegaMode::anisotropic) {
      out.x[i] = smooth_sign(v.x[i], eps2);
      out.y[i] = smooth_sign(v.y[i], eps2);
    } else {
      const double norm = std::sqrt(kGradWeights[0] * v.x[i] * v.x[i] +
                                    kGradWeights[1] * v.y[i] * v.y[i] + eps2);
      out.x[i] = v.x[i] / norm;
      out.y[i] = v.y[i] / norm;
    }
  }
  return out;
}

HessianField3<double> omega(const HessianField3<double>& hf, OmegaMode mode, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("omega: epsilon must be positive");
  const std::size_t w = hf.xx.width();
  const std::size_t h = hf.xx.height();
  HessianField3<double> out{RealPlane(w, h), RealPlane(w, h), RealPlane(w, h)};
  const double eps2 = epsilon * epsilon;
  for (std::size_t i = 0; i < hf.xx.size(); ++i) {
    if (mode == OmegaMode::anisotropic) {
      out.xx[i] = smooth_sign(hf.xx[i], eps2);
      out.yy[i] = smooth_sign(hf.yy[i], eps2);
      out.xy[i] = smooth_sign(hf.xy[i], eps2);
    } else {
      const double norm = std::sqrt(kHessianWeights[0] * hf.xx[i] * hf.xx[i] +
                                    kHessianWeights[1] * hf.yy[i] * hf.yy[i] +
                                    kHessianWeights[2] * hf.xy[i] * hf.xy[i] + eps2);
      out.xx[i] = hf.xx[i] / norm;
      out.yy[i] = hf.yy[i] / norm;
      out.xy[i] = hf.xy[i] / norm;
    }
  }
  return out;
}

double l1_norm(const VectorField2<double>& v, OmegaMode mode, double epsilon) {
  double total = 0.0;
  for (std::size_t i = 0; i < v.x.size(); ++i) {
    if (mode == OmegaMode::anisotropic) {
      total += kGradWeights[0] * smooth_abs(v.x[i], epsilon) + kGradWeights[1] * smooth_abs(v.y[i], epsilon);
    } else {
      const double s = kGradWeights[0] * v.x[i] * v.x[i] + kGradWeights[1] * v.y[i] * v.y[i];
      // sqrt(s + e^2) - e, written to stay accurate when s << e^2
      total += s / (std::sqrt(s + epsilon * epsilon) + epsilon);
    }
  }
  return total;
}

double l1_norm(const HessianField3<double>& hf, OmegaMode mode, double epsilon) {
  double total = 0.0;
  for (std::size_t i = 0; i < hf.xx.size(); ++i) {
    if (mode == OmegaMode::anisotropic) {
      total += kHessianWeights[0] * smooth_abs(hf.xx[i], epsilon) +
               kHessianWeights[1] * smooth_abs(hf.yy[i], epsilon) +
               kHessianWeights[2] * smooth_abs(hf.xy[i], epsilon);
    } else {
      const double s = kHessianWeights[0] * hf.xx[i] * hf.xx[i] +
                       kHessianWeights[1] * hf.yy[i] * hf.yy[i] +
                       kHessianWeights[2] * hf.xy[i] * hf.xy[i];
      total += s / (std::sqrt(s + epsilon * epsilon) + epsilon);
    }
  }
  return total;
}

RealPlane convolve(const RealPlane& img, const Kernel& kernel, Boundary boundary) {
  return convolve_impl(img, kernel, boundary);
}

ComplexField convolve(const ComplexField& img, const Kernel& kernel, Boundary boundary) {
  return convolve_impl(img, kernel, boundary);
}

Kernel gaussian_kernel(std::size_t size, double sigma) {
  if (size % 2 == 0) throw std::invalid_argument("gaussian_kernel: size must be odd");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  Kernel k{size, std::vector<double>(size * size)};
  const double r = static_cast<double>(size / 2);
  double sum = 0.0;
  for (std::size_t j = 0; j < size; ++j) {
    for (std::size_t i = 0; i < size; ++i) {
      const double dx = static_cast<double>(i) - r;
      const double dy = static_cast<double>(j) - r;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k.taps[j * size + i] = v;
      sum += v;
    }
  }
  for (double& t : k.taps) t /= sum;
  return k;
}

Kernel laplacian_kernel() {
  return Kernel{3, {-1.0, 2.0, -1.0, -2.0, 4.0, -2.0, -1.0, 2.0, -1.0}};
}

RealPlane gaussian_blur(const RealPlane& img, double sigma, Boundary boundary) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_blur: sigma must be positive");
  const long r = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (long i = -r; i <= r; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (double& t : taps) t /= sum;

  const std::size_t w = img.width();
  const std::size_t h = img.height();
  RealPlane rows(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long i = -r; i <= r; ++i) {
        acc += taps[static_cast<std::size_t>(i + r)] *
               img(resolve_index(static_cast<long>(x) + i, w, boundary), y);
      }
      rows(x, y) = acc;
    }
  }
  RealPlane out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long i = -r; i <= r; ++i) {
        acc += taps[static_cast<std::size_t>(i + r)] *
               rows(x, resolve_index(static_cast<long>(y) + i, h, boundary));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

}  // namespace elfpie::ops
