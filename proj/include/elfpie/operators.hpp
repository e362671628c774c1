#pragma once

// Finite-difference operators with periodic boundaries, their exact
// adjoints, the omega normalization and small-kernel correlation.

#include <cstddef>
#include <vector>

#include "elfpie/core.hpp"
#include "elfpie/plane.hpp"

namespace elfpie::ops {

template <typename T>
struct VectorField2 {
  Plane<T> x;
  Plane<T> y;
};

template <typename T>
struct HessianField3 {
  Plane<T> xx;
  Plane<T> yy;
  Plane<T> xy;
};

// Isotropic weights: the cross term counts twice because the symmetric
// Hessian carries both xy and yx.
inline constexpr double kGradWeights[2] = {1.0, 1.0};
inline constexpr double kHessianWeights[3] = {1.0, 1.0, 2.0};

// Forward differences: x(i) = f(i+1) - f(i), wrapping at the border.
template <typename T>
VectorField2<T> grad(const Plane<T>& img);
template <typename T>
Plane<T> grad_adjoint(const VectorField2<T>& v);

// xx = f(x+1) - 2f(x) + f(x-1), yy analogous,
// xy = f(x+1,y+1) - f(x+1,y) - f(x,y+1) + f(x,y).
template <typename T>
HessianField3<T> hessian(const Plane<T>& img);
template <typename T>
Plane<T> hessian_adjoint(const HessianField3<T>& h);

// Isotropic: every component divided by sqrt(sum_k w_k c_k^2 + eps^2).
// Anisotropic: every component c mapped to c / sqrt(c^2 + eps^2), the sign
// function smoothed at the same eps (exactly 0 at 0).
VectorField2<double> omega(const VectorField2<double>& v, OmegaMode mode, double epsilon);
HessianField3<double> omega(const HessianField3<double>& h, OmegaMode mode, double epsilon);

// Smoothed l1 norms whose gradients are exactly omega(...) weighted by w_k.
// Isotropic: sum_p (sqrt(sum_k w_k c_k^2 + eps^2) - eps).
// Anisotropic: sum_p sum_k w_k (sqrt(c_k^2 + eps^2) - eps).
double l1_norm(const VectorField2<double>& v, OmegaMode mode, double epsilon);
double l1_norm(const HessianField3<double>& h, OmegaMode mode, double epsilon);

struct Kernel {
  std::size_t size = 1;      // odd
  std::vector<double> taps;  // size * size, row-major

  double operator()(std::size_t i, std::size_t j) const { return taps[j * size + i]; }
};

enum class Boundary { periodic, replicate };

// out(x, y) = sum_{i,j} k(i, j) * img(x + i - r, y + j - r), r = size / 2.
// Correlation, no kernel flip.
RealPlane convolve(const RealPlane& img, const Kernel& kernel, Boundary boundary);
ComplexField convolve(const ComplexField& img, const Kernel& kernel, Boundary boundary);

Kernel gaussian_kernel(std::size_t size, double sigma);
Kernel laplacian_kernel();

// Separable Gaussian blur with a (2*ceil(3 sigma) + 1)-tap stencil; the
// periodic rule wraps modulo the image size so the stencil may exceed it.
RealPlane gaussian_blur(const RealPlane& img, double sigma, Boundary boundary);

}  // namespace elfpie::ops
