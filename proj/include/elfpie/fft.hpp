#pragma once

#include "elfpie/plane.hpp"

namespace elfpie::ops {

// Unitary 2-D DFT pair on centered arrays: the element at
// (floor(w/2), floor(h/2)) is the origin in both domains.
// idft2(dft2(x)) == x and both preserve the l2 norm.
ComplexField dft2(const ComplexField& field);
ComplexField idft2(const ComplexField& field);

ComplexField to_complex(const RealPlane& plane);

}  // namespace elfpie::ops
