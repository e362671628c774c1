#pragma once

#include <vector>

#include "elfpie/core.hpp"

namespace elfpie::optics {

struct LedPosition {
  double x = 0.0;  // m, lateral
  double y = 0.0;
};

// Nominal LED lateral positions, row-major over the grid, with the center
// LED on the optical axis (shifted by the panel offset).
std::vector<LedPosition> led_grid_positions(const SystemGeometry& geometry);

// One plan entry per position, indexed by position order. Throws
// ValidationError("LED exceeds synthetic aperture ...") when an offset moves
// the camera-sized patch outside the high-resolution spectrum.
std::vector<LedEntry> led_spectral_offsets(const SystemGeometry& geometry,
                                           const std::vector<LedPosition>& positions);

// Sequential acquisition: one LED per exposure, in LED index order.
IlluminationPlan sequential_plan(const SystemGeometry& geometry,
                                 const std::vector<LedPosition>& positions);
IlluminationPlan sequential_plan(const SystemGeometry& geometry);

// Multiplexed acquisition with leds_per_group LEDs per exposure. Group n
// lights LEDs n, n + N, n + 2N, ... so each exposure spreads across the
// panel. leds_per_group must divide the LED count.
IlluminationPlan multiplexed_plan(const SystemGeometry& geometry, std::size_t leds_per_group);

// Binary disc of radius (NA / lambda) / du on the camera grid.
PupilFunction pupil_init(const SystemGeometry& geometry, double max_modulus = 2.0);

// Camera-sized window of the spectrum centered at (center + offset).
ComplexField extract_patch(const ComplexField& spectrum, PixelOffset offset,
                           GridSize patch_size);
// Adds the patch back into its window; the adjoint of extract_patch.
void embed_add_patch(ComplexField& target, const ComplexField& patch, PixelOffset offset);

// o = dft2(P o extract(Psi, offset)).
ComplexField exit_wave(const ComplexField& spectrum, const PupilFunction& pupil,
                       PixelOffset offset);

// I_n = sum_m |o_{n,m}|^2 for every exposure group.
std::vector<RealPlane> forward_ideal(const ComplexField& spectrum, const PupilFunction& pupil,
                                     const IlluminationPlan& plan);

// Index of the exposure group containing the on-axis (smallest NA) LED.
std::size_t center_group(const IlluminationPlan& plan);

}  // namespace elfpie::optics
