#pragma once

// Degraded acquisition simulator: uneven illumination, LED misplacement,
// vignetting and the three noise branches, plus the dark-field corruption
// metric used to express noise strength.

#include <vector>

#include "elfpie/core.hpp"
#include "elfpie/optics.hpp"
#include "elfpie/rng.hpp"

namespace elfpie::sim {

// Lambda = (1 - c) + c * normalize(G (x) zeta), zeta ~ 0.001 * N(0, 1) and G a
// Gaussian of the given sigma applied with periodic wrap. Values lie in [1 - c, 1].
RealPlane make_uneven_illumination(GridSize size, double c, double sigma, RngStream& rng);

// I + a * N(0, 1); negative output is allowed.
RealPlane add_gaussian_noise(const RealPlane& img, double a, RngStream& rng);

// A fraction `density` of pixels is replaced, half by 0 and half by salt_value.
RealPlane add_snp_noise(const RealPlane& img, double density, double salt_value, RngStream& rng);

// Poisson(s * I) / s per pixel. Throws std::invalid_argument on negative input.
RealPlane add_poisson_noise(const RealPlane& img, double photon_scale, RngStream& rng);

// Each position moves by an independent uniform draw from a disc of radius d.
std::vector<optics::LedPosition> perturb_led_positions(const std::vector<optics::LedPosition>& positions,
                                                       double d, RngStream& rng);

// Multiplies every frame by a soft disc window (flat inside `radius`, cosine
// taper over `softness`) centered at frame center + shift_gain * B * tan(theta)
// along the illumination direction of the exposure.
RealPlane vignetting_window(GridSize size, const std::vector<LedEntry>& group,
                            const VignettingSpec& spec);
std::vector<RealPlane> apply_vignetting(const std::vector<RealPlane>& images,
                                        const IlluminationPlan& plan, const VignettingSpec& spec);

struct SimulationResult {
  AcquisitionStack stack;            // nominal plan, degraded images
  std::vector<RealPlane> clean;      // ideal forward images under the true plan
  IlluminationPlan true_plan;        // plan actually used to form the images
};

// Builds Psi = dft2(object), forms ideal images under the (possibly
// perturbed) plan, then applies per-frame illumination, vignetting, the
// background and exactly one noise branch. The returned stack carries the
// nominal plan; the reconstructor never sees the perturbation.
SimulationResult simulate(const ComplexField& object, const SystemGeometry& geometry,
                          const IlluminationPlan& plan, const DegradationSpec& degradation);

// Mean over dark-field exposures of |clean - degraded|_1 / |clean|_1, in percent.
double noise_level_metric(const std::vector<RealPlane>& clean, const std::vector<RealPlane>& degraded,
                          const IlluminationPlan& plan);

// Object field |O| exp(i phase) from amplitude and phase maps.
ComplexField compose_object(const GroundTruth& truth);

// Synthetic amplitude/phase phantom in [0.1, 1] with its spectrum confined to
// a disc of `band_radius` spectral pixels (soft edge), so that the content is
// recoverable by a synthetic aperture that covers the disc.
GroundTruth make_phantom(GridSize size, double band_radius, std::uint64_t seed);

// Vignetting used by the desk robustness protocol: the on-axis frame is left
// intact (radius = half diagonal), obliquely lit frames lose the side facing
// away from the illumination.
VignettingSpec desk_vignetting(GridSize lr_size);

// Photon scale (photons per unit intensity) of Poisson level 1..4 on the
// desk protocol, calibrated by tools/calibrate_poisson.cpp.
double poisson_photon_scale(int level);

}  // namespace elfpie::sim
