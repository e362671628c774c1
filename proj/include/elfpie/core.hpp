#pragma once

// Shared domain types: geometry, illumination plan, acquisition stack,
// degradation and reconstruction settings. No algorithms live here apart
// from invariant checking.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "elfpie/plane.hpp"

namespace elfpie {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridSize {
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(const GridSize&, const GridSize&) = default;
};

struct SystemGeometry {
  double wavelength = 536e-9;      // m
  double objective_na = 0.10;
  double magnification = 4.0;
  double camera_pixel = 3.65e-6;   // m
  double led_pitch = 6e-3;         // m
  std::size_t led_rows = 15;
  std::size_t led_cols = 15;
  double panel_distance = 90e-3;   // m
  double panel_offset_x = 0.0;     // m
  double panel_offset_y = 0.0;     // m
  GridSize lr_size{128, 128};
  GridSize hr_size{513, 513};

  // Spectral sampling step of the low-resolution camera grid (1/m per pixel).
  double du() const { return magnification / (static_cast<double>(lr_size.width) * camera_pixel); }
  double dv() const { return magnification / (static_cast<double>(lr_size.height) * camera_pixel); }
  std::size_t led_count() const { return led_rows * led_cols; }

  friend bool operator==(const SystemGeometry&, const SystemGeometry&) = default;
};

// Full-scale simulation geometry: 15x15 LEDs at 6 mm pitch, 90 mm away,
// NA 0.10 / x4 objective, 3.65 um pixels, 536 nm, 128 px camera, 513 px object.
SystemGeometry reference_geometry();

// Desk-scale variant of the reference: same optics, 64 px camera, 257 px
// object, 9x9 LEDs.
SystemGeometry desk_geometry();

struct PixelOffset {
  int x = 0;
  int y = 0;

  friend bool operator==(const PixelOffset&, const PixelOffset&) = default;
};

struct LedEntry {
  std::size_t led_index = 0;
  PixelOffset offset;
  double illumination_na = 0.0;
  bool is_dark_field = false;

  friend bool operator==(const LedEntry&, const LedEntry&) = default;
};

// N exposure groups, each lighting M LEDs simultaneously.
struct IlluminationPlan {
  std::vector<std::vector<LedEntry>> groups;

  std::size_t group_count() const { return groups.size(); }
  std::size_t entry_count() const;

  friend bool operator==(const IlluminationPlan&, const IlluminationPlan&) = default;
};

struct GroundTruth {
  RealPlane amplitude;
  RealPlane phase;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct AcquisitionStack {
  std::vector<RealPlane> images;
  IlluminationPlan plan;
  SystemGeometry geometry;
  std::optional<GroundTruth> ground_truth;
  // Set when additive zero-mean noise was applied without a camera floor, so
  // individual pixels may dip below zero.
  bool signed_noise = false;

  friend bool operator==(const AcquisitionStack&, const AcquisitionStack&) = default;
};

struct PupilFunction {
  ComplexField field;
  double cutoff_radius = 0.0;  // frequency-domain pixels
  double max_modulus = 2.0;

  bool inside_support(std::size_t x, std::size_t y) const;
  // Zeroes entries outside the cutoff disc and clamps the modulus bound.
  void enforce_constraints();
};

// The high-resolution spectrum Psi in centered layout. The object field is
// its inverse unitary DFT.
struct ObjectEstimate {
  ComplexField spectrum;

  ComplexField object_field() const;
};

enum class NoiseKind { none, gaussian, snp, poisson };

struct VignettingSpec {
  bool enabled = false;
  double radius = 0.0;      // px
  double softness = 1.0;    // px
  double shift_gain = 0.0;  // window displacement per unit tangent, in frame widths

  friend bool operator==(const VignettingSpec&, const VignettingSpec&) = default;
};

struct DegradationSpec {
  NoiseKind noise_kind = NoiseKind::none;
  double gaussian_std = 0.0;
  double snp_density = 0.0;
  double photon_scale = 1.0;
  double uneven_strength = 0.0;
  double blur_half_waist = 15.0;  // px, used as the Gaussian sigma
  double led_shift_radius = 0.0;  // m
  VignettingSpec vignetting;
  double background = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const DegradationSpec&, const DegradationSpec&) = default;
};

enum class FidelityMode { amplitude, intensity, gamma, log1p };
enum class OmegaMode { isotropic, anisotropic };
enum class OptimizerKind { modified_adabelief, adabelief_plain, sgd, nadam };

struct PupilSmoothing {
  std::size_t size = 3;
  double sigma = 1.0;
};

struct ReconstructionConfig {
  FidelityMode fidelity_mode = FidelityMode::intensity;
  double gamma = 0.5;  // exponent for FidelityMode::gamma
  OmegaMode omega_mode = OmegaMode::isotropic;
  std::optional<double> alpha;  // empty = automatic
  std::optional<double> beta;
  double gamma1 = 0.9;
  double gamma2 = 0.999;
  double eta_opt = 1e-8;
  double eta_phase = 1e-6;
  double epsilon_omega = 1e-8;
  double step = 0.05;         // initial step size for Psi; delta^0 = step^2
  double pupil_step = 0.005;  // same for the pupil
  OptimizerKind optimizer = OptimizerKind::modified_adabelief;
  std::size_t iterations = 100;
  bool learn_pupil = false;
  PupilSmoothing pupil_smooth;
  double pupil_max_modulus = 2.0;
  bool deterministic_reduction = true;
  bool sqrt_residual_variant = false;
  // Keep Psi zero outside the union of pupil-support windows, where no
  // exposure constrains it.
  bool restrict_to_aperture = true;
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  std::string message() const;
};

ValidationReport validate(const SystemGeometry& geometry);
ValidationReport validate(const SystemGeometry& geometry, const IlluminationPlan& plan);
ValidationReport validate(const SystemGeometry& geometry, const IlluminationPlan& plan,
                          const AcquisitionStack& stack);
ValidationReport validate(const DegradationSpec& spec);
ValidationReport validate(const ReconstructionConfig& config);

// Throws ValidationError carrying the report message when the report fails.
void require(const ValidationReport& report);

std::string to_string(NoiseKind kind);
std::string to_string(FidelityMode mode);
std::string to_string(OmegaMode mode);
std::string to_string(OptimizerKind kind);
NoiseKind parse_noise_kind(const std::string& text);
FidelityMode parse_fidelity_mode(const std::string& text);
OmegaMode parse_omega_mode(const std::string& text);
OptimizerKind parse_optimizer_kind(const std::string& text);

}  // namespace elfpie
