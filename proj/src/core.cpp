#include "elfpie/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "elfpie/fft.hpp"

namespace elfpie {
namespace {

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

void check_window(const SystemGeometry& g, const LedEntry& e, ValidationReport& report) {
  const long ax = static_cast<long>(g.hr_size.width);
  const long ay = static_cast<long>(g.hr_size.height);
  const long bx = static_cast<long>(g.lr_size.width);
  const long by = static_cast<long>(g.lr_size.height);
  const long x0 = ax / 2 + e.offset.x - bx / 2;
  const long y0 = ay / 2 + e.offset.y - by / 2;
  if (x0 < 0 || y0 < 0 || x0 + bx > ax || y0 + by > ay) {
    std::ostringstream os;
    os << "LED exceeds synthetic aperture: LED " << e.led_index << " offset (" << e.offset.x
       << ", " << e.offset.y << ") places the patch outside the high-resolution spectrum";
    report.violations.push_back(os.str());
  }
}

}  // namespace

SystemGeometry reference_geometry() { return SystemGeometry{}; }

SystemGeometry desk_geometry() {
  SystemGeometry g;
  g.led_rows = 9;
  g.led_cols = 9;
  g.lr_size = {64, 64};
  g.hr_size = {257, 257};
  return g;
}

std::size_t IlluminationPlan::entry_count() const {
  std::size_t n = 0;
  for (const auto& group : groups) n += group.size();
  return n;
}

bool PupilFunction::inside_support(std::size_t x, std::size_t y) const {
  const double dx = static_cast<double>(x) - static_cast<double>(field.width() / 2);
  const double dy = static_cast<double>(y) - static_cast<double>(field.height() / 2);
  return dx * dx + dy * dy <= cutoff_radius * cutoff_radius;
}

void PupilFunction::enforce_constraints() {
  for (std::size_t y = 0; y < field.height(); ++y) {
    for (std::size_t x = 0; x < field.width(); ++x) {
      Complex& v = field(x, y);
      if (!inside_support(x, y)) {
        v = 0.0;
        continue;
      }
      const double m = std::abs(v);
      if (m > max_modulus) v *= max_modulus / m;
    }
  }
}

ComplexField ObjectEstimate::object_field() const { return ops::idft2(spectrum); }

std::string ValidationReport::message() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i];
  }
  return os.str();
}

void require(const ValidationReport& report) {
  if (!report.ok()) throw ValidationError(report.message());
}

ValidationReport validate(const SystemGeometry& g) {
  ValidationReport r;
  if (!finite_positive(g.wavelength)) r.violations.push_back("wavelength must be positive");
  if (!(g.objective_na > 0.0 && g.objective_na < 1.0)) {
    r.violations.push_back("objective NA must lie in (0, 1)");
  }
  if (!finite_positive(g.magnification)) r.violations.push_back("magnification must be positive");
  if (!finite_positive(g.camera_pixel)) r.violations.push_back("camera pixel must be positive");
  if (!finite_positive(g.led_pitch)) r.violations.push_back("LED pitch must be positive");
  if (!finite_positive(g.panel_distance)) r.violations.push_back("panel distance must be positive");
  if (!std::isfinite(g.panel_offset_x) || !std::isfinite(g.panel_offset_y)) {
    r.violations.push_back("panel offset must be finite");
  }
  if (g.led_rows == 0 || g.led_cols == 0) r.violations.push_back("LED grid must be non-empty");
  if (g.lr_size.width == 0 || g.lr_size.height == 0) {
    r.violations.push_back("low-resolution size must be positive");
  }
  if (g.hr_size.width < g.lr_size.width || g.hr_size.height < g.lr_size.height) {
    r.violations.push_back("B < A violated: high-resolution grid smaller than camera grid");
  }
  if (r.ok() && !(finite_positive(g.du()) && finite_positive(g.dv()))) {
    r.violations.push_back("frequency step must be positive");
  }
  return r;
}

ValidationReport validate(const SystemGeometry& g, const IlluminationPlan& plan) {
  ValidationReport r = validate(g);
  if (!r.ok()) return r;
  std::vector<int> seen(g.led_count(), 0);
  for (const auto& group : plan.groups) {
    if (group.empty()) r.violations.push_back("illumination group without LEDs");
    for (const auto& e : group) {
      if (e.led_index >= seen.size()) {
        r.violations.push_back("LED index " + std::to_string(e.led_index) + " outside the array");
        continue;
      }
      ++seen[e.led_index];
      if (e.is_dark_field != (e.illumination_na > g.objective_na)) {
        r.violations.push_back("dark-field flag inconsistent with illumination NA for LED " +
                               std::to_string(e.led_index));
      }
      check_window(g, e, r);
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != 1) {
      r.violations.push_back("LED " + std::to_string(i) + " lit " + std::to_string(seen[i]) +
                             " times; every LED must appear in exactly one group");
    }
  }
  return r;
}

ValidationReport validate(const SystemGeometry& g, const IlluminationPlan& plan,
                          const AcquisitionStack& stack) {
  ValidationReport r = validate(g, plan);
  if (stack.images.size() != plan.group_count()) {
    r.violations.push_back("image count " + std::to_string(stack.images.size()) +
                           " differs from group count " + std::to_string(plan.group_count()));
  }
  for (std::size_t n = 0; n < stack.images.size(); ++n) {
    const RealPlane& img = stack.images[n];
    if (img.width() != g.lr_size.width || img.height() != g.lr_size.height) {
      r.violations.push_back("image " + std::to_string(n) + " has wrong size");
      continue;
    }
    const bool finite = std::all_of(img.begin(), img.end(), [](double v) { return std::isfinite(v); });
    if (!finite) r.violations.push_back("non-finite intensity in image " + std::to_string(n));
    if (!stack.signed_noise) {
      const bool nonneg = std::all_of(img.begin(), img.end(), [](double v) { return v >= 0.0; });
      if (!nonneg) r.violations.push_back("negative intensity in image " + std::to_string(n));
    }
  }
  if (stack.ground_truth) {
    const auto& gt = *stack.ground_truth;
    const bool sized = gt.amplitude.width() == g.hr_size.width &&
                       gt.amplitude.height() == g.hr_size.height && gt.phase.same_shape(gt.amplitude);
    if (!sized) r.violations.push_back("ground truth must match the high-resolution size");
  }
  return r;
}

ValidationReport validate(const DegradationSpec& s) {
  ValidationReport r;
  if (!(s.gaussian_std >= 0.0)) r.violations.push_back("gaussian std must be >= 0");
  if (!(s.snp_density >= 0.0 && s.snp_density <= 1.0)) {
    r.violations.push_back("salt-and-pepper density must lie in [0, 1]");
  }
  if (s.noise_kind == NoiseKind::poisson && !(s.photon_scale > 0.0)) {
    r.violations.push_back("photon scale must be positive for Poisson noise");
  }
  if (!(s.uneven_strength >= 0.0 && s.uneven_strength <= 1.0)) {
    r.violations.push_back("uneven illumination strength must lie in [0, 1]");
  }
  if (!(s.blur_half_waist > 0.0)) r.violations.push_back("blur half-waist must be positive");
  if (!(s.led_shift_radius >= 0.0)) r.violations.push_back("LED shift radius must be >= 0");
  if (s.vignetting.enabled && !(s.vignetting.softness > 0.0 && s.vignetting.radius >= 0.0)) {
    r.violations.push_back("vignetting needs radius >= 0 and softness > 0");
  }
  if (!std::isfinite(s.background)) r.violations.push_back("background must be finite");
  return r;
}

ValidationReport validate(const ReconstructionConfig& c) {
  ValidationReport r;
  if (!(c.gamma1 > 0.0 && c.gamma1 < 1.0)) r.violations.push_back("gamma1 must lie in (0, 1)");
  if (!(c.gamma2 > 0.0 && c.gamma2 < 1.0)) r.violations.push_back("gamma2 must lie in (0, 1)");
  if (!(c.eta_opt > 0.0)) r.violations.push_back("eta_opt must be positive");
  if (!(c.eta_phase > 0.0)) r.violations.push_back("eta_phase must be positive");
  if (!(c.epsilon_omega > 0.0)) r.violations.push_back("epsilon_omega must be positive");
  if (!(c.step > 0.0)) r.violations.push_back("step must be positive");
  if (!(c.pupil_step > 0.0)) r.violations.push_back("pupil_step must be positive");
  if (c.iterations < 1) r.violations.push_back("iterations must be >= 1");
  if (c.fidelity_mode == FidelityMode::gamma && !(c.gamma > 0.0)) {
    r.violations.push_back("gamma exponent must be positive");
  }
  if (c.alpha && !(*c.alpha >= 0.0)) r.violations.push_back("alpha must be >= 0");
  if (c.beta && !(*c.beta >= 0.0)) r.violations.push_back("beta must be >= 0");
  if (c.pupil_smooth.size % 2 == 0 || !(c.pupil_smooth.sigma > 0.0)) {
    r.violations.push_back("pupil smoothing needs an odd size and positive sigma");
  }
  return r;
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::snp: return "snp";
    case NoiseKind::poisson: return "poisson";
  }
  return "none";
}

std::string to_string(FidelityMode mode) {
  switch (mode) {
    case FidelityMode::amplitude: return "amplitude";
    case FidelityMode::intensity: return "intensity";
    case FidelityMode::gamma: return "gamma";
    case FidelityMode::log1p: return "log1p";
  }
  return "intensity";
}

std::string to_string(OmegaMode mode) {
  return mode == OmegaMode::isotropic ? "isotropic" : "anisotropic";
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::modified_adabelief: return "modified_adabelief";
    case OptimizerKind::adabelief_plain: return "adabelief_plain";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::nadam: return "nadam";
  }
  return "modified_adabelief";
}

NoiseKind parse_noise_kind(const std::string& t) {
  if (t == "none") return NoiseKind::none;
  if (t == "gaussian") return NoiseKind::gaussian;
  if (t == "snp") return NoiseKind::snp;
  if (t == "poisson") return NoiseKind::poisson;
  throw ValidationError("unknown noise kind '" + t + "'");
}

FidelityMode parse_fidelity_mode(const std::string& t) {
  if (t == "amplitude") return FidelityMode::amplitude;
  if (t == "intensity") return FidelityMode::intensity;
  if (t == "gamma") return FidelityMode::gamma;
  if (t == "log1p") return FidelityMode::log1p;
  throw ValidationError("unknown fidelity mode '" + t + "'");
}

OmegaMode parse_omega_mode(const std::string& t) {
  if (t == "isotropic") return OmegaMode::isotropic;
  if (t == "anisotropic") return OmegaMode::anisotropic;
  throw ValidationError("unknown omega mode '" + t + "'");
}

OptimizerKind parse_optimizer_kind(const std::string& t) {
  if (t == "modified_adabelief") return OptimizerKind::modified_adabelief;
  if (t == "adabelief_plain") return OptimizerKind::adabelief_plain;
  if (t == "sgd") return OptimizerKind::sgd;
  if (t == "nadam") return OptimizerKind::nadam;
  throw ValidationError("unknown optimizer '" + t + "'");
}

}  // namespace elfpie
