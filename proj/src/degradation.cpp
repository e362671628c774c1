#include "elfpie/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "elfpie/fft.hpp"
#include "elfpie/operators.hpp"

namespace elfpie::sim {
namespace {

double cosine_taper(double distance, double radius, double softness) {
  if (distance <= radius) return 1.0;
  if (distance >= radius + softness) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (distance - radius) / softness));
}

bool is_dark_group(const std::vector<LedEntry>& group) {
  return !group.empty() &&
         std::all_of(group.begin(), group.end(), [](const LedEntry& e) { return e.is_dark_field; });
}

void normalize_range(RealPlane& p, double lo, double hi) {
  const auto [mn, mx] = std::minmax_element(p.begin(), p.end());
  const double a = *mn;
  const double span = *mx - a;
  for (double& v : p) v = span > 0.0 ? lo + (hi - lo) * (v - a) / span : lo;
}

void band_limit(RealPlane& p, double band_radius) {
  ComplexField spec = ops::dft2(ops::to_complex(p));
  const double cx = static_cast<double>(p.width() / 2);
  const double cy = static_cast<double>(p.height() / 2);
  const double edge = 0.25 * band_radius;
  for (std::size_t y = 0; y < p.height(); ++y) {
    for (std::size_t x = 0; x < p.width(); ++x) {
      const double r = std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
      spec(x, y) *= cosine_taper(r, band_radius - edge, edge);
    }
  }
  const ComplexField back = ops::idft2(spec);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = back[i].real();
}

void add_disc(RealPlane& p, double cx, double cy, double r, double value) {
  for (std::size_t y = 0; y < p.height(); ++y) {
    for (std::size_t x = 0; x < p.width(); ++x) {
      if (std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy) <= r) p(x, y) += value;
    }
  }
}

void add_rect(RealPlane& p, double x0, double y0, double x1, double y1, double value) {
  for (std::size_t y = 0; y < p.height(); ++y) {
    for (std::size_t x = 0; x < p.width(); ++x) {
      const double fx = static_cast<double>(x);
      const double fy = static_cast<double>(y);
      if (fx >= x0 && fx < x1 && fy >= y0 && fy < y1) p(x, y) += value;
    }
  }
}

// Gaussian noise shaped to a 1/f amplitude spectrum (the falloff of natural
// photographs), scaled to unit peak-to-peak.
RealPlane natural_texture(GridSize size, RngStream& rng) {
  RealPlane noise(size.width, size.height);
  for (double& v : noise) v = rng.normal();
  ComplexField spec = ops::dft2(ops::to_complex(noise));
  const double cx = static_cast<double>(size.width / 2);
  const double cy = static_cast<double>(size.height / 2);
  for (std::size_t y = 0; y < size.height; ++y) {
    for (std::size_t x = 0; x < size.width; ++x) {
      const double r = std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
      spec(x, y) *= 1.0 / (2.0 + r);
    }
  }
  const ComplexField back = ops::idft2(spec);
  RealPlane out(size.width, size.height);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = back[i].real();
  normalize_range(out, 0.0, 1.0);
  return out;
}

}  // namespace

RealPlane make_uneven_illumination(GridSize size, double c, double sigma, RngStream& rng) {
  if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("uneven illumination: c outside [0, 1]");
  RealPlane zeta(size.width, size.height);
  for (double& v : zeta) v = 0.001 * rng.normal();
  if (c == 0.0) return RealPlane(size.width, size.height, 1.0);
  RealPlane blurred = ops::gaussian_blur(zeta, sigma, ops::Boundary::periodic);
  normalize_range(blurred, 0.0, 1.0);
  for (double& v : blurred) v = (1.0 - c) + c * v;
  return blurred;
}

RealPlane add_gaussian_noise(const RealPlane& img, double a, RngStream& rng) {
  if (!(a >= 0.0)) throw std::invalid_argument("gaussian noise: a must be >= 0");
  RealPlane out = img;
  if (a == 0.0) return out;
  for (double& v : out) v += a * rng.normal();
  return out;
}

RealPlane add_snp_noise(const RealPlane& img, double density, double salt_value, RngStream& rng) {
  if (!(density >= 0.0 && density <= 1.0)) throw std::invalid_argument("snp noise: density outside [0, 1]");
  RealPlane out = img;
  if (density == 0.0) return out;
  for (double& v : out) {
    const double u = rng.uniform();
    if (u < 0.5 * density) {
      v = 0.0;
    } else if (u < density) {
      v = salt_value;
    }
  }
  return out;
}

RealPlane add_poisson_noise(const RealPlane& img, double photon_scale, RngStream& rng) {
  if (!(photon_scale > 0.0)) throw std::invalid_argument("poisson noise: photon scale must be positive");
  RealPlane out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (img[i] < 0.0) throw std::invalid_argument("poisson noise: negative input pixel");
    out[i] = static_cast<double>(rng.poisson(photon_scale * img[i])) / photon_scale;
  }
  return out;
}

std::vector<optics::LedPosition> perturb_led_positions(const std::vector<optics::LedPosition>& positions,
                                                       double d, RngStream& rng) {
  if (!(d >= 0.0)) throw std::invalid_argument("LED shift radius must be >= 0");
  std::vector<optics::LedPosition> out = positions;
  if (d == 0.0) return out;
  for (auto& p : out) {
    const double r = d * std::sqrt(rng.uniform());
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    p.x += r * std::cos(theta);
    p.y += r * std::sin(theta);
  }
  return out;
}

RealPlane vignetting_window(GridSize size, const std::vector<LedEntry>& group, const VignettingSpec& spec) {
  RealPlane window(size.width, size.height, 0.0);
  if (group.empty()) return RealPlane(size.width, size.height, 1.0);
  const double cx = static_cast<double>(size.width / 2);
  const double cy = static_cast<double>(size.height / 2);
  for (const LedEntry& e : group) {
    // Illumination direction from the spectral offset, magnitude from the NA.
    const double norm = std::hypot(static_cast<double>(e.offset.x), static_cast<double>(e.offset.y));
    const double na = std::min(e.illumination_na, 0.999);
    const double tan_theta = na / std::sqrt(1.0 - na * na);
    const double dir_x = norm > 0.0 ? e.offset.x / norm : 0.0;
    const double dir_y = norm > 0.0 ? e.offset.y / norm : 0.0;
    const double wx = cx + spec.shift_gain * static_cast<double>(size.width) * tan_theta * dir_x;
    const double wy = cy + spec.shift_gain * static_cast<double>(size.height) * tan_theta * dir_y;
    for (std::size_t y = 0; y < size.height; ++y) {
      for (std::size_t x = 0; x < size.width; ++x) {
        const double dist = std::hypot(static_cast<double>(x) - wx, static_cast<double>(y) - wy);
        window(x, y) += cosine_taper(dist, spec.radius, spec.softness);
      }
    }
  }
  for (double& v : window) v /= static_cast<double>(group.size());
  return window;
}

std::vector<RealPlane> apply_vignetting(const std::vector<RealPlane>& images, const IlluminationPlan& plan,
                                        const VignettingSpec& spec) {
  if (images.size() != plan.group_count()) throw std::invalid_argument("apply_vignetting: count mismatch");
  std::vector<RealPlane> out = images;
  if (!spec.enabled) return out;
  for (std::size_t n = 0; n < out.size(); ++n) {
    const RealPlane w = vignetting_window({out[n].height(), out[n].width()}, plan.groups[n], spec);
    for (std::size_t i = 0; i < w.size(); ++i) out[n][i] *= w[i];
  }
  return out;
}

ComplexField compose_object(const GroundTruth& truth) {
  require_same_shape(truth.amplitude, truth.phase, "compose_object");
  ComplexField o(truth.amplitude.width(), truth.amplitude.height());
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::polar(truth.amplitude[i], truth.phase[i]);
  return o;
}

SimulationResult simulate(const ComplexField& object, const SystemGeometry& geometry,
                          const IlluminationPlan& plan, const DegradationSpec& deg) {
  require(validate(geometry, plan));
  require(validate(deg));
  if (object.width() != geometry.hr_size.width || object.height() != geometry.hr_size.height) {
    throw ValidationError("ground truth must match the high-resolution size");
  }

  SimulationResult result;
  result.true_plan = plan;
  if (deg.led_shift_radius > 0.0) {
    RngStream led_rng(deg.seed, kLedShiftKey);
    const auto shifted =
        perturb_led_positions(optics::led_grid_positions(geometry), deg.led_shift_radius, led_rng);
    const auto entries = optics::led_spectral_offsets(geometry, shifted);
    for (auto& group : result.true_plan.groups) {
      for (auto& e : group) e = entries[e.led_index];
    }
  }

  const ComplexField spectrum = ops::dft2(object);
  const PupilFunction pupil = optics::pupil_init(geometry);
  result.clean = optics::forward_ideal(spectrum, pupil, result.true_plan);

  const std::size_t count = result.clean.size();
  const GridSize lr = geometry.lr_size;
  std::vector<RealPlane> staged(count);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t n = 0; n < count; ++n) {
    RealPlane img = result.clean[n];
    if (deg.uneven_strength > 0.0) {
      RngStream rng(deg.seed, image_key(n, kIlluminationPurpose));
      const RealPlane lambda = make_uneven_illumination(lr, deg.uneven_strength, deg.blur_half_waist, rng);
      for (std::size_t i = 0; i < img.size(); ++i) img[i] *= lambda[i];
    }
    if (deg.vignetting.enabled) {
      const RealPlane w = vignetting_window(lr, result.true_plan.groups[n], deg.vignetting);
      for (std::size_t i = 0; i < img.size(); ++i) img[i] *= w[i];
    }
    if (deg.background != 0.0) {
      for (double& v : img) v += deg.background;
    }
    staged[n] = std::move(img);
  }

  double salt = 1.0;
  for (const RealPlane& img : staged) salt = std::max(salt, *std::max_element(img.begin(), img.end()));

#pragma omp parallel for schedule(dynamic)
  for (std::size_t n = 0; n < count; ++n) {
    RngStream rng(deg.seed, image_key(n, kNoisePurpose));
    switch (deg.noise_kind) {
      case NoiseKind::none: break;
      case NoiseKind::gaussian: staged[n] = add_gaussian_noise(staged[n], deg.gaussian_std, rng); break;
      case NoiseKind::snp: staged[n] = add_snp_noise(staged[n], deg.snp_density, salt, rng); break;
      case NoiseKind::poisson: {
        RealPlane floor = staged[n];
        for (double& v : floor) v = std::max(v, 0.0);
        staged[n] = add_poisson_noise(floor, deg.photon_scale, rng);
        break;
      }
    }
  }

  AcquisitionStack& stack = result.stack;
  stack.images = std::move(staged);
  stack.plan = plan;
  stack.geometry = geometry;
  GroundTruth truth{RealPlane(object.width(), object.height()), RealPlane(object.width(), object.height())};
  for (std::size_t i = 0; i < object.size(); ++i) {
    truth.amplitude[i] = std::abs(object[i]);
    truth.phase[i] = std::arg(object[i]);
  }
  stack.ground_truth = std::move(truth);
  stack.signed_noise = (deg.noise_kind == NoiseKind::gaussian && deg.gaussian_std > 0.0) || deg.background < 0.0;
  return result;
}

double noise_level_metric(const std::vector<RealPlane>& clean, const std::vector<RealPlane>& degraded,
                          const IlluminationPlan& plan) {
  if (clean.size() != degraded.size() || clean.size() != plan.group_count()) {
    throw std::invalid_argument("noise level: stack sizes differ");
  }
  double total = 0.0;
  std::size_t dark = 0;
  for (std::size_t n = 0; n < clean.size(); ++n) {
    if (!is_dark_group(plan.groups[n])) continue;
    require_same_shape(clean[n], degraded[n], "noise level");
    double diff = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < clean[n].size(); ++i) {
      diff += std::abs(clean[n][i] - degraded[n][i]);
      ref += std::abs(clean[n][i]);
    }
    if (ref > 0.0) total += diff / ref;
    ++dark;
  }
  if (dark == 0) throw std::invalid_argument("noise level: no dark-field images");
  return 100.0 * total / static_cast<double>(dark);
}

GroundTruth make_phantom(GridSize size, double band_radius, std::uint64_t seed) {
  const double w = static_cast<double>(size.width);
  const double h = static_cast<double>(size.height);
  GroundTruth truth{RealPlane(size.width, size.height), RealPlane(size.width, size.height)};

  {
    RngStream rng(seed, 0xA11);
    RealPlane& a = truth.amplitude;
    a = natural_texture(size, rng);
    // Resolution-chart style bar triplets at decreasing periods.
    double x = 0.08 * w;
    for (double period : {12.0, 9.0, 7.0, 5.0}) {
      for (int bar = 0; bar < 3; ++bar) {
        add_rect(a, x + bar * period, 0.10 * h, x + bar * period + period / 2.0, 0.10 * h + 5.0 * period, 0.8);
        add_rect(a, 0.62 * w, 0.10 * h + x - 0.08 * w + bar * period, 0.62 * w + 5.0 * period,
                 0.10 * h + x - 0.08 * w + bar * period + period / 2.0, -0.8);
      }
      x += 3.5 * period;
    }
    for (int i = 0; i < 14; ++i) {
      add_disc(a, w * (0.1 + 0.8 * rng.uniform()), h * (0.45 + 0.5 * rng.uniform()),
               3.0 + 0.08 * w * rng.uniform(), 0.8 * (rng.uniform() - 0.5));
    }
    band_limit(a, band_radius);
    normalize_range(a, 0.1, 1.0);
  }
  {
    RngStream rng(seed, 0xB22);
    RealPlane& p = truth.phase;
    p = natural_texture(size, rng);
    for (int i = 0; i < 10; ++i) {
      const double cx = w * (0.1 + 0.8 * rng.uniform());
      const double cy = h * (0.1 + 0.8 * rng.uniform());
      const double r = 6.0 + 0.1 * w * rng.uniform();
      const double v = 0.8 * (rng.uniform() - 0.5);
      add_disc(p, cx, cy, r, v);
      add_disc(p, cx, cy, 0.5 * r, -0.5 * v);
    }
    for (int i = 0; i < 6; ++i) {
      const double x0 = w * 0.9 * rng.uniform();
      const double y0 = h * 0.9 * rng.uniform();
      add_rect(p, x0, y0, x0 + 4.0 + 0.2 * w * rng.uniform(), y0 + 4.0 + 0.05 * h * rng.uniform(),
               0.6 * (rng.uniform() - 0.5));
    }
    band_limit(p, band_radius);
    normalize_range(p, 0.1, 1.0);
  }
  return truth;
}

VignettingSpec desk_vignetting(GridSize lr_size) {
  const double w = static_cast<double>(lr_size.width);
  const double h = static_cast<double>(lr_size.height);
  VignettingSpec v;
  v.enabled = true;
  v.radius = 0.5 * std::hypot(w, h);
  v.softness = w / 8.0;
  v.shift_gain = 4.0;
  return v;
}

double poisson_photon_scale(int level) {
  // Calibrated on the desk protocol (c = 0.25) so the dark-field noise level
  // tracks the Lv1..Lv4 bands; regenerate with tools/calibrate_poisson.
  static constexpr double kScales[4] = {4828.08, 621.625, 291.542, 158.388};
  if (level < 1 || level > 4) throw std::invalid_argument("Poisson level must be 1..4");
  return kScales[level - 1];
}

}  // namespace elfpie::sim
