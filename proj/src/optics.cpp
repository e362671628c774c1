#include "elfpie/optics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "elfpie/fft.hpp"

namespace elfpie::optics {
namespace {

struct Window {
  long x0;
  long y0;
};

Window patch_window(const ComplexField& spectrum, PixelOffset offset, GridSize patch) {
  const long x0 = static_cast<long>(spectrum.width() / 2) + offset.x -
                  static_cast<long>(patch.width / 2);
  const long y0 = static_cast<long>(spectrum.height() / 2) + offset.y -
                  static_cast<long>(patch.height / 2);
  if (x0 < 0 || y0 < 0 || x0 + static_cast<long>(patch.width) > static_cast<long>(spectrum.width()) ||
      y0 + static_cast<long>(patch.height) > static_cast<long>(spectrum.height())) {
    std::ostringstream os;
    os << "patch window at offset (" << offset.x << ", " << offset.y << ") out of bounds";
    throw std::out_of_range(os.str());
  }
  return {x0, y0};
}

}  // namespace

std::vector<LedPosition> led_grid_positions(const SystemGeometry& g) {
  std::vector<LedPosition> out;
  out.reserve(g.led_count());
  const double cx = (static_cast<double>(g.led_cols) - 1.0) / 2.0;
  const double cy = (static_cast<double>(g.led_rows) - 1.0) / 2.0;
  for (std::size_t r = 0; r < g.led_rows; ++r) {
    for (std::size_t c = 0; c < g.led_cols; ++c) {
      out.push_back({(static_cast<double>(c) - cx) * g.led_pitch + g.panel_offset_x,
                     (static_cast<double>(r) - cy) * g.led_pitch + g.panel_offset_y});
    }
  }
  return out;
}

std::vector<LedEntry> led_spectral_offsets(const SystemGeometry& g,
                                           const std::vector<LedPosition>& positions) {
  if (!(g.panel_distance > 0.0)) throw ValidationError("panel distance must be positive");
  std::vector<LedEntry> entries;
  entries.reserve(positions.size());
  const long half_ax = static_cast<long>(g.hr_size.width / 2);
  const long half_ay = static_cast<long>(g.hr_size.height / 2);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto [xl, yl] = positions[i];
    const double r = std::sqrt(xl * xl + yl * yl + g.panel_distance * g.panel_distance);
    const double sx = -xl / r;
    const double sy = -yl / r;
    LedEntry e;
    e.led_index = i;
    e.offset = {static_cast<int>(std::lround(sx / g.wavelength / g.du())),
                static_cast<int>(std::lround(sy / g.wavelength / g.dv()))};
    e.illumination_na = std::sqrt(sx * sx + sy * sy);
    e.is_dark_field = e.illumination_na > g.objective_na;

    const long x0 = half_ax + e.offset.x - static_cast<long>(g.lr_size.width / 2);
    const long y0 = half_ay + e.offset.y - static_cast<long>(g.lr_size.height / 2);
    if (x0 < 0 || y0 < 0 || x0 + static_cast<long>(g.lr_size.width) > static_cast<long>(g.hr_size.width) ||
        y0 + static_cast<long>(g.lr_size.height) > static_cast<long>(g.hr_size.height)) {
      std::ostringstream os;
      os << "LED exceeds synthetic aperture: LED " << i << " maps to offset (" << e.offset.x
         << ", " << e.offset.y << ")";
      throw ValidationError(os.str());
    }
    entries.push_back(e);
  }
  return entries;
}

IlluminationPlan sequential_plan(const SystemGeometry& g, const std::vector<LedPosition>& positions) {
  IlluminationPlan plan;
  for (const LedEntry& e : led_spectral_offsets(g, positions)) plan.groups.push_back({e});
  return plan;
}

IlluminationPlan sequential_plan(const SystemGeometry& g) {
  return sequential_plan(g, led_grid_positions(g));
}

IlluminationPlan multiplexed_plan(const SystemGeometry& g, std::size_t leds_per_group) {
  const std::size_t total = g.led_count();
  if (leds_per_group == 0 || total % leds_per_group != 0) {
    throw std::invalid_argument("multiplexed_plan: LEDs per group must divide the LED count");
  }
  const auto entries = led_spectral_offsets(g, led_grid_positions(g));
  const std::size_t groups = total / leds_per_group;
  IlluminationPlan plan;
  plan.groups.resize(groups);
  for (std::size_t n = 0; n < groups; ++n) {
    for (std::size_t m = 0; m < leds_per_group; ++m) plan.groups[n].push_back(entries[n + m * groups]);
  }
  return plan;
}

PupilFunction pupil_init(const SystemGeometry& g, double max_modulus) {
  PupilFunction p;
  p.cutoff_radius = (g.objective_na / g.wavelength) / g.du();
  p.max_modulus = max_modulus;
  const double half_band =
      static_cast<double>(std::min(g.lr_size.width, g.lr_size.height)) / 2.0;
  if (p.cutoff_radius >= half_band) throw ValidationError("pupil exceeds camera band");
  p.field = ComplexField(g.lr_size.width, g.lr_size.height);
  for (std::size_t y = 0; y < p.field.height(); ++y) {
    for (std::size_t x = 0; x < p.field.width(); ++x) {
      if (p.inside_support(x, y)) p.field(x, y) = 1.0;
    }
  }
  return p;
}

ComplexField extract_patch(const ComplexField& spectrum, PixelOffset offset, GridSize patch_size) {
  const Window win = patch_window(spectrum, offset, patch_size);
  ComplexField out(patch_size.width, patch_size.height);
  for (std::size_t y = 0; y < patch_size.height; ++y) {
    const Complex* src = &spectrum(static_cast<std::size_t>(win.x0), static_cast<std::size_t>(win.y0) + y);
    std::copy(src, src + patch_size.width, &out(0, y));
  }
  return out;
}

void embed_add_patch(ComplexField& target, const ComplexField& patch, PixelOffset offset) {
  const Window win = patch_window(target, offset, {patch.height(), patch.width()});
  for (std::size_t y = 0; y < patch.height(); ++y) {
    Complex* dst = &target(static_cast<std::size_t>(win.x0), static_cast<std::size_t>(win.y0) + y);
    for (std::size_t x = 0; x < patch.width(); ++x) dst[x] += patch(x, y);
  }
}

ComplexField exit_wave(const ComplexField& spectrum, const PupilFunction& pupil, PixelOffset offset) {
  ComplexField z = extract_patch(spectrum, offset, {pupil.field.height(), pupil.field.width()});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] *= pupil.field[i];
  return ops::dft2(z);
}

std::vector<RealPlane> forward_ideal(const ComplexField& spectrum, const PupilFunction& pupil,
                                     const IlluminationPlan& plan) {
  const std::size_t groups = plan.group_count();
  std::vector<RealPlane> images(groups);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t n = 0; n < groups; ++n) {
    RealPlane img(pupil.field.width(), pupil.field.height());
    for (const LedEntry& e : plan.groups[n]) {
      const ComplexField o = exit_wave(spectrum, pupil, e.offset);
      for (std::size_t i = 0; i < o.size(); ++i) img[i] += std::norm(o[i]);
    }
    images[n] = std::move(img);
  }
  return images;
}

std::size_t center_group(const IlluminationPlan& plan) {
  if (plan.groups.empty()) throw std::invalid_argument("center_group: empty plan");
  std::size_t best = 0;
  double best_na = 1e300;
  for (std::size_t n = 0; n < plan.groups.size(); ++n) {
    for (const LedEntry& e : plan.groups[n]) {
      if (e.illumination_na < best_na) {
        best_na = e.illumination_na;
        best = n;
      }
    }
  }
  return best;
}

}  // namespace elfpie::optics
