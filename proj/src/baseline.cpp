#include "elfpie/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "elfpie/degradation.hpp"
#include "elfpie/fft.hpp"
#include "elfpie/optics.hpp"
#include "elfpie/rng.hpp"

namespace elfpie::baseline {

std::vector<std::size_t> spiral_order(const IlluminationPlan& plan) {
  std::vector<std::size_t> order(plan.group_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t n) {
    const auto& e = plan.groups[n].front();
    return std::pair{e.illumination_na, std::atan2(static_cast<double>(e.offset.y), static_cast<double>(e.offset.x))};
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = key(a);
    const auto kb = key(b);
    if (std::abs(ka.first - kb.first) > 1e-12) return ka.first < kb.first;
    return ka.second < kb.second;
  });
  return order;
}

FpieResult fpie_momentum_reconstruct(const AcquisitionStack& stack, const FpieConfig& config,
                                     const std::optional<ComplexField>& initial) {
  require(validate(stack.geometry, stack.plan, stack));
  for (const auto& group : stack.plan.groups)
    if (group.size() != 1) throw std::invalid_argument("mFPIE requires one LED per exposure");

  FpieResult result;
  result.pupil = optics::pupil_init(stack.geometry);
  result.estimate.spectrum = initial ? *initial : solver::initial_spectrum(stack);
  ComplexField& psi = result.estimate.spectrum;
  PupilFunction& pupil = result.pupil;
  const GridSize lr = stack.geometry.lr_size;

  const auto order = spiral_order(stack.plan);
  ComplexField velocity(psi.width(), psi.height());
  for (std::size_t pass = 0; pass < config.iterations; ++pass) {
    const ComplexField snapshot = psi;
    for (std::size_t n : order) {
      const PixelOffset offset = stack.plan.groups[n].front().offset;
      const RealPlane& meas = stack.images[n];
      const ComplexField window = optics::extract_patch(psi, offset, lr);

      ComplexField z(lr.width, lr.height);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = pupil.field[i] * window[i];
      ComplexField o = ops::dft2(z);
      for (std::size_t i = 0; i < o.size(); ++i) {
        const double target = std::sqrt(std::max(meas[i], 0.0));
        const double mod = std::abs(o[i]);
        o[i] = mod > 0.0 ? o[i] * (target / mod) : Complex(target, 0.0);
      }
      const ComplexField z_new = ops::idft2(o);

      double p_max = 0.0;
      for (const auto& v : pupil.field.values()) p_max = std::max(p_max, std::norm(v));
      double w_max = 0.0;
      for (const auto& v : window.values()) w_max = std::max(w_max, std::norm(v));

      ComplexField window_update(lr.width, lr.height);
      for (std::size_t i = 0; i < z.size(); ++i) {
        const Complex diff = z_new[i] - z[i];
        if (p_max > 0.0) window_update[i] = config.step * std::conj(pupil.field[i]) / p_max * diff;
        if (config.learn_pupil && w_max > 0.0)
          pupil.field[i] += config.pupil_step * std::conj(window[i]) / w_max * diff;
      }
      optics::embed_add_patch(psi, window_update, offset);
      if (config.learn_pupil) pupil.enforce_constraints();
    }
    for (std::size_t i = 0; i < psi.size(); ++i) {
      velocity[i] = config.momentum * velocity[i] + (psi[i] - snapshot[i]);
      psi[i] += config.momentum * velocity[i];
    }
  }
  return result;
}

double lsnr(const RealPlane& recovered, const RealPlane& truth) {
  require_same_shape(recovered, truth, "lsnr");
  if (truth.size() == 0) throw std::invalid_argument("lsnr: empty maps");
  double mean_diff = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) mean_diff += truth[i] - recovered[i];
  mean_diff /= static_cast<double>(truth.size());
  double signal = 0.0;
  double residual = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    signal += truth[i] * truth[i];
    const double r = truth[i] - recovered[i] - mean_diff;
    residual += r * r;
  }
  if (residual <= 0.0) return signal > 0.0 ? kLsnrCap : -kLsnrCap;
  const double value = 10.0 * std::log10(signal / residual);
  return std::clamp(value, -kLsnrCap, kLsnrCap);
}

Score score_reconstruction(const ComplexField& object, const GroundTruth& truth) {
  require_same_shape(object, truth.amplitude, "score_reconstruction");
  require_same_shape(truth.amplitude, truth.phase, "score_reconstruction");
  RealPlane amp(object.width(), object.height());
  Complex rotation(0.0, 0.0);
  for (std::size_t i = 0; i < object.size(); ++i) {
    amp[i] = std::abs(object[i]);
    rotation += object[i] * std::polar(1.0, -truth.phase[i]);
  }
  const double global = std::arg(rotation);
  RealPlane phase(object.width(), object.height());
  for (std::size_t i = 0; i < object.size(); ++i)
    phase[i] = std::arg(object[i] * std::polar(1.0, -global));

  Score s;
  s.lsnr_amp = lsnr(amp, truth.amplitude);
  s.lsnr_phase = lsnr(phase, truth.phase);
  s.mean = 0.5 * (s.lsnr_amp + s.lsnr_phase);
  return s;
}

Score score_reconstruction(const ComplexField& object, const std::optional<GroundTruth>& truth) {
  if (!truth) throw std::invalid_argument("score_reconstruction: stack has no ground truth");
  return score_reconstruction(object, *truth);
}

std::string to_string(Method method) { return method == Method::elfpie ? "elfpie" : "mfpie"; }

Method parse_method(const std::string& text) {
  if (text == "elfpie") return Method::elfpie;
  if (text == "mfpie") return Method::mfpie;
  throw std::invalid_argument("unknown method '" + text + "'");
}

std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t cell, std::size_t repeat) {
  return sim::splitmix64(sim::splitmix64(base_seed) ^ sim::splitmix64((static_cast<std::uint64_t>(cell) << 20) + repeat));
}

double default_phantom_band(const SystemGeometry& geometry) {
  const auto plan = optics::sequential_plan(geometry);
  const auto pupil = optics::pupil_init(geometry);
  double reach = 0.0;
  for (const auto& group : plan.groups)
    for (const auto& e : group)
      if (e.offset.y == 0 || e.offset.x == 0)
        reach = std::max(reach, static_cast<double>(std::max(std::abs(e.offset.x), std::abs(e.offset.y))));
  return 0.8 * (reach + pupil.cutoff_radius);
}

DegradationSpec degradation_for(const ProtocolCell& cell, std::uint64_t seed) {
  DegradationSpec spec;
  spec.seed = seed;
  spec.led_shift_radius = cell.d;
  spec.uneven_strength = cell.c;
  spec.vignetting = cell.vignetting;
  spec.noise_kind = cell.noise.kind;
  switch (cell.noise.kind) {
    case NoiseKind::none: break;
    case NoiseKind::gaussian: spec.gaussian_std = cell.noise.value; break;
    case NoiseKind::snp: spec.snp_density = cell.noise.value; break;
    case NoiseKind::poisson: spec.photon_scale = sim::poisson_photon_scale(static_cast<int>(cell.noise.value)); break;
  }
  return spec;
}

std::vector<BenchmarkCell> benchmark_grid(const BenchmarkProtocol& protocol) {
  if (protocol.repeats < 1) throw std::invalid_argument("benchmark_grid: repeats must be at least 1");
  require(validate(protocol.geometry));
  const double band = protocol.phantom_band > 0.0 ? protocol.phantom_band : default_phantom_band(protocol.geometry);
  const auto plan = optics::sequential_plan(protocol.geometry);

  std::vector<BenchmarkCell> rows;
  for (std::size_t k = 0; k < protocol.cells.size(); ++k) {
    const ProtocolCell& cell = protocol.cells[k];
    std::vector<BenchmarkCell> cell_rows;
    for (Method m : protocol.methods) {
      BenchmarkCell row;
      row.d = cell.d;
      row.c = cell.c;
      row.noise = cell.noise;
      row.method = m;
      cell_rows.push_back(row);
    }
    try {
      for (std::size_t r = 0; r < protocol.repeats; ++r) {
        const std::uint64_t seed = cell_seed(protocol.base_seed, k, r);
        const GroundTruth truth = sim::make_phantom(protocol.geometry.hr_size, band, seed);
        const auto sim_result =
            sim::simulate(sim::compose_object(truth), protocol.geometry, plan, degradation_for(cell, seed));
        for (auto& row : cell_rows) {
          Score s;
          if (row.method == Method::elfpie) {
            const auto rec = solver::reconstruct(sim_result.stack, protocol.elfpie);
            s = score_reconstruction(rec.estimate.object_field(), truth);
          } else {
            const auto rec = fpie_momentum_reconstruct(sim_result.stack, protocol.mfpie);
            s = score_reconstruction(rec.estimate.object_field(), truth);
          }
          row.mean_lsnr_amp += s.lsnr_amp;
          row.mean_lsnr_phase += s.lsnr_phase;
          row.repeats += 1;
        }
      }
      for (auto& row : cell_rows) {
        row.mean_lsnr_amp /= static_cast<double>(row.repeats);
        row.mean_lsnr_phase /= static_cast<double>(row.repeats);
        row.mean_lsnr = 0.5 * (row.mean_lsnr_amp + row.mean_lsnr_phase);
      }
    } catch (const std::exception& e) {
      for (auto& row : cell_rows) {
        row.failed = true;
        row.error = e.what();
      }
    }
    rows.insert(rows.end(), cell_rows.begin(), cell_rows.end());
  }
  std::stable_sort(rows.begin(), rows.end(), [](const BenchmarkCell& a, const BenchmarkCell& b) {
    return std::tuple(a.d, a.c, static_cast<int>(a.noise.kind), a.noise.value) <
           std::tuple(b.d, b.c, static_cast<int>(b.noise.kind), b.noise.value);
  });
  return rows;
}

}  // namespace elfpie::baseline
