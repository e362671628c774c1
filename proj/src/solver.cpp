#include "elfpie/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "elfpie/fft.hpp"
#include "elfpie/optics.hpp"
#include "elfpie/reduction.hpp"

namespace elfpie::solver {

namespace {

constexpr double kTinyIntensity = 1e-12;

struct Contribution {
  ComplexField field;  // B-sized
  PixelOffset offset;
};

std::vector<std::pair<std::size_t, std::size_t>> flat_entries(const IlluminationPlan& plan) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t n = 0; n < plan.groups.size(); ++n)
    for (std::size_t m = 0; m < plan.groups[n].size(); ++m) out.emplace_back(n, m);
  return out;
}

RealPlane scaled(const RealPlane& img, FidelityMode mode, double gamma) {
  RealPlane out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = scale_value(mode, gamma, img[i]);
  return out;
}

// Sums A-sized embeddings of B-sized patches. Deterministic mode sums every
// HR pixel's contributors pairwise in (n, m) order, so the result is
// independent of the thread count.
ComplexField accumulate_spectrum(const std::vector<Contribution>& parts, GridSize hr, bool deterministic) {
  ComplexField out(hr.width, hr.height);
  if (parts.empty()) return out;
  const long pw = static_cast<long>(parts.front().field.width());
  const long ph = static_cast<long>(parts.front().field.height());
  const long cx = static_cast<long>(hr.width / 2) - pw / 2;
  const long cy = static_cast<long>(hr.height / 2) - ph / 2;

  if (!deterministic) {
#pragma omp parallel
    {
      ComplexField local(hr.width, hr.height);
#pragma omp for schedule(dynamic)
      for (std::size_t k = 0; k < parts.size(); ++k) optics::embed_add_patch(local, parts[k].field, parts[k].offset);
#pragma omp critical
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += local[i];
    }
    return out;
  }

#pragma omp parallel for schedule(static)
  for (long y = 0; y < static_cast<long>(hr.height); ++y) {
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const long y0 = cy + parts[k].offset.y;
      if (y >= y0 && y < y0 + ph) rows.push_back(k);
    }
    if (rows.empty()) continue;
    std::vector<Complex> values;
    values.reserve(rows.size());
    for (long x = 0; x < static_cast<long>(hr.width); ++x) {
      values.clear();
      for (std::size_t k : rows) {
        const long x0 = cx + parts[k].offset.x;
        if (x < x0 || x >= x0 + pw) continue;
        const long y0 = cy + parts[k].offset.y;
        values.push_back(parts[k].field(static_cast<std::size_t>(x - x0), static_cast<std::size_t>(y - y0)));
      }
      if (!values.empty())
        out(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) =
            pairwise_sum(std::span<const Complex>(values));
    }
  }
  return out;
}

ComplexField accumulate_patches(const std::vector<ComplexField>& parts, std::size_t w, std::size_t h,
                                bool deterministic) {
  ComplexField out(w, h);
  if (parts.empty()) return out;
  if (!deterministic) {
#pragma omp parallel
    {
      ComplexField local(w, h);
#pragma omp for schedule(dynamic)
      for (std::size_t k = 0; k < parts.size(); ++k)
        for (std::size_t i = 0; i < local.size(); ++i) local[i] += parts[k][i];
#pragma omp critical
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += local[i];
    }
    return out;
  }
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(out.size()); ++i) {
    std::vector<Complex> values(parts.size());
    for (std::size_t k = 0; k < parts.size(); ++k) values[k] = parts[k][static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = pairwise_sum(std::span<const Complex>(values));
  }
  return out;
}

double sum_losses(const std::vector<double>& losses) { return pairwise_sum(std::span<const double>(losses)); }

void check_measured(const IlluminationPlan& plan, const std::vector<RealPlane>& measured) {
  if (measured.size() != plan.group_count()) {
    std::ostringstream os;
    os << "measured image count " << measured.size() << " differs from group count " << plan.group_count();
    throw std::invalid_argument(os.str());
  }
}

struct PenaltyTerms {
  double amp = 0.0;
  double phase = 0.0;
  ComplexField grad_amp;
  ComplexField grad_phase;
};

template <std::size_t K>
void apply_weights(ops::HessianField3<double>& h, const double (&w)[K]) {
  for (std::size_t i = 0; i < h.xx.size(); ++i) {
    h.xx[i] *= w[0];
    h.yy[i] *= w[1];
    h.xy[i] *= w[2];
  }
}

// Loss and gradient of both Hessian penalties from one O = idft2(Psi).
PenaltyTerms penalty_terms(const ComplexField& spectrum, const PenaltySettings& s, bool want_amp,
                           bool want_phase, bool with_gradients) {
  PenaltyTerms out;
  const ComplexField object = ops::idft2(spectrum);
  const std::size_t w = object.width();
  const std::size_t h = object.height();
  if (want_amp) {
    RealPlane amp(w, h);
    for (std::size_t i = 0; i < amp.size(); ++i) amp[i] = std::abs(object[i]);
    const auto hess = ops::hessian(amp);
    out.amp = ops::l1_norm(hess, s.omega_mode, s.epsilon);
    if (with_gradients) {
      auto om = ops::omega(hess, s.omega_mode, s.epsilon);
      apply_weights(om, ops::kHessianWeights);
      const RealPlane back = ops::hessian_adjoint(om);
      ComplexField field(w, h);
      for (std::size_t i = 0; i < field.size(); ++i)
        field[i] = 0.5 * object[i] / (std::abs(object[i]) + s.eta) * back[i];
      out.grad_amp = ops::dft2(field);
    }
  }
  if (want_phase) {
    RealPlane phase(w, h);
    for (std::size_t i = 0; i < phase.size(); ++i) phase[i] = std::arg(object[i]);
    const auto hess = ops::hessian(phase);
    out.phase = ops::l1_norm(hess, s.omega_mode, s.epsilon);
    if (with_gradients) {
      auto om = ops::omega(hess, s.omega_mode, s.epsilon);
      apply_weights(om, ops::kHessianWeights);
      const RealPlane back = ops::hessian_adjoint(om);
      ComplexField field(w, h);
      const Complex half_i(0.0, 0.5);
      for (std::size_t i = 0; i < field.size(); ++i)
        field[i] = half_i * object[i] / (std::norm(object[i]) + s.eta) * back[i];
      out.grad_phase = ops::dft2(field);
    }
  }
  return out;
}

PenaltySettings penalty_settings(const ReconstructionConfig& config) {
  return {config.omega_mode, config.epsilon_omega, config.eta_phase};
}

}  // namespace

FidelitySettings fidelity_settings(const ReconstructionConfig& config) {
  FidelitySettings s;
  s.mode = config.fidelity_mode;
  s.gamma = config.gamma;
  s.omega_mode = config.omega_mode;
  s.epsilon = config.epsilon_omega;
  s.sqrt_residual_variant = config.sqrt_residual_variant;
  s.deterministic_reduction = config.deterministic_reduction;
  return s;
}

double scale_value(FidelityMode mode, double gamma, double x) {
  x = std::max(x, 0.0);
  switch (mode) {
    case FidelityMode::amplitude: return std::sqrt(x);
    case FidelityMode::intensity: return x;
    case FidelityMode::gamma: return std::pow(x, gamma);
    case FidelityMode::log1p: return std::log1p(x);
  }
  return x;
}

double scale_derivative(FidelityMode mode, double gamma, double x) {
  switch (mode) {
    case FidelityMode::intensity: return 1.0;
    case FidelityMode::log1p: return 1.0 / (1.0 + std::max(x, 0.0));
    case FidelityMode::amplitude:
      // Zero where the model intensity vanishes; the chain through |o|^2
      // already carries o, so the product stays bounded.
      if (x <= kTinyIntensity) return 0.0;
      return 0.5 / std::sqrt(x);
    case FidelityMode::gamma:
      if (x <= kTinyIntensity) return gamma >= 1.0 ? gamma * std::pow(std::max(x, 0.0), gamma - 1.0) : 0.0;
      return gamma * std::pow(x, gamma - 1.0);
  }
  return 1.0;
}

GroupTerms fidelity_w(std::size_t group, const ComplexField& spectrum, const PupilFunction& pupil,
                      const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                      const FidelitySettings& s) {
  const auto& entries = plan.groups.at(group);
  const RealPlane& meas = measured.at(group);
  const std::size_t w = pupil.field.width();
  const std::size_t h = pupil.field.height();
  const bool literal = s.sqrt_residual_variant && s.mode == FidelityMode::intensity;

  GroupTerms out;
  std::vector<ComplexField> waves;
  waves.reserve(entries.size());
  RealPlane model(w, h);
  for (const auto& e : entries) {
    waves.push_back(optics::exit_wave(spectrum, pupil, e.offset));
    const auto& o = waves.back();
    for (std::size_t i = 0; i < model.size(); ++i) model[i] += std::norm(o[i]);
  }

  const FidelityMode feature_mode = literal ? FidelityMode::amplitude : s.mode;
  const auto g_model = ops::grad(scaled(model, feature_mode, s.gamma));
  const auto g_meas = ops::grad(scaled(meas, feature_mode, s.gamma));
  ops::VectorField2<double> residual{RealPlane(w, h), RealPlane(w, h)};
  for (std::size_t i = 0; i < model.size(); ++i) {
    residual.x[i] = g_model.x[i] - g_meas.x[i];
    residual.y[i] = g_model.y[i] - g_meas.y[i];
  }
  out.loss = ops::l1_norm(residual, s.omega_mode, s.epsilon);
  const RealPlane back = ops::grad_adjoint(ops::omega(residual, s.omega_mode, s.epsilon));

  RealPlane factor(w, h);
  for (std::size_t i = 0; i < factor.size(); ++i)
    factor[i] = literal ? back[i] : scale_derivative(s.mode, s.gamma, model[i]) * back[i];

  out.w.reserve(waves.size());
  for (auto& o : waves) {
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= factor[i];
    out.w.push_back(std::move(o));
  }
  return out;
}

double fidelity_loss(const ComplexField& spectrum, const PupilFunction& pupil, const IlluminationPlan& plan,
                     const std::vector<RealPlane>& measured, const FidelitySettings& s) {
  check_measured(plan, measured);
  std::vector<double> losses(plan.group_count(), 0.0);
  const std::size_t w = pupil.field.width();
  const std::size_t h = pupil.field.height();
  const bool literal = s.sqrt_residual_variant && s.mode == FidelityMode::intensity;
  const FidelityMode feature_mode = literal ? FidelityMode::amplitude : s.mode;
#pragma omp parallel for schedule(dynamic)
  for (long n = 0; n < static_cast<long>(plan.group_count()); ++n) {
    RealPlane model(w, h);
    for (const auto& e : plan.groups[static_cast<std::size_t>(n)]) {
      const auto o = optics::exit_wave(spectrum, pupil, e.offset);
      for (std::size_t i = 0; i < model.size(); ++i) model[i] += std::norm(o[i]);
    }
    const auto a = ops::grad(scaled(model, feature_mode, s.gamma));
    const auto b = ops::grad(scaled(measured[static_cast<std::size_t>(n)], feature_mode, s.gamma));
    ops::VectorField2<double> r{RealPlane(w, h), RealPlane(w, h)};
    for (std::size_t i = 0; i < model.size(); ++i) {
      r.x[i] = a.x[i] - b.x[i];
      r.y[i] = a.y[i] - b.y[i];
    }
    losses[static_cast<std::size_t>(n)] = ops::l1_norm(r, s.omega_mode, s.epsilon);
  }
  return sum_losses(losses);
}

FidelityGradients fidelity_gradients(const ComplexField& spectrum, const PupilFunction& pupil,
                                     const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                                     const FidelitySettings& s, bool with_pupil) {
  check_measured(plan, measured);
  const auto entries = flat_entries(plan);
  std::vector<std::size_t> first(plan.group_count() + 1, 0);
  for (std::size_t n = 0; n < plan.group_count(); ++n) first[n + 1] = first[n] + plan.groups[n].size();

  std::vector<Contribution> spec_parts(entries.size());
  std::vector<ComplexField> pupil_parts(with_pupil ? entries.size() : 0);
  std::vector<double> losses(plan.group_count(), 0.0);

#pragma omp parallel for schedule(dynamic)
  for (long n = 0; n < static_cast<long>(plan.group_count()); ++n) {
    const auto gn = static_cast<std::size_t>(n);
    GroupTerms terms = fidelity_w(gn, spectrum, pupil, plan, measured, s);
    losses[gn] = terms.loss;
    for (std::size_t m = 0; m < terms.w.size(); ++m) {
      const auto& entry = plan.groups[gn][m];
      ComplexField back = ops::idft2(terms.w[m]);
      if (with_pupil) {
        const ComplexField window = optics::extract_patch(spectrum, entry.offset, {back.height(), back.width()});
        ComplexField gp(back.width(), back.height());
        for (std::size_t y = 0; y < gp.height(); ++y)
          for (std::size_t x = 0; x < gp.width(); ++x)
            if (pupil.inside_support(x, y)) gp(x, y) = std::conj(window(x, y)) * back(x, y);
        pupil_parts[first[gn] + m] = std::move(gp);
      }
      for (std::size_t i = 0; i < back.size(); ++i) back[i] *= std::conj(pupil.field[i]);
      spec_parts[first[gn] + m] = {std::move(back), entry.offset};
    }
  }

  FidelityGradients out;
  out.loss = sum_losses(losses);
  out.spectrum = accumulate_spectrum(spec_parts, {spectrum.height(), spectrum.width()}, s.deterministic_reduction);
  if (with_pupil)
    out.pupil = accumulate_patches(pupil_parts, pupil.field.width(), pupil.field.height(),
                                   s.deterministic_reduction);
  return out;
}

ComplexField grad_fidelity_spectrum(const ComplexField& spectrum, const PupilFunction& pupil,
                                    const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                                    const FidelitySettings& settings) {
  return fidelity_gradients(spectrum, pupil, plan, measured, settings, false).spectrum;
}

ComplexField grad_fidelity_pupil(const ComplexField& spectrum, const PupilFunction& pupil,
                                 const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                                 const FidelitySettings& settings) {
  return *fidelity_gradients(spectrum, pupil, plan, measured, settings, true).pupil;
}

double hessian_penalty_amp(const ComplexField& spectrum, const PenaltySettings& settings) {
  return penalty_terms(spectrum, settings, true, false, false).amp;
}

double hessian_penalty_phase(const ComplexField& spectrum, const PenaltySettings& settings) {
  return penalty_terms(spectrum, settings, false, true, false).phase;
}

ComplexField grad_hessian_amp(const ComplexField& spectrum, const PenaltySettings& settings) {
  return penalty_terms(spectrum, settings, true, false, true).grad_amp;
}

ComplexField grad_hessian_phase(const ComplexField& spectrum, const PenaltySettings& settings) {
  return penalty_terms(spectrum, settings, false, true, true).grad_phase;
}

double auto_alpha_beta(const std::vector<RealPlane>& measured, FidelityMode mode, double gamma) {
  if (measured.empty()) throw std::invalid_argument("auto_alpha_beta: empty stack");
  const ops::Kernel lap = ops::laplacian_kernel();
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& img : measured) {
    const RealPlane response = ops::convolve(scaled(img, mode, gamma), lap, ops::Boundary::periodic);
    for (double v : response.values()) total += std::abs(v);
    count += response.size();
  }
  return 0.2 * std::sqrt(std::numbers::pi / 2.0) * total / static_cast<double>(count);
}

TotalGradient total_gradient(const ComplexField& spectrum, const PupilFunction& pupil,
                             const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                             const ReconstructionConfig& config, double alpha, double beta) {
  FidelityGradients fid =
      fidelity_gradients(spectrum, pupil, plan, measured, fidelity_settings(config), config.learn_pupil);
  const PenaltyTerms pen = penalty_terms(spectrum, penalty_settings(config), alpha != 0.0, beta != 0.0, true);

  TotalGradient out;
  out.spectrum = std::move(fid.spectrum);
  for (std::size_t i = 0; i < out.spectrum.size(); ++i) {
    if (alpha != 0.0) out.spectrum[i] += alpha * pen.grad_amp[i];
    if (beta != 0.0) out.spectrum[i] += beta * pen.grad_phase[i];
  }
  out.pupil = std::move(fid.pupil);
  out.report.fidelity = fid.loss;
  out.report.amp_hessian = pen.amp;
  out.report.phase_hessian = pen.phase;
  out.report.total = fid.loss + alpha * pen.amp + beta * pen.phase;
  return out;
}

LossReport evaluate_loss(const ComplexField& spectrum, const PupilFunction& pupil, const IlluminationPlan& plan,
                         const std::vector<RealPlane>& measured, const ReconstructionConfig& config, double alpha,
                         double beta) {
  LossReport r;
  r.fidelity = fidelity_loss(spectrum, pupil, plan, measured, fidelity_settings(config));
  const PenaltyTerms pen = penalty_terms(spectrum, penalty_settings(config), true, true, false);
  r.amp_hessian = pen.amp;
  r.phase_hessian = pen.phase;
  r.total = r.fidelity + alpha * r.amp_hessian + beta * r.phase_hessian;
  return r;
}

// ---------------------------------------------------------------------------

OptimizerState make_optimizer_state(std::size_t width, std::size_t height, double step) {
  OptimizerState s{ComplexField(width, height), RealPlane(width, height), RealPlane(width, height), 0};
  std::fill(s.delta.begin(), s.delta.end(), step * step);
  return s;
}

ComplexField adabelief_step(OptimizerState& state, const ComplexField& g, const OptimizerSettings& p) {
  require_same_shape(state.mu, g, "adabelief_step");
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(p.gamma1, t);
  const double c2 = 1.0 - std::pow(p.gamma2, t);
  ComplexField inc(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Complex& mu = state.mu[i];
    mu = p.gamma1 * mu + (1.0 - p.gamma1) * g[i];
    state.v[i] = p.gamma2 * state.v[i] + (1.0 - p.gamma2) * std::norm(mu - g[i]);
    const Complex mu_hat = mu / c1;
    const double v_hat = state.v[i] / c2;
    const double rate = (std::sqrt(state.delta[i]) + p.eta) / std::sqrt(v_hat + p.eta);
    inc[i] = rate * (p.gamma1 * mu_hat + (1.0 - p.gamma1) * g[i]);
    state.delta[i] = p.gamma1 * state.delta[i] + (1.0 - p.gamma1) * std::norm(inc[i]);
  }
  return inc;
}

ComparatorState make_comparator_state(std::size_t width, std::size_t height) {
  return {ComplexField(width, height), RealPlane(width, height), 0};
}

ComplexField comparator_step(OptimizerKind kind, ComparatorState& state, const ComplexField& g, double lr,
                             const OptimizerSettings& p) {
  require_same_shape(state.m, g, "comparator_step");
  ++state.t;
  const double t = static_cast<double>(state.t);
  ComplexField inc(g.width(), g.height());
  switch (kind) {
    case OptimizerKind::sgd:
      for (std::size_t i = 0; i < g.size(); ++i) inc[i] = lr * g[i];
      break;
    case OptimizerKind::nadam: {
      const double c1 = 1.0 - std::pow(p.gamma1, t);
      const double c1_next = 1.0 - std::pow(p.gamma1, t + 1.0);
      const double c2 = 1.0 - std::pow(p.gamma2, t);
      for (std::size_t i = 0; i < g.size(); ++i) {
        state.m[i] = p.gamma1 * state.m[i] + (1.0 - p.gamma1) * g[i];
        state.s[i] = p.gamma2 * state.s[i] + (1.0 - p.gamma2) * std::norm(g[i]);
        const Complex m_bar = p.gamma1 * state.m[i] / c1_next + (1.0 - p.gamma1) * g[i] / c1;
        inc[i] = lr * m_bar / (std::sqrt(state.s[i] / c2) + p.eta);
      }
      break;
    }
    case OptimizerKind::adabelief_plain: {
      const double c1 = 1.0 - std::pow(p.gamma1, t);
      const double c2 = 1.0 - std::pow(p.gamma2, t);
      for (std::size_t i = 0; i < g.size(); ++i) {
        state.m[i] = p.gamma1 * state.m[i] + (1.0 - p.gamma1) * g[i];
        state.s[i] = p.gamma2 * state.s[i] + (1.0 - p.gamma2) * std::norm(state.m[i] - g[i]);
        inc[i] = lr * (state.m[i] / c1) / std::sqrt(state.s[i] / c2 + p.eta);
      }
      break;
    }
    case OptimizerKind::modified_adabelief:
      throw std::invalid_argument("comparator_step: modified_adabelief uses adabelief_step");
  }
  return inc;
}

ParameterOptimizer::ParameterOptimizer(OptimizerKind kind, std::size_t width, std::size_t height, double step,
                                       OptimizerSettings settings)
    : kind_(kind),
      step_(step),
      settings_(settings),
      adaptive_(make_optimizer_state(kind == OptimizerKind::modified_adabelief ? width : 0,
                                     kind == OptimizerKind::modified_adabelief ? height : 0, step)),
      comparator_(make_comparator_state(kind == OptimizerKind::modified_adabelief ? 0 : width,
                                        kind == OptimizerKind::modified_adabelief ? 0 : height)) {}

ComplexField ParameterOptimizer::increment(const ComplexField& g) {
  if (kind_ == OptimizerKind::modified_adabelief) return adabelief_step(adaptive_, g, settings_);
  return comparator_step(kind_, comparator_, g, step_, settings_);
}

// ---------------------------------------------------------------------------

ComplexField initial_spectrum(const AcquisitionStack& stack) {
  const auto& hr = stack.geometry.hr_size;
  ComplexField out(hr.width, hr.height);
  if (stack.images.empty()) return out;
  const RealPlane& center = stack.images.at(optics::center_group(stack.plan));
  ComplexField amp(center.width(), center.height());
  for (std::size_t i = 0; i < amp.size(); ++i) amp[i] = std::sqrt(std::max(center[i], 0.0));
  optics::embed_add_patch(out, ops::dft2(amp), PixelOffset{0, 0});
  return out;
}

Plane<unsigned char> aperture_support(const IlluminationPlan& plan, const PupilFunction& pupil, GridSize hr) {
  Plane<unsigned char> mask(hr.width, hr.height);
  const long pw = static_cast<long>(pupil.field.width());
  const long ph = static_cast<long>(pupil.field.height());
  for (const auto& group : plan.groups)
    for (const auto& e : group) {
      const long x0 = static_cast<long>(hr.width / 2) - pw / 2 + e.offset.x;
      const long y0 = static_cast<long>(hr.height / 2) - ph / 2 + e.offset.y;
      for (long y = 0; y < ph; ++y)
        for (long x = 0; x < pw; ++x) {
          const long gx = x0 + x;
          const long gy = y0 + y;
          if (gx < 0 || gy < 0 || gx >= static_cast<long>(hr.width) || gy >= static_cast<long>(hr.height)) continue;
          if (pupil.inside_support(static_cast<std::size_t>(x), static_cast<std::size_t>(y)))
            mask(static_cast<std::size_t>(gx), static_cast<std::size_t>(gy)) = 1;
        }
    }
  return mask;
}

namespace {

bool finite_report(const LossReport& r) {
  return std::isfinite(r.fidelity) && std::isfinite(r.amp_hessian) && std::isfinite(r.phase_hessian) &&
         std::isfinite(r.total);
}

void check_finite(const LossReport& r) {
  if (finite_report(r)) return;
  std::ostringstream os;
  os << "non-finite loss at iteration " << r.iteration << " (fidelity " << r.fidelity << ", amp_hessian "
     << r.amp_hessian << ", phase_hessian " << r.phase_hessian << ")";
  throw NumericalError(os.str());
}

}  // namespace

ReconstructionResult reconstruct(const AcquisitionStack& stack, const ReconstructionConfig& config,
                                 const ReconstructionOptions& options) {
  require(validate(stack.geometry, stack.plan, stack));
  if (config.iterations > 0) require(validate(config));

  ReconstructionResult result;
  result.pupil = options.initial_pupil ? *options.initial_pupil
                                       : optics::pupil_init(stack.geometry, config.pupil_max_modulus);
  result.estimate.spectrum = options.initial_spectrum ? *options.initial_spectrum : initial_spectrum(stack);
  const auto& hr = stack.geometry.hr_size;
  if (result.estimate.spectrum.width() != hr.width || result.estimate.spectrum.height() != hr.height)
    throw std::invalid_argument("initial spectrum does not match the high-resolution grid");

  const bool need_auto = !config.alpha || !config.beta;
  const double auto_value =
      need_auto ? auto_alpha_beta(stack.images, config.fidelity_mode, config.gamma) : 0.0;
  result.alpha = config.alpha.value_or(auto_value);
  result.beta = config.beta.value_or(auto_value);

  const OptimizerSettings opt{config.gamma1, config.gamma2, config.eta_opt};
  ParameterOptimizer spectrum_opt(config.optimizer, hr.width, hr.height, config.step, opt);
  ParameterOptimizer pupil_opt(config.optimizer, result.pupil.field.width(), result.pupil.field.height(),
                               config.pupil_step, opt);
  const ops::Kernel smoothing = ops::gaussian_kernel(config.pupil_smooth.size, config.pupil_smooth.sigma);

  ComplexField& psi = result.estimate.spectrum;
  std::optional<Plane<unsigned char>> support;
  if (config.restrict_to_aperture && config.iterations > 0) {
    support = aperture_support(stack.plan, result.pupil, hr);
    for (std::size_t i = 0; i < psi.size(); ++i)
      if (!(*support)[i]) psi[i] = 0.0;
  }
  for (std::size_t it = 0; it < config.iterations; ++it) {
    TotalGradient tg = total_gradient(psi, result.pupil, stack.plan, stack.images, config, result.alpha, result.beta);
    tg.report.iteration = it;
    check_finite(tg.report);
    result.trace.push_back(tg.report);
    if (options.on_iteration) options.on_iteration(tg.report);

    if (support)
      for (std::size_t i = 0; i < psi.size(); ++i)
        if (!(*support)[i]) tg.spectrum[i] = 0.0;
    const ComplexField inc = spectrum_opt.increment(tg.spectrum);
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] -= inc[i];

    if (config.learn_pupil && tg.pupil) {
      result.pupil.field = ops::convolve(result.pupil.field, smoothing, ops::Boundary::replicate);
      result.pupil.enforce_constraints();
      const ComplexField pinc = pupil_opt.increment(*tg.pupil);
      for (std::size_t i = 0; i < pinc.size(); ++i) result.pupil.field[i] -= pinc[i];
      result.pupil.enforce_constraints();
    }
  }

  LossReport last = evaluate_loss(psi, result.pupil, stack.plan, stack.images, config, result.alpha, result.beta);
  last.iteration = config.iterations;
  check_finite(last);
  result.trace.push_back(last);
  if (options.on_iteration) options.on_iteration(last);
  return result;
}

}  // namespace elfpie::solver
