#pragma once

// Gradient-feature L1 fidelity with Hessian penalties on amplitude and
// phase, their closed-form Wirtinger gradients, the adaptive-rate AdaBelief
// optimizer and the full-spectrum reconstruction loop.
//
// Gradient convention: for a real loss L(Psi), every grad_* function returns
// G = dL/d(conj Psi), so that dL = 2 Re <G, dPsi> with <a, b> = sum conj(a) b.

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "elfpie/core.hpp"
#include "elfpie/operators.hpp"

namespace elfpie::solver {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FidelitySettings {
  FidelityMode mode = FidelityMode::intensity;
  double gamma = 0.5;
  OmegaMode omega_mode = OmegaMode::isotropic;
  double epsilon = 1e-8;
  bool sqrt_residual_variant = false;
  bool deterministic_reduction = true;
};

FidelitySettings fidelity_settings(const ReconstructionConfig& config);

// Pixelwise scaling g: sqrt(x), x, x^gamma or ln(1 + x); inputs are clamped
// at zero first.
double scale_value(FidelityMode mode, double gamma, double x);
double scale_derivative(FidelityMode mode, double gamma, double x);

// sum_n || grad g(I_n) - grad g(sum_m |o_{n,m}|^2) ||_1 (smoothed per omega mode).
double fidelity_loss(const ComplexField& spectrum, const PupilFunction& pupil,
                     const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                     const FidelitySettings& settings);

struct GroupTerms {
  std::vector<ComplexField> w;  // one B-sized W per LED of the group
  double loss = 0.0;
};

// W_{n,m} = o_{n,m} * g'(S_n) * grad^T omega(grad g(S_n) - grad g(I_n)) for
// every LED m of group n. With sqrt_residual_variant in intensity mode the
// residual is taken on square roots and g' is dropped; that W is not the
// gradient of the intensity loss and is kept only for comparison.
GroupTerms fidelity_w(std::size_t group, const ComplexField& spectrum, const PupilFunction& pupil,
                      const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                      const FidelitySettings& settings);

struct FidelityGradients {
  double loss = 0.0;
  ComplexField spectrum;              // A-sized
  std::optional<ComplexField> pupil;  // B-sized, masked to the support disc
};

FidelityGradients fidelity_gradients(const ComplexField& spectrum, const PupilFunction& pupil,
                                     const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                                     const FidelitySettings& settings, bool with_pupil);

ComplexField grad_fidelity_spectrum(const ComplexField& spectrum, const PupilFunction& pupil,
                                    const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                                    const FidelitySettings& settings);
ComplexField grad_fidelity_pupil(const ComplexField& spectrum, const PupilFunction& pupil,
                                 const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                                 const FidelitySettings& settings);

struct PenaltySettings {
  OmegaMode omega_mode = OmegaMode::isotropic;
  double epsilon = 1e-8;
  double eta = 1e-6;
};

// ||H |O|||_1 and ||H angle(O)||_1 with O = idft2(Psi).
double hessian_penalty_amp(const ComplexField& spectrum, const PenaltySettings& settings);
double hessian_penalty_phase(const ComplexField& spectrum, const PenaltySettings& settings);
// 1/2 dft2(O / (|O| + eta) * H^T w omega(H|O|)).
ComplexField grad_hessian_amp(const ComplexField& spectrum, const PenaltySettings& settings);
// i/2 dft2(O / (|O|^2 + eta) * H^T w omega(H angle O)).
ComplexField grad_hessian_phase(const ComplexField& spectrum, const PenaltySettings& settings);

// (1/5) sqrt(pi/2) * mean_{n,p} |g(I_n) (x) L| with the 3x3 kernel
// [-1 2 -1; -2 4 -2; -1 2 -1], periodic boundary.
double auto_alpha_beta(const std::vector<RealPlane>& measured, FidelityMode mode, double gamma = 0.5);

struct LossReport {
  double fidelity = 0.0;
  double amp_hessian = 0.0;
  double phase_hessian = 0.0;
  double total = 0.0;
  std::size_t iteration = 0;
};

struct TotalGradient {
  ComplexField spectrum;
  std::optional<ComplexField> pupil;
  LossReport report;
};

// grad = grad_fid + alpha * grad_amp + beta * grad_phase; the pupil gradient
// carries the fidelity term only.
TotalGradient total_gradient(const ComplexField& spectrum, const PupilFunction& pupil,
                             const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                             const ReconstructionConfig& config, double alpha, double beta);

LossReport evaluate_loss(const ComplexField& spectrum, const PupilFunction& pupil,
                         const IlluminationPlan& plan, const std::vector<RealPlane>& measured,
                         const ReconstructionConfig& config, double alpha, double beta);

// ---------------------------------------------------------------------------
// Optimizers

struct OptimizerState {
  ComplexField mu;   // first moment
  RealPlane v;       // belief
  RealPlane delta;   // adaptive rate
  std::size_t t = 0;
};

struct OptimizerSettings {
  double gamma1 = 0.9;
  double gamma2 = 0.999;
  double eta = 1e-8;
};

// mu = v = 0, delta = step^2.
OptimizerState make_optimizer_state(std::size_t width, std::size_t height, double step = 1.0);

// One adaptive-rate AdaBelief step; returns the increment to subtract:
//   mu    = g1 mu + (1 - g1) g
//   v     = g2 v + (1 - g2) |mu - g|^2
//   inc   = (sqrt(delta) + eta) / sqrt(v_hat + eta) * (g1 mu_hat + (1 - g1) g)
//   delta = g1 delta + (1 - g1) |inc|^2
ComplexField adabelief_step(OptimizerState& state, const ComplexField& g, const OptimizerSettings& settings);

struct ComparatorState {
  ComplexField m;
  RealPlane s;
  std::size_t t = 0;
};

ComparatorState make_comparator_state(std::size_t width, std::size_t height);

// Textbook comparators:
//   sgd            inc = lr g
//   nadam          Nesterov-accelerated Adam (Dozat)
//   adabelief_plain inc = lr * m_hat / sqrt(s_hat + eta), s tracking |g - m|^2
// adabelief_plain shares the moment recursions of adabelief_step; it differs
// by a fixed rate lr and by using m_hat instead of the blend
// g1 m_hat + (1 - g1) g.
ComplexField comparator_step(OptimizerKind kind, ComparatorState& state, const ComplexField& g, double lr,
                             const OptimizerSettings& settings);

// Dispatches on OptimizerKind so the reconstruction loop can swap rules.
class ParameterOptimizer {
 public:
  ParameterOptimizer(OptimizerKind kind, std::size_t width, std::size_t height, double step,
                     OptimizerSettings settings);
  ComplexField increment(const ComplexField& g);

 private:
  OptimizerKind kind_;
  double step_;
  OptimizerSettings settings_;
  OptimizerState adaptive_;
  ComparatorState comparator_;
};

// ---------------------------------------------------------------------------
// Reconstruction

// Upsampled square root of the on-axis exposure, zero phase:
// Psi0 = embed(idft2(sqrt(I_center))).
ComplexField initial_spectrum(const AcquisitionStack& stack);

// 1 where some LED's shifted pupil support reaches the spectrum pixel.
Plane<unsigned char> aperture_support(const IlluminationPlan& plan, const PupilFunction& pupil, GridSize hr);

struct ReconstructionOptions {
  std::optional<ComplexField> initial_spectrum;
  std::optional<PupilFunction> initial_pupil;
  std::function<void(const LossReport&)> on_iteration;
};

struct ReconstructionResult {
  ObjectEstimate estimate;
  PupilFunction pupil;
  std::vector<LossReport> trace;  // entry k is the loss after k updates
  double alpha = 0.0;
  double beta = 0.0;
};

ReconstructionResult reconstruct(const AcquisitionStack& stack, const ReconstructionConfig& config,
                                 const ReconstructionOptions& options = {});

}  // namespace elfpie::solver
