#include <gtest/gtest.h>

#include <cmath>

#include "elfpie/baseline.hpp"
#include "elfpie/degradation.hpp"
#include "elfpie/fft.hpp"
#include "elfpie/optics.hpp"

using namespace elfpie;

namespace {

SystemGeometry small_geometry() {
  SystemGeometry g = desk_geometry();
  g.hr_size = {97, 97};
  g.lr_size = {32, 32};
  g.led_rows = g.led_cols = 5;
  g.led_pitch = 4e-3;
  return g;
}

GroundTruth ramp_truth(std::size_t n) {
  GroundTruth t{RealPlane(n, n), RealPlane(n, n)};
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      t.amplitude(x, y) = 0.2 + 0.05 * static_cast<double>((x * 7 + y * 3) % 13);
      t.phase(x, y) = 0.1 + 0.04 * static_cast<double>((x * 5 + y * 11) % 17);
    }
  return t;
}

}  // namespace

TEST(Lsnr, CapsAndArithmetic) {
  RealPlane truth(2, 2, 5.0);
  EXPECT_EQ(baseline::lsnr(truth, truth), baseline::kLsnrCap);
  RealPlane shifted = truth;
  for (double& v : shifted) v += 7.0;
  EXPECT_EQ(baseline::lsnr(shifted, truth), baseline::kLsnrCap);

  // ||truth||^2 = 100, zero-mean residual of energy 1.
  RealPlane rec = truth;
  rec[0] += 0.5;
  rec[1] -= 0.5;
  rec[2] += 0.5;
  rec[3] -= 0.5;
  EXPECT_NEAR(baseline::lsnr(rec, truth), 20.0, 1e-12);
}

TEST(Score, ExactGlobalPhaseAndScaling) {
  const GroundTruth t = ramp_truth(16);
  const ComplexField exact = sim::compose_object(t);
  const auto s0 = baseline::score_reconstruction(exact, t);
  EXPECT_EQ(s0.lsnr_amp, baseline::kLsnrCap);
  EXPECT_GT(s0.lsnr_phase, 250.0);

  ComplexField rotated = exact;
  for (auto& v : rotated.values()) v *= std::polar(1.0, 1.1);
  const auto s1 = baseline::score_reconstruction(rotated, t);
  EXPECT_EQ(s1.lsnr_amp, s0.lsnr_amp);
  EXPECT_GT(s1.lsnr_phase, 250.0);

  ComplexField doubled = exact;
  for (auto& v : doubled.values()) v *= 2.0;
  const auto s2 = baseline::score_reconstruction(doubled, t);
  // Residual after removing the mean offset is A - mean(A).
  double mean = 0;
  for (double a : t.amplitude.values()) mean += a;
  mean /= static_cast<double>(t.amplitude.size());
  double sig = 0, res = 0;
  for (double a : t.amplitude.values()) {
    sig += a * a;
    res += (a - mean) * (a - mean);
  }
  EXPECT_NEAR(s2.lsnr_amp, 10.0 * std::log10(sig / res), 1e-9);
  EXPECT_LT(s2.lsnr_amp, s0.lsnr_amp);
  EXPECT_NEAR(s2.lsnr_phase, s0.lsnr_phase, 1e-6);
}

TEST(Score, MissingTruthThrows) {
  EXPECT_THROW(baseline::score_reconstruction(ComplexField(4, 4), std::optional<GroundTruth>{}), std::invalid_argument);
}

TEST(Mfpie, SpiralStartsOnAxis) {
  const SystemGeometry g = desk_geometry();
  const auto plan = optics::sequential_plan(g);
  const auto order = baseline::spiral_order(plan);
  ASSERT_EQ(order.size(), plan.group_count());
  EXPECT_EQ(order.front(), optics::center_group(plan));
  for (std::size_t k = 1; k < order.size(); ++k)
    EXPECT_LE(plan.groups[order[k - 1]].front().illumination_na,
              plan.groups[order[k]].front().illumination_na + 1e-12);
}

TEST(Mfpie, ZeroIterationsReturnsInitialization) {
  const SystemGeometry g = small_geometry();
  const auto stack = sim::simulate(sim::compose_object(ramp_truth(97)), g, optics::sequential_plan(g), {}).stack;
  baseline::FpieConfig c;
  c.iterations = 0;
  const auto r = baseline::fpie_momentum_reconstruct(stack, c);
  EXPECT_EQ(r.estimate.spectrum, solver::initial_spectrum(stack));
}

TEST(Mfpie, ConsistentMeasurementsAreAFixedPoint) {
  // When every image already equals |exit wave|^2 the modulus replacement is
  // the identity, so a pass without momentum must leave the spectrum alone.
  const SystemGeometry g = small_geometry();
  const auto plan = optics::sequential_plan(g);
  const ComplexField init = ops::dft2(sim::compose_object(ramp_truth(97)));
  AcquisitionStack stack;
  stack.geometry = g;
  stack.plan = plan;
  stack.images = optics::forward_ideal(init, optics::pupil_init(g), plan);
  baseline::FpieConfig c;
  c.iterations = 1;
  c.momentum = 0.0;
  const auto r = baseline::fpie_momentum_reconstruct(stack, c, init);
  double worst = 0, peak = 0;
  for (std::size_t i = 0; i < init.size(); ++i) {
    worst = std::max(worst, std::abs(r.estimate.spectrum[i] - init[i]));
    peak = std::max(peak, std::abs(init[i]));
  }
  EXPECT_LT(worst, 1e-12 * peak);
}

TEST(Mfpie, MultiplexedPlanRejected) {
  const SystemGeometry g = small_geometry();
  AcquisitionStack stack;
  stack.geometry = g;
  stack.plan = optics::multiplexed_plan(g, 5);
  stack.images.assign(stack.plan.group_count(), RealPlane(32, 32, 1.0));
  EXPECT_THROW(baseline::fpie_momentum_reconstruct(stack, {}), std::invalid_argument);
}

TEST(Mfpie, CleanDeskRecovery) {
  const SystemGeometry g = desk_geometry();
  const auto truth = sim::make_phantom(g.hr_size, baseline::default_phantom_band(g), 21);
  const auto stack = sim::simulate(sim::compose_object(truth), g, optics::sequential_plan(g), {}).stack;
  baseline::FpieConfig c;
  c.iterations = 50;
  const auto r = baseline::fpie_momentum_reconstruct(stack, c);
  EXPECT_GE(baseline::score_reconstruction(r.estimate.object_field(), truth).mean, 30.0);
}

TEST(Benchmark, SmokeSortAndFailures) {
  baseline::BenchmarkProtocol p;
  p.geometry = small_geometry();
  p.elfpie.iterations = 5;
  p.mfpie.iterations = 5;
  baseline::ProtocolCell noisy;
  noisy.c = 0.25;
  noisy.noise = {NoiseKind::gaussian, 1e-4, "1e-4"};
  baseline::ProtocolCell clean;
  baseline::ProtocolCell broken;
  broken.noise = {NoiseKind::snp, 2.0, "bad"};
  p.cells = {noisy, broken, clean};
  const auto rows = baseline::benchmark_grid(p);
  ASSERT_EQ(rows.size(), 6u);
  // Sorted by (d, c, noise kind, value): clean, broken (c = 0, snp), noisy (c = 0.25).
  EXPECT_EQ(rows[0].noise.kind, NoiseKind::none);
  EXPECT_EQ(rows[0].method, baseline::Method::elfpie);
  EXPECT_EQ(rows[1].method, baseline::Method::mfpie);
  EXPECT_TRUE(rows[2].failed);
  EXPECT_FALSE(rows[2].error.empty());
  EXPECT_EQ(rows[4].c, 0.25);
  for (std::size_t i : {0u, 1u, 4u, 5u}) {
    EXPECT_FALSE(rows[i].failed);
    EXPECT_TRUE(std::isfinite(rows[i].mean_lsnr));
  }
}

TEST(Benchmark, RepeatsAreReproducible) {
  baseline::BenchmarkProtocol p;
  p.geometry = small_geometry();
  p.elfpie.iterations = 3;
  p.mfpie.iterations = 3;
  p.repeats = 3;
  baseline::ProtocolCell cell;
  cell.noise = {NoiseKind::snp, 0.05, "0.05"};
  p.cells = {cell};
  const auto a = baseline::benchmark_grid(p);
  const auto b = baseline::benchmark_grid(p);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].mean_lsnr_amp, b[i].mean_lsnr_amp);
    EXPECT_EQ(a[i].mean_lsnr_phase, b[i].mean_lsnr_phase);
    EXPECT_EQ(a[i].repeats, 3u);
  }
  EXPECT_EQ(baseline::cell_seed(1, 0, 0), baseline::cell_seed(1, 0, 0));
  EXPECT_NE(baseline::cell_seed(1, 0, 0), baseline::cell_seed(1, 0, 1));
  EXPECT_NE(baseline::cell_seed(1, 0, 0), baseline::cell_seed(1, 1, 0));
}

TEST(Benchmark, MethodNames) {
  EXPECT_EQ(baseline::parse_method("elfpie"), baseline::Method::elfpie);
  EXPECT_EQ(baseline::to_string(baseline::parse_method("mfpie")), "mfpie");
  EXPECT_THROW(baseline::parse_method("epie"), std::invalid_argument);
}
