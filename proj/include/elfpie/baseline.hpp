#pragma once

// Momentum FPIE baseline, the LSNR quality metric and the benchmark grid.

#include <optional>
#include <string>
#include <vector>

#include "elfpie/core.hpp"
#include "elfpie/solver.hpp"

namespace elfpie::baseline {

struct FpieConfig {
  std::size_t iterations = 50;  // full passes over the LEDs
  double step = 1.0;
  double pupil_step = 1.0;
  double momentum = 0.9;
  bool learn_pupil = false;
};

struct FpieResult {
  ObjectEstimate estimate;
  PupilFunction pupil;
};

// LEDs sorted by illumination NA, ties broken by azimuth: a spiral out from
// the optical axis. Returns group indices.
std::vector<std::size_t> spiral_order(const IlluminationPlan& plan);

// Sequential amplitude-replacement FPIE. Each LED visit replaces the modulus
// of the exit wave by sqrt(I_n) and feeds the difference back into the
// spectrum window (and optionally the pupil); after every pass the spectrum
// takes a heavy-ball step v = m v + (Psi - Psi_prev), Psi += m v.
// Requires one LED per exposure.
FpieResult fpie_momentum_reconstruct(const AcquisitionStack& stack, const FpieConfig& config,
                                     const std::optional<ComplexField>& initial = std::nullopt);

inline constexpr double kLsnrCap = 300.0;

// 10 log10(|truth|^2 / |truth - (rec + b*)|^2) with b* = mean(truth - rec),
// clamped to [-300, 300] dB.
double lsnr(const RealPlane& recovered, const RealPlane& truth);

struct Score {
  double lsnr_amp = 0.0;
  double lsnr_phase = 0.0;
  double mean = 0.0;
};

// Amplitude compared as is; phase after removing the circular mean of
// (angle(O) - truth phase).
Score score_reconstruction(const ComplexField& object, const GroundTruth& truth);
Score score_reconstruction(const ComplexField& object, const std::optional<GroundTruth>& truth);

// ---------------------------------------------------------------------------
// Benchmark grid

enum class Method { elfpie, mfpie };
std::string to_string(Method method);
Method parse_method(const std::string& text);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double value = 0.0;  // Gaussian std, SNP density or Poisson level
  std::string level;   // label copied to the table

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

struct ProtocolCell {
  double d = 0.0;  // LED shift radius, m
  double c = 0.0;  // uneven illumination strength
  NoiseSpec noise;
  VignettingSpec vignetting;
};

struct BenchmarkProtocol {
  SystemGeometry geometry = desk_geometry();
  std::vector<ProtocolCell> cells;
  std::vector<Method> methods{Method::elfpie, Method::mfpie};
  std::size_t repeats = 1;
  std::uint64_t base_seed = 1;
  double phantom_band = 0.0;  // spectral px; 0 selects the synthetic-aperture default
  ReconstructionConfig elfpie;
  FpieConfig mfpie;
};

struct BenchmarkCell {
  double d = 0.0;
  double c = 0.0;
  NoiseSpec noise;
  Method method = Method::elfpie;
  std::size_t repeats = 0;
  double mean_lsnr_amp = 0.0;
  double mean_lsnr_phase = 0.0;
  double mean_lsnr = 0.0;
  bool failed = false;
  std::string error;
};

// Seeds for repeat r of cell k; identical for every method of the cell.
std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t cell, std::size_t repeat);

// Band radius of the default phantom: the synthetic-aperture radius of the
// geometry shrunk to leave the outer ring of LEDs some overlap.
double default_phantom_band(const SystemGeometry& geometry);

DegradationSpec degradation_for(const ProtocolCell& cell, std::uint64_t seed);

// Runs every (cell, method) pair over `repeats` simulated stacks. Failures
// are recorded per cell. Rows are sorted by (d, c, noise kind, noise value)
// with method order kept inside a cell.
std::vector<BenchmarkCell> benchmark_grid(const BenchmarkProtocol& protocol);

}  // namespace elfpie::baseline
