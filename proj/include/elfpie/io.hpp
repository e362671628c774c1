#pragma once

// Dataset archives, reconstruction outputs, JSON settings, CSV tables and
// 8-bit grayscale rendering.
//
// Archive layout (directory):
//   meta.json        format_version, geometry (SI units), plan, degradation, seed
//   stack.bin        little-endian float64, row-major, image index slowest
//   truth_amp.bin    optional, hr_size float64
//   truth_phase.bin  optional, hr_size float64

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "elfpie/baseline.hpp"
#include "elfpie/core.hpp"
#include "elfpie/solver.hpp"

namespace elfpie::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kFormatVersion = 1;

// A required file is missing or unreadable.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw little-endian float64 files.
void write_f64(const fs::path& path, std::span<const double> values);
std::vector<double> read_f64(const fs::path& path, std::size_t expected_count);

json to_json(const SystemGeometry& geometry);
SystemGeometry geometry_from_json(const json& j);
json to_json(const IlluminationPlan& plan);
IlluminationPlan plan_from_json(const json& j);
json to_json(const DegradationSpec& spec);
// Accepts "poisson_level" (1..4) in place of "photon_scale" and
// "vignetting": "desk" for the desk preset.
DegradationSpec degradation_from_json(const json& j, GridSize lr_size);
json to_json(const ReconstructionConfig& config);
ReconstructionConfig config_from_json(const json& j);
baseline::FpieConfig fpie_config_from_json(const json& j);
baseline::BenchmarkProtocol protocol_from_json(const json& j);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

struct DatasetMeta {
  std::optional<DegradationSpec> degradation;
  std::optional<std::uint64_t> seed;
  std::optional<int> quantized_bits;
};

// Rounds every intensity onto a `bits`-bit grid spanning [0, stack max];
// negative values clamp to 0.
void quantize_stack(AcquisitionStack& stack, int bits);

void save_dataset(const AcquisitionStack& stack, const fs::path& dir, const DatasetMeta& meta = {});
// Throws FileError for missing files, ValidationError for version mismatch,
// size mismatch or any core invariant violation.
AcquisitionStack load_dataset(const fs::path& dir);

// Reconstruction output directory: amp.bin, phase.bin, spectrum.bin and
// pupil.bin (complex as interleaved re/im), meta.json and loss.csv.
struct ReconstructionRecord {
  ComplexField spectrum;
  ComplexField pupil;
  std::vector<solver::LossReport> trace;
  std::string method = "elfpie";
  double alpha = 0.0;
  double beta = 0.0;
};

void save_reconstruction(const ReconstructionRecord& record, const fs::path& dir);
ReconstructionRecord load_reconstruction(const fs::path& dir);
// Amplitude and phase maps from amp.bin / phase.bin.
GroundTruth load_reconstruction_maps(const fs::path& dir);
GroundTruth load_truth(const fs::path& dataset_dir);

void write_loss_csv(std::ostream& out, const std::vector<solver::LossReport>& trace);
void write_bench_csv(std::ostream& out, const std::vector<baseline::BenchmarkCell>& rows);

struct RenderTarget {
  enum class Kind { amplitude, phase, log_spectrum, raw_frame } kind = Kind::amplitude;
  std::size_t frame = 0;
};

// "amplitude", "phase", "log_spectrum", "raw_frame(n)" or "raw_frame:n".
RenderTarget parse_render_target(const std::string& text);

struct Gray8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

// Min-max normalization to 0..255; a constant plane renders as 128.
Gray8 render_plane(const RealPlane& plane);
// log10(|Psi| + 1).
RealPlane log_spectrum(const ComplexField& spectrum);

void write_pgm(const fs::path& path, const Gray8& image);
// Binary PGM (8 or 16 bit). Values are scaled to [0, 1].
RealPlane read_pgm(const fs::path& path);
// .pgm images are mapped to [0.1, 1]; .bin files are read as float64 of the
// given size.
RealPlane read_truth_image(const fs::path& path, GridSize size);

}  // namespace elfpie::io
