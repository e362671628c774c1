// elfpie command-line front end: simulate, reconstruct, evaluate, bench, render.
//
// Exit codes: 0 ok, 2 usage, 3 missing or unreadable file, 4 validation,
// 5 runtime or numerical failure.

#include <omp.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "elfpie/baseline.hpp"
#include "elfpie/degradation.hpp"
#include "elfpie/fft.hpp"
#include "elfpie/io.hpp"
#include "elfpie/optics.hpp"
#include "elfpie/solver.hpp"

using namespace elfpie;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 2, kMissingFile = 3, kInvalid = 4, kRuntime = 5 };

struct Globals {
  int threads = 0;
  bool deterministic = false;
};

SystemGeometry load_geometry(const std::string& arg, std::size_t* leds_per_group) {
  if (arg.empty() || arg == "desk") return desk_geometry();
  if (arg == "reference") return reference_geometry();
  const io::json j = io::read_json(arg);
  if (leds_per_group) *leds_per_group = j.value("leds_per_group", std::size_t{1});
  return io::geometry_from_json(j);
}

int cmd_simulate(const std::string& geometry_arg, const std::string& truth_amp, const std::string& truth_phase,
                 const std::string& degrade, std::uint64_t seed, const std::string& out,
                 std::optional<int> quantize) {
  std::size_t leds_per_group = 1;
  const SystemGeometry g = load_geometry(geometry_arg, &leds_per_group);
  require(validate(g));
  const IlluminationPlan plan =
      leds_per_group > 1 ? optics::multiplexed_plan(g, leds_per_group) : optics::sequential_plan(g);

  GroundTruth truth = sim::make_phantom(g.hr_size, baseline::default_phantom_band(g), seed);
  if (!truth_amp.empty()) truth.amplitude = io::read_truth_image(truth_amp, g.hr_size);
  if (!truth_phase.empty()) truth.phase = io::read_truth_image(truth_phase, g.hr_size);

  DegradationSpec spec;
  if (!degrade.empty()) spec = io::degradation_from_json(io::read_json(degrade), g.lr_size);
  spec.seed = seed;
  require(validate(spec));

  auto result = sim::simulate(sim::compose_object(truth), g, plan, spec);
  io::DatasetMeta meta{spec, seed, quantize};
  if (quantize) io::quantize_stack(result.stack, *quantize);
  io::save_dataset(result.stack, out, meta);
  std::fprintf(stderr, "wrote %zu images to %s\n", result.stack.images.size(), out.c_str());
  return kOk;
}

int cmd_reconstruct(const Globals& globals, const std::string& data, const std::string& config_path,
                    const std::string& out) {
  const AcquisitionStack stack = io::load_dataset(data);
  io::json j = config_path.empty() ? io::json::object() : io::read_json(config_path);
  const std::string method = j.value("method", std::string("elfpie"));

  io::ReconstructionRecord record;
  record.method = method;
  if (baseline::parse_method(method) == baseline::Method::mfpie) {
    const auto rec = baseline::fpie_momentum_reconstruct(stack, io::fpie_config_from_json(j));
    record.spectrum = rec.estimate.spectrum;
    record.pupil = rec.pupil.field;
  } else {
    ReconstructionConfig config = io::config_from_json(j);
    if (globals.deterministic) config.deterministic_reduction = true;
    const auto rec = solver::reconstruct(stack, config);
    record.spectrum = rec.estimate.spectrum;
    record.pupil = rec.pupil.field;
    record.trace = rec.trace;
    record.alpha = rec.alpha;
    record.beta = rec.beta;
  }
  io::save_reconstruction(record, out);
  if (!record.trace.empty())
    std::fprintf(stderr, "final loss %.6g after %zu iterations\n", record.trace.back().total,
                 record.trace.size() - 1);
  return kOk;
}

int cmd_evaluate(const std::string& rec_dir, const std::string& truth_dir) {
  const GroundTruth maps = io::load_reconstruction_maps(rec_dir);
  const GroundTruth truth = io::load_truth(truth_dir);
  const auto s = baseline::score_reconstruction(sim::compose_object(maps), truth);
  std::printf("lsnr_amp,lsnr_phase,lsnr_mean\n%.4f,%.4f,%.4f\n", s.lsnr_amp, s.lsnr_phase, s.mean);
  return kOk;
}

int cmd_bench(const Globals& globals, const std::string& protocol_path, const std::string& out) {
  baseline::BenchmarkProtocol protocol = io::protocol_from_json(io::read_json(protocol_path));
  if (globals.deterministic) protocol.elfpie.deterministic_reduction = true;
  const auto rows = baseline::benchmark_grid(protocol);
  std::ofstream csv(out);
  if (!csv) throw io::FileError("cannot write " + out);
  io::write_bench_csv(csv, rows);
  int failures = 0;
  for (const auto& r : rows)
    if (r.failed) {
      std::fprintf(stderr, "cell d=%g c=%g %s failed: %s\n", r.d * 1e3, r.c, baseline::to_string(r.method).c_str(),
                   r.error.c_str());
      ++failures;
    }
  return failures == 0 ? kOk : kRuntime;
}

int cmd_render(const std::string& in, const std::string& target_text, const std::string& out) {
  const io::RenderTarget target = io::parse_render_target(target_text);
  const fs::path dir(in);
  const bool is_dataset = fs::exists(dir / "stack.bin");
  RealPlane plane;
  using Kind = io::RenderTarget::Kind;
  if (target.kind == Kind::raw_frame) {
    if (!is_dataset) throw std::invalid_argument("raw_frame needs a dataset directory");
    const AcquisitionStack stack = io::load_dataset(dir);
    if (target.frame >= stack.images.size())
      throw std::invalid_argument("frame " + std::to_string(target.frame) + " out of range (stack has " +
                                  std::to_string(stack.images.size()) + ")");
    plane = stack.images[target.frame];
  } else {
    const GroundTruth maps = is_dataset ? io::load_truth(dir) : io::load_reconstruction_maps(dir);
    if (target.kind == Kind::amplitude)
      plane = maps.amplitude;
    else if (target.kind == Kind::phase)
      plane = maps.phase;
    else
      plane = io::log_spectrum(is_dataset ? ops::dft2(sim::compose_object(maps)) : io::load_reconstruction(dir).spectrum);
  }
  io::write_pgm(out, io::render_plane(plane));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fourier ptychographic reconstruction toolkit"};
  app.require_subcommand(1);
  app.allow_extras(false);
  Globals globals;
  app.add_option("--threads", globals.threads, "Worker threads (default: all cores)")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", globals.deterministic, "Fixed-order reductions (bit-identical across thread counts)");

  std::string geometry, truth_amp, truth_phase, degrade, out, data, config, rec, truth, protocol, in, target;
  std::uint64_t seed = 1;
  std::optional<int> quantize;

  auto* simulate = app.add_subcommand("simulate", "Simulate a degraded acquisition stack");
  simulate->add_option("--geometry", geometry, "Geometry JSON, or 'desk' / 'reference'");
  simulate->add_option("--truth-amp", truth_amp, "Amplitude image (.pgm or float64 .bin); default: phantom");
  simulate->add_option("--truth-phase", truth_phase, "Phase image (.pgm or float64 .bin); default: phantom");
  simulate->add_option("--degrade", degrade, "Degradation JSON");
  simulate->add_option("--seed", seed, "Random seed");
  simulate->add_option("--quantize", quantize, "Round intensities to this many bits")->check(CLI::Range(1, 32));
  simulate->add_option("--out", out, "Output dataset directory")->required();

  auto* reconstruct = app.add_subcommand("reconstruct", "Recover the object spectrum from a dataset");
  reconstruct->add_option("--data", data, "Dataset directory")->required();
  reconstruct->add_option("--config", config, "Reconstruction JSON");
  reconstruct->add_option("--out", out, "Output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score a reconstruction against ground truth");
  evaluate->add_option("--rec", rec, "Reconstruction directory")->required();
  evaluate->add_option("--truth", truth, "Dataset directory holding the ground truth")->required();

  auto* bench = app.add_subcommand("bench", "Run a benchmark protocol");
  bench->add_option("--protocol", protocol, "Protocol JSON")->required();
  bench->add_option("--out", out, "Output CSV")->required();

  auto* render = app.add_subcommand("render", "Render a plane to an 8-bit PGM");
  render->add_option("--in", in, "Dataset or reconstruction directory")->required();
  render->add_option("--target", target, "amplitude | phase | log_spectrum | raw_frame(n)")->required();
  render->add_option("--out", out, "Output .pgm")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: %s\n%s", e.what(), app.help().c_str());
    return kUsage;
  }

  if (globals.threads > 0) omp_set_num_threads(globals.threads);

  try {
    if (*simulate) return cmd_simulate(geometry, truth_amp, truth_phase, degrade, seed, out, quantize);
    if (*reconstruct) return cmd_reconstruct(globals, data, config, out);
    if (*evaluate) return cmd_evaluate(rec, truth);
    if (*bench) return cmd_bench(globals, protocol, out);
    if (*render) return cmd_render(in, target, out);
  } catch (const io::FileError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kMissingFile;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const io::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
