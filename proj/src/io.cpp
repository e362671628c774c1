#include "elfpie/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "elfpie/degradation.hpp"

namespace elfpie::io {

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
  return r;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

GridSize grid_from_json(const json& j) {
  if (j.is_array()) return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()};
  return {j.at("height").get<std::size_t>(), j.at("width").get<std::size_t>()};
}

json grid_to_json(GridSize g) { return json{{"height", g.height}, {"width", g.width}}; }

std::vector<double> flatten(const std::vector<RealPlane>& planes) {
  std::vector<double> out;
  for (const auto& p : planes) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<double> interleave(const ComplexField& f) {
  std::vector<double> out;
  out.reserve(2 * f.size());
  for (const auto& v : f.values()) {
    out.push_back(v.real());
    out.push_back(v.imag());
  }
  return out;
}

ComplexField deinterleave(const std::vector<double>& v, std::size_t w, std::size_t h) {
  ComplexField f(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = Complex(v[2 * i], v[2 * i + 1]);
  return f;
}

RealPlane plane_from(const std::vector<double>& v, std::size_t offset, std::size_t w, std::size_t h) {
  RealPlane p(w, h);
  std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(offset), w * h, p.begin());
  return p;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw FileError("cannot write " + path.string());
  return out;
}

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw FileError("missing file " + path.string());
}

}  // namespace

void write_f64(const fs::path& path, std::span<const double> values) {
  auto out = open_out(path, std::ios::binary);
  std::vector<char> buffer(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(buffer.data() + 8 * i, &bits, 8);
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw FileError("write failed for " + path.string());
}

std::vector<double> read_f64(const fs::path& path, std::size_t expected_count) {
  require_file(path);
  const auto actual = fs::file_size(path);
  const auto expected = static_cast<std::uintmax_t>(expected_count) * 8;
  if (actual != expected) {
    std::ostringstream os;
    os << path.filename().string() << ": expected " << expected << " bytes, found " << actual;
    throw ValidationError(os.str());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot read " + path.string());
  std::vector<char> buffer(expected);
  in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!in) throw FileError("read failed for " + path.string());
  std::vector<double> out(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, buffer.data() + 8 * i, 8);
    out[i] = std::bit_cast<double>(to_little(bits));
  }
  return out;
}

json to_json(const SystemGeometry& g) {
  return json{{"wavelength_m", g.wavelength},
              {"objective_na", g.objective_na},
              {"magnification", g.magnification},
              {"camera_pixel_m", g.camera_pixel},
              {"led_pitch_m", g.led_pitch},
              {"led_rows", g.led_rows},
              {"led_cols", g.led_cols},
              {"panel_distance_m", g.panel_distance},
              {"panel_offset_x_m", g.panel_offset_x},
              {"panel_offset_y_m", g.panel_offset_y},
              {"lr_size", grid_to_json(g.lr_size)},
              {"hr_size", grid_to_json(g.hr_size)}};
}

SystemGeometry geometry_from_json(const json& j) {
  const std::string preset = get_or<std::string>(j, "preset", "reference");
  SystemGeometry g;
  if (preset == "desk")
    g = desk_geometry();
  else if (preset == "reference")
    g = reference_geometry();
  else
    throw ValidationError("unknown geometry preset '" + preset + "'");
  g.wavelength = get_or(j, "wavelength_m", g.wavelength);
  g.objective_na = get_or(j, "objective_na", g.objective_na);
  g.magnification = get_or(j, "magnification", g.magnification);
  g.camera_pixel = get_or(j, "camera_pixel_m", g.camera_pixel);
  g.led_pitch = get_or(j, "led_pitch_m", g.led_pitch);
  g.led_rows = get_or(j, "led_rows", g.led_rows);
  g.led_cols = get_or(j, "led_cols", g.led_cols);
  g.panel_distance = get_or(j, "panel_distance_m", g.panel_distance);
  g.panel_offset_x = get_or(j, "panel_offset_x_m", g.panel_offset_x);
  g.panel_offset_y = get_or(j, "panel_offset_y_m", g.panel_offset_y);
  if (j.contains("lr_size")) g.lr_size = grid_from_json(j.at("lr_size"));
  if (j.contains("hr_size")) g.hr_size = grid_from_json(j.at("hr_size"));
  return g;
}

json to_json(const IlluminationPlan& plan) {
  json groups = json::array();
  for (const auto& group : plan.groups) {
    json entries = json::array();
    for (const auto& e : group)
      entries.push_back({{"led", e.led_index},
                         {"offset", {e.offset.x, e.offset.y}},
                         {"na", e.illumination_na},
                         {"dark_field", e.is_dark_field}});
    groups.push_back(entries);
  }
  return groups;
}

IlluminationPlan plan_from_json(const json& j) {
  IlluminationPlan plan;
  for (const auto& group : j) {
    std::vector<LedEntry> entries;
    for (const auto& e : group) {
      LedEntry entry;
      entry.led_index = e.at("led").get<std::size_t>();
      entry.offset = {e.at("offset").at(0).get<int>(), e.at("offset").at(1).get<int>()};
      entry.illumination_na = e.at("na").get<double>();
      entry.is_dark_field = e.at("dark_field").get<bool>();
      entries.push_back(entry);
    }
    plan.groups.push_back(std::move(entries));
  }
  return plan;
}

json to_json(const DegradationSpec& s) {
  return json{{"noise", to_string(s.noise_kind)},
              {"gaussian_std", s.gaussian_std},
              {"snp_density", s.snp_density},
              {"photon_scale", s.photon_scale},
              {"uneven_strength", s.uneven_strength},
              {"blur_half_waist", s.blur_half_waist},
              {"led_shift_radius_m", s.led_shift_radius},
              {"vignetting",
               {{"enabled", s.vignetting.enabled},
                {"radius", s.vignetting.radius},
                {"softness", s.vignetting.softness},
                {"shift_gain", s.vignetting.shift_gain}}},
              {"background", s.background},
              {"seed", s.seed}};
}

DegradationSpec degradation_from_json(const json& j, GridSize lr_size) {
  DegradationSpec s;
  s.noise_kind = parse_noise_kind(get_or<std::string>(j, "noise", "none"));
  s.gaussian_std = get_or(j, "gaussian_std", s.gaussian_std);
  s.snp_density = get_or(j, "snp_density", s.snp_density);
  s.photon_scale = get_or(j, "photon_scale", s.photon_scale);
  if (j.contains("poisson_level")) s.photon_scale = sim::poisson_photon_scale(j.at("poisson_level").get<int>());
  s.uneven_strength = get_or(j, "uneven_strength", s.uneven_strength);
  s.blur_half_waist = get_or(j, "blur_half_waist", s.blur_half_waist);
  s.led_shift_radius = get_or(j, "led_shift_radius_m", s.led_shift_radius);
  s.background = get_or(j, "background", s.background);
  s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
  if (j.contains("vignetting")) {
    const json& v = j.at("vignetting");
    if (v.is_string()) {
      if (v.get<std::string>() != "desk") throw ValidationError("unknown vignetting preset");
      s.vignetting = sim::desk_vignetting(lr_size);
    } else {
      s.vignetting.enabled = get_or(v, "enabled", true);
      s.vignetting.radius = get_or(v, "radius", s.vignetting.radius);
      s.vignetting.softness = get_or(v, "softness", s.vignetting.softness);
      s.vignetting.shift_gain = get_or(v, "shift_gain", s.vignetting.shift_gain);
    }
  }
  return s;
}

json to_json(const ReconstructionConfig& c) {
  json j{{"fidelity_mode", to_string(c.fidelity_mode)},
         {"gamma", c.gamma},
         {"omega_mode", to_string(c.omega_mode)},
         {"alpha", c.alpha ? json(*c.alpha) : json("auto")},
         {"beta", c.beta ? json(*c.beta) : json("auto")},
         {"gamma1", c.gamma1},
         {"gamma2", c.gamma2},
         {"eta_opt", c.eta_opt},
         {"eta_phase", c.eta_phase},
         {"epsilon_omega", c.epsilon_omega},
         {"step", c.step},
         {"pupil_step", c.pupil_step},
         {"optimizer", to_string(c.optimizer)},
         {"iterations", c.iterations},
         {"learn_pupil", c.learn_pupil},
         {"pupil_smooth", {{"size", c.pupil_smooth.size}, {"sigma", c.pupil_smooth.sigma}}},
         {"pupil_max_modulus", c.pupil_max_modulus},
         {"deterministic_reduction", c.deterministic_reduction},
         {"sqrt_residual_variant", c.sqrt_residual_variant},
         {"restrict_to_aperture", c.restrict_to_aperture}};
  return j;
}

namespace {

std::optional<double> weight_from_json(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  const json& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "auto") return std::nullopt;
    throw ValidationError(std::string(key) + " must be a number or \"auto\"");
  }
  return v.get<double>();
}

}  // namespace

ReconstructionConfig config_from_json(const json& j) {
  ReconstructionConfig c;
  c.fidelity_mode = parse_fidelity_mode(get_or<std::string>(j, "fidelity_mode", to_string(c.fidelity_mode)));
  c.gamma = get_or(j, "gamma", c.gamma);
  c.omega_mode = parse_omega_mode(get_or<std::string>(j, "omega_mode", to_string(c.omega_mode)));
  c.alpha = weight_from_json(j, "alpha");
  c.beta = weight_from_json(j, "beta");
  c.gamma1 = get_or(j, "gamma1", c.gamma1);
  c.gamma2 = get_or(j, "gamma2", c.gamma2);
  c.eta_opt = get_or(j, "eta_opt", c.eta_opt);
  c.eta_phase = get_or(j, "eta_phase", c.eta_phase);
  c.epsilon_omega = get_or(j, "epsilon_omega", c.epsilon_omega);
  c.step = get_or(j, "step", c.step);
  c.pupil_step = get_or(j, "pupil_step", c.pupil_step);
  c.optimizer = parse_optimizer_kind(get_or<std::string>(j, "optimizer", to_string(c.optimizer)));
  c.iterations = get_or(j, "iterations", c.iterations);
  c.learn_pupil = get_or(j, "learn_pupil", c.learn_pupil);
  if (j.contains("pupil_smooth")) {
    c.pupil_smooth.size = get_or(j.at("pupil_smooth"), "size", c.pupil_smooth.size);
    c.pupil_smooth.sigma = get_or(j.at("pupil_smooth"), "sigma", c.pupil_smooth.sigma);
  }
  c.pupil_max_modulus = get_or(j, "pupil_max_modulus", c.pupil_max_modulus);
  c.deterministic_reduction = get_or(j, "deterministic_reduction", c.deterministic_reduction);
  c.sqrt_residual_variant = get_or(j, "sqrt_residual_variant", c.sqrt_residual_variant);
  c.restrict_to_aperture = get_or(j, "restrict_to_aperture", c.restrict_to_aperture);
  return c;
}

baseline::FpieConfig fpie_config_from_json(const json& j) {
  baseline::FpieConfig c;
  c.iterations = get_or(j, "iterations", c.iterations);
  c.step = get_or(j, "step", c.step);
  c.pupil_step = get_or(j, "pupil_step", c.pupil_step);
  c.momentum = get_or(j, "momentum", c.momentum);
  c.learn_pupil = get_or(j, "learn_pupil", c.learn_pupil);
  return c;
}

baseline::BenchmarkProtocol protocol_from_json(const json& j) {
  baseline::BenchmarkProtocol p;
  p.geometry = j.contains("geometry") ? geometry_from_json(j.at("geometry")) : desk_geometry();
  p.repeats = get_or(j, "repeats", p.repeats);
  p.base_seed = get_or<std::uint64_t>(j, "base_seed", p.base_seed);
  p.phantom_band = get_or(j, "phantom_band", p.phantom_band);
  if (j.contains("methods")) {
    p.methods.clear();
    for (const auto& m : j.at("methods")) p.methods.push_back(baseline::parse_method(m.get<std::string>()));
  }
  if (j.contains("elfpie")) p.elfpie = config_from_json(j.at("elfpie"));
  if (j.contains("mfpie")) p.mfpie = fpie_config_from_json(j.at("mfpie"));
  for (const auto& cj : j.at("cells")) {
    baseline::ProtocolCell cell;
    cell.d = get_or(cj, "d_mm", 0.0) * 1e-3;
    cell.c = get_or(cj, "c", 0.0);
    cell.noise.kind = parse_noise_kind(get_or<std::string>(cj, "noise", "none"));
    cell.noise.value = get_or(cj, "value", 0.0);
    std::ostringstream label;
    label << cell.noise.value;
    if (cj.contains("level") && cj.at("level").is_number_integer()) {
      // Poisson cells carry the level 1..4; the photon scale is looked up later.
      if (cell.noise.kind != NoiseKind::poisson) throw ValidationError("numeric level requires poisson noise");
      const int lv = cj.at("level").get<int>();
      cell.noise.value = lv;
      cell.noise.level = "Lv" + std::to_string(lv);
    } else {
      cell.noise.level = get_or<std::string>(cj, "level", cell.noise.kind == NoiseKind::none ? "-" : label.str());
    }
    if (cj.contains("vignetting")) {
      const json& v = cj.at("vignetting");
      if (v.is_string() && v.get<std::string>() == "desk") {
        cell.vignetting = sim::desk_vignetting(p.geometry.lr_size);
      } else if (v.is_object()) {
        cell.vignetting.enabled = get_or(v, "enabled", true);
        cell.vignetting.radius = get_or(v, "radius", 0.0);
        cell.vignetting.softness = get_or(v, "softness", 1.0);
        cell.vignetting.shift_gain = get_or(v, "shift_gain", 0.0);
      } else {
        throw ValidationError("vignetting must be \"desk\" or an object");
      }
    }
    p.cells.push_back(cell);
  }
  return p;
}

json read_json(const fs::path& path) {
  require_file(path);
  std::ifstream in(path);
  if (!in) throw FileError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.filename().string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << std::setw(2) << j << '\n';
}

void quantize_stack(AcquisitionStack& stack, int bits) {
  if (bits < 1 || bits > 32) throw std::invalid_argument("quantize: bits must be 1..32");
  double peak = 0.0;
  for (const auto& img : stack.images)
    for (double v : img.values()) peak = std::max(peak, v);
  if (peak <= 0.0) return;
  const double levels = std::ldexp(1.0, bits) - 1.0;
  for (auto& img : stack.images)
    for (double& v : img) v = std::round(std::max(v, 0.0) / peak * levels) * peak / levels;
  stack.signed_noise = false;
}

void save_dataset(const AcquisitionStack& stack, const fs::path& dir, const DatasetMeta& meta) {
  require(validate(stack.geometry, stack.plan, stack));
  fs::create_directories(dir);
  json j{{"format_version", kFormatVersion},
         {"geometry", to_json(stack.geometry)},
         {"plan", to_json(stack.plan)},
         {"image_count", stack.images.size()},
         {"signed_noise", stack.signed_noise},
         {"has_truth", stack.ground_truth.has_value()}};
  if (meta.degradation) j["degradation"] = to_json(*meta.degradation);
  if (meta.seed) j["seed"] = *meta.seed;
  if (meta.quantized_bits) j["quantized_bits"] = *meta.quantized_bits;
  write_json(dir / "meta.json", j);
  write_f64(dir / "stack.bin", flatten(stack.images));
  if (stack.ground_truth) {
    write_f64(dir / "truth_amp.bin", stack.ground_truth->amplitude.values());
    write_f64(dir / "truth_phase.bin", stack.ground_truth->phase.values());
  }
}

AcquisitionStack load_dataset(const fs::path& dir) {
  const json j = read_json(dir / "meta.json");
  try {
    const int version = get_or(j, "format_version", -1);
    if (version != kFormatVersion) {
      std::ostringstream os;
      os << "unsupported format_version " << version << " (expected " << kFormatVersion << ")";
      throw ValidationError(os.str());
    }
    AcquisitionStack stack;
    stack.geometry = geometry_from_json(j.at("geometry"));
    require(validate(stack.geometry));
    stack.plan = plan_from_json(j.at("plan"));
    stack.signed_noise = get_or(j, "signed_noise", false);
    const std::size_t n = get_or(j, "image_count", stack.plan.group_count());
    const GridSize lr = stack.geometry.lr_size;
    const auto raw = read_f64(dir / "stack.bin", n * lr.width * lr.height);
    for (std::size_t k = 0; k < n; ++k)
      stack.images.push_back(plane_from(raw, k * lr.width * lr.height, lr.width, lr.height));
    if (get_or(j, "has_truth", false)) stack.ground_truth = load_truth(dir);
    require(validate(stack.geometry, stack.plan, stack));
    return stack;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("meta.json: ") + e.what());
  }
}

GroundTruth load_truth(const fs::path& dir) {
  const json j = read_json(dir / "meta.json");
  GridSize hr;
  try {
    hr = grid_from_json(j.at("geometry").at("hr_size"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("meta.json: ") + e.what());
  }
  const std::size_t count = hr.width * hr.height;
  return {plane_from(read_f64(dir / "truth_amp.bin", count), 0, hr.width, hr.height),
          plane_from(read_f64(dir / "truth_phase.bin", count), 0, hr.width, hr.height)};
}

void save_reconstruction(const ReconstructionRecord& r, const fs::path& dir) {
  fs::create_directories(dir);
  const ComplexField object = ObjectEstimate{r.spectrum}.object_field();
  RealPlane amp(object.width(), object.height());
  RealPlane phase(object.width(), object.height());
  for (std::size_t i = 0; i < object.size(); ++i) {
    amp[i] = std::abs(object[i]);
    phase[i] = std::arg(object[i]);
  }
  write_f64(dir / "amp.bin", amp.values());
  write_f64(dir / "phase.bin", phase.values());
  write_f64(dir / "spectrum.bin", interleave(r.spectrum));
  write_f64(dir / "pupil.bin", interleave(r.pupil));
  write_json(dir / "meta.json", json{{"format_version", kFormatVersion},
                                     {"method", r.method},
                                     {"hr_size", grid_to_json({r.spectrum.height(), r.spectrum.width()})},
                                     {"pupil_size", grid_to_json({r.pupil.height(), r.pupil.width()})},
                                     {"alpha", r.alpha},
                                     {"beta", r.beta},
                                     {"iterations", r.trace.empty() ? 0 : r.trace.size() - 1}});
  auto csv = open_out(dir / "loss.csv");
  write_loss_csv(csv, r.trace);
}

ReconstructionRecord load_reconstruction(const fs::path& dir) {
  const json j = read_json(dir / "meta.json");
  ReconstructionRecord r;
  try {
    if (get_or(j, "format_version", -1) != kFormatVersion)
      throw ValidationError("unsupported reconstruction format_version");
    const GridSize hr = grid_from_json(j.at("hr_size"));
    const GridSize ps = grid_from_json(j.at("pupil_size"));
    r.method = get_or<std::string>(j, "method", "elfpie");
    r.alpha = get_or(j, "alpha", 0.0);
    r.beta = get_or(j, "beta", 0.0);
    r.spectrum = deinterleave(read_f64(dir / "spectrum.bin", 2 * hr.width * hr.height), hr.width, hr.height);
    r.pupil = deinterleave(read_f64(dir / "pupil.bin", 2 * ps.width * ps.height), ps.width, ps.height);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("meta.json: ") + e.what());
  }
  // The loss trace is informational; a missing loss.csv leaves it empty.
  std::ifstream csv(dir / "loss.csv");
  std::string line;
  if (csv && std::getline(csv, line)) {
    while (std::getline(csv, line)) {
      std::istringstream row(line);
      solver::LossReport rep;
      char c1, c2, c3, c4;
      if (!(row >> rep.iteration >> c1 >> rep.fidelity >> c2 >> rep.amp_hessian >> c3 >> rep.phase_hessian >> c4 >>
            rep.total))
        throw ValidationError("loss.csv: malformed row '" + line + "'");
      r.trace.push_back(rep);
    }
  }
  return r;
}

GroundTruth load_reconstruction_maps(const fs::path& dir) {
  const json j = read_json(dir / "meta.json");
  GridSize hr;
  try {
    hr = grid_from_json(j.at("hr_size"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("meta.json: ") + e.what());
  }
  const std::size_t count = hr.width * hr.height;
  return {plane_from(read_f64(dir / "amp.bin", count), 0, hr.width, hr.height),
          plane_from(read_f64(dir / "phase.bin", count), 0, hr.width, hr.height)};
}

void write_loss_csv(std::ostream& out, const std::vector<solver::LossReport>& trace) {
  out << "iter,fidelity,amp_hessian,phase_hessian,total\n";
  out << std::setprecision(17);
  for (const auto& r : trace)
    out << r.iteration << ',' << r.fidelity << ',' << r.amp_hessian << ',' << r.phase_hessian << ',' << r.total
        << '\n';
}

void write_bench_csv(std::ostream& out, const std::vector<baseline::BenchmarkCell>& rows) {
  out << "d_mm,c,noise,level,method,lsnr_amp,lsnr_phase,lsnr_mean\n";
  for (const auto& r : rows) {
    out << r.d * 1e3 << ',' << r.c << ',' << to_string(r.noise.kind) << ',' << r.noise.level << ','
        << baseline::to_string(r.method) << ',';
    if (r.failed) {
      out << "nan,nan,nan\n";
      continue;
    }
    out << std::fixed << std::setprecision(2) << r.mean_lsnr_amp << ',' << r.mean_lsnr_phase << ','
        << r.mean_lsnr << '\n'
        << std::defaultfloat << std::setprecision(6);
  }
}

RenderTarget parse_render_target(const std::string& text) {
  RenderTarget t;
  if (text == "amplitude") return t;
  if (text == "phase") {
    t.kind = RenderTarget::Kind::phase;
    return t;
  }
  if (text == "log_spectrum") {
    t.kind = RenderTarget::Kind::log_spectrum;
    return t;
  }
  const std::string prefix = "raw_frame";
  if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size() + 1) {
    std::string rest = text.substr(prefix.size());
    if (rest.front() == '(' && rest.back() == ')')
      rest = rest.substr(1, rest.size() - 2);
    else if (rest.front() == ':')
      rest = rest.substr(1);
    else
      rest.clear();
    if (!rest.empty() && std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      t.kind = RenderTarget::Kind::raw_frame;
      t.frame = std::stoul(rest);
      return t;
    }
  }
  throw std::invalid_argument("unknown render target '" + text + "'");
}

Gray8 render_plane(const RealPlane& plane) {
  Gray8 g{plane.width(), plane.height(), std::vector<std::uint8_t>(plane.size(), 128)};
  if (plane.size() == 0) return g;
  const auto [mn, mx] = std::minmax_element(plane.begin(), plane.end());
  const double lo = *mn;
  const double span = *mx - lo;
  if (!(span > 0.0)) return g;
  for (std::size_t i = 0; i < plane.size(); ++i)
    g.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * (plane[i] - lo) / span));
  return g;
}

RealPlane log_spectrum(const ComplexField& spectrum) {
  RealPlane out(spectrum.width(), spectrum.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log10(std::abs(spectrum[i]) + 1.0);
  return out;
}

void write_pgm(const fs::path& path, const Gray8& image) {
  auto out = open_out(path, std::ios::binary);
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw FileError("write failed for " + path.string());
}

RealPlane read_pgm(const fs::path& path) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot read " + path.string());
  auto next_token = [&]() {
    std::string tok;
    while (in >> std::ws && in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
    }
    in >> tok;
    return tok;
  };
  if (next_token() != "P5") throw ValidationError(path.string() + ": not a binary PGM (P5)");
  std::size_t w = 0;
  std::size_t h = 0;
  unsigned long maxval = 0;
  try {
    w = std::stoul(next_token());
    h = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw ValidationError(path.string() + ": malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw ValidationError(path.string() + ": bad PGM header");
  in.get();
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(w * h * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw ValidationError(path.string() + ": truncated PGM data");
  RealPlane out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const unsigned v = bytes_per == 2 ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
    out[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return out;
}

RealPlane read_truth_image(const fs::path& path, GridSize size) {
  if (path.extension() == ".pgm") {
    RealPlane img = read_pgm(path);
    if (img.width() != size.width || img.height() != size.height) {
      std::ostringstream os;
      os << path.filename().string() << ": image is " << img.width() << "x" << img.height() << ", expected "
         << size.width << "x" << size.height;
      throw ValidationError(os.str());
    }
    for (double& v : img) v = 0.1 + 0.9 * v;
    return img;
  }
  return plane_from(read_f64(path, size.width * size.height), 0, size.width, size.height);
}

}  // namespace elfpie::io
