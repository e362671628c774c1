#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
CliRun run(const std::string& args) {
  const std::string cmd = std::string(ELFPIE_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("elfpie_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SimulateReconstructEvaluate) {
  write("deg.json", R"({"noise": "gaussian", "gaussian_std": 1e-4})");
  ASSERT_EQ(run("simulate --geometry desk --degrade " + path("deg.json") + " --seed 3 --out " + path("data")).code, 0);
  const CliRun rec = run("reconstruct --data " + path("data") + " --out " + path("rec"));
  ASSERT_EQ(rec.code, 0) << rec.out;
  EXPECT_TRUE(fs::exists(dir_ / "rec" / "loss.csv"));
  const CliRun ev = run("evaluate --rec " + path("rec") + " --truth " + path("data"));
  ASSERT_EQ(ev.code, 0) << ev.out;
  std::istringstream lines(ev.out);
  std::string header, values;
  std::getline(lines, header);
  std::getline(lines, values);
  EXPECT_EQ(header, "lsnr_amp,lsnr_phase,lsnr_mean");
  const double mean = std::stod(values.substr(values.rfind(',') + 1));
  EXPECT_GE(mean, 35.0);

  ASSERT_EQ(run("render --in " + path("rec") + " --target phase --out " + path("phase.pgm")).code, 0);
  EXPECT_EQ(slurp(dir_ / "phase.pgm").substr(0, 2), "P5");
}

TEST_F(CliTest, DeterministicAcrossThreadCounts) {
  write("geo.json", R"({"preset": "desk", "hr_size": {"height": 97, "width": 97}, "lr_size": {"height": 32, "width": 32},
                       "led_rows": 5, "led_cols": 5, "led_pitch_m": 0.004})");
  write("cfg.json", R"({"iterations": 10})");
  ASSERT_EQ(run("simulate --geometry " + path("geo.json") + " --out " + path("data")).code, 0);
  ASSERT_EQ(run("--threads 1 --deterministic reconstruct --data " + path("data") + " --config " + path("cfg.json") +
                " --out " + path("r1")).code,
            0);
  ASSERT_EQ(run("--threads 8 --deterministic reconstruct --data " + path("data") + " --config " + path("cfg.json") +
                " --out " + path("r8")).code,
            0);
  EXPECT_EQ(slurp(dir_ / "r1" / "loss.csv"), slurp(dir_ / "r8" / "loss.csv"));
  EXPECT_EQ(slurp(dir_ / "r1" / "spectrum.bin"), slurp(dir_ / "r8" / "spectrum.bin"));
}

TEST_F(CliTest, ErrorsMapToExitCodes) {
  const CliRun bogus = run("frobnicate");
  EXPECT_EQ(bogus.code, 2);
  EXPECT_NE(bogus.out.find("simulate"), std::string::npos);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("reconstruct --data " + path("missing") + " --out " + path("x")).code, 3);
  write("bad.json", R"({"wavelength_m": -1})");
  EXPECT_EQ(run("simulate --geometry " + path("bad.json") + " --out " + path("d")).code, 4);
}
