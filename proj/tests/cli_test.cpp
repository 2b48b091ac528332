#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "tmspin/protocols.hpp"

namespace fs = std::filesystem;
using namespace tmspin;

namespace {

const fs::path kWork = fs::path(TMSPIN_TEST_WORKDIR) / "cli_work";

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path o = kWork / "stdout.txt", e = kWork / "stderr.txt";
  const std::string cmd = std::string(TMSPIN_EXE) + " " + args + " >" + o.string() + " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path write_file(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << text;
  return p;
}

// one resonant atom: a sweep costs milliseconds
const std::string kSmallEnsemble =
    "sampling_mode = quadrature\nn_optical = 1\nn_spin = 1\nspin_width_g_mhz = 0\nspin_width_e_mhz = 0\n";

std::string dir(const std::string& name) {
  const fs::path d = kWork / name;
  fs::remove_all(d);
  return d.string();
}

}  // namespace

TEST_CASE("cli: usage errors exit 2") {
  CHECK(run("").code == 2);
  CHECK(run("no-such-command").code == 2);
  CHECK(run("echo-sweep --threads 0").code == 2);
  CHECK(run("echo-sweep --config " + (kWork / "missing.cfg").string()).code == 2);
}

TEST_CASE("cli: unknown configuration key exits 2 naming the key") {
  const auto cfg = write_file("unknown.cfg", "delta_g_mhz = 41\nfrobnicate_level = 3\n");
  const Run r = run("echo-sweep --config " + cfg.string() + " --out " + dir("unknown"));
  CHECK(r.code == 2);
  CHECK(r.err.find("frobnicate_level") != std::string::npos);
  const Run h = run("holeburn --config " + cfg.string() + " --out " + dir("unknown_hb"));
  CHECK(h.code == 2);
}

TEST_CASE("cli: two delays exit 2") {
  const auto cfg = write_file("two.cfg", kSmallEnsemble + "t_delays_us = 100, 200\n");
  const Run r = run("echo-sweep --config " + cfg.string() + " --out " + dir("two"));
  CHECK(r.code == 2);
  CHECK(r.err.find("t_delays_us") != std::string::npos);
}

TEST_CASE("cli: malformed values exit 2") {
  const auto cfg = write_file("bad.cfg", "delta_g_mhz = forty-one\n");
  CHECK(run("echo-sweep --config " + cfg.string() + " --out " + dir("bad")).code == 2);
  const auto neg = write_file("neg.cfg", "b_fields_tesla = -1\n");
  CHECK(run("holeburn --config " + neg.string() + " --out " + dir("neg")).code == 2);
}

TEST_CASE("cli: validate") {
  LevelSystem sys;
  RamanOptions o;
  const auto good = write_file("raman.seq", serialize_sequence(standard_raman_sequence(sys, 100.0, o)));
  Run r = run("validate " + good.string());
  CHECK(r.code == 0);
  CHECK(r.out.empty());

  const auto overlap = write_file("overlap.seq", "seq v1\npulse 0 10 tones 0:1:0\npulse 5 10 tones 0:1:0\n");
  r = run("validate " + overlap.string());
  CHECK(r.code == 1);
  CHECK(r.out.rfind("ERROR overlap", 0) == 0);

  const LevelSystem wide = LevelSystem::at_field(83.0 / 36.0);
  const auto warn = write_file("wide.seq", serialize_sequence(standard_raman_sequence(wide, 100.0, o)));
  r = run("validate " + warn.string());
  CHECK(r.code == 0);
  CHECK(r.out.rfind("WARN bandwidth", 0) == 0);

  const auto syntax = write_file("syntax.seq", "seq v1\npulse 0 abc tones 0:1:0\n");
  r = run("validate " + syntax.string());
  CHECK(r.code == 1);
  CHECK(r.out.rfind("ERROR syntax", 0) == 0);
  CHECK(r.out.find("line 2") != std::string::npos);

  CHECK(run("validate " + (kWork / "nope.seq").string()).code == 2);
}

TEST_CASE("cli: holeburn writes spectra, features, widths and a re-runnable manifest") {
  const std::string d1 = dir("hb1"), d2 = dir("hb2");
  Run r = run("holeburn --out " + d1);
  REQUIRE(r.code == 0);
  for (const char* f : {"holeburn.csv", "features.csv", "widths_vs_B.csv", "widths_fit.csv", "manifest.txt"})
    CHECK(fs::exists(fs::path(d1) / f));
  const std::string features = slurp(fs::path(d1) / "features.csv");
  CHECK(features.rfind("b_field_T,center_MHz,width_MHz,polarity,depth\n", 0) == 0);

  r = run("holeburn --config " + (fs::path(d1) / "manifest.txt").string() + " --out " + d2);
  REQUIRE(r.code == 0);
  for (const char* f : {"holeburn.csv", "features.csv", "widths_vs_B.csv", "widths_fit.csv", "manifest.txt"})
    CHECK(slurp(fs::path(d1) / f) == slurp(fs::path(d2) / f));

  const auto zero = write_file("b0.cfg", "b_fields_tesla = 0\n");
  const std::string d0 = dir("hb0");
  REQUIRE(run("holeburn --config " + zero.string() + " --out " + d0).code == 0);
  const std::string f0 = slurp(fs::path(d0) / "features.csv");
  CHECK(std::count(f0.begin(), f0.end(), '\n') == 2);
  CHECK(f0.find(",hole,") != std::string::npos);
}

TEST_CASE("cli: echo sweep outputs, bandwidth warning, thread independence") {
  const auto cfg = write_file("small83.cfg", kSmallEnsemble + "delta_g_mhz = 83\nt_delays_us = 100, 150, 200\n");
  const std::string a = dir("es1"), b = dir("es3");
  REQUIRE(run("echo-sweep --config " + cfg.string() + " --out " + a).code == 0);
  REQUIRE(run("echo-sweep --config " + cfg.string() + " --threads 3 --out " + b).code == 0);
  for (const char* f : {"sweep.csv", "fit.csv", "manifest.txt"}) CHECK(slurp(fs::path(a) / f) == slurp(fs::path(b) / f));
  const std::string manifest = slurp(fs::path(a) / "manifest.txt");
  CHECK(manifest.find("WARN bandwidth") != std::string::npos);
  CHECK(manifest.find("seed = ") != std::string::npos);
  CHECK(slurp(fs::path(a) / "fit.csv").find("T2,") != std::string::npos);

  // the manifest re-runs the job
  const std::string c = dir("es_rerun");
  REQUIRE(run("echo-sweep --config " + (fs::path(a) / "manifest.txt").string() + " --out " + c).code == 0);
  CHECK(slurp(fs::path(a) / "sweep.csv") == slurp(fs::path(c) / "sweep.csv"));
}

TEST_CASE("cli: fit command") {
  const auto data = write_file("decay.csv", "t_delay_us,amplitude\n100,0.513417119032592\n200,0.263597138115727\n"
                                            "300,0.135335283236613\n400,0.0694834512228015\n");
  const std::string d = dir("fit");
  const Run r = run("fit " + data.string() + " --t1-us 800 --out " + d);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("T2 = 300") != std::string::npos);
  const std::string f = slurp(fs::path(d) / "fit.csv");
  CHECK(f.find("T2_intrinsic,") != std::string::npos);
  CHECK(run("fit " + data.string() + " --model cubic --out " + d).code == 2);
  CHECK(run("fit " + data.string() + " --x nope --out " + d).code == 2);
}

TEST_CASE("cli: echo sweep at 41 MHz recovers T2 within 5%") {
  const auto cfg = write_file("sweep41.cfg", "t_delays_us = 100, 200, 300, 400\n");
  const std::string d = dir("sweep41");
  REQUIRE(run("echo-sweep --config " + cfg.string() + " --out " + d).code == 0);
  std::istringstream in(slurp(fs::path(d) / "fit.csv"));
  std::string line;
  double t2 = 0.0;
  while (std::getline(in, line))
    if (line.rfind("T2,", 0) == 0) t2 = std::stod(line.substr(3));
  CHECK(t2 == doctest::Approx(300.0).epsilon(0.05));
}
