#include <doctest.h>

#include <random>

#include "tmspin/pulsekit.hpp"

using namespace tmspin;

namespace {

bool has(const std::vector<Diagnostic>& d, DiagLevel level, const std::string& code) {
  for (const auto& x : d)
    if (x.level == level && x.code == code) return true;
  return false;
}

Sequence random_sequence(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Sequence s;
  s.bandwidth_limit = 50.0 + 100.0 * u(rng);
  double t = -100.0 * u(rng);
  const int n = 1 + static_cast<int>(u(rng) * 6);
  for (int i = 0; i < n; ++i) {
    Pulse p;
    p.start = t + 50.0 * u(rng);
    p.duration = 0.1 + 40.0 * u(rng);
    if (u(rng) < 0.3) {
      p.shape = Chirp{20.0 * u(rng) - 10.0, 1e10 * u(rng), u(rng)};
    } else {
      std::vector<Tone> tones;
      const int k = 1 + static_cast<int>(u(rng) * 3);
      for (int j = 0; j < k; ++j) tones.push_back({100.0 * u(rng) - 50.0, 2.0 * u(rng), 6.0 * u(rng) - 3.0});
      p.shape = tones;
    }
    t = p.end();
    s.pulses.push_back(p);
  }
  for (int i = 0; i < static_cast<int>(u(rng) * 3); ++i) s.detection_windows.push_back({500.0 * u(rng), 1.0 + u(rng)});
  return s;
}

}  // namespace

TEST_CASE("parse: empty document") {
  const Sequence s = parse_sequence("seq v1\n");
  CHECK(s.pulses.empty());
  CHECK(s.detection_windows.empty());
}

TEST_CASE("parse: full grammar") {
  const Sequence s = parse_sequence(
      "# comment\n"
      "seq v1\n"
      "bandwidth 120\n"
      "pulse -300 100 chirp 0 1e10 0.05   # pump\n"
      "pulse 0 10 tones 0:1:0,-41:2.77:0.5\n"
      "detect 20 5\n");
  CHECK(s.bandwidth_limit == 120.0);
  REQUIRE(s.pulses.size() == 2);
  CHECK(s.pulses[0].is_chirp());
  CHECK(s.pulses[0].chirp().rate_hz_per_s == 1e10);
  REQUIRE(s.pulses[1].tones().size() == 2);
  CHECK(s.pulses[1].tones()[1].offset == -41.0);
  CHECK(s.pulses[1].tones()[1].phase == 0.5);
  REQUIRE(s.detection_windows.size() == 1);
  CHECK(s.detection_windows[0].duration == 5.0);
}

TEST_CASE("parse: syntax errors carry line and column") {
  auto expect_error = [](const std::string& doc, int line, int col) {
    try {
      parse_sequence(doc);
      FAIL("no error for: " << doc);
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
      CHECK(e.column() == col);
    }
  };
  expect_error("pulse 0 1 tones 0:1:0\n", 1, 1);              // missing header
  expect_error("seq v1\nwobble 3\n", 2, 1);                    // unknown directive
  expect_error("seq v1\npulse 0 abc tones 0:1:0\n", 2, 9);     // bad number
  expect_error("seq v1\npulse 0 1 tones 0:1\n", 2, 17);        // malformed tone
  expect_error("seq v1\n  detect 1\n", 2, 11);                 // arity: points past the last token
}

TEST_CASE("parse: semantic errors name the pulses") {
  try {
    parse_sequence("seq v1\npulse 0 10 tones 0:1:0\npulse 5 10 tones 0:1:0\n");
    FAIL("overlap accepted");
  } catch (const SequenceError& e) {
    CHECK(e.pulse_indices() == std::vector<int>{0, 1});
    CHECK(std::string(e.what()).find("overlap") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_sequence("seq v1\npulse 0 -1 tones 0:1:0\n"), SequenceError);
  // unchecked parse keeps the problem for validate
  const Sequence s = parse_sequence("seq v1\npulse 0 10 tones 0:1:0\npulse 5 10 tones 0:1:0\n", false);
  CHECK(has(validate(s, {}), DiagLevel::error, "overlap"));
}

TEST_CASE("serialize/parse round trip is exact") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Sequence s = random_sequence(rng);
    const std::string text = serialize_sequence(s);
    const Sequence back = parse_sequence(text, false);
    CHECK(back == s);
    CHECK(serialize_sequence(back) == text);
  }
}

TEST_CASE("canonical Raman sequence round-trips with four stages") {
  LevelSystem sys;
  const Sequence s = standard_raman_sequence(sys, 100.0);
  const Sequence back = parse_sequence(serialize_sequence(s));
  CHECK(back == s);
  int chirps = 0, tones = 0;
  for (const auto& p : back.pulses) (p.is_chirp() ? chirps : tones)++;
  CHECK(chirps == 3);  // pump stage
  CHECK(tones == 3);   // excitation, rephasing, probe
}

TEST_CASE("validate: bandwidth rules") {
  ZeemanParams zp;
  auto raman_at = [&](double dg) {
    LevelSystem sys = LevelSystem::at_field(dg / zp.slope_g, zp);
    RamanOptions o;
    o.include_pump = false;
    return validate(standard_raman_sequence(sys, 100.0, o), HardwareLimits{100.0});
  };
  CHECK(raman_at(60.0).empty());
  const auto d83 = raman_at(83.0);
  REQUIRE(d83.size() == 1);
  CHECK(d83[0].level == DiagLevel::warn);
  CHECK(d83[0].code == "bandwidth");
  CHECK(d83[0].message.find("119.9") != std::string::npos);
  CHECK(validate(Sequence{}, {}).empty());

  Sequence wide;
  wide.pulses.push_back({0.0, 1.0, std::vector<Tone>{{-60.0, 1.0, 0.0}, {60.0, 1.0, 0.0}}});
  CHECK(has(validate(wide, {}), DiagLevel::error, "bandwidth"));
}

TEST_CASE("validate is a pure function of its inputs") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Sequence s = random_sequence(rng);
    const Sequence copy = s;
    const auto a = validate(s, HardwareLimits{60.0});
    const auto b = validate(s, HardwareLimits{60.0});
    CHECK(s == copy);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].format() == b[k].format());
  }
}

TEST_CASE("standard Raman sequence layout") {
  LevelSystem sys;
  RamanOptions o;
  o.include_pump = false;
  o.detuned_rephasing = true;
  const Sequence det = standard_raman_sequence(sys, 100.0, o);
  o.detuned_rephasing = false;
  const Sequence plain = standard_raman_sequence(sys, 100.0, o);
  REQUIRE(det.pulses.size() == 3);
  REQUIRE(plain.pulses.size() == 3);

  const auto& exc = det.pulses[0];
  CHECK(exc.start + 0.5 * exc.duration == doctest::Approx(0.0));
  CHECK(exc.duration == 10.0);
  CHECK(exc.tones()[0].offset == 0.0);
  CHECK(exc.tones()[1].offset == -sys.delta_g);

  // detuned: both rephasing tones shifted by delta_e, separation still delta_g
  const auto& rd = det.pulses[1].tones();
  const auto& rp = plain.pulses[1].tones();
  std::vector<double> od{rd[0].offset, rd[1].offset}, op{rp[0].offset, rp[1].offset};
  std::sort(od.begin(), od.end());
  std::sort(op.begin(), op.end());
  CHECK(od[0] - op[0] == doctest::Approx(sys.delta_e));
  CHECK(od[1] - op[1] == doctest::Approx(sys.delta_e));
  CHECK(od[1] - od[0] == doctest::Approx(sys.delta_g));
  CHECK(op == std::vector<double>{-sys.delta_g, 0.0});
  CHECK(det.pulses[1].start + 0.5 * det.pulses[1].duration == doctest::Approx(100.0));

  // only the rephasing tones differ
  CHECK(det.pulses[0] == plain.pulses[0]);
  CHECK(det.pulses[2] == plain.pulses[2]);
  CHECK(det.detection_windows == plain.detection_windows);

  // probe and detection cover the echo at 2T
  const auto& probe = det.pulses[2];
  CHECK(probe.start < 200.0);
  CHECK(probe.end() > 200.0);
  CHECK(probe.tones().size() == 1);
  CHECK(probe.tones()[0].offset == 0.0);
  CHECK(det.detection_windows[0].start <= 200.0);
  CHECK(det.detection_windows[0].end() >= 200.0);

  CHECK_THROWS_AS(standard_raman_sequence(sys, 5.0, o), InvalidConfiguration);
}

TEST_CASE("balanced pair equalises the leg couplings") {
  LevelSystem sys;
  const auto pair = balanced_pair(sys, 0.0, -sys.delta_g, 1.0, false);
  const double w = std::sqrt(sys.branching_ratio);
  CHECK(pair[1].rabi * w == doctest::Approx(pair[0].rabi));
  CHECK(bright_rabi(sys, pair, false) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("hole-burning sequence") {
  LevelSystem sys;
  sys.delta_g = 36.0;
  sys.delta_e = 16.0;
  const Sequence s = standard_holeburn_sequence(sys, 1.0, 3.5e10);
  const Pulse& readout = s.pulses.back();
  REQUIRE(readout.is_chirp());
  CHECK(readout.chirp().rate_hz_per_s == 3.5e10);
  const auto [lo, hi] = readout.offset_extent();
  CHECK(lo <= -52.0);
  CHECK(hi >= 52.0);
  for (std::size_t i = 0; i + 1 < s.pulses.size(); ++i) {
    const auto [plo, phi] = s.pulses[i].offset_extent();
    CHECK(s.pulses[i].duration == kPumpChirpDuration);
    CHECK(plo == doctest::Approx(-1.0));
    CHECK(phi == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(standard_holeburn_sequence(sys, 25.0, 3.5e10), InvalidConfiguration);
}
