#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "generators.hpp"
#include "goat/errors.hpp"
#include "goat/focusing.hpp"

using namespace goat;
using goat::testing::mm;

namespace {

constexpr double us = 1e-6;

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_SUITE("focusing") {

TEST_CASE("transmit delay examples") {
  const auto d = transmit_delays({10 * us, 12 * us, 11 * us});
  CHECK(d[0] == doctest::Approx(2 * us).epsilon(1e-12));
  CHECK(d[1] == 0.0);
  CHECK(d[2] == doctest::Approx(1 * us).epsilon(1e-12));
  for (double v : transmit_delays({7 * us, 7 * us, 7 * us})) CHECK(v == 0.0);
  CHECK(transmit_delays({}).empty());
}

TEST_CASE("transmit delays are permutation equivariant and shift invariant") {
  std::mt19937_64 rng(51);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> t(2 + rng() % 30);
    for (double& v : t) v = goat::testing::uniform(rng, 10, 80) * us;
    const auto d = transmit_delays(t);
    std::vector<std::size_t> perm(t.size());
    for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> tp(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) tp[k] = t[perm[k]];
    const auto dp = transmit_delays(tp);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(dp[k] == d[perm[k]]);

    const double shift = goat::testing::uniform(rng, -5, 5) * us;
    std::vector<double> ts = t;
    for (double& v : ts) v += shift;
    const auto ds = transmit_delays(ts);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(std::abs(ds[k] - d[k]) <= 1e-18);

    const std::size_t arg = std::max_element(t.begin(), t.end()) - t.begin();
    CHECK(d[arg] == 0.0);
    for (double v : d) CHECK(v >= 0.0);
  }
}

TEST_CASE("receive delay examples") {
  const auto d = receive_delays({10 * us, 12 * us}, 5 * us);
  CHECK(d[0] == doctest::Approx(15 * us).epsilon(1e-15));
  CHECK(d[1] == doctest::Approx(17 * us).epsilon(1e-15));
  const std::vector<double> t{3 * us, 4 * us, 9 * us};
  CHECK(receive_delays(t, 0.0) == t);
}

TEST_CASE("receive delays shift with the transmit time") {
  std::mt19937_64 rng(52);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> t(8);
    for (double& v : t) v = goat::testing::uniform(rng, 10, 80) * us;
    const double a = goat::testing::uniform(rng, 0, 40) * us;
    const double b = goat::testing::uniform(rng, 0, 40) * us;
    const auto ab = receive_delays(t, a + b);
    const auto a_only = receive_delays(t, a);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(std::abs(ab[k] - (a_only[k] + b)) <= 1e-18);
  }
}

TEST_CASE("linear arrays") {
  const ElementArray a = ElementArray::linear(4, 0.3 * mm, 0.0, 1 * mm);
  REQUIRE(a.size() == 4);
  CHECK(a.positions[0].x == doctest::Approx(0.55 * mm));
  CHECK(a.positions[3].x == doctest::Approx(1.45 * mm));
  CHECK_THROWS_AS(validate_array(ElementArray::linear(1, 0.3 * mm, 0.0)), SchemaError);
  CHECK_THROWS_AS(validate_array(ElementArray{{{0, 0}, {0, 0}}, 0.0}), SchemaError);
}

TEST_CASE("homogeneous medium: GOAT and HMFA tables coincide") {
  const Scenario s = goat::testing::fixture("homogeneous");
  for (DelayKind kind : {DelayKind::transmit, DelayKind::receive}) {
    const DelayTable g = build_delay_table(*s.array, s.foci, s.medium, Engine::goat, kind, s.focusing);
    const DelayTable h = build_delay_table(*s.array, s.foci, s.medium, Engine::hmfa, kind, s.focusing);
    REQUIRE(g.delays.size() == h.delays.size());
    CHECK(g.failures.empty());
    for (std::size_t i = 0; i < g.delays.size(); ++i) CHECK(std::abs(g.delays[i] - h.delays[i]) <= 1e-15);
  }
}

TEST_CASE("transmit tables have one zero per focus and receive delays are positive") {
  const Scenario s = goat::testing::fixture("setting2_ellipse");
  const DelayTable t = build_delay_table(*s.array, s.foci, s.medium, Engine::goat, DelayKind::transmit);
  const DelayTable r = build_delay_table(*s.array, s.foci, s.medium, Engine::goat, DelayKind::receive);
  for (std::size_t f = 0; f < s.foci.size(); ++f) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < t.element_count; ++m) {
      CHECK(t.at(m, f) >= 0.0);
      lo = std::min(lo, t.at(m, f));
      CHECK(r.at(m, f) > 0.0);
    }
    CHECK(lo == 0.0);
  }
}

TEST_CASE("Setting 1: GOAT-HMFA receive difference grows with lateral offset") {
  const Scenario s = goat::testing::fixture("setting1_flat");
  const std::vector<Point2> focus{{18.225 * mm, 77.5 * mm}};
  const DelayTable g = build_delay_table(*s.array, focus, s.medium, Engine::goat, DelayKind::receive);
  const DelayTable h = build_delay_table(*s.array, focus, s.medium, Engine::hmfa, DelayKind::receive);
  const std::size_t n = g.element_count;
  std::vector<double> diff(n);
  for (std::size_t m = 0; m < n; ++m) diff[m] = std::abs(g.at(m, 0) - h.at(m, 0));
  // Elements sit symmetrically about the focus; walk outward on each side.
  for (std::size_t m = n / 2; m + 1 < n; ++m) CHECK(diff[m + 1] > diff[m]);
  for (std::size_t m = (n - 1) / 2; m > 0; --m) CHECK(diff[m - 1] > diff[m]);
  CHECK(g.at(0, 0) != h.at(0, 0));
}

TEST_CASE("on-axis Proxon focus gives a laterally symmetric correction") {
  const Scenario s = goat::testing::fixture("proxon");
  const DelayTable g = build_delay_table(*s.array, s.foci, s.medium, Engine::goat, DelayKind::receive, s.focusing);
  const DelayTable h = build_delay_table(*s.array, s.foci, s.medium, Engine::hmfa, DelayKind::receive, s.focusing);
  const std::size_t n = g.element_count;
  for (std::size_t f = 0; f < s.foci.size(); ++f) {
    for (std::size_t m = 0; m < n; ++m) {
      const double a = g.at(m, f) - h.at(m, f);
      const double b = g.at(n - 1 - m, f) - h.at(n - 1 - m, f);
      CHECK(std::abs(a - b) <= 1e-12);
    }
  }
}

TEST_CASE("failed pairs are recorded, not substituted") {
  const Scenario tr = goat::testing::fixture("total_reflection");
  const ElementArray a{{{0, 0}, {20 * mm, 0}}, 20 * mm};
  // Some pairs totally reflect while others solve.
  const std::vector<Point2> foci{{0, 80 * mm}, {38 * mm, 80 * mm}};
  try {
    const DelayTable t = build_delay_table(a, foci, tr.medium, Engine::goat, DelayKind::receive);
    CHECK_FALSE(t.failures.empty());
    for (const DelayFailure& f : t.failures) {
      CHECK(std::isnan(t.at(f.element, f.focus)));
      CHECK_FALSE(f.cause.empty());
    }
  } catch (const Error& e) {
    FAIL("every pair failed: " << e.what());
  }
  const ElementArray close{{{0, 0}, {0.5 * mm, 0}}, 0.5 * mm};
  CHECK_THROWS_AS(build_delay_table(close, {{0, 80 * mm}}, tr.medium, Engine::goat, DelayKind::receive),
                  TotalReflectionError);
}

TEST_CASE("zero foci give an empty table") {
  const Scenario s = goat::testing::fixture("setting1_flat");
  const DelayTable t = build_delay_table(*s.array, {}, s.medium, Engine::goat, DelayKind::receive);
  CHECK(t.delays.empty());
  std::ostringstream out;
  write_delay_csv(out, t, "prov");
  CHECK(lines_of(out.str()).size() == 4);
}

TEST_CASE("delay CSV layout and round-trip formatting") {
  const Scenario s = goat::testing::fixture("homogeneous");
  const DelayTable t = build_delay_table(*s.array, s.foci, s.medium, Engine::hmfa, DelayKind::transmit);
  std::ostringstream out;
  write_delay_csv(out, t, "goatfocus test");
  const auto lines = lines_of(out.str());
  REQUIRE(lines.size() == 4 + t.delays.size());
  CHECK(lines[0] == "# goatfocus test");
  CHECK(lines[1] == "kind,engine");
  CHECK(lines[2] == "transmit,hmfa");
  CHECK(lines[3] == "focus_x_m,focus_z_m,element_index,delay_s");
  for (std::size_t i = 0; i < t.delays.size(); ++i) {
    const std::string& row = lines[4 + i];
    CHECK(std::stod(row.substr(row.rfind(',') + 1)) == t.delays[i]);
  }
  CHECK(format_shortest(0.1) == "0.1");
  CHECK(format_shortest(std::nan("")) == "nan");
  CHECK(std::stod(format_shortest(1.0 / 3.0)) == 1.0 / 3.0);
}

}  // TEST_SUITE
