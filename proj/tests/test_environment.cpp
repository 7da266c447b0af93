#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bhl/environment.hpp"

using namespace bhl;

TEST_CASE("constant law yields the identity field") {
  const auto law = EnvironmentLaw::constant(2, 1.0);
  const Environment env(law, Box::centered(2, 5), 42);
  for (int x = -5; x <= 5; ++x)
    for (int y = -5; y <= 5; ++y) {
      const SiteWeights sw = env.weights(site(x, y));
      CHECK(sw.w[0] == 1.0);
      CHECK(sw.w[1] == 1.0);
      CHECK(sw.trace == 2.0);
    }
}

TEST_CASE("same (law, box, seed) reproduces the field bit for bit") {
  const auto law = EnvironmentLaw::uniform(2, 1.0, 2.0);
  const Environment a(law, Box::centered(2, 8), 1234);
  const Environment b(law, Box::centered(2, 8), 1234);
  for (int x = -8; x <= 8; ++x)
    for (int y = -8; y <= 8; ++y) {
      CHECK(a.weights(site(x, y)).w[0] == b.weights(site(x, y)).w[0]);
      CHECK(a.weights(site(x, y)).w[1] == b.weights(site(x, y)).w[1]);
    }
}

TEST_CASE("flipping one seed bit changes the field") {
  const auto law = EnvironmentLaw::uniform(2, 1.0, 2.0);
  const Environment a(law, Box::centered(2, 4), 1234);
  const Environment b(law, Box::centered(2, 4), 1234 ^ 1);
  bool differs = false;
  for (int x = -4; x <= 4 && !differs; ++x)
    for (int y = -4; y <= 4 && !differs; ++y)
      differs = a.weights(site(x, y)).w[0] != b.weights(site(x, y)).w[0];
  CHECK(differs);
}

TEST_CASE("enlarging the box preserves previously generated sites") {
  const auto law = EnvironmentLaw::two_point(2, 1.0, 3.0, 0.5);
  const Environment small(law, Box::centered(2, 3), 99);
  const Environment big(law, Box::centered(2, 20), 99);
  for (int x = -3; x <= 3; ++x)
    for (int y = -3; y <= 3; ++y)
      CHECK(small.weights(site(x, y)).w[1] == big.weights(site(x, y)).w[1]);
}

TEST_CASE("two-point empirical mean matches a direct i.i.d. sampling oracle") {
  // Oracle: the same scalar family sampled directly from fresh uniforms.
  const auto law = EnvironmentLaw::two_point(2, 1.0, 3.0, 0.5);
  const Environment env(law, Box::centered(2, 50), 7);
  double sum = 0;
  long n = 0;
  for (int x = -50; x <= 50; ++x)
    for (int y = -50; y <= 50; ++y) {
      sum += env.weights(site(x, y)).w[0];
      ++n;
    }
  const double mean = sum / static_cast<double>(n);
  CounterStream direct(555);
  double osum = 0;
  for (long i = 0; i < n; ++i) osum += law.sample(direct.next_uniform());
  const double omean = osum / static_cast<double>(n);
  const double se = 1.0 / std::sqrt(static_cast<double>(n));  // sd of one draw = 1
  CHECK(std::fabs(mean - 2.0) < 3.0 * se);
  CHECK(std::fabs(omean - 2.0) < 3.0 * se);
}

TEST_CASE("transition probabilities normalise and respect the ellipticity floor") {
  const auto law = EnvironmentLaw::uniform(2, 0.5, 2.5);
  const Environment env(law, Box::centered(2, 10), 3);
  const double kappa = law.kappa();
  for (int x = -10; x <= 10; ++x)
    for (int y = -10; y <= 10; ++y) {
      const auto p = env.transition_probabilities(site(x, y));
      double total = 0;
      for (int i = 0; i < 4; ++i) {
        total += p[i];
        CHECK(p[i] >= kappa);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("fixed transition values") {
  // d = 1 is always (1/2, 1/2) whatever the weight.
  const auto law = EnvironmentLaw::constant(1, 5.0);
  const Environment env(law, Box::centered(1, 3), 0);
  const auto p = env.transition_probabilities(site(0));
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
}

TEST_CASE("observable catalog evaluates as specified") {
  SiteWeights sw;
  sw.dim = 2;
  sw.w = {3.0, 1.0, 0.0};
  sw.trace = 4.0;
  CHECK(ObservableSpec::inv_trace().eval(sw) == doctest::Approx(0.25));
  CHECK(ObservableSpec::coord_ratio(0).eval(sw) == doctest::Approx(0.75));
  CHECK(ObservableSpec::constant(2.5).eval(sw) == 2.5);
  CHECK(ObservableSpec::trace().eval(sw) == 4.0);
  CHECK(ObservableSpec::indicator_w1_above(2.0).eval(sw) == 1.0);
  CHECK(ObservableSpec::indicator_w1_above(3.5).eval(sw) == 0.0);
  const auto ratio = ObservableSpec::psi_over_trace(ObservableSpec::trace());
  CHECK(ratio.eval(sw) == doctest::Approx(1.0));

  SiteWeights id2;
  id2.dim = 2;
  id2.w = {1.0, 1.0, 0.0};
  id2.trace = 2.0;
  CHECK(ObservableSpec::inv_trace().eval(id2) == doctest::Approx(0.5));
}

TEST_CASE("observable evaluation is shift consistent") {
  const auto law = EnvironmentLaw::two_point(2, 1.0, 3.0, 0.4);
  const Environment env(law, Box::centered(2, 6), 17);
  const auto psi = ObservableSpec::coord_ratio(1);
  for (int x = -6; x <= 6; ++x)
    for (int y = -6; y <= 6; ++y) {
      const Environment view = env.shifted(site(x, y));
      CHECK(observable_eval(psi, env, site(x, y)) == observable_eval(psi, view, site(0, 0)));
    }
}

TEST_CASE("sup norms over the law support") {
  const auto law = EnvironmentLaw::two_point(2, 1.0, 3.0, 0.5);
  CHECK(ObservableSpec::constant(-2.0).sup_norm(law) == 2.0);
  CHECK(ObservableSpec::trace().sup_norm(law) == doctest::Approx(6.0));
  CHECK(ObservableSpec::inv_trace().sup_norm(law) == doctest::Approx(0.5));
  // max of w1/(w1+w2) at w1 = 3, w2 = 1.
  CHECK(ObservableSpec::coord_ratio(0).sup_norm(law) == doctest::Approx(0.75));
}

TEST_CASE("law kappa formulas") {
  CHECK(EnvironmentLaw::constant(2, 1.0).kappa() == doctest::Approx(0.25));
  CHECK(EnvironmentLaw::constant(1, 3.0).kappa() == doctest::Approx(0.5));
  // uniform [a,b], d = 2: a / (2(a + b)).
  CHECK(EnvironmentLaw::uniform(2, 1.0, 2.0).kappa() == doctest::Approx(1.0 / 6.0));
  CHECK(EnvironmentLaw::two_point(3, 1.0, 3.0, 0.5).kappa() == doctest::Approx(1.0 / 14.0));
}

TEST_CASE("invalid laws are rejected as configuration errors") {
  CHECK_THROWS_AS(EnvironmentLaw::constant(2, 0.0), ConfigError);
  CHECK_THROWS_AS(EnvironmentLaw::uniform(2, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(EnvironmentLaw::uniform(2, 2.0, 1.0), ConfigError);
  CHECK_THROWS_AS(EnvironmentLaw::two_point(2, 1.0, -1.0, 0.5), ConfigError);
  CHECK_THROWS_AS(EnvironmentLaw::two_point(2, 1.0, 2.0, 1.5), ConfigError);
}

TEST_CASE("site access outside the declared box is a domain error") {
  const auto law = EnvironmentLaw::constant(2, 1.0);
  const Environment env(law, Box::centered(2, 2), 5);
  CHECK_THROWS_AS(env.weights(site(3, 0)), DomainError);
  CHECK_THROWS_AS(env.transition_probabilities(site(0, -3)), DomainError);
}

TEST_CASE("binary dump round-trips the field") {
  const auto law = EnvironmentLaw::uniform(2, 1.0, 2.0);
  const Environment env(law, Box::centered(2, 4), 2024);
  std::stringstream buf;
  env.dump(buf);
  CHECK(buf.str().size() == 32 + static_cast<std::size_t>(9 * 9 * 2) * 8);
  CHECK(buf.str().substr(0, 4) == "BHL1");
  const Environment back = Environment::load(buf, law);
  CHECK(back.seed() == 2024);
  for (int x = -4; x <= 4; ++x)
    for (int y = -4; y <= 4; ++y) {
      CHECK(back.weights(site(x, y)).w[0] == env.weights(site(x, y)).w[0]);
      CHECK(back.weights(site(x, y)).w[1] == env.weights(site(x, y)).w[1]);
    }
}

TEST_CASE("huge boxes fall back to on-demand evaluation with identical values") {
  const auto law = EnvironmentLaw::two_point(2, 1.0, 3.0, 0.5);
  const Environment dense(law, Box::centered(2, 10), 31);
  const Environment lazy(law, Box::centered(2, 4000), 31);
  CHECK(dense.materialized());
  CHECK_FALSE(lazy.materialized());
  for (int x = -10; x <= 10; ++x)
    for (int y = -10; y <= 10; ++y)
      CHECK(dense.weights(site(x, y)).w[0] == lazy.weights(site(x, y)).w[0]);
}
