// Acceptance suite: one pass/fail line per criterion, exit 0 only when every
// criterion holds at its stated tolerance. Tolerances and thresholds are
// pinned here, in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bhl/convexity.hpp"
#include "bhl/experiments.hpp"
#include "bhl/runner.hpp"
#include "bhl/solver.hpp"
#include "bhl/walk.hpp"
#include "support/oracles.hpp"

using namespace bhl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// 1. Iterative sweeps agree with dense elimination to 1e-9 on 50 random
//    instances, d in {1,2}, |B| <= 500.
Outcome criterion_exactness_oracle() {
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = trial % 2 ? 1 : 2;
    const auto law = trial % 4 < 2 ? EnvironmentLaw::two_point(d, 1.0, 3.0, 0.5)
                                   : EnvironmentLaw::uniform(d, 0.6, 2.4);
    // Radii keep the residual-to-solution amplification E[tau] ~ R^2 well
    // below the 1e-9 agreement target at the 1e-12 sweep tolerance.
    const double R = d == 1 ? 3.0 + (trial * 7) % 22 : 2.0 + (trial * 3) % 11;
    const Environment env(law, Box::centered(d, static_cast<int>(R) + 2), 1000 + trial);
    auto dom = std::make_shared<LatticeDomain>(LatticeDomain::ball(R, d));
    if (dom->interior_count() > 500) return {false, "instance exceeded 500 sites"};
    CounterStream stream(2000 + trial);
    EllipticProblem p = make_elliptic(
        env, dom, [&](const Site&) { return 2.0 * stream.next_uniform() - 1.0; },
        [&](const Site&) { return 2.0 * stream.next_uniform() - 1.0; });
    auto [u, rep] = solve_elliptic(p, {1e-12, 0});
    const LatticeField direct = solve_elliptic_direct(p);
    for (int k = 0; k < dom->interior_count(); ++k)
      worst = std::max(worst, std::fabs(u[k] - direct[k]));
  }
  return {worst <= 1e-9, "max |iterative - direct| = " + fmt(worst) + " (tol 1e-9)"};
}

// 2. E[tau] + |x|^2 is L_w-harmonic to 1e-9 on B_8, d = 2, 20 environments.
Outcome criterion_martingale_identity() {
  double worst = 0;
  const auto law = EnvironmentLaw::two_point(2, 1.0, 3.0, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const Environment env(law, Box::centered(2, 10), 3000 + trial);
    auto dom = std::make_shared<LatticeDomain>(LatticeDomain::ball(8.0, 2));
    auto [t, rep] = expected_exit_time(env, dom, {1e-12, 0});
    LatticeField h(dom);
    for (int k = 0; k < dom->closure_count(); ++k)
      h[k] = t[k] + static_cast<double>(norm2i(dom->site_at(k)));
    for (const Site& x : dom->interior())
      worst = std::max(worst, std::fabs(apply_L(env, h, x)));
  }
  return {worst <= 1e-9, "max |L(E[tau] + |x|^2)| = " + fmt(worst) + " (tol 1e-9)"};
}

// 3. Monte Carlo path functional vs direct solve: within 4 SE in >= 9/10
//    instances on B_4, d = 2, 10^4 walks.
Outcome criterion_feynman_kac() {
  int agree = 0;
  const double R = 4.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto law = trial % 2 ? EnvironmentLaw::two_point(2, 1.0, 2.5, 0.4)
                               : EnvironmentLaw::uniform(2, 0.7, 1.9);
    const Environment env(law, Box::centered(2, 7), 4000 + trial);
    auto dom = std::make_shared<LatticeDomain>(LatticeDomain::ball(R, 2));
    const auto psi = ObservableSpec::inv_trace();
    const double c0 = 0.4 + 0.05 * trial;
    auto f = [c0](const std::array<double, 3>& y) { return c0 + y[0]; };
    auto g = [](const std::array<double, 3>& y) { return y[0] * y[0] - 0.3 * y[1]; };
    EllipticProblem p = make_elliptic(
        env, dom,
        [&](const Site& x) {
          return f({x[0] / R, x[1] / R, 0.0}) * psi.eval(env.weights(x)) / (R * R);
        },
        [&](const Site& x) {
          const double nrm = norm(x);
          return g({x[0] / nrm, x[1] / nrm, 0.0});
        });
    const LatticeField direct = solve_elliptic_direct(p);
    const Site start = site(trial % 3 - 1, (trial / 3) % 3 - 1);
    const auto est = feynman_kac_elliptic(env, start, *dom, f, psi, g, R, 10000, 5000 + trial);
    if (std::fabs(est.mean - direct.at(start)) <= 4.0 * est.se) ++agree;
  }
  return {agree >= 9, std::to_string(agree) + "/10 instances within 4 SE"};
}

// 4. Effective coefficients: exact values and the trace identity to 1e-12.
Outcome criterion_effective_coefficients() {
  const auto c1 = estimate_effective(EnvironmentLaw::uniform(1, 0.5, 2.5),
                                     ObservableSpec::inv_trace(), 2000, 4, 2, 42);
  if (c1.abar[0] != 1.0) return {false, "d=1 abar != 1 exactly"};
  const auto c2 = estimate_effective(EnvironmentLaw::constant(2, 1.0),
                                     ObservableSpec::inv_trace(), 2000, 4, 2, 43);
  if (std::fabs(c2.abar[0] - 0.5) > 1e-12 || std::fabs(c2.abar[1] - 0.5) > 1e-12)
    return {false, "identity environment abar != diag(1/2,1/2)"};
  if (std::fabs(c2.bbar - 0.5) > 1e-12) return {false, "identity environment bbar != 1/2"};
  const auto c3 = estimate_effective(EnvironmentLaw::two_point(2, 1.0, 3.0, 0.5),
                                     ObservableSpec::inv_trace(), 2000, 8, 2, 44);
  const double defect =
      std::max(std::fabs(c1.abar_sum() - 1.0),
               std::max(std::fabs(c2.abar_sum() - 1.0), std::fabs(c3.abar_sum() - 1.0)));
  return {defect <= 1e-12, "worst trace-identity defect = " + fmt(defect) + " (tol 1e-12)"};
}

// 5. ABP inequality with the explicit ball constant: 100 random fields on
//    B_6, d = 2, exact polygon volumes, zero violations.
Outcome criterion_abp() {
  auto dom = std::make_shared<LatticeDomain>(LatticeDomain::ball(6.0, 2));
  int violations = 0;
  double tightest = 1e300;
  for (int trial = 0; trial < 100; ++trial) {
    LatticeField u = oracles::random_field(dom, 6000 + trial);
    if (trial % 3 == 1) u.values() *= 5.0;
    if (trial % 3 == 2)
      for (int k = 0; k < dom->closure_count(); ++k)
        u[k] += 0.4 * dom->site_at(k)[0] - 0.2 * dom->site_at(k)[1];
    const AbpReport rep = abp_check(u, *dom, 1e-9);
    if (!rep.holds) ++violations;
    tightest = std::min(tightest, rep.rhs - rep.min_defect);
  }
  return {violations == 0,
          "violations = " + std::to_string(violations) + ", smallest slack = " + fmt(tightest)};
}

// 6. Subdifferential containment: volume and per-axis extent within the
//    kappa-scaled box, and nonpositive L_w u forces a null cell.
Outcome criterion_cell_containment() {
  const auto law = EnvironmentLaw::two_point(2, 1.0, 3.0, 0.5);
  const double kappa = law.kappa();
  const Environment env(law, Box::centered(2, 7), 77);
  auto dom = std::make_shared<LatticeDomain>(LatticeDomain::ball(4.0, 2));
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    LatticeField u = oracles::random_field(dom, 7000 + trial);
    for (const Site& x : dom->interior()) {
      const double lu = apply_L(env, u, x);
      const SubdifferentialCell cell = subdifferential(u, *dom, x);
      const double side = 2.0 * std::max(0.0, lu) / kappa;
      if (cell.volume > side * side + 1e-9) ++violations;
      if (lu <= 0 && cell.volume > 1e-12) ++violations;
      if (!cell.polygon.empty()) {
        double lo0 = 1e300, hi0 = -1e300, lo1 = 1e300, hi1 = -1e300;
        for (const auto& v : cell.polygon) {
          lo0 = std::min(lo0, v[0]);
          hi0 = std::max(hi0, v[0]);
          lo1 = std::min(lo1, v[1]);
          hi1 = std::max(hi1, v[1]);
        }
        if (hi0 - lo0 > side + 1e-9 || hi1 - lo1 > side + 1e-9) ++violations;
      }
    }
  }
  return {violations == 0, "violations = " + std::to_string(violations) + " over 4900 cells"};
}

// 7. Parabolic ABP with the symbolically derived cylinder constant
//    (2^{d+1}(d+1)/v_d)^{1/(d+1)}: 50 random d = 1 instances, R <= 4.
Outcome criterion_parabolic_abp() {
  const auto law = EnvironmentLaw::uniform(1, 0.6, 1.6);
  int violations = 0;
  double tightest = 1e300;
  for (int trial = 0; trial < 50; ++trial) {
    const double R = 2.0 + trial % 3;
    const Environment env(law, Box::centered(1, static_cast<int>(R) + 2), 8000 + trial);
    auto dom = std::make_shared<SpaceTimeDomain>(R, 1);
    CounterStream stream(9000 + trial);
    ParabolicProblem p = make_parabolic(
        env, dom, [&](const Site&, int) { return -stream.next_uniform(); },
        [&](const Site&, int) { return stream.next_uniform(); });
    auto [u, rep] = solve_parabolic(p);
    const ParabolicAbpReport abp = parabolic_abp_check(u, 1e-9);
    if (!abp.holds) ++violations;
    tightest = std::min(tightest, abp.rhs - abp.min_defect);
  }
  return {violations == 0,
          "violations = " + std::to_string(violations) + ", smallest slack = " + fmt(tightest)};
}

// 8. Parabolic solver exactness: the lazy-chain normalisation of the cylinder
//    equation is reproduced to 1e-12 at every interior point, 20 random
//    instances, d in {1,2}, R <= 8.
Outcome criterion_parabolic_exactness() {
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = trial % 2 ? 1 : 2;
    const auto law = EnvironmentLaw::two_point(d, 1.0, 3.0, 0.5);
    const double R = d == 1 ? 5.0 + trial % 4 : 4.0 + (trial / 2) % 5;
    const Environment env(law, Box::centered(d, static_cast<int>(R) + 2), 10000 + trial);
    auto dom = std::make_shared<SpaceTimeDomain>(R, d);
    CounterStream stream(11000 + trial);
    ParabolicProblem p = make_parabolic(
        env, dom, [&](const Site&, int) { return 2.0 * stream.next_uniform() - 1.0; },
        [&](const Site&, int) { return 2.0 * stream.next_uniform() - 1.0; });
    auto [u, rep] = solve_parabolic(p);
    for (const Site& x : dom->space().interior()) {
      const double opt = 1.0 + env.weights(x).trace;
      const int k = dom->space().index_of(x);
      for (int n = 0; n < dom->time_levels(); ++n) {
        const ParabolicValue v = apply_parabolic(env, u, x, n);
        worst = std::max(worst, std::fabs(opt * v.normalized - p.rhs(k, n)));
      }
    }
  }
  return {worst <= 1e-12, "max normalised-form residual = " + fmt(worst) + " (tol 1e-12)"};
}

// 9. Elliptic homogenization decay: d = 2 two-point law, ladder {9,27,81},
//    8 replicas; median max-error strictly decreasing, fitted slope < 0.
Outcome criterion_homog_elliptic() {
  LadderParams p;
  p.law = EnvironmentLaw::two_point(2, 1.0, 2.0, 0.5);
  p.psi = ObservableSpec::inv_trace();
  p.ladder = {9, 27, 81};
  p.replicas = 8;
  p.seed = 20260808;
  p.ref_horizon = 40000;
  p.ref_replicas = 48;
  p.ref_walks = 4;
  p.grid_h = 1.0 / 64.0;
  p.f = [](const std::array<double, 3>&) { return 1.0; };
  p.g = [](const std::array<double, 3>& y) { return y[0]; };
  const ExperimentResult res = homog_error_elliptic(p);
  std::string detail = "medians";
  for (const auto& a : res.aggregate) detail += " " + fmt(a[1]);
  detail += ", slope " + fmt(res.fit.slope);
  bool decreasing = res.aggregate.size() == 3;
  for (std::size_t i = 0; i + 1 < res.aggregate.size(); ++i)
    decreasing = decreasing && res.aggregate[i + 1][1] < res.aggregate[i][1];
  return {decreasing && res.has_fit && res.fit.slope < 0, detail};
}

// 10. Corrector sublinearity on the same ladder: median max|phi|/R^2
//     strictly decreasing, slope < 0.
Outcome criterion_corrector() {
  LadderParams p;
  p.law = EnvironmentLaw::two_point(2, 1.0, 2.0, 0.5);
  p.psi = ObservableSpec::inv_trace();
  p.ladder = {9, 27, 81};
  p.replicas = 16;
  p.seed = 555001;
  p.ref_horizon = 66000;  // >= 10x the largest R^2
  p.ref_replicas = 32;
  p.ref_walks = 2;
  const ExperimentResult res = corrector_sublinearity(p);
  std::string detail = "medians";
  for (const auto& a : res.aggregate) detail += " " + fmt(a[1]);
  detail += ", slope " + fmt(res.fit.slope);
  bool decreasing = res.aggregate.size() == 3;
  for (std::size_t i = 0; i + 1 < res.aggregate.size(); ++i)
    decreasing = decreasing && res.aggregate[i + 1][1] < res.aggregate[i][1];
  return {decreasing && res.has_fit && res.fit.slope < 0, detail};
}

// 11. Ergodicity speed: deviations at n in {1e2,1e3,1e4} strictly decreasing
//     (median over 8 replicas, 10^3 walks each).
Outcome criterion_ergodicity() {
  LadderParams p;
  p.law = EnvironmentLaw::two_point(2, 1.0, 2.0, 0.5);
  p.psi = ObservableSpec::inv_trace();
  p.ladder = {100, 1000, 10000};
  p.replicas = 8;
  p.walks = 1000;
  p.seed = 555002;
  p.ref_replicas = 2;
  p.ref_walks = 2;
  const ExperimentResult res = ergodicity_rate(p);
  std::string detail = "medians";
  for (const auto& a : res.aggregate) detail += " " + fmt(a[1]);
  bool decreasing = res.aggregate.size() == 3;
  for (std::size_t i = 0; i + 1 < res.aggregate.size(); ++i)
    decreasing = decreasing && res.aggregate[i + 1][1] < res.aggregate[i][1];
  return {decreasing, detail};
}

// 12. Berry-Esseen: identity environment at n = 6400 with 1e5 walks stays
//     below 0.02 and matches the exact binomial-convolution oracle; the
//     two-point statistic decreases from n = 400 to n = 6400 (median of 5).
Outcome criterion_berry_esseen() {
  const double d_exact = oracles::binomial_ks_exact(6400);
  BerryEsseenParams p;
  p.law = EnvironmentLaw::constant(2, 1.0);
  p.ladder = {6400};
  p.walks = 100000;
  p.environments = 1;
  p.seed = 808;
  p.coeffs.dim = 2;
  p.coeffs.abar = {0.5, 0.5, 0.0};
  const ExperimentResult identity = berry_esseen(p);
  const double d_sim = identity.aggregate[0][1];

  BerryEsseenParams q = p;
  q.law = EnvironmentLaw::two_point(2, 1.0, 2.0, 0.5);
  q.ladder = {400, 6400};
  q.environments = 5;
  q.seed = 809;
  const ExperimentResult tp = berry_esseen(q);
  const double d400 = tp.aggregate[0][1];
  const double d6400 = tp.aggregate[1][1];

  const bool pass = d_sim <= 0.02 && std::fabs(d_sim - d_exact) <= 0.01 && d6400 < d400;
  return {pass, "identity D = " + fmt(d_sim) + " (exact " + fmt(d_exact) +
                    ", cap 0.02); two-point D(400) = " + fmt(d400) +
                    " > D(6400) = " + fmt(d6400)};
}

// 13. mu-hat decay: mean of mu_n(0)^2 + mu*_n(0)^2 over 16 replicas strictly
//     decreasing for n = 1,2,3 in d = 2.
Outcome criterion_mu_decay() {
  MuDecayParams p;
  p.law = EnvironmentLaw::two_point(2, 1.0, 3.0, 0.5);
  p.psi = ObservableSpec::inv_trace();
  p.levels = {1, 2, 3};
  p.replicas = 16;
  p.seed = 555003;
  p.ref_horizon = 7000;
  p.ref_replicas = 32;
  p.ref_walks = 2;
  const ExperimentResult res = mu_decay(p);
  std::string detail = "means";
  for (const auto& a : res.aggregate) detail += " " + fmt(a[1]);
  bool decreasing = res.aggregate.size() == 3;
  for (std::size_t i = 0; i + 1 < res.aggregate.size(); ++i)
    decreasing = decreasing && res.aggregate[i + 1][1] < res.aggregate[i][1];
  return {decreasing, detail};
}

// 14. Reproducibility: identical config + seed + worker count reproduces the
//     CSV and summary artifacts byte for byte.
Outcome criterion_reproducibility() {
  const std::string cfg = R"(
schema = bhl-config-v1
experiment = ergodicity
seed = 31415
workers = 1
law.family = two_point
law.dim = 2
law.v1 = 1.0
law.v2 = 3.0
law.p = 0.5
psi = inv_trace
ladder = 20,100,500
replicas = 4
walks = 200
ref.replicas = 2
ref.walks = 1
)";
  const fs::path base = fs::temp_directory_path() / "bhl_acceptance_repro";
  fs::remove_all(base);
  fs::create_directories(base);
  const fs::path cfg_path = base / "run.cfg";
  {
    std::ofstream out(cfg_path);
    out << cfg;
  }
  const RunOutcome a = run_config_file(cfg_path.string(), (base / "a").string());
  const RunOutcome b = run_config_file(cfg_path.string(), (base / "b").string());
  if (a.exit_code == 1 || b.exit_code == 1) return {false, "run failed: " + a.message};
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const bool tables = slurp(base / "a" / "table.csv") == slurp(base / "b" / "table.csv");
  const bool summaries = slurp(base / "a" / "summary.json") == slurp(base / "b" / "summary.json");
  const bool nonempty = slurp(base / "a" / "table.csv").size() > 0;
  return {tables && summaries && nonempty,
          std::string("table.csv ") + (tables ? "identical" : "DIFFERS") + ", summary.json " +
              (summaries ? "identical" : "DIFFERS")};
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> criteria = {
      {"exactness oracle (iterative vs direct)", criterion_exactness_oracle},
      {"martingale identity for exit times", criterion_martingale_identity},
      {"Feynman-Kac estimator vs direct solve", criterion_feynman_kac},
      {"effective coefficients", criterion_effective_coefficients},
      {"ABP inequality, explicit constant", criterion_abp},
      {"subdifferential containment bound", criterion_cell_containment},
      {"parabolic ABP, cylinder constant", criterion_parabolic_abp},
      {"parabolic solver exactness", criterion_parabolic_exactness},
      {"elliptic homogenization decay", criterion_homog_elliptic},
      {"corrector sublinearity", criterion_corrector},
      {"ergodicity speed", criterion_ergodicity},
      {"Berry-Esseen statistic", criterion_berry_esseen},
      {"mu-hat decay", criterion_mu_decay},
      {"byte-identical reruns", criterion_reproducibility},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %02zu [%s] (%7.1fs) %s: %s\n", i + 1, outcome.pass ? "PASS" : "FAIL",
                secs, criteria[i].name, outcome.detail.c_str());
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  std::printf("acceptance: %zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
