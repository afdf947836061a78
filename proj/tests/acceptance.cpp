// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <thread>

#include "onion_anon/cli.hpp"
#include "onion_anon/onion_anon.hpp"

using namespace onion_anon;

namespace {

unsigned hw_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

Scenario random_scenario(std::size_t n, std::size_t m, double b, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<std::vector<double>> rows(n, std::vector<double>(m));
  for (auto& row : rows) {
    double sum = 0.0;
    for (auto& x : row) sum += (x = 0.05 + rng.uniform());
    for (auto& x : row) x /= sum;
  }
  return validate_scenario(b, std::move(rows));
}

int failures = 0;

void report(int id, bool ok, const std::string& name, const std::string& detail, double seconds) {
  std::printf("criterion %2d  %s  %-34s %s (%.1fs)\n", id, ok ? "PASS" : "FAIL", name.c_str(),
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <typename Fn>
void criterion(int id, const std::string& name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(id, ok, name, detail, secs);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

}  // namespace

int main() {
  const unsigned threads = hw_threads();

  criterion(1, "oracle equivalence", [&](std::string& detail) {
    double worst = 0.0;
    int cases = 0;
    for (std::size_t n = 2; n <= 5; ++n)
      for (std::size_t m : {2u, 3u})
        for (double b : {0.1, 0.3, 0.5, 0.9})
          for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const Scenario s = random_scenario(n, m, b, 1000 * n + 100 * m + seed + std::lround(b * 10));
            const double f = expected_posterior_formula(s, {0, 0}, {}, threads);
            const double o = expected_posterior_oracle(s, {0, 0});
            worst = std::max(worst, std::fabs(f - o) / std::fabs(o));
            ++cases;
          }
    detail = fmt("%.0f scenarios, max rel err %.2e", cases, worst);
    return worst <= 1e-9;
  });

  criterion(2, "boundary exactness", [&](std::string& detail) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const std::size_t n = 1 + seed % 6;
      const std::size_t m = 2 + seed % 3;
      const Scenario s0 = random_scenario(n, m, 0.0, 2000 + seed);
      const Scenario s1 = random_scenario(n, m, 1.0, 2000 + seed);
      worst = std::max(worst, std::fabs(expected_posterior_formula(s0, {0, 0}) - s0.prob(0, 0)));
      worst = std::max(worst, std::fabs(expected_posterior_formula(s1, {0, 0}) - 1.0));
    }
    detail = fmt("max abs err %.2e", worst);
    return worst <= 1e-12;
  });

  criterion(3, "lower bound", [&](std::string& detail) {
    double slack = 1.0;
    SplitMix64 rng(3000);
    for (int i = 0; i < 200; ++i) {
      const std::size_t n = 1 + rng() % 5;
      const std::size_t m = 2 + rng() % 2;
      const double b = rng.uniform();
      const Scenario s = random_scenario(n, m, b, rng());
      const double e = expected_posterior_formula(s, {0, 0});
      slack = std::min(slack, e - lower_bound(b, s.prob(0, 0)));
    }
    double tight = 0.0;
    for (double b : {0.0, 1.0}) {
      const Scenario s = random_scenario(4, 3, b, 3999);
      tight = std::max(tight, std::fabs(expected_posterior_formula(s, {0, 0}) -
                                        lower_bound(b, s.prob(0, 0))));
    }
    detail = fmt("min(E - bound) %.3e, gap at b in {0,1} %.1e", slack, tight);
    return slack >= -1e-12 && tight <= 1e-12;
  });

  criterion(4, "vertex structure", [&](std::string& detail) {
    double worst = 1.0;
    SplitMix64 rng(4000);
    for (int i = 0; i < 20; ++i) {
      const std::size_t n = 2 + rng() % 3;
      const std::size_t m = 2 + rng() % 2;
      const Scenario base = random_scenario(n, m, 0.1 + 0.8 * rng.uniform(), rng());
      const UserId v = 1 + rng() % (n - 1);
      const DestId e = rng() % m;
      const DestId f = (e + 1 + rng() % (m - 1)) % m;
      const double zeta = base.prob(v, e) + base.prob(v, f);
      std::vector<double> y;
      for (int k = 0; k <= 20; ++k) {
        auto rows = base.rows();
        rows[v][e] = zeta * k / 20.0;
        rows[v][f] = zeta - rows[v][e];
        y.push_back(expected_posterior_formula(validate_scenario(base.b(), rows), {0, 0}));
      }
      for (int k = 1; k < 20; ++k) worst = std::min(worst, y[k - 1] - 2 * y[k] + y[k + 1]);
    }
    detail = fmt("min second difference %.3e", worst);
    return worst >= -1e-9;
  });

  criterion(5, "structured-sum consistency", [&](std::string& detail) {
    double worst = 0.0;
    const std::vector<double> u{0.5, 0.3, 0.2};
    const std::vector<double> common{0.5, 0.3, 0.2};
    for (std::size_t n = 2; n <= 5; ++n) {
      for (double b : {0.3, 0.6}) {
        for (double alpha : {0.0, 0.5, 1.0}) {
          const double w = worst_case_expected_exact(worst_case_population(n, alpha, b, u));
          const double o = expected_posterior_oracle(build_worst_case_scenario(n, alpha, b, u), {0, 0});
          worst = std::max(worst, std::fabs(w - o));
        }
        for (DestId d = 0; d < 3; ++d) {
          const double c = common_expected_exact({n, b, common, d});
          const double o = expected_posterior_oracle(
              build_common_scenario(n, b, DistributionSpec::explicit_vector(common)), {0, d});
          worst = std::max(worst, std::fabs(c - o));
        }
      }
    }
    detail = fmt("max abs diff %.2e", worst);
    return worst <= 1e-9;
  });

  criterion(6, "asymptotic convergence", [&](std::string& detail) {
    const double b = 0.25, p = 0.2, q = 0.05;
    StructuredOptions opts;
    opts.threads = threads;
    bool ok = true;
    std::string parts;
    for (double alpha : {0.0, 0.5, 1.0}) {
      const double lim = worst_case_limit(b, p, q, alpha).value;
      const double e50 = std::fabs(worst_case_expected_exact({50, alpha, b, p, q}, {}, opts) - lim);
      const double e200 = std::fabs(worst_case_expected_exact({200, alpha, b, p, q}, {}, opts) - lim);
      ok = ok && e200 <= 0.05 && e200 <= e50 + 1e-6;
      parts += fmt("a=%.1f: %.2e->%.2e ", alpha, e50, e200);
    }
    detail = "err n=50->200 " + parts;
    return ok;
  });

  criterion(7, "endpoint maximality", [&](std::string& detail) {
    StructuredOptions opts;
    opts.threads = threads;
    double worst_gap = 0.0;
    for (double b : {0.1, 0.3, 0.5})
      for (double p : {0.2, 0.5, 0.8})
        for (double q : {0.1 * (1 - p), 1 - p}) {
          double best = 0.0, ends = 0.0;
          for (int i = 0; i <= 10; ++i) {
            const double alpha = i / 10.0;
            const double v = worst_case_expected_exact({200, alpha, b, p, q}, {}, opts);
            best = std::max(best, v);
            if (i == 0 || i == 10) ends = std::max(ends, v);
          }
          worst_gap = std::max(worst_gap, best - ends);
        }
    double boundary = 0.0;
    int checked = 0;
    for (double b : {0.1, 0.3, 0.5})
      for (double p : {0.2, 0.5, 0.8}) {
        const auto t = alpha_one_threshold(b, p);
        if (!t || *t > 1 - p) continue;  // not a feasible p_u_min
        ++checked;
        boundary = std::max(boundary, std::fabs(worst_case_limit(b, p, *t, 0.0).value -
                                                worst_case_limit(b, p, *t, 1.0).value));
      }
    detail = fmt("max(grid) - max(ends) %.2e; threshold gap %.1e over %.0f (b,p)", worst_gap,
                 boundary, checked);
    return worst_gap <= 0.01 && boundary <= 1e-9;
  });

  criterion(8, "common-distribution O(1/n)", [&](std::string& detail) {
    const auto zipf = make_distribution(DistributionSpec::zipf(100, 1.0));
    const double b = 0.1;
    auto err = [&](std::size_t n) {
      return std::fabs(common_expected_exact({n, b, zipf, 0}) - lower_bound(b, zipf[0]));
    };
    bool decreasing = true;
    for (std::size_t n = 20; n <= 200; n += 10) decreasing = decreasing && err(n) < err(n - 10);
    const double ratio = err(200) / err(100);
    detail = fmt("err(100) %.3e, err(200) %.3e, ratio %.4f", err(100), err(200), ratio) +
             (decreasing ? ", decreasing" : ", NOT decreasing");
    return decreasing && ratio <= 0.55;
  });

  criterion(9, "Monte Carlo calibration", [&](std::string& detail) {
    const Scenario s = validate_scenario(
        0.4, {{0.5, 0.3, 0.2}, {0.2, 0.2, 0.6}, {0.7, 0.2, 0.1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}});
    const double exact = expected_posterior_formula(s, {0, 0});
    int in2 = 0, in4 = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto est = estimate_expected_posterior(s, {0, 0}, {10000, 9000 + seed, threads});
      const double z = std::fabs(est.mean - exact) / est.std_error;
      in2 += z <= 2.0;
      in4 += z <= 4.0;
    }
    detail = fmt("within 2se: %.0f/100, within 4se: %.0f/100", in2, in4);
    return in2 >= 90 && in4 >= 99;
  });

  criterion(10, "reproducibility", [&](std::string& detail) {
    const std::vector<std::vector<std::string>> commands{
        {"mc", "--mode", "worst-case", "--n", "500", "--alpha", "0.3", "--b", "0.2", "--p-d",
         "0.3", "--p-min", "0.05", "--samples", "50000", "--seed", "17"},
        {"mc", "--mode", "common", "--n", "200", "--b", "0.1", "--dist", "zipf:1.0", "--dests",
         "100", "--samples", "50000", "--seed", "17"},
        {"sweep", "--mode", "common", "--dist", "zipf:1.0", "--dests", "100", "--b", "0.1", "--n",
         "10:200:10", "--dest", "0"},
        {"sweep", "--mode", "common", "--dist", "zipf:1.0", "--dests", "100", "--b", "0.1", "--n",
         "10:100:30", "--method", "mc", "--samples", "20000", "--seed", "5"},
        {"sweep", "--mode", "worst-case", "--n", "50:150:50", "--alpha", "0:1:0.25", "--b", "0.25",
         "--p-d", "0.2", "--p-min", "0.05"},
        {"sweep", "--mode", "worst-case", "--n", "100", "--alpha", "0:1:0.5", "--b", "0.25",
         "--p-d", "0.2", "--p-min", "0.05", "--method", "mc", "--samples", "20000", "--seed", "5"}};
    int identical = 0;
    for (const auto& base : commands) {
      std::string reference;
      bool same = true;
      for (const char* t : {"1", "2", "7"}) {
        auto args = base;
        args.insert(args.end(), {"--threads", t});
        std::ostringstream out, err;
        if (cli::run(args, out, err) != 0) throw std::runtime_error(err.str());
        if (reference.empty()) reference = out.str();
        same = same && out.str() == reference;
      }
      identical += same;
    }
    detail = fmt("%.0f/%.0f invocations bit-identical across --threads 1,2,7", identical,
                 commands.size());
    return identical == static_cast<int>(commands.size());
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
