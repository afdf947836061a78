#pragma once

// Command-line front end. Exit codes: 0 success, 2 bad arguments or
// malformed input files, 3 model errors (invalid scenario, null
// conditioning, size limits, impossible observations), 4 I/O errors.

#include <cmath>
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "onion_anon/asymptotics.hpp"
#include "onion_anon/distributions.hpp"
#include "onion_anon/error.hpp"
#include "onion_anon/inference.hpp"
#include "onion_anon/montecarlo.hpp"
#include "onion_anon/scenario_io.hpp"
#include "onion_anon/structured.hpp"

namespace onion_anon::cli {

enum ExitCode : int { kOk = 0, kParseError = 2, kModelError = 3, kIoError = 4 };

// "start:end:step" (inclusive) or a single value.
inline std::vector<double> parse_range(const std::string& text, const std::string& what) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon == std::string::npos ? std::string::npos
                                                                  : colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  std::vector<double> v;
  for (const auto& p : parts) v.push_back(detail::parse_double(p, what));
  if (v.size() == 1) return v;
  if (v.size() != 3) throw ParseError(what + ": expected start:end:step, got '" + text + "'");
  const double lo = v[0], hi = v[1], step = v[2];
  if (!(step > 0.0) || hi < lo) throw ParseError(what + ": empty or invalid range '" + text + "'");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(std::min(hi, lo + static_cast<double>(i) * step));
  }
  return out;
}

inline std::vector<std::size_t> parse_count_range(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (double x : parse_range(text, what)) {
    if (!(x >= 1.0) || std::floor(x) != x) {
      throw ParseError(what + ": user counts must be positive integers");
    }
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

namespace detail {

struct Options {
  std::string scenario_path;
  std::string observation_path;
  std::string user = "0";
  std::string dest = "0";
  std::string method;
  std::string mode;
  std::string out_path;
  std::string dist = "uniform";
  std::string n_text;
  std::string alpha_text = "0";
  std::size_t dests = 2;
  std::size_t n = 1;
  double alpha = 0.0;
  double b = 0.0;
  double p_d = 0.0;
  double p_min = 0.0;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool truncate = false;
};

inline void emit(std::ostream& out, const Options& o, const std::string& text) {
  if (o.out_path.empty()) {
    out << text;
  } else {
    write_file(o.out_path, text);
  }
}

inline DestId parse_dest_index(const std::string& token, std::size_t dests) {
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != token.size() || v >= dests) {
    throw ParseError("destination must be an index below " + std::to_string(dests) + ": '" +
                     token + "'");
  }
  return static_cast<DestId>(v);
}

inline CommonPopulation common_population(const Options& o, std::size_t n) {
  const auto spec = parse_distribution_spec(o.dist, o.dests);
  const auto p = make_distribution(spec);
  return CommonPopulation{n, o.b, p, parse_dest_index(o.dest, p.size())};
}

inline void line(std::ostream& out, const char* key, double value) {
  out << key << '=' << format_number(value) << '\n';
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relationship anonymity of the black-box onion-routing model", "onion_anon"};
  app.require_subcommand(1);
  detail::Options o;
  SizeLimits limits;

  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", o.threads, "Worker threads (results do not depend on it)")
        ->check(CLI::Range(1u, 1024u));
  };

  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file");
  validate_cmd->add_option("scenario", o.scenario_path, "Scenario JSON file")->required();

  auto* exact_cmd = app.add_subcommand("exact", "Exact E[psi | u chose d] for a scenario");
  exact_cmd->add_option("--scenario", o.scenario_path)->required();
  exact_cmd->add_option("--user", o.user, "User name or index");
  exact_cmd->add_option("--dest", o.dest, "Destination name or index");
  o.method = "formula";
  exact_cmd->add_option("--method", o.method)->check(CLI::IsMember({"formula", "oracle"}));
  add_threads(exact_cmd);

  auto* posterior_cmd = app.add_subcommand("posterior", "Posterior of (u, d) given an observation");
  posterior_cmd->add_option("--scenario", o.scenario_path)->required();
  posterior_cmd->add_option("--observation", o.observation_path)->required();
  posterior_cmd->add_option("--user", o.user);
  posterior_cmd->add_option("--dest", o.dest);
  posterior_cmd->add_option("--method", o.method)->check(CLI::IsMember({"formula", "dp", "oracle"}));

  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo estimate of E[psi | u chose d]");
  o.mode = "generic";
  mc_cmd->add_option("--mode", o.mode)->check(CLI::IsMember({"generic", "worst-case", "common"}));
  mc_cmd->add_option("--scenario", o.scenario_path);
  mc_cmd->add_option("--user", o.user);
  mc_cmd->add_option("--dest", o.dest);
  mc_cmd->add_option("--n", o.n)->check(CLI::PositiveNumber);
  mc_cmd->add_option("--alpha", o.alpha);
  mc_cmd->add_option("--b", o.b);
  mc_cmd->add_option("--p-d", o.p_d);
  mc_cmd->add_option("--p-min", o.p_min);
  mc_cmd->add_option("--dist", o.dist);
  mc_cmd->add_option("--dests", o.dests)->check(CLI::PositiveNumber);
  mc_cmd->add_option("--samples", o.samples)->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40));
  mc_cmd->add_option("--seed", o.seed)->required();
  mc_cmd->add_option("--out", o.out_path);
  add_threads(mc_cmd);

  auto* worst_cmd = app.add_subcommand("worst-case", "Worst-case population: exact sum and limits");
  worst_cmd->add_option("--n", o.n)->required()->check(CLI::PositiveNumber);
  worst_cmd->add_option("--alpha", o.alpha)->required();
  worst_cmd->add_option("--b", o.b)->required();
  worst_cmd->add_option("--p-d", o.p_d)->required();
  worst_cmd->add_option("--p-min", o.p_min)->required();
  worst_cmd->add_flag("--truncate", o.truncate, "Drop binomial tails below 1e-12 mass");
  add_threads(worst_cmd);

  auto* common_cmd = app.add_subcommand("common", "Common-distribution population");
  common_cmd->add_option("--n", o.n)->required()->check(CLI::PositiveNumber);
  common_cmd->add_option("--b", o.b)->required();
  common_cmd->add_option("--dist", o.dist);
  common_cmd->add_option("--dests", o.dests)->check(CLI::PositiveNumber);
  common_cmd->add_option("--dest", o.dest, "Destination rank index");

  auto* sweep_cmd = app.add_subcommand("sweep", "Parameter sweep written as CSV");
  sweep_cmd->add_option("--mode", o.mode)->required()->check(CLI::IsMember({"worst-case", "common"}));
  sweep_cmd->add_option("--n", o.n_text, "start:end:step or a single count")->required();
  sweep_cmd->add_option("--alpha", o.alpha_text, "start:end:step or a single value");
  sweep_cmd->add_option("--b", o.b)->required();
  sweep_cmd->add_option("--p-d", o.p_d);
  sweep_cmd->add_option("--p-min", o.p_min);
  sweep_cmd->add_option("--dist", o.dist);
  sweep_cmd->add_option("--dests", o.dests)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--dest", o.dest);
  sweep_cmd->add_option("--method", o.method)->check(CLI::IsMember({"exact", "mc"}));
  sweep_cmd->add_option("--samples", o.samples)->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40));
  auto* sweep_seed = sweep_cmd->add_option("--seed", o.seed);
  sweep_cmd->add_option("--out", o.out_path);
  sweep_cmd->add_flag("--truncate", o.truncate);
  add_threads(sweep_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kParseError;
  }

  try {
    limits = SizeLimits::from_env();
    if (validate_cmd->parsed()) {
      const auto named = load_scenario(o.scenario_path);
      out << "ok: " << named.scenario.users() << " users, " << named.scenario.dest_count()
          << " destinations, b=" << format_number(named.scenario.b()) << '\n';
    } else if (exact_cmd->parsed()) {
      const auto named = load_scenario(o.scenario_path);
      const PosteriorQuery q{resolve_user(named, o.user), resolve_dest(named, o.dest)};
      const double v = o.method == "oracle"
                           ? expected_posterior_oracle(named.scenario, q, limits)
                           : expected_posterior_formula(named.scenario, q, limits, o.threads);
      out << format_number(v) << '\n';
    } else if (posterior_cmd->parsed()) {
      const auto named = load_scenario(o.scenario_path);
      const auto obs = load_observation(o.observation_path, named);
      const PosteriorQuery q{resolve_user(named, o.user), resolve_dest(named, o.dest)};
      const double v = o.method == "oracle" ? posterior_oracle(named.scenario, obs, q, limits)
                                            : posterior(named.scenario, obs, q);
      out << format_number(v) << '\n';
    } else if (mc_cmd->parsed()) {
      const McOptions mc{o.samples, o.seed, o.threads};
      Estimate est;
      if (o.mode == "generic") {
        if (o.scenario_path.empty()) throw ParseError("mc --mode generic needs --scenario");
        const auto named = load_scenario(o.scenario_path);
        const PosteriorQuery q{resolve_user(named, o.user), resolve_dest(named, o.dest)};
        est = estimate_expected_posterior(named.scenario, q, mc, limits);
      } else if (o.mode == "worst-case") {
        est = estimate_worst_case(WorstCasePopulation{o.n, o.alpha, o.b, o.p_d, o.p_min}, mc);
      } else {
        est = estimate_common(detail::common_population(o, o.n), mc);
      }
      CsvWriter csv({"mode", "mean", "std_error", "samples", "seed"});
      csv.row_strings({o.mode, format_number(est.mean), format_number(est.std_error),
                       std::to_string(est.samples), std::to_string(est.seed)});
      detail::emit(out, o, csv.str());
    } else if (worst_cmd->parsed()) {
      const WorstCasePopulation pop{o.n, o.alpha, o.b, o.p_d, o.p_min};
      StructuredOptions sopts;
      sopts.threads = o.threads;
      sopts.truncate_tails = o.truncate;
      const double exact = worst_case_expected_exact(pop, limits, sopts);
      const auto lim = worst_case_limit(o.b, o.p_d, o.p_min, o.alpha);
      detail::line(out, "expected_psi", exact);
      detail::line(out, "limit", lim.value);
      out << "limit_case=" << to_string(lim.case_tag) << '\n';
      out << "limit_error_order=" << lim.error_order << '\n';
      detail::line(out, "abs_error", std::fabs(exact - lim.value));
      detail::line(out, "lower_bound", lower_bound(o.b, o.p_d));
      detail::line(out, "headline", worst_case_headline(o.b, o.p_d));
      out << "worst_alpha=" << to_string(worst_alpha(o.b, o.p_d, o.p_min)) << '\n';
    } else if (common_cmd->parsed()) {
      const auto pop = detail::common_population(o, o.n);
      const double exact = common_expected_exact(pop, limits);
      const double lb = lower_bound(o.b, pop.p[pop.d]);
      detail::line(out, "expected_psi", exact);
      detail::line(out, "lower_bound", lb);
      detail::line(out, "abs_error", std::fabs(exact - lb));
    } else if (sweep_cmd->parsed()) {
      const bool use_mc = o.method == "mc";
      if (use_mc && sweep_seed->count() == 0) {
        throw ParseError("sweep --method mc requires an explicit --seed");
      }
      const auto ns = parse_count_range(o.n_text, "--n");
      std::uint64_t row_index = 0;
      auto mc_for_row = [&] {
        return McOptions{o.samples, derive_seed(o.seed, row_index++), o.threads};
      };
      if (o.mode == "common") {
        CsvWriter csv(use_mc ? std::vector<std::string>{"n", "expected_psi", "std_error",
                                                        "lower_bound", "abs_error"}
                             : std::vector<std::string>{"n", "expected_psi", "lower_bound",
                                                        "abs_error"});
        for (std::size_t n : ns) {
          const auto pop = detail::common_population(o, n);
          const double lb = lower_bound(o.b, pop.p[pop.d]);
          if (use_mc) {
            const auto est = estimate_common(pop, mc_for_row());
            csv.row({static_cast<double>(n), est.mean, est.std_error, lb,
                     std::fabs(est.mean - lb)});
          } else {
            const double v = common_expected_exact(pop, limits);
            csv.row({static_cast<double>(n), v, lb, std::fabs(v - lb)});
          }
        }
        detail::emit(out, o, csv.str());
      } else {
        const auto alphas = parse_range(o.alpha_text, "--alpha");
        CsvWriter csv(use_mc ? std::vector<std::string>{"n", "alpha", "expected_psi", "std_error",
                                                        "limit", "abs_error"}
                             : std::vector<std::string>{"n", "alpha", "expected_psi", "limit",
                                                        "abs_error"});
        StructuredOptions sopts;
        sopts.threads = o.threads;
        sopts.truncate_tails = o.truncate;
        for (std::size_t n : ns) {
          for (double alpha : alphas) {
            const WorstCasePopulation pop{n, alpha, o.b, o.p_d, o.p_min};
            const double lim = worst_case_limit(o.b, o.p_d, o.p_min, alpha).value;
            if (use_mc) {
              const auto est = estimate_worst_case(pop, mc_for_row());
              csv.row({static_cast<double>(n), alpha, est.mean, est.std_error, lim,
                       std::fabs(est.mean - lim)});
            } else {
              const double v = worst_case_expected_exact(pop, limits, sopts);
              csv.row({static_cast<double>(n), alpha, v, lim, std::fabs(v - lim)});
            }
          }
        }
        detail::emit(out, o, csv.str());
      }
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kParseError;
  } catch (const ModelError& e) {
    err << "error: " << e.what() << '\n';
    return kModelError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace onion_anon::cli
