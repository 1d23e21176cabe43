#pragma once

// Perturbed "new game" scenarios and cross-scenario evaluation of fixed
// profiles against a baseline profile.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eqforge/accuracy.hpp"
#include "eqforge/error.hpp"
#include "eqforge/format.hpp"
#include "eqforge/game.hpp"
#include "eqforge/solver.hpp"

namespace eqforge {

enum class PerturbTarget { a_max, kappa, lambda, poison_weight, unit_cost };

inline std::string_view to_string(PerturbTarget t) {
  switch (t) {
    case PerturbTarget::a_max: return "a_max";
    case PerturbTarget::kappa: return "kappa";
    case PerturbTarget::lambda: return "lambda";
    case PerturbTarget::poison_weight: return "poison_weight";
    case PerturbTarget::unit_cost: return "unit_cost";
  }
  return "unknown";
}

inline PerturbTarget parse_perturb_target(std::string_view name) {
  for (auto t : {PerturbTarget::a_max, PerturbTarget::kappa, PerturbTarget::lambda, PerturbTarget::poison_weight,
                 PerturbTarget::unit_cost}) {
    if (to_string(t) == name) return t;
  }
  throw Error(ErrorCode::precondition, "unknown perturbation target '" + std::string(name) + "'");
}

inline const std::set<PerturbTarget>& all_perturb_targets() {
  static const std::set<PerturbTarget> all{PerturbTarget::a_max, PerturbTarget::kappa, PerturbTarget::lambda,
                                           PerturbTarget::poison_weight, PerturbTarget::unit_cost};
  return all;
}

struct PerturbationSpec {
  double delta = 0.05;
  std::set<PerturbTarget> targets = all_perturb_targets();
  int count = 1;
  std::uint64_t seed = 0;
};

/// Uniform draw in [0, 1) keyed by (seed, scenario, parameter name). Each key
/// seeds its own mt19937_64 through seed_seq, both fully specified by the
/// standard, and the top 53 bits become the mantissa.
inline double keyed_uniform(std::uint64_t seed, std::uint64_t scenario, std::string_view parameter) {
  std::uint64_t name_hash = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : parameter) {
    name_hash ^= c;
    name_hash *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(scenario), static_cast<std::uint32_t>(scenario >> 32),
                    static_cast<std::uint32_t>(name_hash), static_cast<std::uint32_t>(name_hash >> 32)};
  std::mt19937_64 engine(seq);
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

/// K configs with each targeted parameter scaled by an independent factor in
/// [1 - delta, 1 + delta]. a_max and lambda are clamped to 1.
inline std::vector<GameConfig> generate_scenarios(const GameConfig& base, const PerturbationSpec& spec) {
  if (!(spec.delta >= 0.0 && spec.delta < 1.0)) throw Error(ErrorCode::precondition, "delta must lie in [0, 1)");
  if (spec.count < 1) throw Error(ErrorCode::precondition, "scenario count must be >= 1");
  if (spec.targets.empty()) throw Error(ErrorCode::precondition, "perturbation targets must be non-empty");
  if (base.oracle.kind == OracleKind::external) {
    for (auto t : spec.targets) {
      if (t != PerturbTarget::unit_cost) {
        throw Error(ErrorCode::precondition, "external oracles can only be perturbed via seed and unit_cost, not " +
                                                 std::string(to_string(t)));
      }
    }
  }
  if (spec.targets.count(PerturbTarget::a_max) &&
      !((1.0 - spec.delta) * base.oracle.params.a_max > base.oracle.params.floor)) {
    throw Error(ErrorCode::precondition, "delta " + format_number(spec.delta) +
                                             " could push a_max to or below floor; no clamp defined for that");
  }

  std::vector<GameConfig> scenarios;
  scenarios.reserve(static_cast<std::size_t>(spec.count));
  for (int k = 0; k < spec.count; ++k) {
    const auto id = static_cast<std::uint64_t>(k);
    auto factor = [&](std::string_view name) {
      return 1.0 - spec.delta + 2.0 * spec.delta * keyed_uniform(spec.seed, id, name);
    };
    GameConfig config = base;
    auto& params = config.oracle.params;
    if (spec.targets.count(PerturbTarget::a_max)) params.a_max = std::min(1.0, params.a_max * factor("a_max"));
    if (spec.targets.count(PerturbTarget::kappa)) params.kappa *= factor("kappa");
    if (spec.targets.count(PerturbTarget::lambda)) params.lambda = std::min(1.0, params.lambda * factor("lambda"));
    for (auto& p : config.players) {
      const std::string suffix = "[" + std::to_string(p.id) + "]";
      if (spec.targets.count(PerturbTarget::unit_cost)) p.unit_cost *= factor("unit_cost" + suffix);
      if (spec.targets.count(PerturbTarget::poison_weight) && p.role == Role::malicious) {
        p.poison_weight *= factor("poison_weight" + suffix);
      }
    }
    scenarios.push_back(std::move(config));
  }
  return scenarios;
}

// ---------------------------------------------------------------------------
// Robustness report

struct LabeledProfile {
  std::string label;
  StrategyProfile profile;
};

struct RobustnessRow {
  std::size_t scenario = 0;
  std::string label;
  double accuracy = 0.0;
  std::vector<double> utilities;
};

struct DominanceSummary {
  std::string label;
  std::vector<double> fraction;     // per player: share of scenarios with utility >= baseline's
  std::vector<double> mean_margin;  // per player: mean (utility - baseline utility)
};

struct RobustnessReport {
  std::string baseline;
  std::size_t scenarios = 0;
  std::vector<RobustnessRow> rows;
  std::vector<DominanceSummary> summary;  // one entry per profile, input order
};

inline constexpr std::string_view kBaselineLabel = "baseline";

/// Scenario-major cross product. Each scenario s is queried with seed + s so
/// stochastic oracles see fresh draws per scenario.
inline RobustnessReport evaluate_profiles(const std::vector<LabeledProfile>& profiles,
                                          const std::vector<GameConfig>& scenarios, std::int64_t seed,
                                          std::string_view baseline = kBaselineLabel,
                                          unsigned jobs = default_jobs()) {
  if (profiles.empty()) throw Error(ErrorCode::precondition, "no profiles to evaluate");
  if (scenarios.empty()) throw Error(ErrorCode::precondition, "no scenarios to evaluate");
  auto base_it = std::find_if(profiles.begin(), profiles.end(), [&](const auto& p) { return p.label == baseline; });
  if (base_it == profiles.end()) {
    throw Error(ErrorCode::precondition, "no profile labelled '" + std::string(baseline) + "'");
  }
  const std::size_t base_index = static_cast<std::size_t>(base_it - profiles.begin());
  for (const auto& scenario : scenarios) {
    for (const auto& p : profiles) check_profile(scenario, p.profile);
  }
  const bool parallel = std::all_of(scenarios.begin(), scenarios.end(),
                                    [](const auto& s) { return s.oracle.kind == OracleKind::builtin; });

  RobustnessReport report;
  report.baseline = std::string(baseline);
  report.scenarios = scenarios.size();
  report.rows.resize(scenarios.size() * profiles.size());
  detail::parallel_chunks(scenarios.size(), parallel ? jobs : 1u, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t s = begin; s < end; ++s) {
      PayoffOracle oracle(scenarios[s]);
      for (std::size_t j = 0; j < profiles.size(); ++j) {
        Outcome outcome;
        try {
          outcome = evaluate(scenarios[s], oracle, profiles[j].profile, seed + static_cast<std::int64_t>(s));
        } catch (const Error& e) {
          throw e.with_context("scenario " + std::to_string(s) + ", profile '" + profiles[j].label + "'");
        }
        report.rows[s * profiles.size() + j] = {s, profiles[j].label, outcome.accuracy, outcome.utilities};
      }
    }
  });

  const std::size_t n = scenarios.front().num_players();
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    DominanceSummary summary{profiles[j].label, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      const auto& focal = report.rows[s * profiles.size() + j].utilities;
      const auto& base = report.rows[s * profiles.size() + base_index].utilities;
      for (std::size_t i = 0; i < n; ++i) {
        if (focal[i] >= base[i]) summary.fraction[i] += 1.0;
        summary.mean_margin[i] += focal[i] - base[i];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      summary.fraction[i] /= static_cast<double>(scenarios.size());
      summary.mean_margin[i] /= static_cast<double>(scenarios.size());
    }
    report.summary.push_back(std::move(summary));
  }
  return report;
}

/// `scenario,profile,accuracy,u_0,u_1,...`
inline std::string report_csv(const RobustnessReport& report) {
  std::string out = "scenario,profile,accuracy";
  const std::size_t n = report.rows.empty() ? 0 : report.rows.front().utilities.size();
  for (std::size_t i = 0; i < n; ++i) out += ",u_" + std::to_string(i);
  out += '\n';
  for (const auto& row : report.rows) {
    out += std::to_string(row.scenario) + ',' + csv_field(row.label) + ',' + format_number(row.accuracy);
    for (double u : row.utilities) out += ',' + format_number(u);
    out += '\n';
  }
  return out;
}

inline nlohmann::json report_summary_json(const RobustnessReport& report) {
  nlohmann::json profiles = nlohmann::json::array();
  for (const auto& s : report.summary) {
    profiles.push_back({{"label", s.label}, {"dominance_fraction", s.fraction}, {"mean_margin", s.mean_margin}});
  }
  return {{"baseline", report.baseline}, {"scenarios", report.scenarios}, {"profiles", profiles}};
}

}  // namespace eqforge
