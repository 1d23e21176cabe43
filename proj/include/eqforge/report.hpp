#pragma once

// Output layer: CSV and JSON renderings of certificates, traces and sweeps.
// Everything here is a pure function of its input so reruns are byte-stable.

#include <string>

#include <json.hpp>

#include "eqforge/accuracy.hpp"
#include "eqforge/advisor.hpp"
#include "eqforge/format.hpp"
#include "eqforge/game.hpp"
#include "eqforge/solver.hpp"

namespace eqforge {

inline nlohmann::json to_json(const NashCertificate& cert) {
  return {{"profile", cert.profile.counts},
          {"gains", cert.gains},
          {"max_gain", cert.max_gain()},
          {"grid_step", cert.grid_step},
          {"is_equilibrium", cert.is_equilibrium}};
}

inline nlohmann::json to_json(const Outcome& outcome) {
  return {{"profile", outcome.profile.counts},
          {"accuracy", outcome.accuracy},
          {"costs", outcome.costs},
          {"utilities", outcome.utilities}};
}

namespace detail {

inline std::string profile_header(std::size_t players) {
  std::string out = "h";
  for (std::size_t i = 1; i < players; ++i) out += ",m" + std::to_string(i);
  return out;
}

inline std::string outcome_columns(const Outcome& outcome) {
  std::string out = format_profile(outcome.profile) + ',' + format_number(outcome.accuracy);
  for (double u : outcome.utilities) out += ',' + format_number(u);
  return out;
}

inline std::string utility_header(std::size_t players) {
  std::string out;
  for (std::size_t i = 0; i < players; ++i) out += ",u_" + std::to_string(i);
  return out;
}

}  // namespace detail

/// `step,source,h,m1,...,accuracy,u_0,...` with steps numbered from 1.
inline std::string exploration_csv(const ExplorationHistory& history, std::size_t players) {
  std::string out = "step,source," + detail::profile_header(players) + ",accuracy" + detail::utility_header(players) + '\n';
  for (std::size_t k = 0; k < history.entries.size(); ++k) {
    const auto& e = history.entries[k];
    out += std::to_string(k + 1) + ',' + (e.source == EntrySource::init ? "init" : "advisor") + ',' +
           detail::outcome_columns(e.outcome) + '\n';
  }
  return out;
}

/// `step,mover,h,m1,...,accuracy,u_0,...`; mover is empty for the start row.
inline std::string dynamics_csv(const Trace& trace, std::size_t players) {
  std::string out = "step,mover," + detail::profile_header(players) + ",accuracy" + detail::utility_header(players) + '\n';
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& s = trace.steps[k];
    out += std::to_string(k) + ',' + (s.mover ? std::to_string(*s.mover) : std::string()) + ',' +
           detail::outcome_columns(s.outcome) + '\n';
  }
  return out;
}

inline std::string sweep_csv(const MonotonicityReport& report) {
  std::string out = "count,accuracy\n";
  for (const auto& row : report.rows) out += std::to_string(row.count) + ',' + format_number(row.mean_accuracy) + '\n';
  return out;
}

inline nlohmann::json to_json(const MonotonicityReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) rows.push_back({{"count", row.count}, {"accuracy", row.mean_accuracy}});
  return {{"player", report.player},
          {"rows", rows},
          {"tolerance", report.tolerance},
          {"non_increasing", report.non_increasing}};
}

}  // namespace eqforge
