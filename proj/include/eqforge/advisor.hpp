#pragma once

// Advisor-guided exploration: evaluate seed candidates, then repeatedly ask an
// advisor (built-in damped best response, or an external process such as an
// LLM bridge) for the next profile until it stops, utilities settle, or the
// step budget runs out. The final profile is always certified.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eqforge/accuracy.hpp"
#include "eqforge/error.hpp"
#include "eqforge/game.hpp"
#include "eqforge/process.hpp"
#include "eqforge/solver.hpp"

namespace eqforge {

enum class EntrySource { init, advisor };

struct HistoryEntry {
  StrategyProfile profile;
  Outcome outcome;
  EntrySource source = EntrySource::init;
};

struct ExplorationHistory {
  std::vector<HistoryEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

enum class ProposalAction { propose, stop };

struct Proposal {
  ProposalAction action = ProposalAction::stop;
  std::optional<StrategyProfile> profile;
  std::string rationale;
  bool fallback = false;  // external advisor failed; caller substitutes the heuristic
};

struct HeuristicOptions {
  double stop_gain = kDefaultGainTolerance;  // stop once every player's gain is at most this
  double damping = 0.5;
};

/// Profile the advisor reasons from: the latest advisor proposal, or before
/// any proposal, the init candidate with the best honest utility (ties go to
/// the most recent).
inline const HistoryEntry& exploration_base(const ExplorationHistory& history) {
  if (history.empty()) throw Error(ErrorCode::precondition, "exploration history is empty");
  for (auto it = history.entries.rbegin(); it != history.entries.rend(); ++it) {
    if (it->source == EntrySource::advisor) return *it;
  }
  const HistoryEntry* best = &history.entries.front();
  for (const auto& entry : history.entries) {
    if (entry.outcome.utilities[0] >= best->outcome.utilities[0]) best = &entry;
  }
  return *best;
}

/// Damped best response: the player with the largest deviation gain moves
/// from x toward its best response b by max(1, round(damping * |b - x|)).
inline Proposal heuristic_propose(const ExplorationHistory& history, const GameConfig& config, PayoffOracle& oracle,
                                  const Grid& grid, std::int64_t seed, const HeuristicOptions& options = {}) {
  const HistoryEntry& base = exploration_base(history);
  double best_gain = 0.0;
  std::optional<PlayerId> mover;
  Count target = 0;
  for (PlayerId i = 0; i < config.num_players(); ++i) {
    const BestResponse br = best_response(config, oracle, base.profile, i, grid, seed);
    const double gain = br.utility - base.outcome.utilities[i];
    if (!mover || gain > best_gain) {
      best_gain = gain;
      mover = i;
      target = br.count;
    }
  }

  Proposal proposal;
  if (best_gain <= options.stop_gain) {
    proposal.action = ProposalAction::stop;
    proposal.rationale = "max deviation gain " + std::to_string(best_gain) + " within stop threshold";
    return proposal;
  }
  const Count current = base.profile[*mover];
  const Count distance = std::abs(target - current);
  const Count delta = std::max<Count>(1, static_cast<Count>(std::lround(options.damping * distance)));
  StrategyProfile next = base.profile;
  next[*mover] = target > current ? current + std::min(delta, distance) : current - std::min(delta, distance);
  proposal.action = ProposalAction::propose;
  proposal.profile = std::move(next);
  proposal.rationale = "player " + std::to_string(*mover) + " moves toward " + std::to_string(target);
  return proposal;
}

// ---------------------------------------------------------------------------
// External advisor protocol

namespace protocol {

inline nlohmann::ordered_json scenario_summary(const GameConfig& config) {
  nlohmann::ordered_json players = nlohmann::ordered_json::array();
  for (const auto& p : config.players) {
    players.push_back({{"role", std::string(to_string(p.role))}, {"unit_cost", p.unit_cost}, {"cap", p.cap}});
  }
  return {{"label", config.label},
          {"players", players},
          {"oracle", config.oracle.kind == OracleKind::builtin ? "builtin" : config.oracle.command}};
}

inline std::string advise_request(const ExplorationHistory& history, const GameConfig& config) {
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& entry : history.entries) {
    entries.push_back({{"profile", entry.profile.counts},
                       {"accuracy", entry.outcome.accuracy},
                       {"utilities", entry.outcome.utilities}});
  }
  nlohmann::ordered_json request = {{"type", "advise"}, {"scenario", scenario_summary(config)}, {"history", entries}};
  return request.dump();
}

/// std::nullopt when the reply violates the protocol or the game's caps.
inline std::optional<Proposal> parse_proposal(const std::string& line, const GameConfig& config) {
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    return std::nullopt;
  }
  if (!reply.is_object()) return std::nullopt;
  if (auto type = reply.find("type"); type != reply.end() && *type != "proposal") return std::nullopt;
  const auto action = reply.find("action");
  if (action == reply.end() || !action->is_string()) return std::nullopt;

  Proposal proposal;
  if (auto r = reply.find("rationale"); r != reply.end() && r->is_string()) proposal.rationale = r->get<std::string>();
  if (*action == "stop") {
    proposal.action = ProposalAction::stop;
    return proposal;
  }
  if (*action != "propose") return std::nullopt;
  const auto profile = reply.find("profile");
  if (profile == reply.end() || !profile->is_array() || profile->size() != config.num_players()) return std::nullopt;
  StrategyProfile p;
  for (std::size_t i = 0; i < profile->size(); ++i) {
    const auto& v = (*profile)[i];
    if (!v.is_number_integer()) return std::nullopt;
    const auto count = v.get<std::int64_t>();
    if (count < 0 || count > config.players[i].cap) return std::nullopt;
    p.counts.push_back(static_cast<Count>(count));
  }
  proposal.action = ProposalAction::propose;
  proposal.profile = std::move(p);
  return proposal;
}

}  // namespace protocol

/// Long-lived advisor process. Spawn failure or a dead process is fatal;
/// a late or malformed reply yields a fallback proposal.
class ExternalAdvisor {
 public:
  ExternalAdvisor(std::string command, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {
    std::string why;
    child_ = ChildProcess::spawn(command_, &why);
    if (!child_) throw Error(ErrorCode::advisor_spawn, "cannot start advisor '" + command_ + "': " + why);
  }

  Proposal propose(const ExplorationHistory& history, const GameConfig& config) {
    if (stale_) {
      // A previous reply timed out; drop it if it has arrived since.
      std::string late;
      while (child_->read_line(late, std::chrono::milliseconds(0)) == ChildProcess::ReadStatus::line) {
      }
      stale_ = false;
    }
    if (!child_->write_line(protocol::advise_request(history, config))) {
      throw Error(ErrorCode::advisor_spawn, "advisor '" + command_ + "' is not accepting requests");
    }
    std::string line;
    switch (child_->read_line(line, timeout_)) {
      case ChildProcess::ReadStatus::line:
        break;
      case ChildProcess::ReadStatus::timeout:
        stale_ = true;
        return fallback("advisor timed out after " + std::to_string(timeout_.count()) + " ms");
      case ChildProcess::ReadStatus::eof:
        throw Error(ErrorCode::advisor_spawn, "advisor '" + command_ + "' exited");
    }
    if (auto proposal = protocol::parse_proposal(line, config)) return *proposal;
    return fallback("malformed advisor reply: " + line);
  }

 private:
  static Proposal fallback(std::string why) {
    Proposal p;
    p.fallback = true;
    p.rationale = std::move(why);
    return p;
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  std::optional<ChildProcess> child_;
  bool stale_ = false;
};

// ---------------------------------------------------------------------------
// Exploration loop

enum class ExploreStatus { stopped, steady, max_steps, oracle_error };

inline std::string_view to_string(ExploreStatus status) {
  switch (status) {
    case ExploreStatus::stopped: return "stopped";
    case ExploreStatus::steady: return "steady";
    case ExploreStatus::max_steps: return "max_steps";
    case ExploreStatus::oracle_error: return "oracle_error";
  }
  return "unknown";
}

struct ExploreOptions {
  std::size_t max_steps = 200;  // evaluations, init candidates included
  double eps = 1e-4;            // steadiness threshold on per-player |du|
  std::int64_t seed = 0;
  Grid grid{1};
  HeuristicOptions heuristic{};
  ExternalAdvisor* external = nullptr;  // null: heuristic advisor
};

struct ExploreResult {
  ExplorationHistory trace;
  StrategyProfile final_profile;
  std::optional<NashCertificate> certificate;  // absent only on oracle_error
  ExploreStatus status = ExploreStatus::max_steps;
  std::size_t fallbacks = 0;
  std::string error;
};

namespace detail {

inline double max_utility_change(const Outcome& a, const Outcome& b) {
  double change = 0.0;
  for (std::size_t i = 0; i < a.utilities.size(); ++i) {
    change = std::max(change, std::abs(a.utilities[i] - b.utilities[i]));
  }
  return change;
}

}  // namespace detail

/// Steps 1..k evaluate the init candidates; afterwards each step is one
/// advisor proposal. Steadiness means the last two proposals each moved every
/// utility by less than `eps`. The final profile is certified on the step-1
/// grid regardless of why the loop ended.
inline ExploreResult explore(const GameConfig& config, PayoffOracle& oracle, const std::vector<StrategyProfile>& init,
                             const ExploreOptions& options) {
  if (init.empty()) throw Error(ErrorCode::precondition, "explore needs at least one init profile");
  for (const auto& p : init) check_profile(config, p);

  ExploreResult result;
  auto& history = result.trace;
  try {
    for (const auto& p : init) history.entries.push_back({p, evaluate(config, oracle, p, options.seed), EntrySource::init});

    std::size_t quiet = 0;
    result.status = ExploreStatus::max_steps;
    while (history.size() < options.max_steps) {
      Proposal proposal;
      if (options.external) {
        proposal = options.external->propose(history, config);
        if (proposal.fallback) ++result.fallbacks;
      }
      if (!options.external || proposal.fallback) {
        proposal = heuristic_propose(history, config, oracle, options.grid, options.seed, options.heuristic);
      }
      if (proposal.action == ProposalAction::stop) {
        result.status = ExploreStatus::stopped;
        break;
      }
      const Outcome& previous = history.entries.back().outcome;
      Outcome outcome = evaluate(config, oracle, *proposal.profile, options.seed);
      quiet = detail::max_utility_change(previous, outcome) < options.eps ? quiet + 1 : 0;
      history.entries.push_back({*proposal.profile, std::move(outcome), EntrySource::advisor});
      if (quiet >= 2) {
        result.status = ExploreStatus::steady;
        break;
      }
    }
    result.final_profile = exploration_base(history).profile;
    result.certificate = nash_certificate(config, oracle, result.final_profile, Grid{1}, options.seed);
  } catch (const Error& e) {
    if (!is_oracle_error(e.code())) throw;
    result.status = ExploreStatus::oracle_error;
    result.error = e.what();
    if (!history.empty()) result.final_profile = exploration_base(history).profile;
  }
  return result;
}

}  // namespace eqforge
