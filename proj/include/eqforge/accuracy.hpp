#pragma once

// Payoff oracles: the closed-form accuracy surface and a client for external
// accuracy services speaking newline-delimited JSON over stdio.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eqforge/error.hpp"
#include "eqforge/game.hpp"
#include "eqforge/process.hpp"

namespace eqforge {

/// Learning curve times poison penalty, clamped to [floor, 1]:
///   n = sum of counts, rho = sum(beta_i * m_i) / n,
///   acc = a_max * n / (n + kappa) * (1 - lambda * min(rho, 1)).
/// An empty dataset scores `floor`.
inline double builtin_accuracy(const BuiltinAccuracyParams& params, std::span<const double> poison_weights,
                               const StrategyProfile& profile) {
  double total = 0.0;
  double poisoned = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    total += profile[i];
    poisoned += poison_weights[i] * profile[i];
  }
  if (total == 0.0) return params.floor;
  const double rho = poisoned / total;
  const double raw = params.a_max * (total / (total + params.kappa)) * (1.0 - params.lambda * std::min(rho, 1.0));
  return std::clamp(raw, params.floor, 1.0);
}

inline std::vector<double> poison_weights(const GameConfig& config) {
  std::vector<double> weights;
  weights.reserve(config.num_players());
  for (const auto& p : config.players) weights.push_back(p.poison_weight);
  return weights;
}

inline double builtin_accuracy(const GameConfig& config, const StrategyProfile& profile) {
  check_profile(config, profile);
  const auto weights = poison_weights(config);
  return builtin_accuracy(config.oracle.params, weights, profile);
}

// ---------------------------------------------------------------------------
// Oracle wire protocol

namespace protocol {

inline std::string accuracy_request(const StrategyProfile& profile, std::int64_t seed) {
  nlohmann::ordered_json m = nlohmann::ordered_json::array();
  for (std::size_t i = 1; i < profile.size(); ++i) m.push_back(profile[i]);
  nlohmann::ordered_json request = {{"type", "accuracy"}, {"h", profile[0]}, {"m", m}, {"seed", seed}};
  return request.dump();
}

/// Decodes one response line. Non-finite or out-of-range values are errors,
/// never clamped.
inline double parse_accuracy_response(const std::string& line) {
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::oracle_malformed, "response is not JSON: " + line);
  }
  if (!reply.is_object()) throw Error(ErrorCode::oracle_malformed, "response is not an object: " + line);
  const auto type = reply.find("type");
  if (type != reply.end() && *type == "error") {
    std::string message = "unspecified";
    if (auto it = reply.find("message"); it != reply.end() && it->is_string()) message = it->get<std::string>();
    throw Error(ErrorCode::oracle_remote, "oracle reported: " + message);
  }
  const auto value = reply.find("value");
  if (value == reply.end() || !value->is_number()) {
    throw Error(ErrorCode::oracle_malformed, "response lacks numeric \"value\": " + line);
  }
  if (type != reply.end() && *type != "accuracy") {
    throw Error(ErrorCode::oracle_malformed, "unexpected response type: " + line);
  }
  const double v = value->get<double>();
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw Error(ErrorCode::oracle_out_of_range, "accuracy " + value->dump() + " outside [0, 1]");
  }
  return v;
}

}  // namespace protocol

/// One external oracle process. Requests are serialized; a timed-out or
/// broken exchange kills the process so alternation is never violated, and
/// the next query respawns it.
class ExternalOracleClient {
 public:
  ExternalOracleClient(std::string command, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {}

  double query(const StrategyProfile& profile, std::int64_t seed) {
    std::lock_guard lock(mutex_);
    if (!child_ || !child_->running()) {
      std::string why;
      child_ = ChildProcess::spawn(command_, &why);
      if (!child_) throw Error(ErrorCode::oracle_spawn, "cannot start '" + command_ + "': " + why);
    }
    ++exchanges_;
    if (!child_->write_line(protocol::accuracy_request(profile, seed))) {
      child_.reset();
      throw Error(ErrorCode::oracle_unavailable, "oracle '" + command_ + "' is not accepting requests");
    }
    std::string line;
    switch (child_->read_line(line, timeout_)) {
      case ChildProcess::ReadStatus::line:
        break;
      case ChildProcess::ReadStatus::timeout:
        child_.reset();
        throw Error(ErrorCode::oracle_timeout,
                    "no reply from '" + command_ + "' within " + std::to_string(timeout_.count()) + " ms");
      case ChildProcess::ReadStatus::eof:
        child_.reset();
        throw Error(ErrorCode::oracle_unavailable, "oracle '" + command_ + "' exited without replying");
    }
    return protocol::parse_accuracy_response(line);
  }

  std::uint64_t exchanges() const {
    std::lock_guard lock(mutex_);
    return exchanges_;
  }

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex mutex_;
  std::optional<ChildProcess> child_;
  std::uint64_t exchanges_ = 0;
};

/// The accuracy oracle bound to one game. Cheap to construct for builtin
/// bindings; external bindings own a child process.
class PayoffOracle {
 public:
  explicit PayoffOracle(const GameConfig& config)
      : binding_(config.oracle), weights_(poison_weights(config)), players_(config.num_players()) {
    if (binding_.kind == OracleKind::external) {
      external_ = std::make_unique<ExternalOracleClient>(binding_.command,
                                                         std::chrono::milliseconds(binding_.timeout_ms));
    }
  }

  /// Builtin queries are pure; external queries are serialized internally but
  /// callers should not fan out over them.
  bool concurrency_safe() const { return binding_.kind == OracleKind::builtin; }

  double query(const StrategyProfile& profile, std::int64_t seed) {
    if (profile.size() != players_) {
      throw Error(ErrorCode::precondition, "profile length does not match oracle player count");
    }
    if (binding_.kind == OracleKind::builtin) return builtin_accuracy(binding_.params, weights_, profile);
    if (!binding_.cache) return external_->query(profile, seed);

    CacheKey key{profile.counts, seed};
    {
      std::shared_lock read(cache_mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    std::unique_lock write(cache_mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const double value = external_->query(profile, seed);
    cache_.emplace(std::move(key), value);
    return value;
  }

  /// Protocol round trips performed so far (0 for builtin).
  std::uint64_t exchanges() const { return external_ ? external_->exchanges() : 0; }

  const OracleBinding& binding() const { return binding_; }

 private:
  using CacheKey = std::pair<std::vector<Count>, std::int64_t>;

  OracleBinding binding_;
  std::vector<double> weights_;
  std::size_t players_;
  std::unique_ptr<ExternalOracleClient> external_;
  std::shared_mutex cache_mutex_;
  std::map<CacheKey, double> cache_;
};

/// Queries the oracle once and derives costs and utilities.
inline Outcome evaluate(const GameConfig& config, PayoffOracle& oracle, const StrategyProfile& profile,
                        std::int64_t seed) {
  check_profile(config, profile);
  return make_outcome(config, profile, oracle.query(profile, seed));
}

inline Outcome evaluate(const GameConfig& config, const StrategyProfile& profile, std::int64_t seed) {
  PayoffOracle oracle(config);
  return evaluate(config, oracle, profile, seed);
}

inline double query_accuracy(const GameConfig& config, PayoffOracle& oracle, const StrategyProfile& profile,
                             std::int64_t seed) {
  check_profile(config, profile);
  return oracle.query(profile, seed);
}

// ---------------------------------------------------------------------------
// Monotonicity sweep

struct MonotonicityRow {
  Count count = 0;
  double mean_accuracy = 0.0;
};

struct MonotonicityReport {
  PlayerId player = 0;
  std::vector<MonotonicityRow> rows;
  double tolerance = 0.01;
  bool non_increasing = true;
};

inline constexpr double kDefaultMonotonicityTolerance = 0.01;

/// Accuracy of `fixed` with `player`'s count swept over `grid` (ascending),
/// averaged over `seeds`. The verdict allows rises of at most `tolerance`
/// between consecutive grid points.
inline MonotonicityReport monotonicity_report(const GameConfig& config, PayoffOracle& oracle, PlayerId player,
                                              const StrategyProfile& fixed, std::span<const Count> grid,
                                              std::span<const std::int64_t> seeds,
                                              double tolerance = kDefaultMonotonicityTolerance) {
  if (player >= config.num_players() || config.players[player].role != Role::malicious) {
    throw Error(ErrorCode::precondition, "sweep player " + std::to_string(player) + " is not a malicious player");
  }
  if (grid.empty()) throw Error(ErrorCode::precondition, "sweep grid is empty");
  if (seeds.empty()) throw Error(ErrorCode::precondition, "sweep needs at least one seed");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] < 0 || grid[k] > config.players[player].cap) {
      throw Error(ErrorCode::precondition, "sweep count " + std::to_string(grid[k]) + " outside cap");
    }
    if (k && grid[k] <= grid[k - 1]) throw Error(ErrorCode::precondition, "sweep grid must be strictly ascending");
  }

  MonotonicityReport report;
  report.player = player;
  report.tolerance = tolerance;
  for (const Count count : grid) {
    StrategyProfile profile = fixed;
    profile[player] = count;
    check_profile(config, profile);
    double sum = 0.0;
    try {
      for (const auto seed : seeds) sum += oracle.query(profile, seed);
    } catch (const Error& e) {
      throw e.with_context("sweep point count=" + std::to_string(count));
    }
    report.rows.push_back({count, sum / static_cast<double>(seeds.size())});
  }
  for (std::size_t k = 1; k < report.rows.size(); ++k) {
    if (report.rows[k].mean_accuracy > report.rows[k - 1].mean_accuracy + tolerance) report.non_increasing = false;
  }
  return report;
}

}  // namespace eqforge
