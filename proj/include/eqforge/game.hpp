#pragma once

// Domain types of the data-contribution game: one honest contributor and one
// or more malicious contributors choose integer sample counts; the payoff
// couples them through a single model-accuracy value.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eqforge/error.hpp"

namespace eqforge {

using Count = int;
using PlayerId = std::size_t;

inline constexpr double kDefaultGainTolerance = 1e-9;
inline constexpr std::uint64_t kDefaultEnumerationBudget = 10'000'000;

enum class Role { honest, malicious };

inline std::string_view to_string(Role role) {
  return role == Role::honest ? "honest" : "malicious";
}

struct PlayerSpec {
  PlayerId id = 0;
  Role role = Role::malicious;
  double unit_cost = 0.0;
  Count cap = 0;
  double poison_weight = 0.0;
};

/// Parameters of the closed-form accuracy surface.
struct BuiltinAccuracyParams {
  double a_max = 0.98;
  double kappa = 25.0;
  double lambda = 0.6;
  double floor = 0.5;
};

enum class OracleKind { builtin, external };

struct OracleBinding {
  OracleKind kind = OracleKind::builtin;
  BuiltinAccuracyParams params{};
  std::string command;  // external only
  int timeout_ms = 10'000;
  bool cache = true;
};

struct StrategyProfile {
  std::vector<Count> counts;

  std::size_t size() const { return counts.size(); }
  Count operator[](std::size_t i) const { return counts[i]; }
  Count& operator[](std::size_t i) { return counts[i]; }

  auto operator<=>(const StrategyProfile&) const = default;
  bool operator==(const StrategyProfile&) const = default;
};

struct GameConfig {
  std::vector<PlayerSpec> players;  // honest player at index 0
  OracleBinding oracle{};
  Count grid_step = 1;
  std::string label;
  double gain_tolerance = kDefaultGainTolerance;
  std::uint64_t enumeration_budget = kDefaultEnumerationBudget;

  std::size_t num_players() const { return players.size(); }
};

struct Outcome {
  double accuracy = 0.0;
  std::vector<double> costs;
  std::vector<double> utilities;
  StrategyProfile profile;

  bool operator==(const Outcome&) const = default;
};

struct NashCertificate {
  StrategyProfile profile;
  std::vector<double> gains;
  Count grid_step = 1;
  bool is_equilibrium = false;

  double max_gain() const {
    return gains.empty() ? 0.0 : *std::max_element(gains.begin(), gains.end());
  }
};

// ---------------------------------------------------------------------------
// Profiles

inline std::string format_profile(const StrategyProfile& profile, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(profile[i]);
  }
  return out;
}

/// Parses "150,75,75".
inline StrategyProfile parse_profile(std::string_view text) {
  StrategyProfile profile;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    auto token = text.substr(pos, end - pos);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    Count value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size() || value < 0) {
      throw Error(ErrorCode::precondition,
                  "invalid profile '" + std::string(text) + "': expected non-negative integers separated by ','");
    }
    profile.counts.push_back(value);
    pos = end + 1;
  }
  return profile;
}

/// Throws precondition if the profile does not fit the game.
inline void check_profile(const GameConfig& config, const StrategyProfile& profile) {
  if (profile.size() != config.num_players()) {
    throw Error(ErrorCode::precondition,
                "profile (" + format_profile(profile) + ") has " + std::to_string(profile.size()) +
                    " counts, game has " + std::to_string(config.num_players()) + " players");
  }
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (profile[i] < 0 || profile[i] > config.players[i].cap) {
      throw Error(ErrorCode::precondition,
                  "profile (" + format_profile(profile) + "): count " + std::to_string(profile[i]) +
                      " of player " + std::to_string(i) + " outside [0, " +
                      std::to_string(config.players[i].cap) + "]");
    }
  }
}

// ---------------------------------------------------------------------------
// Payoffs

/// Honest: accuracy minus collection cost. Malicious: negated accuracy minus
/// generation cost.
inline std::vector<double> utilities(const GameConfig& config, const StrategyProfile& profile,
                                     double accuracy) {
  check_profile(config, profile);
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw Error(ErrorCode::precondition, "accuracy outside [0, 1]");
  }
  std::vector<double> out(config.num_players());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double cost = config.players[i].unit_cost * profile[i];
    out[i] = config.players[i].role == Role::honest ? accuracy - cost : -accuracy - cost;
  }
  return out;
}

inline Outcome make_outcome(const GameConfig& config, const StrategyProfile& profile, double accuracy) {
  Outcome outcome;
  outcome.accuracy = accuracy;
  outcome.utilities = utilities(config, profile, accuracy);
  outcome.costs.resize(config.num_players());
  for (std::size_t i = 0; i < outcome.costs.size(); ++i) {
    outcome.costs[i] = config.players[i].unit_cost * profile[i];
  }
  outcome.profile = profile;
  return outcome;
}

// ---------------------------------------------------------------------------
// Config document

namespace detail {

class Diagnostics {
 public:
  void add(const std::string& where, const std::string& what) {
    lines_.push_back(where + ": " + what);
  }
  bool empty() const { return lines_.empty(); }
  [[noreturn]] void raise() const {
    std::string message = "invalid game config";
    for (const auto& line : lines_) message += "\n  " + line;
    throw Error(ErrorCode::invalid_config, message);
  }

 private:
  std::vector<std::string> lines_;
};

inline bool read_number(const nlohmann::json& obj, const char* key, const std::string& where,
                        Diagnostics& diag, double& out, bool required) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) diag.add(where + "." + key, "missing field");
    return false;
  }
  if (!it->is_number()) {
    diag.add(where + "." + key, "expected a number");
    return false;
  }
  out = it->get<double>();
  if (!std::isfinite(out)) {
    diag.add(where + "." + key, "must be finite");
    return false;
  }
  return true;
}

inline bool read_integer(const nlohmann::json& obj, const char* key, const std::string& where,
                         Diagnostics& diag, std::int64_t& out, bool required) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) diag.add(where + "." + key, "missing field");
    return false;
  }
  if (!it->is_number_integer()) {
    diag.add(where + "." + key, "expected an integer");
    return false;
  }
  out = it->get<std::int64_t>();
  return true;
}

inline OracleBinding parse_oracle(const nlohmann::json& raw, Diagnostics& diag) {
  OracleBinding binding;
  if (raw.is_null()) return binding;
  if (raw.is_string()) {
    if (raw.get<std::string>() != "builtin") diag.add("oracle", "string form must be \"builtin\"");
    return binding;
  }
  if (!raw.is_object()) {
    diag.add("oracle", "expected an object or \"builtin\"");
    return binding;
  }
  const std::string kind = raw.value("kind", std::string("builtin"));
  if (kind == "builtin") {
    auto& p = binding.params;
    read_number(raw, "a_max", "oracle", diag, p.a_max, false);
    read_number(raw, "kappa", "oracle", diag, p.kappa, false);
    read_number(raw, "lambda", "oracle", diag, p.lambda, false);
    read_number(raw, "floor", "oracle", diag, p.floor, false);
    if (!(p.a_max > 0.0 && p.a_max <= 1.0)) diag.add("oracle.a_max", "must lie in (0, 1]");
    if (!(p.kappa > 0.0)) diag.add("oracle.kappa", "must be > 0");
    if (!(p.lambda >= 0.0 && p.lambda <= 1.0)) diag.add("oracle.lambda", "must lie in [0, 1]");
    if (!(p.floor >= 0.0 && p.floor < 1.0)) diag.add("oracle.floor", "must lie in [0, 1)");
    if (!(p.floor < p.a_max)) diag.add("oracle.floor", "must be < a_max");
    if (raw.contains("command")) diag.add("oracle.command", "only valid for kind \"external\"");
  } else if (kind == "external") {
    binding.kind = OracleKind::external;
    auto it = raw.find("command");
    if (it == raw.end() || !it->is_string() || it->get<std::string>().empty()) {
      diag.add("oracle.command", "external oracle needs a non-empty command string");
    } else {
      binding.command = it->get<std::string>();
    }
    for (const char* key : {"a_max", "kappa", "lambda", "floor"}) {
      if (raw.contains(key)) diag.add(std::string("oracle.") + key, "only valid for kind \"builtin\"");
    }
  } else {
    diag.add("oracle.kind", "expected \"builtin\" or \"external\", got \"" + kind + "\"");
  }
  std::int64_t timeout = binding.timeout_ms;
  if (read_integer(raw, "timeout_ms", "oracle", diag, timeout, false) && timeout <= 0) {
    diag.add("oracle.timeout_ms", "must be > 0");
  }
  binding.timeout_ms = static_cast<int>(std::clamp<std::int64_t>(timeout, 1, 3'600'000));
  if (auto it = raw.find("cache"); it != raw.end()) {
    if (!it->is_boolean()) {
      diag.add("oracle.cache", "expected a boolean");
    } else {
      binding.cache = it->get<bool>();
    }
  }
  return binding;
}

}  // namespace detail

/// Validates a parsed config document. All problems are reported at once,
/// each prefixed with its JSON path.
inline GameConfig validate_config(const nlohmann::json& raw) {
  detail::Diagnostics diag;
  if (!raw.is_object()) {
    diag.add("$", "expected a JSON object");
    diag.raise();
  }

  GameConfig config;
  std::vector<PlayerSpec> honest;
  std::vector<PlayerSpec> malicious;

  auto players_it = raw.find("players");
  if (players_it == raw.end()) {
    diag.add("players", "missing field");
  } else if (!players_it->is_array()) {
    diag.add("players", "expected an array");
  } else if (players_it->empty()) {
    diag.add("players", "at least 2 players required, got 0");
  } else {
    for (std::size_t i = 0; i < players_it->size(); ++i) {
      const auto& p = (*players_it)[i];
      const std::string where = "players[" + std::to_string(i) + "]";
      if (!p.is_object()) {
        diag.add(where, "expected an object");
        continue;
      }
      PlayerSpec spec;
      auto role = p.find("role");
      if (role == p.end()) {
        diag.add(where + ".role", "missing field");
        continue;
      }
      if (*role == "honest") {
        spec.role = Role::honest;
      } else if (*role == "malicious") {
        spec.role = Role::malicious;
      } else {
        diag.add(where + ".role", "expected \"honest\" or \"malicious\"");
        continue;
      }
      if (detail::read_number(p, "unit_cost", where, diag, spec.unit_cost, true) && spec.unit_cost < 0.0) {
        diag.add(where + ".unit_cost", "must be >= 0");
      }
      std::int64_t cap = 0;
      if (detail::read_integer(p, "cap", where, diag, cap, true)) {
        if (cap < 0) diag.add(where + ".cap", "must be >= 0");
        if (cap > 1'000'000) diag.add(where + ".cap", "must be <= 1000000");
        spec.cap = static_cast<Count>(std::clamp<std::int64_t>(cap, 0, 1'000'000));
      }
      spec.poison_weight = spec.role == Role::honest ? 0.0 : 1.0;
      if (detail::read_number(p, "poison_weight", where, diag, spec.poison_weight, false)) {
        if (spec.poison_weight < 0.0) diag.add(where + ".poison_weight", "must be >= 0");
        if (spec.role == Role::honest && spec.poison_weight != 0.0) {
          diag.add(where + ".poison_weight", "honest player must have poison_weight 0");
        }
      }
      (spec.role == Role::honest ? honest : malicious).push_back(spec);
    }
    if (honest.size() != 1) {
      diag.add("players", "exactly one honest player required, got " + std::to_string(honest.size()));
    }
    if (honest.size() + malicious.size() < 2 && honest.size() == 1) {
      diag.add("players", "at least 2 players required");
    }
  }

  config.oracle = detail::parse_oracle(raw.contains("oracle") ? raw.at("oracle") : nlohmann::json(), diag);

  std::int64_t step = 1;
  detail::read_integer(raw, "grid_step", "grid_step", diag, step, false);
  if (step < 1) diag.add("grid_step", "must be >= 1");

  if (auto it = raw.find("label"); it != raw.end()) {
    if (it->is_string()) {
      config.label = it->get<std::string>();
    } else {
      diag.add("label", "expected a string");
    }
  }
  if (detail::read_number(raw, "gain_tolerance", "gain_tolerance", diag, config.gain_tolerance, false) &&
      config.gain_tolerance < 0.0) {
    diag.add("gain_tolerance", "must be >= 0");
  }
  std::int64_t budget = static_cast<std::int64_t>(kDefaultEnumerationBudget);
  if (detail::read_integer(raw, "enumeration_budget", "enumeration_budget", diag, budget, false) && budget < 1) {
    diag.add("enumeration_budget", "must be >= 1");
  }
  config.enumeration_budget = static_cast<std::uint64_t>(std::max<std::int64_t>(budget, 1));

  if (!diag.empty()) diag.raise();

  config.players.push_back(honest.front());
  config.players.insert(config.players.end(), malicious.begin(), malicious.end());
  for (std::size_t i = 0; i < config.players.size(); ++i) config.players[i].id = i;

  Count min_cap = config.players.front().cap;
  for (const auto& p : config.players) min_cap = std::min(min_cap, std::max(p.cap, 1));
  min_cap = std::max(min_cap, 1);
  if (step > min_cap) {
    diag.add("grid_step", "must be <= min over players of max(cap, 1) = " + std::to_string(min_cap));
    diag.raise();
  }
  config.grid_step = static_cast<Count>(step);
  return config;
}

inline GameConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open config '" + path + "'");
  nlohmann::json raw;
  try {
    raw = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_config, path + ": " + e.what());
  }
  try {
    return validate_config(raw);
  } catch (const Error& e) {
    throw e.with_context(path);
  }
}

/// Inverse of validate_config for a normalized config.
inline nlohmann::json to_json(const GameConfig& config) {
  nlohmann::json players = nlohmann::json::array();
  for (const auto& p : config.players) {
    players.push_back({{"role", std::string(to_string(p.role))},
                       {"unit_cost", p.unit_cost},
                       {"cap", p.cap},
                       {"poison_weight", p.poison_weight}});
  }
  nlohmann::json oracle;
  if (config.oracle.kind == OracleKind::builtin) {
    oracle = {{"kind", "builtin"},
              {"a_max", config.oracle.params.a_max},
              {"kappa", config.oracle.params.kappa},
              {"lambda", config.oracle.params.lambda},
              {"floor", config.oracle.params.floor}};
  } else {
    oracle = {{"kind", "external"}, {"command", config.oracle.command}};
  }
  oracle["timeout_ms"] = config.oracle.timeout_ms;
  oracle["cache"] = config.oracle.cache;
  return {{"players", players},
          {"oracle", oracle},
          {"grid_step", config.grid_step},
          {"label", config.label},
          {"gain_tolerance", config.gain_tolerance},
          {"enumeration_budget", config.enumeration_budget}};
}

}  // namespace eqforge
