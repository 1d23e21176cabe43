#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include <unistd.h>

#include <json.hpp>

#include "eqforge/game.hpp"

namespace fixtures {

inline nlohmann::json game_json(int cap = 300, int grid_step = 1) {
  return {{"label", "test"},
          {"players",
           {{{"role", "honest"}, {"unit_cost", 0.0005}, {"cap", cap}},
            {{"role", "malicious"}, {"unit_cost", 0.0007}, {"cap", cap}, {"poison_weight", 1.0}},
            {{"role", "malicious"}, {"unit_cost", 0.0008}, {"cap", cap}, {"poison_weight", 1.0}}}},
          {"oracle", {{"kind", "builtin"}}},
          {"grid_step", grid_step}};
}

/// Costs (0.0005, 0.0007, 0.0008), caps 300, builtin oracle defaults.
inline eqforge::GameConfig default_game() { return eqforge::validate_config(game_json()); }

/// Same game with caps 60 and grid step 10.
inline eqforge::GameConfig small_game() { return eqforge::validate_config(game_json(60, 10)); }

inline eqforge::GameConfig external_game(const std::string& command, int timeout_ms = 2000, bool cache = true) {
  auto raw = game_json();
  raw["oracle"] = {{"kind", "external"}, {"command", command}, {"timeout_ms", timeout_ms}, {"cache", cache}};
  return eqforge::validate_config(raw);
}

inline eqforge::StrategyProfile P(std::initializer_list<int> counts) { return eqforge::StrategyProfile{counts}; }

inline std::string stub() { return EQFORGE_STUB_PATH; }

inline std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline std::string stub_replying(const std::string& line) { return stub() + " --reply " + quote(line); }

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("eqforge_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline eqforge::StrategyProfile random_profile(std::mt19937& rng, const eqforge::GameConfig& config) {
  eqforge::StrategyProfile p;
  for (const auto& player : config.players) {
    p.counts.push_back(std::uniform_int_distribution<int>(0, player.cap)(rng));
  }
  return p;
}

}  // namespace fixtures
