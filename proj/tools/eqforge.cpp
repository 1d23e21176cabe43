// eqforge command-line front end.
//
//   eqforge solve    --config game.json --method enumerate --grid-step 10 --out eq.json
//   eqforge explore  --config game.json --init 150,75,75 --init 180,60,60 --trace trace.csv
//   eqforge evaluate --config game.json --profile eq=300,163,0 --baseline 150,75,75 --out report.csv
//   eqforge sweep    --config game.json --player 1 --range 0:300:30 --out sweep.csv
//   eqforge accuracy --config game.json --profile 150,75,75
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eqforge/eqforge.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace eqforge::cli {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::int64_t seed = 0;
  std::optional<int> grid_step;
  std::string method = "enumerate";
  std::string advisor = "heuristic";
  int advisor_timeout_ms = 30'000;
  std::vector<std::string> init;
  std::size_t max_steps = 200;
  double tolerance = 1e-4;
  int scenarios = 100;
  double delta = 0.05;
  std::string targets;
  std::string baseline;
  std::vector<std::string> profiles;
  std::string out;
  std::string trace;
  std::string manifest;
  unsigned jobs = default_jobs();
  std::optional<std::uint64_t> budget;
  std::size_t player = 1;
  std::string range;
  std::string fixed;
  int seeds = 1;
  double mono_tolerance = kDefaultMonotonicityTolerance;
};

/// Files are staged in memory and only written once the command succeeded,
/// so a domain error never leaves partial output behind.
class Outputs {
 public:
  void add(const std::string& path, std::string content) {
    if (!path.empty()) files_.emplace_back(path, std::move(content));
  }

  std::vector<std::string> paths() const {
    std::vector<std::string> out;
    for (const auto& f : files_) out.push_back(f.first);
    return out;
  }

  bool empty() const { return files_.empty(); }

  void commit() const {
    std::vector<std::string> staged;
    try {
      for (const auto& [path, content] : files_) {
        const std::string tmp = path + ".tmp";
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
        staged.push_back(tmp);
        out << content;
        out.close();
        if (!out) throw Error(ErrorCode::io, "write failed for '" + path + "'");
      }
    } catch (...) {
      for (const auto& tmp : staged) std::remove(tmp.c_str());
      throw;
    }
    for (const auto& [path, content] : files_) fs::rename(path + ".tmp", path);
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string sidecar_path(const std::string& path, const std::string& extension) {
  fs::path p(path);
  p.replace_extension(extension);
  if (p.string() == path) p += extension;
  return p.string();
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

GameConfig load(const Options& opt) {
  GameConfig config = load_config(opt.config_path);
  if (const char* env = std::getenv("EQFORGE_ORACLE_TIMEOUT_MS")) {
    char* end = nullptr;
    const long ms = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || ms <= 0) {
      throw Error(ErrorCode::invalid_config, "EQFORGE_ORACLE_TIMEOUT_MS must be a positive integer");
    }
    config.oracle.timeout_ms = static_cast<int>(ms);
  }
  if (opt.budget) config.enumeration_budget = *opt.budget;
  return config;
}

Grid grid_for(const Options& opt, const GameConfig& config) {
  return Grid(opt.grid_step.value_or(config.grid_step));
}

std::vector<StrategyProfile> parse_inits(const Options& opt) {
  std::vector<StrategyProfile> out;
  for (const auto& text : opt.init) out.push_back(parse_profile(text));
  return out;
}

std::optional<ExternalAdvisor> make_advisor(const Options& opt) {
  if (opt.advisor == "heuristic") return std::nullopt;
  constexpr std::string_view prefix = "external:";
  if (opt.advisor.rfind(prefix, 0) == 0 && opt.advisor.size() > prefix.size()) {
    return std::optional<ExternalAdvisor>(std::in_place, opt.advisor.substr(prefix.size()),
                                          std::chrono::milliseconds(opt.advisor_timeout_ms));
  }
  throw UsageError("--advisor must be 'heuristic' or 'external:CMD'");
}

json explore_json(const ExploreResult& result, const GameConfig& config) {
  json doc = {{"status", std::string(to_string(result.status))},
              {"steps", result.trace.size()},
              {"fallbacks", result.fallbacks},
              {"final", result.final_profile.counts},
              {"label", config.label}};
  for (const auto& e : result.trace.entries) {
    if (e.profile == result.final_profile) doc["final_outcome"] = to_json(e.outcome);
  }
  if (result.certificate) doc["certificate"] = to_json(*result.certificate);
  if (!result.error.empty()) doc["error"] = result.error;
  return doc;
}

void report_explore(const ExploreResult& result, std::ostream& out) {
  out << "status: " << to_string(result.status) << " after " << result.trace.size() << " steps\n";
  out << "final: (" << format_profile(result.final_profile) << ")\n";
  if (result.certificate) {
    out << "certificate: max gain " << format_number(result.certificate->max_gain()) << " on step-1 grid, "
        << (result.certificate->is_equilibrium ? "equilibrium" : "NOT an equilibrium") << "\n";
  }
}

int run_explore(const Options& opt, Outputs& outputs, json& resolved, std::ostream& out) {
  const GameConfig config = load(opt);
  PayoffOracle oracle(config);
  const auto init = parse_inits(opt);
  if (init.empty()) throw UsageError("explore needs at least one --init profile");
  auto advisor = make_advisor(opt);

  ExploreOptions options;
  options.max_steps = opt.max_steps;
  options.eps = opt.tolerance;
  options.seed = opt.seed;
  options.grid = grid_for(opt, config);
  options.external = advisor ? &*advisor : nullptr;
  resolved.update({{"advisor", opt.advisor},
                   {"max_steps", opt.max_steps},
                   {"tolerance", opt.tolerance},
                   {"grid_step", options.grid.step},
                   {"init", opt.init}});

  const ExploreResult result = explore(config, oracle, init, options);
  report_explore(result, out);
  if (result.status == ExploreStatus::oracle_error) throw Error(ErrorCode::oracle_unavailable, result.error);
  outputs.add(opt.out, dump(explore_json(result, config)));
  outputs.add(opt.trace, exploration_csv(result.trace, config.num_players()));
  return kExitOk;
}

int run_solve(const Options& opt, Outputs& outputs, json& resolved, std::ostream& out) {
  const GameConfig config = load(opt);
  PayoffOracle oracle(config);
  const Grid grid = grid_for(opt, config);
  resolved.update({{"method", opt.method}, {"grid_step", grid.step}});

  if (opt.method == "enumerate") {
    const auto equilibria = enumerate_equilibria(config, oracle, grid, opt.seed, opt.jobs);
    json list = json::array();
    for (const auto& p : equilibria) list.push_back(p.counts);
    out << equilibria.size() << " equilibria on the step-" << grid.step << " grid ("
        << profile_space_size(config, grid) << " profiles checked)\n";
    for (const auto& p : equilibria) out << "  (" << format_profile(p) << ")\n";
    outputs.add(opt.out, dump({{"method", "enumerate"},
                               {"label", config.label},
                               {"grid_step", grid.step},
                               {"profiles_checked", profile_space_size(config, grid)},
                               {"equilibria", list}}));
    return kExitOk;
  }

  if (opt.method == "best-response") {
    const auto init = parse_inits(opt);
    if (init.size() > 1) throw UsageError("best-response takes at most one --init start profile");
    const StrategyProfile start = init.empty() ? StrategyProfile{std::vector<Count>(config.num_players(), 0)} : init[0];
    resolved.update({{"start", start.counts}, {"max_rounds", opt.max_steps}});
    const Trace trace = run_dynamics(config, oracle, start, grid, opt.max_steps, config.gain_tolerance, opt.seed);
    if (trace.status == TraceStatus::oracle_error) throw Error(ErrorCode::oracle_unavailable, trace.error);
    const auto cert = nash_certificate(config, oracle, trace.final_profile(), grid, opt.seed);
    out << "status: " << to_string(trace.status) << " after " << trace.rounds << " rounds\n";
    out << "final: (" << format_profile(trace.final_profile()) << "), max gain " << format_number(cert.max_gain())
        << "\n";
    outputs.add(opt.out, dump({{"method", "best-response"},
                               {"label", config.label},
                               {"status", std::string(to_string(trace.status))},
                               {"rounds", trace.rounds},
                               {"final", trace.final_profile().counts},
                               {"certificate", to_json(cert)}}));
    outputs.add(opt.trace, dynamics_csv(trace, config.num_players()));
    return kExitOk;
  }

  if (opt.method == "advisor") return run_explore(opt, outputs, resolved, out);
  throw UsageError("--method must be enumerate, best-response or advisor");
}

LabeledProfile parse_labeled(const std::string& text, std::size_t index) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) return {"profile_" + std::to_string(index), parse_profile(text)};
  return {text.substr(0, eq), parse_profile(text.substr(eq + 1))};
}

int run_evaluate(const Options& opt, Outputs& outputs, json& resolved, std::ostream& out) {
  const GameConfig config = load(opt);
  if (opt.profiles.empty()) throw UsageError("evaluate needs at least one --profile");
  if (opt.baseline.empty()) throw UsageError("evaluate needs --baseline");

  std::vector<LabeledProfile> profiles;
  for (std::size_t k = 0; k < opt.profiles.size(); ++k) profiles.push_back(parse_labeled(opt.profiles[k], k + 1));
  profiles.push_back({std::string(kBaselineLabel), parse_profile(opt.baseline)});

  PerturbationSpec spec;
  spec.delta = opt.delta;
  spec.count = opt.scenarios;
  spec.seed = static_cast<std::uint64_t>(opt.seed);
  if (!opt.targets.empty()) {
    spec.targets.clear();
    std::string_view rest = opt.targets;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      spec.targets.insert(parse_perturb_target(rest.substr(0, comma)));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  }
  json target_names = json::array();
  for (auto t : spec.targets) target_names.push_back(std::string(to_string(t)));
  resolved.update({{"scenarios", spec.count}, {"delta", spec.delta}, {"targets", target_names},
                   {"baseline", opt.baseline}, {"profiles", opt.profiles}});

  const auto scenarios = generate_scenarios(config, spec);
  const auto report = evaluate_profiles(profiles, scenarios, opt.seed, kBaselineLabel, opt.jobs);
  for (const auto& s : report.summary) {
    out << s.label << ": dominance fraction";
    for (double f : s.fraction) out << ' ' << format_number(f);
    out << "\n";
  }
  outputs.add(opt.out, report_csv(report));
  if (!opt.out.empty()) outputs.add(sidecar_path(opt.out, ".json"), dump(report_summary_json(report)));
  return kExitOk;
}

std::vector<Count> parse_range(const std::string& text, Count cap) {
  if (text.empty()) {
    std::vector<Count> grid;
    const Count step = std::max(1, cap / 10);
    for (Count c = 0; c <= cap; c += step) grid.push_back(c);
    return grid;
  }
  int lo = 0, hi = 0, step = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d:%d:%d%c", &lo, &hi, &step, &tail) != 3 || step <= 0 || lo < 0 || hi < lo) {
    throw UsageError("--range must be START:STOP:STEP with 0 <= START <= STOP and STEP > 0");
  }
  std::vector<Count> grid;
  for (int c = lo; c <= hi; c += step) grid.push_back(c);
  return grid;
}

int run_sweep(const Options& opt, Outputs& outputs, json& resolved, std::ostream& out) {
  const GameConfig config = load(opt);
  PayoffOracle oracle(config);
  if (opt.player >= config.num_players()) throw UsageError("--player out of range");
  StrategyProfile fixed{std::vector<Count>(config.num_players(), 0)};
  fixed[0] = std::min<Count>(150, config.players[0].cap);
  if (!opt.fixed.empty()) fixed = parse_profile(opt.fixed);
  const auto grid = parse_range(opt.range, config.players[opt.player].cap);
  std::vector<std::int64_t> seeds;
  for (int k = 0; k < std::max(1, opt.seeds); ++k) seeds.push_back(opt.seed + k);
  resolved.update({{"player", opt.player}, {"fixed", fixed.counts}, {"range", grid}, {"seeds", seeds},
                   {"mono_tolerance", opt.mono_tolerance}});

  const auto report = monotonicity_report(config, oracle, opt.player, fixed, grid, seeds, opt.mono_tolerance);
  out << sweep_csv(report);
  out << "non-increasing within " << format_number(report.tolerance) << ": "
      << (report.non_increasing ? "yes" : "no") << "\n";
  outputs.add(opt.out, sweep_csv(report));
  if (!opt.out.empty()) outputs.add(sidecar_path(opt.out, ".json"), dump(to_json(report)));
  return kExitOk;
}

int run_accuracy(const Options& opt, Outputs& outputs, json& resolved, std::ostream& out) {
  const GameConfig config = load(opt);
  PayoffOracle oracle(config);
  if (opt.profiles.empty()) throw UsageError("accuracy needs at least one --profile");
  resolved.update({{"profiles", opt.profiles}});
  std::string csv = detail::profile_header(config.num_players()) + ",accuracy" +
                    detail::utility_header(config.num_players()) + '\n';
  for (const auto& text : opt.profiles) {
    csv += detail::outcome_columns(evaluate(config, oracle, parse_profile(text), opt.seed)) + '\n';
  }
  out << csv;
  outputs.add(opt.out, csv);
  return kExitOk;
}

void add_common(CLI::App& cmd, Options& opt) {
  cmd.add_option("--config", opt.config_path, "Game config (JSON)")->required()->check(CLI::ExistingFile);
  cmd.add_option("--seed", opt.seed, "Seed forwarded to oracles and scenario generation")->capture_default_str();
  cmd.add_option("--out", opt.out, "Primary output file");
  cmd.add_option("--manifest", opt.manifest, "Run manifest path (default: <out>.manifest.json)");
  cmd.add_option("--jobs", opt.jobs, "Worker threads (default: hardware threads); output order does not depend on it")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"eqforge: equilibrium engine for data-contribution poisoning games"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EQFORGE_VERSION);

  auto* solve = app.add_subcommand("solve", "Derive equilibria (enumerate, best-response dynamics, or advisor)");
  auto* explore_cmd = app.add_subcommand("explore", "Advisor-guided exploration from init profiles");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate profiles across perturbed scenarios vs a baseline");
  auto* sweep = app.add_subcommand("sweep", "Accuracy as one malicious count varies");
  auto* accuracy = app.add_subcommand("accuracy", "Query the payoff oracle for profiles");
  for (auto* cmd : {solve, explore_cmd, evaluate_cmd, sweep, accuracy}) add_common(*cmd, opt);

  for (auto* cmd : {solve, explore_cmd}) {
    cmd->add_option("--grid-step", opt.grid_step, "Deviation grid step (default: config grid_step)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--init", opt.init, "Initial profile h,m1,... (repeatable)");
    cmd->add_option("--max-steps", opt.max_steps, "Step budget (rounds for best-response)")->capture_default_str();
    cmd->add_option("--tolerance", opt.tolerance, "Steadiness threshold on per-player utility change")
        ->capture_default_str();
    cmd->add_option("--advisor", opt.advisor, "heuristic or external:CMD")->capture_default_str();
    cmd->add_option("--advisor-timeout-ms", opt.advisor_timeout_ms, "Reply timeout for external advisors")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--trace", opt.trace, "Trace CSV output");
  }
  solve->add_option("--method", opt.method, "enumerate, best-response or advisor")
      ->capture_default_str()
      ->check(CLI::IsMember({"enumerate", "best-response", "advisor"}));
  solve->add_option("--budget", opt.budget, "Override the enumeration budget (profiles)");

  evaluate_cmd->add_option("--profile", opt.profiles, "Focal profile [label=]h,m1,... (repeatable)");
  evaluate_cmd->add_option("--baseline", opt.baseline, "Baseline profile h,m1,...");
  evaluate_cmd->add_option("--scenarios", opt.scenarios, "Number of perturbed scenarios")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--delta", opt.delta, "Relative perturbation magnitude in [0, 1)")->capture_default_str();
  evaluate_cmd->add_option("--targets", opt.targets,
                           "Comma list from a_max,kappa,lambda,poison_weight,unit_cost (default: all)");

  sweep->add_option("--player", opt.player, "Malicious player index")->capture_default_str();
  sweep->add_option("--range", opt.range, "START:STOP:STEP (default: 0:cap:cap/10)");
  sweep->add_option("--fixed", opt.fixed, "Profile holding the other counts (default: h=150, others 0)");
  sweep->add_option("--seeds", opt.seeds, "Number of seeds averaged, starting at --seed")->capture_default_str();
  sweep->add_option("--mono-tolerance", opt.mono_tolerance, "Allowed rise between consecutive points")
      ->capture_default_str();

  accuracy->add_option("--profile", opt.profiles, "Profile h,m1,... (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << EQFORGE_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  const auto started = std::chrono::steady_clock::now();
  Outputs outputs;
  json resolved = {{"jobs", opt.jobs}};
  try {
    int code = kExitOk;
    if (chosen == solve) code = run_solve(opt, outputs, resolved, out);
    else if (chosen == explore_cmd) code = run_explore(opt, outputs, resolved, out);
    else if (chosen == evaluate_cmd) code = run_evaluate(opt, outputs, resolved, out);
    else if (chosen == sweep) code = run_sweep(opt, outputs, resolved, out);
    else code = run_accuracy(opt, outputs, resolved, out);

    std::string manifest_path = opt.manifest;
    if (manifest_path.empty() && !opt.out.empty()) manifest_path = opt.out + ".manifest.json";
    if (manifest_path.empty() && !outputs.empty()) manifest_path = outputs.paths().front() + ".manifest.json";
    if (!manifest_path.empty()) {
      const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started);
      json manifest = {{"command", name},
                       {"config", opt.config_path},
                       {"parameters", resolved},
                       {"seed", opt.seed},
                       {"version", EQFORGE_VERSION},
                       {"outputs", outputs.paths()},
                       {"duration_ms", elapsed.count()}};
      outputs.add(manifest_path, dump(manifest));  // last, after every artifact it lists
    }
    outputs.commit();
    return code;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << chosen->help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
}

}  // namespace eqforge::cli

int main(int argc, char** argv) { return eqforge::cli::run(argc, argv, std::cout, std::cerr); }
