#include <gtest/gtest.h>

#include "eqforge/advisor.hpp"
#include "eqforge/report.hpp"
#include "support/brute_force.hpp"
#include "support/fixtures.hpp"

using namespace eqforge;
using fixtures::P;

namespace {

// Frozen from the first validated heuristic run on the default game; the
// brute-force reference confirms it is a step-1 equilibrium.
const StrategyProfile kDefaultExploreFinal = P({300, 163, 0});
constexpr std::size_t kDefaultExploreSteps = 32;  // 3 init + 29 proposals

const std::vector<StrategyProfile> kPublishedInit{P({150, 75, 75}), P({180, 60, 60}), P({120, 90, 90})};

ExplorationHistory history_of(const GameConfig& config, std::initializer_list<StrategyProfile> profiles,
                              EntrySource source = EntrySource::init) {
  ExplorationHistory history;
  for (const auto& p : profiles) history.entries.push_back({p, evaluate(config, p, 0), source});
  return history;
}

std::string proposal_line(const StrategyProfile& p) {
  nlohmann::json j = {{"type", "proposal"}, {"action", "propose"}, {"profile", p.counts}};
  return j.dump();
}

constexpr const char* kStopLine = R"({"type":"proposal","action":"stop"})";

}  // namespace

TEST(Heuristic, StopsAtCertifiedEquilibrium) {
  const auto config = fixtures::small_game();
  PayoffOracle oracle(config);
  const auto history = history_of(config, {P({0, 0, 0}), P({60, 60, 30})}, EntrySource::advisor);
  const auto proposal = heuristic_propose(history, config, oracle, Grid(10), 0);
  EXPECT_EQ(proposal.action, ProposalAction::stop);
  EXPECT_FALSE(proposal.profile.has_value());
}

TEST(Heuristic, DampedStepFromHonestOnlyStart) {
  // From (60,0,0) both malicious players gain by moving to 60; player 1 gains
  // more (cheaper samples) and moves halfway.
  const auto config = fixtures::small_game();
  PayoffOracle oracle(config);
  const auto proposal = heuristic_propose(history_of(config, {P({60, 0, 0})}), config, oracle, Grid(10), 0);
  ASSERT_EQ(proposal.action, ProposalAction::propose);
  EXPECT_EQ(*proposal.profile, P({60, 30, 0}));
}

TEST(Heuristic, EmptyHistoryIsPreconditionError) {
  const auto config = fixtures::small_game();
  PayoffOracle oracle(config);
  try {
    heuristic_propose(ExplorationHistory{}, config, oracle, Grid(10), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::precondition);
  }
}

TEST(Heuristic, BaseIsBestInitThenLatestProposal) {
  const auto config = fixtures::default_game();
  auto history = history_of(config, {P({150, 75, 75}), P({180, 60, 60}), P({120, 90, 90})});
  EXPECT_EQ(exploration_base(history).profile, P({180, 60, 60}));
  history.entries.push_back({P({10, 10, 10}), evaluate(config, P({10, 10, 10}), 0), EntrySource::advisor});
  EXPECT_EQ(exploration_base(history).profile, P({10, 10, 10}));
}

TEST(Heuristic, HonestUtilityTiesGoToMostRecentInit) {
  const auto config = fixtures::default_game();
  const auto history = history_of(config, {P({100, 0, 0}), P({100, 0, 0})});
  EXPECT_EQ(&exploration_base(history), &history.entries[1]);
}

// ---------------------------------------------------------------------------
// External advisor

TEST(ExternalAdvisorTest, StopReply) {
  const auto config = fixtures::default_game();
  ExternalAdvisor advisor(fixtures::stub_replying(R"({"action":"stop"})"), std::chrono::milliseconds(2000));
  const auto proposal = advisor.propose(history_of(config, {P({150, 75, 75})}), config);
  EXPECT_EQ(proposal.action, ProposalAction::stop);
  EXPECT_FALSE(proposal.fallback);
}

TEST(ExternalAdvisorTest, ProfileReply) {
  const auto config = fixtures::default_game();
  ExternalAdvisor advisor(fixtures::stub_replying(proposal_line(P({135, 83, 82}))), std::chrono::milliseconds(2000));
  const auto proposal = advisor.propose(history_of(config, {P({150, 75, 75})}), config);
  ASSERT_EQ(proposal.action, ProposalAction::propose);
  EXPECT_EQ(*proposal.profile, P({135, 83, 82}));
}

TEST(ExternalAdvisorTest, CapViolationFallsBack) {
  const auto config = fixtures::default_game();
  ExternalAdvisor advisor(fixtures::stub_replying(proposal_line(P({999, 0, 0}))), std::chrono::milliseconds(2000));
  const auto proposal = advisor.propose(history_of(config, {P({150, 75, 75})}), config);
  EXPECT_TRUE(proposal.fallback);
}

TEST(ExternalAdvisorTest, MalformedAndWrongArityFallBack) {
  const auto config = fixtures::default_game();
  for (const std::string& reply : {std::string("hello"), proposal_line(P({1, 2})),
                                  std::string(R"({"type":"proposal","action":"dance"})"),
                                  std::string(R"({"type":"proposal","action":"propose","profile":[1.5,2,3]})")}) {
    ExternalAdvisor advisor(fixtures::stub_replying(reply), std::chrono::milliseconds(2000));
    EXPECT_TRUE(advisor.propose(history_of(config, {P({150, 75, 75})}), config).fallback) << reply;
  }
}

TEST(ExternalAdvisorTest, TimeoutFallsBack) {
  const auto config = fixtures::default_game();
  ExternalAdvisor advisor(fixtures::stub() + " --silent", std::chrono::milliseconds(50));
  EXPECT_TRUE(advisor.propose(history_of(config, {P({150, 75, 75})}), config).fallback);
}

TEST(ExternalAdvisorTest, DeadProcessIsFatal) {
  const auto config = fixtures::default_game();
  ExternalAdvisor advisor("/nonexistent/eqforge-advisor", std::chrono::milliseconds(2000));
  try {
    advisor.propose(history_of(config, {P({150, 75, 75})}), config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::advisor_spawn);
  }
}

TEST(ExternalAdvisorTest, RequestCarriesScenarioAndHistory) {
  const auto config = fixtures::default_game();
  const auto dir = fixtures::temp_dir("advise");
  const auto log = dir / "advise.log";
  {
    ExternalAdvisor advisor(fixtures::stub_replying(kStopLine) + " --log " + log.string(),
                            std::chrono::milliseconds(2000));
    advisor.propose(history_of(config, {P({150, 75, 75}), P({180, 60, 60})}), config);
  }
  const auto line = fixtures::slurp(log);
  const auto request = nlohmann::json::parse(line.substr(0, line.find('\n')));
  EXPECT_EQ(request["type"], "advise");
  EXPECT_EQ(request["scenario"]["players"].size(), 3u);
  ASSERT_EQ(request["history"].size(), 2u);
  EXPECT_EQ(request["history"][1]["profile"], nlohmann::json::array({180, 60, 60}));
  EXPECT_EQ(request["history"][0]["utilities"].size(), 3u);
  EXPECT_EQ(line.rfind(R"({"type":"advise","scenario":)", 0), 0u);
}

// ---------------------------------------------------------------------------
// Exploration loop

TEST(Explore, PublishedInitWithHeuristicAdvisor) {
  const auto config = fixtures::default_game();
  PayoffOracle oracle(config);
  const auto result = explore(config, oracle, kPublishedInit, {});
  ASSERT_GE(result.trace.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(result.trace.entries[k].profile, kPublishedInit[k]);
    EXPECT_EQ(result.trace.entries[k].source, EntrySource::init);
  }
  EXPECT_EQ(result.status, ExploreStatus::stopped);
  EXPECT_EQ(result.trace.size(), kDefaultExploreSteps);
  EXPECT_EQ(result.final_profile, kDefaultExploreFinal);
  ASSERT_TRUE(result.certificate.has_value());
  EXPECT_TRUE(result.certificate->is_equilibrium);
  EXPECT_LE(result.certificate->max_gain(), 1e-6);
  EXPECT_LE(reference::max_gain(reference::Game{}, kDefaultExploreFinal.counts), 1e-9);
}

TEST(Explore, CertifiedInitStopsImmediately) {
  const auto config = fixtures::default_game();
  PayoffOracle oracle(config);
  const auto result = explore(config, oracle, {kDefaultExploreFinal}, {});
  EXPECT_EQ(result.status, ExploreStatus::stopped);
  EXPECT_EQ(result.trace.size(), 1u);
  EXPECT_EQ(result.final_profile, kDefaultExploreFinal);
  EXPECT_TRUE(result.certificate->is_equilibrium);
}

TEST(Explore, SingleStepBudgetReturnsBestInit) {
  const auto config = fixtures::default_game();
  PayoffOracle oracle(config);
  ExploreOptions options;
  options.max_steps = 1;
  const auto result = explore(config, oracle, kPublishedInit, options);
  EXPECT_EQ(result.status, ExploreStatus::max_steps);
  EXPECT_EQ(result.trace.size(), 3u);
  EXPECT_EQ(result.final_profile, P({180, 60, 60}));
  ASSERT_TRUE(result.certificate.has_value());
  EXPECT_EQ(result.certificate->profile, P({180, 60, 60}));
  EXPECT_FALSE(result.certificate->is_equilibrium);
}

TEST(Explore, ScriptedAdvisorReplaysPublishedSteps) {
  const auto dir = fixtures::temp_dir("script");
  const auto script = dir / "script.txt";
  std::ofstream(script) << proposal_line(P({135, 83, 82})) << "\n"
                        << proposal_line(P({142, 79, 79})) << "\n"
                        << kStopLine << "\n";
  const auto config = fixtures::default_game();
  PayoffOracle oracle(config);
  ExternalAdvisor advisor(fixtures::stub() + " --script " + script.string(), std::chrono::milliseconds(2000));
  ExploreOptions options;
  options.external = &advisor;
  const auto result = explore(config, oracle, kPublishedInit, options);
  ASSERT_EQ(result.trace.size(), 5u);
  EXPECT_EQ(result.trace.entries[3].profile, P({135, 83, 82}));
  EXPECT_EQ(result.trace.entries[4].profile, P({142, 79, 79}));
  EXPECT_EQ(result.status, ExploreStatus::stopped);
  EXPECT_EQ(result.final_profile, P({142, 79, 79}));
  // The engine reports the gains honestly: under the closed-form surface this
  // point is not an equilibrium.
  ASSERT_TRUE(result.certificate.has_value());
  EXPECT_NEAR(result.certificate->max_gain(), reference::max_gain(reference::Game{}, {142, 79, 79}), 1e-12);
  EXPECT_FALSE(result.certificate->is_equilibrium);
}

TEST(Explore, RepeatedProposalTriggersSteadiness) {
  const auto config = fixtures::default_game();
  PayoffOracle oracle(config);
  ExternalAdvisor advisor(fixtures::stub_replying(proposal_line(P({135, 83, 82}))), std::chrono::milliseconds(2000));
  ExploreOptions options;
  options.external = &advisor;
  const auto result = explore(config, oracle, kPublishedInit, options);
  EXPECT_EQ(result.status, ExploreStatus::steady);
  EXPECT_EQ(result.trace.size(), 6u);
  EXPECT_EQ(result.final_profile, P({135, 83, 82}));
  EXPECT_TRUE(result.certificate.has_value());
}

TEST(ExploreProperty, SilentAdvisorMatchesHeuristicRun) {
  const auto config = fixtures::default_game();
  PayoffOracle oracle(config);
  const auto heuristic = explore(config, oracle, kPublishedInit, {});

  ExternalAdvisor silent(fixtures::stub() + " --silent", std::chrono::milliseconds(20));
  ExploreOptions options;
  options.external = &silent;
  const auto fallback = explore(config, oracle, kPublishedInit, options);
  EXPECT_EQ(exploration_csv(fallback.trace, 3), exploration_csv(heuristic.trace, 3));
  EXPECT_EQ(fallback.final_profile, heuristic.final_profile);
  EXPECT_EQ(fallback.status, heuristic.status);
  EXPECT_EQ(fallback.certificate->gains, heuristic.certificate->gains);
  EXPECT_EQ(fallback.fallbacks, heuristic.trace.size() - 3 + 1);
}

TEST(ExploreProperty, RunningBestHonestUtilityNeverDrops) {
  const auto config = validate_config(fixtures::game_json(120));
  PayoffOracle oracle(config);
  std::mt19937 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto result = explore(config, oracle, {fixtures::random_profile(rng, config)}, {});
    double best = -1e300;
    for (const auto& e : result.trace.entries) {
      const double next = std::max(best, e.outcome.utilities[0]);
      EXPECT_GE(next, best);
      best = next;
    }
    ASSERT_TRUE(result.certificate.has_value());
    EXPECT_EQ(result.certificate->profile, result.final_profile);
    if (result.status == ExploreStatus::stopped) {
      EXPECT_TRUE(result.certificate->is_equilibrium);
    }
  }
}

TEST(Explore, OracleFailureKeepsPartialTrace) {
  const auto dir = fixtures::temp_dir("partial");
  const auto script = dir / "oracle.txt";
  std::ofstream(script) << R"({"type":"accuracy","value":0.6})" << "\n" << "broken" << "\n";
  const auto config = fixtures::external_game(fixtures::stub() + " --script " + script.string());
  PayoffOracle oracle(config);
  const auto result = explore(config, oracle, kPublishedInit, {});
  EXPECT_EQ(result.status, ExploreStatus::oracle_error);
  EXPECT_EQ(result.trace.size(), 1u);
  EXPECT_FALSE(result.certificate.has_value());
  EXPECT_NE(result.error.find("oracle-malformed"), std::string::npos);
}

TEST(Explore, RejectsEmptyOrOutOfCapInit) {
  const auto config = fixtures::default_game();
  PayoffOracle oracle(config);
  EXPECT_THROW(explore(config, oracle, {}, {}), Error);
  EXPECT_THROW(explore(config, oracle, {P({301, 0, 0})}, {}), Error);
}
