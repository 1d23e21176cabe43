#pragma once

// Pure-strategy equilibrium machinery on a discretized count grid: best
// responses, deviation certificates, exhaustive enumeration, and sequential
// best-response dynamics.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "eqforge/accuracy.hpp"
#include "eqforge/error.hpp"
#include "eqforge/game.hpp"

namespace eqforge {

/// Admissible counts for a player: {0, step, 2*step, ...} up to cap, with cap
/// always included.
struct Grid {
  Count step = 1;

  explicit Grid(Count s = 1) : step(s) {
    if (step < 1) throw Error(ErrorCode::precondition, "grid step must be >= 1");
  }

  std::vector<Count> admissible(Count cap) const {
    std::vector<Count> counts;
    counts.reserve(static_cast<std::size_t>(cap / step) + 2);
    for (Count c = 0; c <= cap; c += step) counts.push_back(c);
    if (counts.back() != cap) counts.push_back(cap);
    return counts;
  }

  std::size_t size(Count cap) const {
    return static_cast<std::size_t>(cap / step) + 1 + (cap % step != 0 ? 1 : 0);
  }

  bool on_grid(Count count, Count cap) const { return count == cap || (count >= 0 && count % step == 0); }
};

inline bool on_grid(const GameConfig& config, const StrategyProfile& profile, const Grid& grid) {
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (!grid.on_grid(profile[i], config.players[i].cap)) return false;
  }
  return true;
}

struct BestResponse {
  Count count = 0;
  double utility = 0.0;
};

/// Scans every admissible count of `player` with the others fixed. Ties go to
/// the smallest count.
inline BestResponse best_response(const GameConfig& config, PayoffOracle& oracle, const StrategyProfile& profile,
                                  PlayerId player, const Grid& grid, std::int64_t seed) {
  check_profile(config, profile);
  if (player >= config.num_players()) throw Error(ErrorCode::precondition, "no such player");
  std::optional<BestResponse> best;
  StrategyProfile candidate = profile;
  for (const Count count : grid.admissible(config.players[player].cap)) {
    candidate[player] = count;
    double u = 0.0;
    try {
      u = evaluate(config, oracle, candidate, seed).utilities[player];
    } catch (const Error& e) {
      throw e.with_context("best response candidate (" + format_profile(candidate) + ")");
    }
    if (!best || u > best->utility) best = BestResponse{count, u};
  }
  return *best;
}

/// Per-player unilateral deviation gains over the grid. Exact with respect to
/// the grid: every admissible deviation is evaluated.
inline NashCertificate nash_certificate(const GameConfig& config, PayoffOracle& oracle,
                                        const StrategyProfile& profile, const Grid& grid, std::int64_t seed) {
  check_profile(config, profile);
  if (!on_grid(config, profile, grid)) {
    throw Error(ErrorCode::precondition,
                "profile (" + format_profile(profile) + ") is not on the step-" + std::to_string(grid.step) + " grid");
  }
  const Outcome current = evaluate(config, oracle, profile, seed);
  NashCertificate cert;
  cert.profile = profile;
  cert.grid_step = grid.step;
  cert.gains.resize(config.num_players());
  for (PlayerId i = 0; i < config.num_players(); ++i) {
    cert.gains[i] = best_response(config, oracle, profile, i, grid, seed).utility - current.utilities[i];
  }
  cert.is_equilibrium = cert.max_gain() <= config.gain_tolerance;
  return cert;
}

// ---------------------------------------------------------------------------
// Enumeration

/// Number of grid profiles, saturating at UINT64_MAX.
inline std::uint64_t profile_space_size(const GameConfig& config, const Grid& grid) {
  std::uint64_t total = 1;
  for (const auto& p : config.players) {
    const std::uint64_t n = grid.size(p.cap);
    if (total > UINT64_MAX / n) return UINT64_MAX;
    total *= n;
  }
  return total;
}

namespace detail {

/// Mixed-radix decoding of a lexicographic index (player 0 most significant).
inline StrategyProfile decode_profile(std::uint64_t index, const std::vector<std::vector<Count>>& axes) {
  StrategyProfile profile;
  profile.counts.resize(axes.size());
  for (std::size_t i = axes.size(); i-- > 0;) {
    profile[i] = axes[i][index % axes[i].size()];
    index /= axes[i].size();
  }
  return profile;
}

/// Runs body(begin, end) over [0, total) in `jobs` contiguous chunks and
/// rethrows the first failure by chunk order.
template <typename Body>
void parallel_chunks(std::uint64_t total, unsigned jobs, Body&& body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::min<std::uint64_t>(total, 1024))));
  if (jobs <= 1) {
    body(std::uint64_t{0}, total);
    return;
  }
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  const std::uint64_t chunk = (total + jobs - 1) / jobs;
  for (unsigned w = 0; w < jobs; ++w) {
    const std::uint64_t begin = std::min(total, w * chunk);
    const std::uint64_t end = std::min(total, begin + chunk);
    workers.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// All pure equilibria on the grid, in lexicographic order. Evaluates every
/// profile once, then checks each player's deviations along its axis of the
/// utility table. Output does not depend on `jobs`.
inline std::vector<StrategyProfile> enumerate_equilibria(const GameConfig& config, PayoffOracle& oracle,
                                                         const Grid& grid, std::int64_t seed,
                                                         unsigned jobs = default_jobs()) {
  const std::uint64_t total = profile_space_size(config, grid);
  if (total > config.enumeration_budget) {
    throw Error(ErrorCode::budget_exceeded,
                "enumeration needs " + std::to_string(total) + " profiles on the step-" + std::to_string(grid.step) +
                    " grid, budget is " + std::to_string(config.enumeration_budget));
  }
  if (!oracle.concurrency_safe()) jobs = 1;

  const std::size_t n = config.num_players();
  std::vector<std::vector<Count>> axes;
  for (const auto& p : config.players) axes.push_back(grid.admissible(p.cap));
  // stride[i]: index distance between neighbours along player i's axis.
  std::vector<std::uint64_t> stride(n, 1);
  for (std::size_t i = n - 1; i-- > 0;) stride[i] = stride[i + 1] * axes[i + 1].size();

  std::vector<double> table(total * n);
  detail::parallel_chunks(total, jobs, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t idx = begin; idx < end; ++idx) {
      const auto profile = detail::decode_profile(idx, axes);
      Outcome outcome;
      try {
        outcome = evaluate(config, oracle, profile, seed);
      } catch (const Error& e) {
        throw e.with_context("enumeration profile (" + format_profile(profile) + ")");
      }
      std::copy(outcome.utilities.begin(), outcome.utilities.end(), table.begin() + static_cast<std::ptrdiff_t>(idx * n));
    }
  });

  std::vector<char> stable(total, 0);
  detail::parallel_chunks(total, jobs, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t idx = begin; idx < end; ++idx) {
      bool ok = true;
      for (std::size_t i = 0; i < n && ok; ++i) {
        const std::uint64_t position = (idx / stride[i]) % axes[i].size();
        const std::uint64_t base = idx - position * stride[i];
        const double current = table[idx * n + i];
        double best = current;
        for (std::uint64_t k = 0; k < axes[i].size(); ++k) {
          best = std::max(best, table[(base + k * stride[i]) * n + i]);
        }
        ok = best - current <= config.gain_tolerance;
      }
      stable[idx] = ok ? 1 : 0;
    }
  });

  std::vector<StrategyProfile> equilibria;
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    if (stable[idx]) equilibria.push_back(detail::decode_profile(idx, axes));
  }
  return equilibria;
}

// ---------------------------------------------------------------------------
// Best-response dynamics

enum class TraceStatus { converged, max_rounds, oracle_error };

inline std::string_view to_string(TraceStatus status) {
  switch (status) {
    case TraceStatus::converged: return "converged";
    case TraceStatus::max_rounds: return "max_rounds";
    case TraceStatus::oracle_error: return "oracle_error";
  }
  return "unknown";
}

struct TraceStep {
  StrategyProfile profile;
  Outcome outcome;
  std::optional<PlayerId> mover;
};

struct Trace {
  std::vector<TraceStep> steps;
  TraceStatus status = TraceStatus::max_rounds;
  std::size_t rounds = 0;
  std::string error;  // set when status is oracle_error

  const StrategyProfile& final_profile() const { return steps.back().profile; }
};

/// Sequential best responses in player order. A player moves only when its
/// gain exceeds `eps`; a full round without moves ends the run as converged.
inline Trace run_dynamics(const GameConfig& config, PayoffOracle& oracle, const StrategyProfile& start,
                          const Grid& grid, std::size_t max_rounds, double eps, std::int64_t seed) {
  check_profile(config, start);
  if (!on_grid(config, start, grid)) {
    throw Error(ErrorCode::precondition,
                "start (" + format_profile(start) + ") is not on the step-" + std::to_string(grid.step) + " grid");
  }
  Trace trace;
  try {
    trace.steps.push_back({start, evaluate(config, oracle, start, seed), std::nullopt});
    for (std::size_t round = 0; round < max_rounds; ++round) {
      ++trace.rounds;
      bool moved = false;
      for (PlayerId i = 0; i < config.num_players(); ++i) {
        const TraceStep& last = trace.steps.back();
        const BestResponse br = best_response(config, oracle, last.profile, i, grid, seed);
        if (br.utility - last.outcome.utilities[i] > eps) {
          StrategyProfile next = last.profile;
          next[i] = br.count;
          Outcome outcome = evaluate(config, oracle, next, seed);
          trace.steps.push_back({std::move(next), std::move(outcome), i});
          moved = true;
        }
      }
      if (!moved) {
        trace.status = TraceStatus::converged;
        return trace;
      }
    }
    trace.status = TraceStatus::max_rounds;
  } catch (const Error& e) {
    if (!is_oracle_error(e.code())) throw;
    trace.status = TraceStatus::oracle_error;
    trace.error = e.what();
  }
  return trace;
}

}  // namespace eqforge
