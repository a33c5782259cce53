#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sidewalk/env.hpp"
#include "sidewalk/policy.hpp"

namespace sidewalk {

enum class ControllerKind { SocialForces, Policy };

struct Controller {
  std::string name;
  ControllerKind kind = ControllerKind::SocialForces;
  std::optional<PolicyParams> policy;  // required for ControllerKind::Policy

  static Controller social_forces(std::string name = "social-forces");
  static Controller rl(std::string name, PolicyParams params);
};

// One row per recorded instant. Row 0 is the spawn state with zero inputs;
// row k > 0 holds the state after step k and the inputs / risk of that step.
struct TraceRow {
  double t = 0.0;
  double robot_x = 0.0, robot_y = 0.0, robot_psi = 0.0, robot_v = 0.0;
  double ped_x = 0.0, ped_y = 0.0, ped_psi = 0.0, ped_v_f = 0.0, ped_v_l = 0.0, ped_omega = 0.0;
  double a_n = 0.0, s_n = 0.0;
  double u_st = 0.0, u_ss = 0.0;
  double risk = 0.0, normalized_risk = 0.0;
};

struct Trace {
  std::string controller;
  long episode = 0;
  std::vector<TraceRow> rows;
};

struct MetricsRow {
  long episode = 0;
  std::string controller;
  std::uint64_t seed = 0;
  bool success = false;  // robot reached its goal, pedestrian completed its crossing
  TerminationCause cause = TerminationCause::None;
  double max_normalized_risk = 0.0;
  double cum_steering = 0.0;  // integral of |u_st| dt, rad/s
  double cum_sidestep = 0.0;  // integral of |u_ss| dt, m/s
  double robot_time_to_goal = 0.0;  // s; NaN if the goal was not reached
};

struct EpisodeEvaluation {
  MetricsRow metrics;
  Trace trace;
};

// Runs one evaluation-mode stage C episode. RL actions are the distribution mean.
EpisodeEvaluation evaluate_episode(const Controller& controller, const EnvConfig& config,
                                   long episode, std::uint64_t seed, bool keep_trace = true);

struct EvaluationResult {
  std::vector<MetricsRow> rows;
  std::vector<Trace> traces;  // empty unless requested
};

// Episode i uses seed derive_seed(master_seed, i). Results are ordered by
// episode regardless of jobs.
EvaluationResult run_evaluation(const Controller& controller, long n_episodes,
                                std::uint64_t master_seed, const EnvConfig& config, int jobs = 1,
                                bool keep_traces = false);

inline constexpr const char* kMetricsHeader =
    "episode,controller,seed,success,cause,max_normalized_risk,cum_steering,cum_sidestep,"
    "robot_time_to_goal";
inline constexpr const char* kTraceHeader =
    "t,robot_x,robot_y,robot_psi,robot_v,ped_x,ped_y,ped_psi,ped_v_f,ped_v_l,ped_omega,a_n,s_n,"
    "u_st,u_ss,risk,normalized_risk";

void export_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);
void export_trace_csv(const Trace& trace, const std::filesystem::path& path);
// All traces in one file with leading controller and episode columns.
void export_traces_csv(const std::vector<Trace>& traces, const std::filesystem::path& path);

// Minimal CSV table: header plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws std::out_of_range naming the column when it does not exist, and
  // std::invalid_argument when a cell is not a number.
  std::vector<double> numeric_column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

std::string format_double(double value);  // %.17g; NaN as an empty field

}  // namespace sidewalk
