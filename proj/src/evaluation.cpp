#include "sidewalk/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sidewalk/parallel.hpp"
#include "sidewalk/rng.hpp"

namespace sidewalk {

Controller Controller::social_forces(std::string name) {
  return {std::move(name), ControllerKind::SocialForces, std::nullopt};
}

Controller Controller::rl(std::string name, PolicyParams params) {
  return {std::move(name), ControllerKind::Policy, std::move(params)};
}

namespace {

TraceRow snapshot(const SidewalkEnv& env) {
  TraceRow r;
  r.t = env.time();
  const RobotState& robot = env.robot();
  r.robot_x = robot.x;
  r.robot_y = robot.y;
  r.robot_psi = robot.psi;
  r.robot_v = robot.v;
  const PedestrianState& ped = env.pedestrian();
  r.ped_x = ped.x;
  r.ped_y = ped.y;
  r.ped_psi = ped.psi;
  r.ped_v_f = ped.v_f;
  r.ped_v_l = ped.v_l;
  r.ped_omega = ped.omega;
  return r;
}

Eigen::VectorXd to_vector(const Observation& obs) {
  Eigen::VectorXd x(kObservationSize);
  for (int i = 0; i < kObservationSize; ++i) x(i) = obs[static_cast<std::size_t>(i)];
  return x;
}

}  // namespace

EpisodeEvaluation evaluate_episode(const Controller& controller, const EnvConfig& base,
                                   long episode, std::uint64_t seed, bool keep_trace) {
  EnvConfig config = base;
  config.mode = EnvMode::Evaluation;
  config.stage = Stage::C;
  config.body =
      controller.kind == ControllerKind::SocialForces ? RobotBody::PointMass : RobotBody::Bicycle;
  if (controller.kind == ControllerKind::Policy) {
    if (!controller.policy) {
      throw std::invalid_argument("controller '" + controller.name + "' has no policy");
    }
    if (controller.policy->architecture().input_dim != kObservationSize) {
      throw std::invalid_argument("policy input size does not match the observation");
    }
  }

  SidewalkEnv env(config);
  Observation obs = env.reset(seed);
  EpisodeEvaluation result;
  MetricsRow& m = result.metrics;
  m.episode = episode;
  m.controller = controller.name;
  m.seed = seed;
  m.robot_time_to_goal = std::numeric_limits<double>::quiet_NaN();
  result.trace.controller = controller.name;
  result.trace.episode = episode;
  if (keep_trace) result.trace.rows.push_back(snapshot(env));

  auto record = [&](const StepOutcome& out, const RobotAction& action) {
    const StepInfo& info = out.info;
    m.max_normalized_risk = std::max(m.max_normalized_risk, info.normalized_risk);
    m.cum_steering += std::abs(info.pedestrian_input.steering) * config.dt;
    m.cum_sidestep += std::abs(info.pedestrian_input.sidestep) * config.dt;
    if (keep_trace) {
      TraceRow row = snapshot(env);
      row.a_n = action.accel;
      row.s_n = action.steer;
      row.u_st = info.pedestrian_input.steering;
      row.u_ss = info.pedestrian_input.sidestep;
      row.risk = info.risk;
      row.normalized_risk = info.normalized_risk;
      result.trace.rows.push_back(row);
    }
  };

  std::mt19937_64 unused_rng(0);  // mean actions never draw
  while (!env.episode_over()) {
    StepOutcome out;
    RobotAction action{};
    if (controller.kind == ControllerKind::SocialForces) {
      out = env.step_social_forces();
    } else {
      const SampledAction a =
          sample_action(forward(*controller.policy, to_vector(obs)), unused_rng, true);
      action = a.action;
      out = env.step(action);
    }
    obs = out.observation;
    record(out, action);
  }
  m.cause = env.cause();
  if (m.cause == TerminationCause::Goal) {
    m.robot_time_to_goal = env.time();
    while (!env.pedestrian_finished() && env.steps() < config.max_steps) {
      record(env.advance_pedestrian(), {});
    }
  }
  m.success = m.cause == TerminationCause::Goal && env.pedestrian_finished();
  return result;
}

EvaluationResult run_evaluation(const Controller& controller, long n_episodes,
                                std::uint64_t master_seed, const EnvConfig& config, int jobs,
                                bool keep_traces) {
  if (n_episodes <= 0) throw std::invalid_argument("n_episodes must be positive");
  std::vector<EpisodeEvaluation> episodes(static_cast<std::size_t>(n_episodes));
  parallel_for(n_episodes, jobs, [&](long i) {
    episodes[static_cast<std::size_t>(i)] =
        evaluate_episode(controller, config, i, derive_seed(master_seed, static_cast<std::uint64_t>(i)),
                         keep_traces);
  });
  EvaluationResult result;
  result.rows.reserve(episodes.size());
  for (auto& e : episodes) {
    result.rows.push_back(e.metrics);
    if (keep_traces) result.traces.push_back(std::move(e.trace));
  }
  return result;
}

std::string format_double(double value) {
  if (std::isnan(value)) return {};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("failed while writing " + path.string());
}

void write_trace_row(std::ostream& out, const TraceRow& r) {
  const double values[] = {r.t,     r.robot_x, r.robot_y, r.robot_psi, r.robot_v, r.ped_x,
                           r.ped_y, r.ped_psi, r.ped_v_f, r.ped_v_l,   r.ped_omega,
                           r.a_n,   r.s_n,     r.u_st,    r.u_ss,      r.risk,    r.normalized_risk};
  bool first = true;
  for (double v : values) {
    if (!first) out << ',';
    out << format_double(v);
    first = false;
  }
  out << '\n';
}

}  // namespace

void export_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.episode << ',' << r.controller << ',' << r.seed << ',' << (r.success ? 1 : 0) << ','
        << to_string(r.cause) << ',' << format_double(r.max_normalized_risk) << ','
        << format_double(r.cum_steering) << ',' << format_double(r.cum_sidestep) << ','
        << format_double(r.robot_time_to_goal) << '\n';
  }
  finish_output(out, path);
}

void export_trace_csv(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << kTraceHeader << '\n';
  for (const auto& r : trace.rows) write_trace_row(out, r);
  finish_output(out, path);
}

void export_traces_csv(const std::vector<Trace>& traces, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "controller,episode," << kTraceHeader << '\n';
  for (const auto& trace : traces) {
    for (const auto& r : trace.rows) {
      out << trace.controller << ',' << trace.episode << ',';
      write_trace_row(out, r);
    }
  }
  finish_output(out, path);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split_line(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw std::runtime_error(path.string() + ": row with " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
  std::size_t index = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) index = i;
  }
  if (index == header.size()) throw std::out_of_range("no column named '" + name + "'");
  std::vector<double> values;
  values.reserve(rows.size());
  for (const auto& row : rows) {
    const std::string& cell = row[index];
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size()) {
      throw std::invalid_argument("column '" + name + "' has a non-numeric cell '" + cell + "'");
    }
    values.push_back(v);
  }
  return values;
}

}  // namespace sidewalk
