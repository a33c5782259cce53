#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sidewalk/cei.hpp"
#include "sidewalk/checkpoint.hpp"
#include "sidewalk/evaluation.hpp"
#include "sidewalk/parallel.hpp"
#include "sidewalk/statistics.hpp"
#include "sidewalk/svg.hpp"
#include "sidewalk/train.hpp"

namespace fs = std::filesystem;
using namespace sidewalk;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr const char* kOutputRootVar = "SIDEWALK_OUTPUT_ROOT";

// Raised for bad values that only show up after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path resolve_output(const std::string& out) {
  fs::path p(out);
  const char* root = std::getenv(kOutputRootVar);
  if (root && *root && p.is_relative()) p = fs::path(root) / p;
  return p;
}

void add_env_options(CLI::App* cmd, EnvConfig& env) {
  RewardWeights& w = env.weights;
  cmd->add_option("--max-steps", env.max_steps, "Episode step limit")->capture_default_str();
  cmd->add_option("--w-progress", w.progress, "Reward per metre of progress")->capture_default_str();
  cmd->add_option("--w-velocity", w.velocity, "Speed error penalty")->capture_default_str();
  cmd->add_option("--w-heading", w.heading, "Heading error penalty")->capture_default_str();
  cmd->add_option("--w-input", w.input, "Action magnitude penalty")->capture_default_str();
  cmd->add_option("--w-input-rate", w.input_rate, "Action change penalty")->capture_default_str();
  cmd->add_option("--r-collision", w.collision, "Collision reward")->capture_default_str();
  cmd->add_option("--r-oob", w.out_of_bounds, "Out-of-bounds reward")->capture_default_str();
  cmd->add_option("--r-goal", w.goal, "Goal reward")->capture_default_str();
  cmd->add_option("--w-risk", w.risk, "Perceived-risk penalty (risk-averse agent only)")
      ->capture_default_str();
}

// Echoes the resolved options of one command as a config file section and
// stores the same text in the run directory.
void echo_config(const CLI::App* cmd, const fs::path& out) {
  const std::string text = "[" + cmd->get_name() + "]\n" + cmd->config_to_str(true, false);
  std::cout << "# resolved configuration\n" << text << std::flush;
  fs::create_directories(out);
  std::ofstream(out / "config.cfg", std::ios::binary) << text;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

// ---- train ---------------------------------------------------------------

struct TrainOptions {
  TrainConfig train;
  EnvConfig env;
  std::string out = "runs/train";
  long log_every = 25;
};

void add_train(CLI::App& app, TrainOptions& o, std::function<int()>& run) {
  CLI::App* cmd = app.add_subcommand("train", "Train a policy with REINFORCE");
  TrainConfig& t = o.train;
  cmd->add_option("--seed", t.seed, "Master seed")->capture_default_str();
  cmd->add_option("--out", o.out, "Run directory")->capture_default_str();
  cmd->add_option("--episodes", t.total_episodes, "Training episodes")->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size, "Episodes per update")->capture_default_str();
  cmd->add_option("--gamma", t.gamma, "Discount factor")->capture_default_str();
  cmd->add_option("--lr", t.optimizer.lr, "AdamW learning rate")->capture_default_str();
  cmd->add_option("--weight-decay", t.optimizer.weight_decay, "AdamW decoupled weight decay")
      ->capture_default_str();
  cmd->add_option("--stage-a-end", t.stage_a_end, "First episode with a pedestrian")
      ->capture_default_str();
  cmd->add_option("--stage-b-end", t.stage_b_end, "First episode with a moving pedestrian")
      ->capture_default_str();
  cmd->add_option("--grad-clip", t.grad_clip, "Global gradient norm limit, 0 disables")
      ->capture_default_str();
  cmd->add_option("--whiten", t.whiten, "Whiten returns across the batch")->capture_default_str();
  cmd->add_option("--per-step-baseline", t.per_step_baseline,
                  "Baseline is the batch mean return at the same step")
      ->capture_default_str();
  cmd->add_option("--initial-std", t.initial_std, "Initial action std")->capture_default_str();
  cmd->add_option("--std-min", t.architecture.std_min, "Action std floor")->capture_default_str();
  cmd->add_option("--checkpoint-every", t.checkpoint_every, "Episodes between checkpoints")
      ->capture_default_str();
  cmd->add_flag("--risk-averse", t.risk_averse, "Add the perceived-risk penalty to the reward");
  cmd->add_option("--jobs", t.jobs, "Rollout threads")->default_val(default_jobs());
  cmd->add_option("--log-every", o.log_every, "Batches between progress lines")
      ->capture_default_str();
  add_env_options(cmd, o.env);

  run = [cmd, &o]() {
    TrainConfig& t = o.train;
    try {
      t.validate();
      o.env.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const fs::path out = resolve_output(o.out);
    echo_config(cmd, out);
    TrainingOutputs outputs;
    outputs.directory = out;
    outputs.on_batch = [&](const BatchLog& b) {
      if (o.log_every > 0 && (b.batch % o.log_every == 0 || b.episodes == t.total_episodes)) {
        std::printf("episodes %6ld  stage %s  return %8.2f  length %6.1f  goal %2d  collision %2d  oob %2d\n",
                    b.episodes, std::string(to_string(b.stage)).c_str(), b.mean_return,
                    b.mean_length, b.n_goal, b.n_collisions, b.n_oob);
        std::fflush(stdout);
      }
    };
    run_training(t, sidewalk_rollout(o.env, t), outputs);
    std::cout << "wrote " << (out / "policy.ckpt").string() << "\n";
    return kExitOk;
  };
}

// ---- eval ----------------------------------------------------------------

struct EvalOptions {
  std::string controller = "social-forces";
  std::string policy;
  std::string name;
  long episodes = 200;
  std::uint64_t seed = 11;
  int jobs = 1;
  std::string out = "runs/eval";
  bool traces = true;
  EnvConfig env;
};

Controller make_controller(const std::string& kind, const std::string& policy,
                           const std::string& name) {
  if (kind == "social-forces") return Controller::social_forces(name.empty() ? kind : name);
  if (kind == "rl") {
    if (policy.empty()) throw UsageError("--controller rl needs --policy");
    Checkpoint ckpt = load_checkpoint(policy);
    return Controller::rl(name.empty() ? "rl" : name, std::move(ckpt.params));
  }
  throw UsageError("unknown controller '" + kind + "'");
}

DistributionPlot make_plot(std::string title, std::string y_label, std::vector<NamedGroup> groups) {
  DistributionPlot plot;
  plot.title = std::move(title);
  plot.y_label = std::move(y_label);
  plot.groups = std::move(groups);
  return plot;
}

std::string summary(const std::vector<MetricsRow>& rows) {
  std::map<TerminationCause, int> causes;
  int success = 0;
  std::vector<double> risk, steer, side;
  for (const MetricsRow& r : rows) {
    ++causes[r.cause];
    success += r.success;
    risk.push_back(r.max_normalized_risk);
    steer.push_back(r.cum_steering);
    side.push_back(r.cum_sidestep);
  }
  std::ostringstream s;
  s << "episodes " << rows.size() << ", success " << success;
  for (const auto& [cause, n] : causes) s << ", " << to_string(cause) << " " << n;
  s << "\n";
  auto line = [&](const char* label, const std::vector<double>& v) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-20s median %.4f  IQR [%.4f, %.4f]\n", label, median(v),
                  quantile(v, 0.25), quantile(v, 0.75));
    s << buf;
  };
  line("max_normalized_risk", risk);
  line("cum_steering", steer);
  line("cum_sidestep", side);
  return s.str();
}

void add_eval(CLI::App& app, EvalOptions& o, std::function<int()>& run) {
  CLI::App* cmd = app.add_subcommand("eval", "Evaluate a controller against the CEI pedestrian");
  cmd->add_option("--controller", o.controller, "social-forces or rl")->capture_default_str();
  cmd->add_option("--policy", o.policy, "Checkpoint for --controller rl");
  cmd->add_option("--name", o.name, "Controller label in outputs");
  cmd->add_option("--episodes", o.episodes, "Evaluation episodes")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  cmd->add_option("--out", o.out, "Run directory")->capture_default_str();
  cmd->add_option("--traces", o.traces, "Write traces.csv and the trace figure")
      ->capture_default_str();
  cmd->add_option("--jobs", o.jobs, "Episode threads")->default_val(default_jobs());
  add_env_options(cmd, o.env);

  run = [cmd, &o]() {
    if (o.episodes <= 0) throw UsageError("--episodes must be positive");
    try {
      o.env.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const Controller controller = make_controller(o.controller, o.policy, o.name);
    const fs::path out = resolve_output(o.out);
    echo_config(cmd, out);
    const EvaluationResult r =
        run_evaluation(controller, o.episodes, o.seed, o.env, o.jobs, o.traces);
    export_metrics_csv(r.rows, out / "metrics.csv");

    const fs::path figures = out / "figures";
    if (o.traces) {
      export_traces_csv(r.traces, out / "traces.csv");
      render_traces_svg({{controller.name, r.traces}}, o.env.geometry, figures / "traces.svg");
    }
    std::vector<double> risk, steer, side;
    for (const MetricsRow& m : r.rows) {
      risk.push_back(m.max_normalized_risk);
      steer.push_back(m.cum_steering);
      side.push_back(m.cum_sidestep);
    }
    DistributionPlot plot = make_plot("Maximum perceived risk", "max risk / threshold",
                                      {{controller.name, risk}});
    plot.threshold_line = 1.0;
    render_distribution_svg(plot, figures / "risk.svg");
    render_distribution_svg(make_plot("Cumulative steering input", "integral |u_st| dt (rad/s)",
                                      {{controller.name, steer}}),
                            figures / "steering.svg");
    render_distribution_svg(make_plot("Cumulative sidestep input", "integral |u_ss| dt (m/s)",
                                      {{controller.name, side}}),
                            figures / "sidestep.svg");

    const std::string report = controller.name + "\n" + summary(r.rows);
    write_text(out / "report.txt", report);
    std::cout << report;
    return kExitOk;
  };
}

// ---- simulate ------------------------------------------------------------

struct SimulateOptions {
  std::string controller = "social-forces";
  std::string policy;
  std::uint64_t seed = 0;
  std::string out = "runs/simulate";
  bool svg = false;
  double offset_a = 0.05;
  double offset_b = 0.05;
  double threshold_a = 0.73;
  double threshold_b = 0.76;
  EnvConfig env;
};

constexpr const char* kPairHeader =
    "t,a_x,a_y,a_psi,a_v_f,a_v_l,b_x,b_y,b_psi,b_v_f,b_v_l,a_u_st,a_u_ss,b_u_st,b_u_ss,a_risk,"
    "b_risk,a_target,b_target,a_replanned,b_replanned";

int simulate_pair(const SimulateOptions& o, const fs::path& out) {
  CeiPairConfig config;
  config.geometry = o.env.geometry;
  config.body = o.env.pedestrian;
  config.a = o.env.cei;
  config.b = o.env.cei;
  config.a.risk_threshold = o.threshold_a;
  config.b.risk_threshold = o.threshold_b;
  config.dt = o.env.dt;
  config.max_steps = o.env.max_steps;
  try {
    config.a.validate();
    config.b.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const CeiPairResult result = simulate_cei_pair(config, o.offset_a, o.offset_b);

  std::ostringstream csv;
  csv << kPairHeader << '\n';
  Trace trace{"cei-vs-cei", 0, {}};
  for (const CeiPairStep& s : result.steps) {
    const double values[] = {s.t,          s.a.x,        s.a.y,         s.a.psi,      s.a.v_f,
                             s.a.v_l,      s.b.x,        s.b.y,         s.b.psi,      s.b.v_f,
                             s.b.v_l,      s.input_a.steering, s.input_a.sidestep,
                             s.input_b.steering, s.input_b.sidestep, s.risk_a, s.risk_b,
                             s.target_a,   s.target_b};
    for (double v : values) csv << format_double(v) << ',';
    csv << (s.replanned_a ? 1 : 0) << ',' << (s.replanned_b ? 1 : 0) << '\n';
    TraceRow row;
    row.t = s.t;
    row.ped_x = s.a.x;
    row.ped_y = s.a.y;
    row.robot_x = s.b.x;
    row.robot_y = s.b.y;
    trace.rows.push_back(row);
  }
  write_text(out / "trace.csv", csv.str());
  if (o.svg) render_traces_svg({{"CEI vs CEI", {trace}}}, config.geometry, out / "trace.svg");

  const char* outcome = result.collision       ? "collision"
                        : result.out_of_bounds ? "out_of_bounds"
                        : result.both_reached_goal ? "both reached their goals"
                                                   : "timeout";
  std::cout << "steps " << result.steps.size() << ", " << outcome << ", same-side deviations "
            << count_same_side_deviations(result) << "\n";
  return kExitOk;
}

void add_simulate(CLI::App& app, SimulateOptions& o, std::function<int()>& run) {
  CLI::App* cmd = app.add_subcommand("simulate", "Run and record a single episode");
  cmd->add_option("--controller", o.controller, "social-forces, rl or cei-vs-cei")
      ->capture_default_str();
  cmd->add_option("--policy", o.policy, "Checkpoint for --controller rl");
  cmd->add_option("--seed", o.seed, "Episode seed")->capture_default_str();
  cmd->add_option("--out", o.out, "Run directory")->capture_default_str();
  cmd->add_flag("--svg", o.svg, "Also write trace.svg");
  cmd->add_option("--offset-a", o.offset_a, "cei-vs-cei: lateral start of the left agent")
      ->capture_default_str();
  cmd->add_option("--offset-b", o.offset_b, "cei-vs-cei: lateral start of the right agent")
      ->capture_default_str();
  cmd->add_option("--threshold-a", o.threshold_a, "cei-vs-cei: risk threshold of the left agent")
      ->capture_default_str();
  cmd->add_option("--threshold-b", o.threshold_b, "cei-vs-cei: risk threshold of the right agent")
      ->capture_default_str();
  add_env_options(cmd, o.env);

  run = [cmd, &o]() {
    try {
      o.env.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const bool pair = o.controller == "cei-vs-cei";
    const Controller controller =
        pair ? Controller::social_forces() : make_controller(o.controller, o.policy, "");
    const fs::path out = resolve_output(o.out);
    echo_config(cmd, out);
    if (pair) return simulate_pair(o, out);

    const EpisodeEvaluation e = evaluate_episode(controller, o.env, 0, o.seed, true);
    export_trace_csv(e.trace, out / "trace.csv");
    if (o.svg) render_traces_svg({{controller.name, {e.trace}}}, o.env.geometry, out / "trace.svg");
    std::printf("steps %zu, %s, max normalized risk %.4f, steering %.4f, sidestep %.4f\n",
                e.trace.rows.size() - 1, std::string(to_string(e.metrics.cause)).c_str(),
                e.metrics.max_normalized_risk, e.metrics.cum_steering, e.metrics.cum_sidestep);
    return kExitOk;
  };
}

// ---- stats ---------------------------------------------------------------

struct StatsOptions {
  std::vector<std::string> files;
  std::string column = "max_normalized_risk";
  std::string svg;
};

void add_stats(CLI::App& app, StatsOptions& o, std::function<int()>& run) {
  CLI::App* cmd = app.add_subcommand("stats", "Compare a metric across metrics CSV files");
  cmd->add_option("files", o.files, "Metrics CSV files, one per controller")
      ->required()
      ->expected(2, -1)
      ->check(CLI::ExistingFile);
  cmd->add_option("--column", o.column, "Metric column")->capture_default_str();
  cmd->add_option("--svg", o.svg, "Also draw the distribution figure here");

  run = [&o]() {
    std::vector<NamedGroup> groups;
    for (const std::string& file : o.files) {
      const CsvTable table = read_csv(file);
      NamedGroup g;
      g.values = table.numeric_column(o.column);
      g.name = fs::path(file).parent_path().filename().string();
      if (!table.rows.empty()) {
        for (std::size_t i = 0; i < table.header.size(); ++i) {
          if (table.header[i] == "controller") g.name = table.rows.front()[i];
        }
      }
      for (const NamedGroup& other : groups) {
        if (other.name == g.name) g.name += " (" + file + ")";
      }
      if (g.values.empty()) throw std::runtime_error(file + " has no rows");
      groups.push_back(std::move(g));
    }
    const GroupComparison comparison = compare_groups(o.column, groups);
    std::cout << format_report(comparison, groups);
    if (!o.svg.empty()) {
      DistributionPlot plot = make_plot(o.column, o.column, groups);
      if (o.column == "max_normalized_risk") plot.threshold_line = 1.0;
      plot.annotation = annotation_lines(comparison);
      render_distribution_svg(plot, resolve_output(o.svg));
    }
    return kExitOk;
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sidewalk robot and CEI pedestrian simulator"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file with [train], [eval], [simulate] sections");
  app.allow_config_extras(CLI::config_extras_mode::error);

  TrainOptions train;
  EvalOptions eval;
  SimulateOptions simulate;
  StatsOptions stats;
  std::function<int()> run_train, run_eval, run_simulate, run_stats;
  add_train(app, train, run_train);
  add_eval(app, eval, run_eval);
  add_simulate(app, simulate, run_simulate);
  add_stats(app, stats, run_stats);
  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "train") return run_train();
    if (name == "eval") return run_eval();
    if (name == "simulate") return run_simulate();
    return run_stats();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
