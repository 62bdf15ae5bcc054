#include "bagent/runner/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "bagent/core/errors.hpp"
#include "bagent/core/serialize.hpp"

namespace bagent {
namespace {

namespace fs = std::filesystem;

std::string file_safe(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return out;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& extension) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

template <typename Fn>
void parallel_for(std::size_t n, int parallelism, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(parallelism, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::string_view to_string(RunCondition c) {
  switch (c) {
    case RunCondition::Clean: return "clean";
    case RunCondition::Triggered: return "triggered";
    case RunCondition::Dormant: return "dormant";
  }
  return "?";
}

StageSet make_stages(const RunConfig& config, const TaskInstance& instance, std::shared_ptr<const Backbone> backbone,
                     bool attacked) {
  StageSet clean;
  clean.planner = std::make_shared<BackbonePlanner>(std::move(backbone));
  clean.memory = std::make_shared<StoreRetriever>(std::make_shared<const MemoryStore>(index_corpus(instance.corpus)),
                                                  config.retrieval);
  clean.tools = std::make_shared<EnvironmentToolExecutor>();
  if (!attacked) return clean;
  if (!config.attack) throw ConfigError("attack", "condition requires an attack");
  return build_attack(attack_spec_for(*config.attack, instance.attack_target), clean).stages;
}

InstanceRun run_instance(const RunConfig& config, const TaskInstance& instance, RunCondition condition,
                         std::shared_ptr<const Backbone> backbone) {
  InstanceRun out;
  const bool attacked = condition != RunCondition::Clean;
  out.meta.run_id = instance.query.id + "." + std::string(to_string(condition));
  out.meta.condition = std::string(to_string(condition));
  out.meta.backbone = backbone ? backbone->name() : "";
  out.meta.instance = to_json(instance);
  out.meta.agent = config.agent;
  if (attacked && config.attack) out.meta.attack = to_json(attack_spec_for(*config.attack, instance.attack_target));

  Query q = instance.query;
  if (condition == RunCondition::Triggered && config.attack) q = triggered_query(q, config.attack->trigger);
  try {
    StageSet stages = make_stages(config, instance, backbone, attacked);
    auto env = make_environment(instance);
    RunOptions options{config.agent, config.step_budget, config.seed, config.digest};
    out.trajectory = run(q, options, stages, *env);
  } catch (const std::exception& e) {
    Trajectory& t = out.trajectory;
    t = Trajectory{};
    t.query = q;
    t.seed = config.seed;
    t.config_digest = config.digest;
    t.termination = Termination::Error;
    t.error = std::string("setup: ") + e.what();
    t.final_context_digest = context_digest(Context{});
    t.final_state_digest = state_digest(InternalState{});
  }
  return out;
}

ExperimentResult run_experiment(const RunConfig& config) {
  const std::string started = utc_now();
  auto instances = load_task(config.task_kind, config.instances, LoadOptions{config.step_budget});
  auto backbone = make_backbone(config.backbone);

  struct Job {
    std::size_t instance;
    RunCondition condition;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    jobs.push_back({i, RunCondition::Clean});
    if (config.attack) jobs.push_back({i, RunCondition::Triggered});
  }

  const fs::path traj_dir = config.out_dir / "trajectories";
  std::error_code ec;
  fs::create_directories(traj_dir, ec);
  if (ec) throw Error("cannot create " + traj_dir.string() + ": " + ec.message());

  std::vector<InstanceRun> runs(jobs.size());
  std::vector<VerifierResult> verdicts(jobs.size());
  std::vector<fs::path> paths(jobs.size());
  std::vector<std::string> failures(jobs.size());
  parallel_for(jobs.size(), config.parallelism, [&](std::size_t j) {
    const TaskInstance& inst = instances[jobs[j].instance];
    runs[j] = run_instance(config, inst, jobs[j].condition, backbone);
    try {
      verdicts[j] = evaluate(inst, runs[j].trajectory, config.detector);
    } catch (const std::exception& e) {
      verdicts[j].detail = std::string("verifier failed: ") + e.what();
    }
    paths[j] = traj_dir / (file_safe(inst.query.id) + "." + std::string(to_string(jobs[j].condition)) + ".jsonl");
    try {
      write_trajectory_log(paths[j], runs[j].trajectory, runs[j].meta);
    } catch (const std::exception& e) {
      failures[j] = e.what();
    }
  });
  for (const auto& f : failures) {
    if (!f.empty()) throw Error(f);
  }

  ExperimentResult result;
  result.trajectory_paths = paths;
  std::map<std::string, std::vector<std::int64_t>> tokens;
  const std::string task = std::string(to_string(config.task_kind));
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    RunOutcome o;
    o.task = task;
    o.backbone = backbone->name();
    o.triggered = jobs[j].condition == RunCondition::Triggered;
    if (o.triggered) o.attack = std::string(to_string(config.attack->name));
    o.verifier = verdicts[j];
    o.tokens = runs[j].trajectory.total_tokens;
    if (runs[j].trajectory.termination == Termination::Error) ++result.errors;
    tokens[o.attack.value_or("clean")].push_back(o.tokens);
    result.outcomes.push_back(std::move(o));
  }
  result.metrics = metrics_rows(result.outcomes);
  result.overhead = token_overhead(tokens, "clean");
  auto aggregate = aggregate_by_channel(result.metrics);
  for (const auto& a : aggregate) {
    if (a.planning_asr || a.memory_asr || a.tools_asr) result.aggregate.push_back(a);
  }
  emit_report(result.metrics, result.aggregate, result.overhead, config.out_dir);

  Json meta{{"started_at", started},
            {"finished_at", utc_now()},
            {"config_digest", config.digest},
            {"parallelism", config.parallelism},
            {"runs", jobs.size()},
            {"errors", result.errors}};
  write_text(config.out_dir / "run_meta.json", meta.dump(2) + "\n");
  return result;
}

ReplayResult replay(const fs::path& log_path, const DetectorConfig& detector) {
  LoggedRun logged = read_trajectory_log(log_path);
  const Trajectory& traj = logged.trajectory;
  TaskInstance instance;
  try {
    instance = parse_instance(traj.query.task_kind, logged.meta.instance, "instance");
  } catch (const std::exception& e) {
    throw CorruptionError(0, std::string("header instance: ") + e.what());
  }
  auto env = make_environment(instance);
  Context x = initial_context(*env);
  InternalState s = initial_state(*env, nullptr);
  std::int64_t tokens = 0;
  for (std::size_t t = 0; t < traj.records.size(); ++t) {
    const StepRecord& r = traj.records[t];
    if (r.context_digest != context_digest(x) || r.state_digest != state_digest(s)) {
      const std::size_t bad = t == 0 ? 0 : t - 1;
      throw CorruptionError(bad, "digest chain broken at step " + std::to_string(bad));
    }
    for (const auto& tool : r.tool) {
      if (!tool.empty()) env->dispatch(tool.input);
    }
    x = update_context(x, r.plan, r.memory, r.tool, logged.meta.agent.calls);
    s = update_state(s, r.plan, r.memory, r.tool, env->snapshot());
    tokens += r.plan.usage.total();
    for (const auto& tool : r.tool) tokens += tool.tokens_in + tool.tokens_out;
  }
  if (traj.final_context_digest != context_digest(x) || traj.final_state_digest != state_digest(s)) {
    if (traj.records.empty()) throw CorruptionError(CorruptionError::kFooter, "final digests do not match");
    const std::size_t bad = traj.records.size() - 1;
    throw CorruptionError(bad, "digest chain broken at step " + std::to_string(bad));
  }
  if (tokens != traj.total_tokens) throw CorruptionError(CorruptionError::kFooter, "total_tokens does not match records");

  ReplayResult result{traj, logged.meta, evaluate(instance, traj, detector)};
  return result;
}

std::vector<fs::path> report(const fs::path& in, const fs::path& out_dir, const AggregateOptions& options) {
  if (!fs::exists(in)) throw Error("report input not found: " + in.string());
  std::vector<fs::path> files;
  if (fs::is_directory(in)) {
    for (const auto& f : sorted_files(in, ".csv")) {
      std::ifstream probe_in(f);
      std::string header;
      std::getline(probe_in, header);
      if (!header.empty() && header.back() == '\r') header.pop_back();
      if (header == "task,backbone,attack,clean_acc,asr,acc") files.push_back(f);
    }
  } else {
    files.push_back(in);
  }
  if (files.empty()) throw Error("no metrics CSV found under " + in.string());
  std::vector<MetricsRow> rows;
  for (const auto& f : files) {
    auto part = read_metrics_csv(f);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  auto aggregate = aggregate_by_channel(rows, options);
  return emit_report(rows, aggregate, {}, out_dir);
}

ProbeResult probe(const fs::path& target_dir, const fs::path& reference_dir, const fs::path& out_dir,
                  const std::set<std::string>& target_tokens) {
  if (!fs::is_directory(target_dir)) throw Error("target log directory not found: " + target_dir.string());
  if (!fs::is_directory(reference_dir)) throw Error("reference log directory not found: " + reference_dir.string());
  ProbeResult result;
  for (const auto& path : sorted_files(target_dir, ".jsonl")) {
    const fs::path ref_path = reference_dir / path.filename();
    if (!fs::exists(ref_path)) throw Error("missing reference log " + ref_path.string());
    LoggedRun target = read_trajectory_log(path);
    LoggedRun reference = read_trajectory_log(ref_path);
    auto records = collect_token_probs(target.trajectory, target_tokens);
    auto ref_records = collect_token_probs(reference.trajectory, target_tokens);
    ProbeScore score = score_trajectory(records, ref_records);
    ProbeRow row;
    row.run_id = target.meta.run_id.empty() ? path.stem().string() : target.meta.run_id;
    row.suspicion = score.suspicion;
    row.label = target.meta.condition == "triggered";
    row.aligned = score.aligned;
    row.unaligned = score.unaligned;
    result.rows.push_back(std::move(row));
  }

  std::vector<double> scores;
  std::vector<bool> labels;
  for (const auto& r : result.rows) {
    if (!r.suspicion) continue;
    scores.push_back(*r.suspicion);
    labels.push_back(r.label);
  }
  const bool both = std::find(labels.begin(), labels.end(), true) != labels.end() &&
                    std::find(labels.begin(), labels.end(), false) != labels.end();
  if (both) result.curve = roc(scores, labels);

  fs::create_directories(out_dir);
  std::string csv = "run_id,suspicion,label,aligned,unaligned\n";
  for (const auto& r : result.rows) {
    csv += r.run_id + "," + (r.suspicion ? format_fixed(*r.suspicion, 6) : std::string()) + "," +
           (r.label ? "1" : "0") + "," + std::to_string(r.aligned) + "," + std::to_string(r.unaligned) + "\n";
  }
  write_text(out_dir / "suspicion.csv", csv);
  if (result.curve) {
    std::string points = "fpr,tpr\n";
    for (const auto& [fpr, tpr] : result.curve->points) points += format_fixed(fpr, 6) + "," + format_fixed(tpr, 6) + "\n";
    write_text(out_dir / "roc.csv", points);
    write_text(out_dir / "auroc.txt", format_fixed(result.curve->auroc, 6) + "\n");
  }
  return result;
}

void write_synthetic_probe_logs(const SyntheticProbeConfig& config, const fs::path& out_dir) {
  const fs::path target_dir = out_dir / "target";
  const fs::path reference_dir = out_dir / "reference";
  fs::create_directories(target_dir);
  fs::create_directories(reference_dir);
  for (const auto& run : synthesize_probe_runs(config)) {
    LogMeta meta;
    meta.run_id = run.run_id;
    meta.condition = run.triggered ? "triggered" : "clean";
    meta.backbone = "synthetic-target";
    write_trajectory_log(target_dir / (run.run_id + ".jsonl"), run.target, meta);
    meta.backbone = "synthetic-reference";
    write_trajectory_log(reference_dir / (run.run_id + ".jsonl"), run.reference, meta);
  }
}

}  // namespace bagent
