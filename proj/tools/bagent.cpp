#include <CLI11.hpp>

#include <iostream>
#include <set>
#include <string>

#include "bagent/core/errors.hpp"
#include "bagent/runner/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

std::set<std::string> split_tokens(const std::string& csv) {
  std::set<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.insert(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backdoor-attack benchmark harness for tool-using LLM agents"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run clean and triggered conditions for one configuration");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();

  std::string log_path;
  std::int64_t min_speed = 2, braking_gap = 1;
  auto* rep = app.add_subcommand("replay", "Re-verify a trajectory log and its digest chain");
  rep->add_option("--log", log_path, "Trajectory log (.jsonl)")->required();
  rep->add_option("--sudden-stop-min-speed", min_speed, "Drive detector threshold");
  rep->add_option("--braking-gap", braking_gap, "Drive detector gap");

  std::string report_in, report_out;
  auto* report = app.add_subcommand("report", "Build metric and channel-aggregate tables from metrics CSVs");
  report->add_option("--in", report_in, "Metrics CSV file or directory")->required();
  report->add_option("--out", report_out, "Output directory")->required();

  std::string target_dir, reference_dir, probe_out, targets = "DROP,DELETE_ALL,DROP_TABLE";
  auto* probe = app.add_subcommand("probe", "Score target logs against reference logs by token probability");
  probe->add_option("--target", target_dir, "Target-model trajectory logs")->required();
  probe->add_option("--reference", reference_dir, "Reference-model trajectory logs")->required();
  probe->add_option("--out", probe_out, "Output directory")->required();
  probe->add_option("--targets", targets, "Comma-separated target tokens");

  bagent::SyntheticProbeConfig synth;
  std::string synth_out;
  auto* syn = app.add_subcommand("synth-probe", "Write synthetic probe logs with a known target-token boost");
  syn->add_option("--out", synth_out, "Output directory (target/ and reference/ are created)")->required();
  syn->add_option("--instances", synth.instances, "Clean/triggered pairs");
  syn->add_option("--delta", synth.delta, "Target-token probability boost in triggered runs");
  syn->add_option("--noise", synth.noise, "Per-token target-model offset bound");
  syn->add_option("--seed", synth.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) {
      const auto config = bagent::parse_config(config_path);
      const auto result = bagent::run_experiment(config);
      std::cout << "runs: " << result.trajectory_paths.size() << "  errors: " << result.errors << "\n";
      std::cout << bagent::metrics_markdown(result.metrics);
      std::cout << "reports written to " << config.out_dir.string() << "\n";
      return kOk;
    }
    if (*rep) {
      const auto result = bagent::replay(log_path, bagent::DetectorConfig{min_speed, braking_gap});
      std::cout << "digest chain ok (" << result.trajectory.records.size() << " steps)\n";
      std::cout << "success: " << (result.verifier.success ? "true" : "false")
                << "  attacker_behavior: " << (result.verifier.attacker_behavior ? "true" : "false") << "\n";
      if (!result.verifier.detail.empty()) std::cout << "detail: " << result.verifier.detail << "\n";
      return kOk;
    }
    if (*report) {
      for (const auto& p : bagent::report(report_in, report_out)) std::cout << p.string() << "\n";
      return kOk;
    }
    if (*probe) {
      const auto result = bagent::probe(target_dir, reference_dir, probe_out, split_tokens(targets));
      std::cout << "scored " << result.rows.size() << " runs\n";
      if (result.curve) std::cout << "auroc: " << bagent::format_fixed(result.curve->auroc, 6) << "\n";
      return kOk;
    }
    if (*syn) {
      bagent::write_synthetic_probe_logs(synth, synth_out);
      std::cout << "wrote " << synth.instances * 2 << " runs to " << synth_out << "\n";
      return kOk;
    }
  } catch (const bagent::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const bagent::LoadError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const bagent::CorruptionError& e) {
    std::cerr << "corruption at " << (e.at_footer() ? std::string("footer") : "step " + std::to_string(e.step()))
              << ": " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
