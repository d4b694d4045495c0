#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "copestop/acceptance.hpp"
#include "copestop/config.hpp"
#include "copestop/experiment.hpp"
#include "copestop/simulator.hpp"

namespace {

using namespace copestop;

std::vector<PolicyKind> parse_policies(const std::vector<std::string>& names) {
  std::vector<PolicyKind> out;
  for (const std::string& name : names) out.push_back(parse_policy(name));
  return out;
}

void write_trace(const std::vector<TraceEntry>& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "time,kind,node,detail\n";
  for (const TraceEntry& t : trace)
    out << t.time << ',' << t.kind << ',' << t.node << ',' << t.detail << '\n';
}

int cmd_run(const std::string& config_path, const std::string& out_path,
            std::vector<std::uint64_t> seeds, std::vector<int> loads,
            const std::vector<std::string>& policy_names, const std::string& trace_path,
            int parallel, bool quiet) {
  ScenarioConfig scenario = parse_config_file(config_path);
  if (seeds.empty()) seeds = {scenario.seed};
  if (loads.empty()) loads = {scenario.sim.flow_count};
  std::vector<PolicyKind> policies = policy_names.empty()
                                         ? std::vector<PolicyKind>{scenario.sim.policy}
                                         : parse_policies(policy_names);
  if (!quiet) std::cout << "# effective configuration\n" << echo_config(scenario);

  if (!trace_path.empty()) {
    if (seeds.size() != 1 || loads.size() != 1 || policies.size() != 1) {
      std::cerr << "--trace requires exactly one (seed, load, policy) cell\n";
      return 2;
    }
    SimConfig cfg = scenario.sim;
    cfg.flow_count = loads[0];
    cfg.policy = policies[0];
    cfg.trace_enabled = true;
    const std::uint64_t run_seed =
        derive_seed(seeds[0], detail::kTagMatrixCell, static_cast<std::uint64_t>(loads[0]));
    const RunResult result = run(cfg, run_seed);
    write_trace(result.trace, trace_path);
    RunRecord record{loads[0], seeds[0], policies[0], result.report};
    emit_csv({record}, out_path);
    std::cout << "wrote " << out_path << " (1 record) and trace " << trace_path << "\n";
    return 0;
  }

  const MatrixResult result = run_matrix(scenario.sim, policies, loads, seeds, parallel);
  if (!result.records.empty()) {
    emit_csv(result.records, out_path);
    std::cout << "wrote " << out_path << " (" << result.records.size() << " records)\n";
  }
  if (!result.failures.empty()) {
    for (const std::string& failure : result.failures) std::cerr << "failed: " << failure << "\n";
    return 1;
  }
  return 0;
}

int cmd_verify() {
  const auto results = acceptance::run_all(std::cout);
  return acceptance::all_passed(results) ? 0 : 1;
}

int cmd_qq(const std::string& config_path, const std::string& out_path) {
  ScenarioConfig scenario = parse_config_file(config_path);
  SimConfig cfg = scenario.sim;
  cfg.collect_opportunity_samples = true;
  const RunResult result = run(cfg, scenario.seed);
  emit_qq_data(result.opportunity_interarrivals, cfg.opportunity_rate, out_path);
  std::cout << "wrote " << out_path << " (" << result.opportunity_interarrivals.size()
            << " samples, ks = "
            << ks_statistic_exponential(result.opportunity_interarrivals, cfg.opportunity_rate)
            << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"COPE-style inter-flow coding simulator with an optimal-stopping send rule"};
  app.require_subcommand(1);

  std::string config_path, out_path = "results.csv", trace_path, qq_out = "qq.csv";
  std::vector<std::uint64_t> seeds;
  std::vector<int> loads;
  std::vector<std::string> policies;
  int parallel = 0;
  bool quiet = false;

  CLI::App* run_cmd = app.add_subcommand("run", "run a scenario matrix and emit a results CSV");
  run_cmd->add_option("--config", config_path, "flat key=value scenario file")->required();
  run_cmd->add_option("--out", out_path, "output CSV path");
  run_cmd->add_option("--seeds", seeds, "comma-separated master seeds")->delimiter(',');
  run_cmd->add_option("--loads", loads, "comma-separated flow counts")->delimiter(',');
  run_cmd->add_option("--policies", policies,
                      "comma-separated policies (optimal-stopping,immediate-send,no-coding)")
      ->delimiter(',');
  run_cmd->add_option("--trace", trace_path, "per-event trace output (single cell only)");
  run_cmd->add_option("--parallel", parallel, "max concurrent cells (default: env/hardware)");
  run_cmd->add_flag("--quiet", quiet, "suppress the effective-config echo");

  CLI::App* verify_cmd =
      app.add_subcommand("verify", "run the acceptance suite and print a pass/fail table");

  CLI::App* qq_cmd = app.add_subcommand("qq", "emit QQ data for the opportunity inter-arrivals");
  qq_cmd->add_option("--config", config_path, "flat key=value scenario file")->required();
  qq_cmd->add_option("--out", qq_out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed())
      return cmd_run(config_path, out_path, seeds, loads, policies, trace_path, parallel, quiet);
    if (verify_cmd->parsed()) return cmd_verify();
    if (qq_cmd->parsed()) return cmd_qq(config_path, qq_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
