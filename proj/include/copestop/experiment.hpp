#pragma once

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "copestop/config.hpp"
#include "copestop/simulator.hpp"
#include "copestop/stats.hpp"

namespace copestop {

/// One matrix cell: a (load, seed, policy) run flattened for CSV emission.
struct RunRecord {
  int load = 0;
  std::uint64_t seed = 0;
  PolicyKind policy = PolicyKind::OptimalStopping;
  MetricsReport report;
};

struct MatrixResult {
  // Completed cells in deterministic order (loads x seeds x policies);
  // failed cells are listed with their coordinates instead of emitting rows.
  std::vector<RunRecord> records;
  std::vector<std::string> failures;
};

namespace detail {

inline constexpr std::uint64_t kTagMatrixCell = 0x6d747278ull;  // "mtrx"

inline int resolved_parallelism(int requested, std::size_t cells) {
  int cap = requested;
  if (cap <= 0) {
    if (const char* env = std::getenv("COPESTOP_MAX_PARALLEL")) cap = std::atoi(env);
  }
  if (cap <= 0) cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap <= 0) cap = 1;
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cap), cells));
}

inline void format_double(std::ostream& out, double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  out.write(buf, ptr - buf);
  (void)ec;
}

}  // namespace detail

/// Runs the full scenario matrix. Policies sharing a (load, seed) cell face
/// identical topologies and arrival traces: the run seed mixes only the seed
/// and the load, never the policy. Cells execute concurrently up to the
/// requested parallelism (or COPESTOP_MAX_PARALLEL / hardware concurrency),
/// and the record order is independent of scheduling.
inline MatrixResult run_matrix(const SimConfig& base, const std::vector<PolicyKind>& policies,
                               const std::vector<int>& loads,
                               const std::vector<std::uint64_t>& seeds, int max_parallel = 0) {
  if (policies.empty() || loads.empty() || seeds.empty())
    throw std::invalid_argument("run_matrix requires nonempty policies, loads and seeds");
  struct Cell {
    int load;
    std::uint64_t seed;
    PolicyKind policy;
  };
  std::vector<Cell> cells;
  for (int load : loads)
    for (std::uint64_t seed : seeds)
      for (PolicyKind policy : policies) cells.push_back({load, seed, policy});

  std::vector<RunRecord> slots(cells.size());
  std::vector<std::string> failures(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      RunRecord& record = slots[i];
      record.load = cell.load;
      record.seed = cell.seed;
      record.policy = cell.policy;
      try {
        SimConfig config = base;
        config.flow_count = cell.load;
        config.policy = cell.policy;
        const std::uint64_t run_seed =
            derive_seed(cell.seed, detail::kTagMatrixCell, static_cast<std::uint64_t>(cell.load));
        record.report = run(config, run_seed).report;
      } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "cell load=" << cell.load << " seed=" << cell.seed << " policy="
            << policy_name(cell.policy) << ": " << e.what();
        failures[i] = msg.str();
      }
    }
  };
  const int parallelism = detail::resolved_parallelism(max_parallel, cells.size());
  if (parallelism <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < parallelism; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  MatrixResult out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (failures[i].empty())
      out.records.push_back(std::move(slots[i]));
    else
      out.failures.push_back(std::move(failures[i]));
  }
  return out;
}

inline constexpr std::string_view kCsvHeader =
    "load,seed,policy,coding_gain,mean_delay,throughput,energy_per_node_mj,transmissions,"
    "degree_histogram,drops_overflow,drops_unroutable,decode_failures,generated,delivered,"
    "in_flight,est_opportunity_rate,est_degree_growth,observed_packet_raise,"
    "observed_report_raise,rng";

/// Deterministic CSV emission: fixed column order, shortest round-trip
/// number formatting, one row per record. Refuses an empty record list.
inline void emit_csv(const std::vector<RunRecord>& records, std::ostream& out) {
  if (records.empty()) throw std::invalid_argument("no records to emit");
  out << kCsvHeader << '\n';
  for (const RunRecord& r : records) {
    const MetricsReport& m = r.report;
    out << r.load << ',' << r.seed << ',' << policy_name(r.policy) << ',';
    detail::format_double(out, m.coding_gain);
    out << ',';
    if (m.mean_delay) detail::format_double(out, *m.mean_delay);
    out << ',';
    detail::format_double(out, m.throughput);
    out << ',';
    detail::format_double(out, m.energy_per_node_mj);
    out << ',' << m.transmissions << ',';
    bool first = true;
    for (const auto& [degree, count] : m.degree_histogram) {
      if (!first) out << ';';
      out << degree << ':' << count;
      first = false;
    }
    out << ',' << m.drops_overflow << ',' << m.drops_unroutable << ',' << m.decode_failures
        << ',' << m.generated << ',' << m.delivered << ',' << m.in_flight << ',';
    detail::format_double(out, m.est_opportunity_rate);
    out << ',';
    detail::format_double(out, m.est_degree_growth);
    out << ',';
    detail::format_double(out, m.observed_packet_raise);
    out << ',';
    detail::format_double(out, m.observed_report_raise);
    out << ',' << m.rng_algorithm << '\n';
  }
}

inline void emit_csv(const std::vector<RunRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  emit_csv(records, out);
}

inline std::string csv_string(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  emit_csv(records, out);
  return out.str();
}

/// Quantile-quantile data against Exp(rate): one `(theoretical, empirical)`
/// pair per order statistic at plotting positions (i+0.5)/n, and the KS
/// statistic in a trailing comment line.
inline void emit_qq_data(std::vector<double> samples, double rate, std::ostream& out) {
  if (samples.size() < 100)
    throw std::invalid_argument("qq data needs at least 100 samples, got " +
                                std::to_string(samples.size()));
  const double ks = ks_statistic_exponential(samples, rate);
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  out << "theoretical_quantile,empirical_quantile\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    detail::format_double(out, exponential_quantile((static_cast<double>(i) + 0.5) / n, rate));
    out << ',';
    detail::format_double(out, samples[i]);
    out << '\n';
  }
  out << "# ks_statistic = ";
  detail::format_double(out, ks);
  out << " n = " << samples.size() << " rate = ";
  detail::format_double(out, rate);
  out << '\n';
}

inline void emit_qq_data(const std::vector<double>& samples, double rate,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  emit_qq_data(samples, rate, out);
}

}  // namespace copestop
