#pragma once

// Benchmark harness: three response-time sweeps over the shipping modes,
// emitted as CSV rows suitable for external plotting.
//
//   vary_cardinality  result size grows with the distinct group count;
//                     sampling off, coordinator has more cores than the worker.
//   vary_cores        worker core budget sweeps 1..28 under 10% sampling,
//                     both sampling methods.
//   vary_queries      identical-query batches of growing size under 10%
//                     sampling, equal core budgets.
//
// Rows carry exactly the telemetry of a direct dispatch call; the harness
// adds nothing to the measurements.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shipwright/clusternode.hpp"
#include "shipwright/socket_backend.hpp"

namespace shipwright {

enum class Experiment { vary_cardinality, vary_cores, vary_queries };

// sim runs in deterministic virtual time; socket runs the framed protocol
// over loopback TCP and reports wall-clock times (no timing guarantees).
enum class Backend { sim, socket };

inline const char* to_string(Experiment e) noexcept {
  switch (e) {
    case Experiment::vary_cardinality: return "vary_cardinality";
    case Experiment::vary_cores: return "vary_cores";
    case Experiment::vary_queries: return "vary_queries";
  }
  return "?";
}

struct ExperimentSpec {
  Experiment name = Experiment::vary_cardinality;
  std::vector<std::uint64_t> sweep;  // distinct_b / worker cores / batch size
  GenSpec base{10'000'000, 2, Order::sorted_by_b, 42};
  ClusterSetup setup{};
  SampleSpec sample{SampleMethod::bernoulli, 0.1, 7};
  std::uint64_t cluster_size = 1024;
  unsigned repetitions = 3;
  std::string out_path;       // empty: do not write a file
  bool emit_gnuplot = false;  // also write <out_path>.gp
  Backend backend = Backend::sim;
};

struct CsvRow {
  std::string experiment;
  std::string mode;
  std::string sampling;
  std::string sweep_param;
  std::uint64_t sweep_value = 0;
  double response_time_s = 0.0;
  std::uint64_t bytes_transferred = 0;
  double worker_cpu_s = 0.0;
  double coordinator_cpu_s = 0.0;
  std::uint64_t result_entries = 0;
  bool timed_out = false;
};

inline constexpr const char* kCsvHeader =
    "experiment,mode,sampling,sweep_param,sweep_value,response_time_s,"
    "bytes_transferred,worker_cpu_s,coordinator_cpu_s,result_entries,timed_out";

inline std::string to_csv_line(const CsvRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.9f,%llu,%.9f,%.9f,%llu,%d",
                r.response_time_s, static_cast<unsigned long long>(r.bytes_transferred),
                r.worker_cpu_s, r.coordinator_cpu_s,
                static_cast<unsigned long long>(r.result_entries), r.timed_out ? 1 : 0);
  return r.experiment + "," + r.mode + "," + r.sampling + "," + r.sweep_param + "," +
         std::to_string(r.sweep_value) + "," + buf;
}

inline void write_csv(const std::string& path, const std::vector<CsvRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open CSV output: " + path);
  out << kCsvHeader << "\n";
  for (const CsvRow& r : rows) out << to_csv_line(r) << "\n";
  if (!out.flush()) throw std::runtime_error("failed writing CSV: " + path);
}

// Companion gnuplot script (plain text, no plotting dependency in-repo).
inline void write_gnuplot(const std::string& csv_path) {
  const std::string gp_path = csv_path + ".gp";
  std::ofstream out(gp_path);
  if (!out) throw std::runtime_error("cannot open gnuplot output: " + gp_path);
  out << "# gnuplot script for " << csv_path << "\n"
      << "set datafile separator ','\n"
      << "set key autotitle columnheader outside\n"
      << "set logscale x\n"
      << "set xlabel 'sweep value'\n"
      << "set ylabel 'response time [s]'\n"
      << "plot for [m in 'fs ds'] for [s in 'none bernoulli cluster'] \\\n"
      << "  '" << csv_path << "' using 5:(strcol(2) eq m && strcol(3) eq s ? $6 : NaN) \\\n"
      << "  with linespoints title m.'/'.s\n";
  if (!out.flush()) throw std::runtime_error("failed writing gnuplot script: " + gp_path);
}

// Expected distinct groups captured by a sample of the generator's data,
// where every group holds ~rows/distinct_b tuples. Supplies the planner's
// result-cardinality estimate; exact knowledge of the synthetic data stands
// in for the cardinality estimator a real system would have.
inline std::uint64_t expected_sample_groups(std::uint64_t rows, std::uint64_t distinct_b,
                                            const SampleSpec& spec, Order order,
                                            std::uint64_t cluster_size) {
  if (rows == 0 || distinct_b == 0) return 0;
  const double d = static_cast<double>(distinct_b);
  const double group = static_cast<double>(rows) / d;
  const double p = spec.effective_rate();
  double captured = d;
  switch (spec.method) {
    case SampleMethod::none:
      break;
    case SampleMethod::bernoulli:
      captured = d * (1.0 - std::pow(1.0 - p, group));
      break;
    case SampleMethod::cluster: {
      // Sorted data: a group spans ~1 + (group-1)/cluster_size clusters.
      // Shuffled data: each of its tuples lands in its own cluster.
      const double spans = order == Order::sorted_by_b
                               ? 1.0 + (group - 1.0) / static_cast<double>(cluster_size)
                               : group;
      captured = d * (1.0 - std::pow(1.0 - p, spans));
      break;
    }
  }
  const auto est = static_cast<std::uint64_t>(std::llround(captured));
  return std::min(est, rows);
}

namespace detail {

inline CsvRow row_from(Experiment exp, const char* sweep_param, std::uint64_t sweep_value,
                       const SampleSpec& spec, const Telemetry& tel) {
  CsvRow r;
  r.experiment = to_string(exp);
  r.mode = to_string(tel.mode);
  r.sampling = to_string(spec.method);
  r.sweep_param = sweep_param;
  r.sweep_value = sweep_value;
  r.response_time_s = tel.response_time_s;
  r.bytes_transferred = tel.bytes_transferred;
  r.worker_cpu_s = tel.worker_cpu_s;
  r.coordinator_cpu_s = tel.coordinator_cpu_s;
  r.result_entries = tel.result_entries;
  r.timed_out = tel.timed_out;
  return r;
}

inline void finish_experiment(const ExperimentSpec& spec, const std::vector<CsvRow>& rows) {
  if (!spec.out_path.empty()) {
    write_csv(spec.out_path, rows);
    if (spec.emit_gnuplot) write_gnuplot(spec.out_path);
  }
}

// Dispatches one sweep point on the chosen backend. For the socket backend a
// loopback worker serves the relation for the lifetime of the runner.
class PointRunner {
 public:
  PointRunner(Backend backend, const Relation& rel, const ClusterLayout& lay)
      : backend_(backend), rel_(&rel), lay_(lay) {
    if (backend_ == Backend::socket) {
      worker_.emplace(rel, lay);
      port_ = worker_->start();
    }
  }

  Telemetry run(const ClusterSetup& setup, std::span<const Query> batch, ShipMode mode) {
    if (backend_ == Backend::sim) {
      return dispatch(setup, *rel_, lay_, batch,
                      mode == ShipMode::fs ? ModeChoice::fs : ModeChoice::ds)
          .telemetry;
    }
    SocketCoordinator coord("127.0.0.1", port_);
    return run_socket_batch(setup, coord, rel_->row_count(), lay_, batch, mode).second;
  }

 private:
  Backend backend_;
  const Relation* rel_;
  ClusterLayout lay_;
  std::optional<SocketWorker> worker_;
  std::uint16_t port_ = 0;
};

}  // namespace detail

// Result-size sweep. Sampling is off (result size would otherwise be
// nondeterministic); the coordinator must out-core the worker.
inline std::vector<CsvRow> exp_vary_cardinality(const ExperimentSpec& spec) {
  if (spec.setup.coordinator_cores <= spec.setup.worker_cores) {
    throw std::invalid_argument(
        "vary_cardinality: coordinator must have more cores than the worker");
  }
  if (spec.sweep.empty() || spec.repetitions == 0) {
    throw std::invalid_argument("vary_cardinality: empty sweep or zero repetitions");
  }
  std::vector<CsvRow> rows;
  for (const std::uint64_t distinct : spec.sweep) {
    GenSpec gen = spec.base;
    gen.distinct_b = distinct;
    const Relation rel = generate(gen);
    const ClusterLayout lay = layout(rel, spec.cluster_size);
    detail::PointRunner runner(spec.backend, rel, lay);
    const Query query{0, SampleSpec{}, false};
    for (const ShipMode mode : {ShipMode::fs, ShipMode::ds}) {
      for (unsigned rep = 0; rep < spec.repetitions; ++rep) {
        const Telemetry tel = runner.run(spec.setup, std::span(&query, 1), mode);
        rows.push_back(detail::row_from(Experiment::vary_cardinality, "distinct_b",
                                        distinct, query.sample, tel));
      }
    }
  }
  detail::finish_experiment(spec, rows);
  return rows;
}

// Worker-load sweep at distinct_b = 2, both sampling methods.
inline std::vector<CsvRow> exp_vary_cores(const ExperimentSpec& spec) {
  if (spec.sweep.empty() || spec.repetitions == 0) {
    throw std::invalid_argument("vary_cores: empty sweep or zero repetitions");
  }
  GenSpec gen = spec.base;
  gen.distinct_b = 2;
  const Relation rel = generate(gen);
  const ClusterLayout lay = layout(rel, spec.cluster_size);
  detail::PointRunner runner(spec.backend, rel, lay);

  std::vector<CsvRow> rows;
  for (const SampleMethod method : {SampleMethod::bernoulli, SampleMethod::cluster}) {
    const SampleSpec sample_spec(method, spec.sample.rate, spec.sample.seed);
    const Query query{0, sample_spec, false};
    for (const std::uint64_t cores : spec.sweep) {
      ClusterSetup setup = spec.setup;
      setup.worker_cores = static_cast<unsigned>(cores);
      for (const ShipMode mode : {ShipMode::fs, ShipMode::ds}) {
        for (unsigned rep = 0; rep < spec.repetitions; ++rep) {
          const Telemetry tel = runner.run(setup, std::span(&query, 1), mode);
          rows.push_back(detail::row_from(Experiment::vary_cores, "worker_cores", cores,
                                          sample_spec, tel));
        }
      }
    }
  }
  detail::finish_experiment(spec, rows);
  return rows;
}

// Batch-size sweep: Q identical queries, equal cores on both nodes.
inline std::vector<CsvRow> exp_vary_queries(const ExperimentSpec& spec) {
  if (spec.sweep.empty() || spec.repetitions == 0) {
    throw std::invalid_argument("vary_queries: empty sweep or zero repetitions");
  }
  const Relation rel = generate(spec.base);
  const ClusterLayout lay = layout(rel, spec.cluster_size);
  detail::PointRunner runner(spec.backend, rel, lay);

  std::vector<CsvRow> rows;
  for (const SampleMethod method : {SampleMethod::bernoulli, SampleMethod::cluster}) {
    const SampleSpec sample_spec(method, spec.sample.rate, spec.sample.seed);
    for (const std::uint64_t q_count : spec.sweep) {
      std::vector<Query> batch(q_count, Query{0, sample_spec, false});
      for (std::uint64_t i = 0; i < q_count; ++i) batch[i].id = i;
      for (const ShipMode mode : {ShipMode::fs, ShipMode::ds}) {
        for (unsigned rep = 0; rep < spec.repetitions; ++rep) {
          const Telemetry tel = runner.run(spec.setup, batch, mode);
          rows.push_back(detail::row_from(Experiment::vary_queries, "queries", q_count,
                                          sample_spec, tel));
        }
      }
    }
  }
  detail::finish_experiment(spec, rows);
  return rows;
}

// Canonical desk-scale specs for each experiment.
inline ExperimentSpec default_experiment_spec(Experiment exp) {
  ExperimentSpec spec;
  spec.name = exp;
  switch (exp) {
    case Experiment::vary_cardinality:
      spec.sweep = {10, 100, 1'000, 10'000, 100'000, 1'000'000};
      spec.sample = SampleSpec{};  // off
      spec.setup.coordinator_cores = 28;
      spec.setup.worker_cores = 14;
      break;
    case Experiment::vary_cores:
      spec.sweep.resize(28);
      for (unsigned c = 0; c < 28; ++c) spec.sweep[c] = c + 1;
      spec.base.distinct_b = 2;
      spec.setup.coordinator_cores = 28;
      break;
    case Experiment::vary_queries:
      spec.sweep = {1, 2, 3, 4, 5};
      spec.base.distinct_b = spec.base.row_count / 20;
      spec.setup.coordinator_cores = 28;
      spec.setup.worker_cores = 28;
      break;
  }
  return spec;
}

inline std::vector<CsvRow> run_experiment(const ExperimentSpec& spec) {
  switch (spec.name) {
    case Experiment::vary_cardinality: return exp_vary_cardinality(spec);
    case Experiment::vary_cores: return exp_vary_cores(spec);
    case Experiment::vary_queries: return exp_vary_queries(spec);
  }
  throw std::invalid_argument("run_experiment: unknown experiment");
}

}  // namespace shipwright
