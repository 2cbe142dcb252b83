// Harness invariants: deterministic CSV output, rows that mirror direct
// dispatch telemetry, and the per-experiment preconditions.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "shipwright/bench.hpp"

using namespace shipwright;

namespace {

// Small, fast spec for harness tests.
ExperimentSpec small_spec(Experiment exp) {
  ExperimentSpec spec = default_experiment_spec(exp);
  spec.base.row_count = 100'000;
  spec.repetitions = 2;
  switch (exp) {
    case Experiment::vary_cardinality:
      spec.sweep = {10, 1'000};
      break;
    case Experiment::vary_cores:
      spec.sweep = {1, 14, 28};
      break;
    case Experiment::vary_queries:
      spec.sweep = {1, 3};
      spec.base.distinct_b = spec.base.row_count / 20;
      break;
  }
  return spec;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("csv header is exact") {
  REQUIRE(std::string(kCsvHeader) ==
          "experiment,mode,sampling,sweep_param,sweep_value,response_time_s,"
          "bytes_transferred,worker_cpu_s,coordinator_cpu_s,result_entries,timed_out");
}

TEST_CASE("identical specs produce byte-identical CSV files") {
  ExperimentSpec spec = small_spec(Experiment::vary_queries);
  spec.out_path = "bench_repro_a.csv";
  run_experiment(spec);
  spec.out_path = "bench_repro_b.csv";
  run_experiment(spec);
  const std::string a = read_file("bench_repro_a.csv");
  const std::string b = read_file("bench_repro_b.csv");
  REQUIRE_FALSE(a.empty());
  REQUIRE(a == b);
  std::remove("bench_repro_a.csv");
  std::remove("bench_repro_b.csv");
}

TEST_CASE("one row per mode, sweep value, and repetition") {
  const ExperimentSpec spec = small_spec(Experiment::vary_cores);
  const auto rows = run_experiment(spec);
  // 2 sampling methods x 3 core counts x 2 modes x 2 repetitions
  REQUIRE(rows.size() == 2 * 3 * 2 * 2);
  for (const CsvRow& r : rows) {
    REQUIRE(r.experiment == "vary_cores");
    REQUIRE(r.sweep_param == "worker_cores");
    REQUIRE((r.mode == "fs" || r.mode == "ds"));
    REQUIRE((r.sampling == "bernoulli" || r.sampling == "cluster"));
  }
  // repetitions of a deterministic simulation are identical
  REQUIRE(to_csv_line(rows[0]) == to_csv_line(rows[1]));
}

TEST_CASE("rows equal the telemetry of a direct dispatch call") {
  const ExperimentSpec spec = small_spec(Experiment::vary_cardinality);
  const auto rows = run_experiment(spec);
  for (const CsvRow& row : rows) {
    GenSpec gen = spec.base;
    gen.distinct_b = row.sweep_value;
    const Relation rel = generate(gen);
    const ClusterLayout lay = layout(rel, spec.cluster_size);
    const Query q{};
    const auto direct =
        dispatch(spec.setup, rel, lay, std::span(&q, 1),
                 row.mode == "fs" ? ModeChoice::fs : ModeChoice::ds);
    REQUIRE(row.response_time_s == direct.telemetry.response_time_s);
    REQUIRE(row.bytes_transferred == direct.telemetry.bytes_transferred);
    REQUIRE(row.worker_cpu_s == direct.telemetry.worker_cpu_s);
    REQUIRE(row.coordinator_cpu_s == direct.telemetry.coordinator_cpu_s);
    REQUIRE(row.result_entries == direct.telemetry.result_entries);
  }
}

TEST_CASE("vary_cardinality rejects a worker with as many cores as the coordinator") {
  ExperimentSpec spec = small_spec(Experiment::vary_cardinality);
  spec.setup.worker_cores = spec.setup.coordinator_cores;
  REQUIRE_THROWS_AS(run_experiment(spec), std::invalid_argument);
  spec = small_spec(Experiment::vary_cardinality);
  spec.sweep.clear();
  REQUIRE_THROWS_AS(run_experiment(spec), std::invalid_argument);
}

TEST_CASE("vary_queries: DS bytes constant, FS bytes linear in the batch size") {
  ExperimentSpec spec = small_spec(Experiment::vary_queries);
  spec.sweep = {1, 2, 3, 4, 5};
  spec.repetitions = 1;
  const auto rows = run_experiment(spec);
  std::uint64_t fs_q1 = 0, ds_q1 = 0;
  for (const CsvRow& r : rows) {
    if (r.sampling != "bernoulli") continue;
    if (r.mode == "fs") {
      if (r.sweep_value == 1) fs_q1 = r.bytes_transferred;
      REQUIRE(r.bytes_transferred == r.sweep_value * fs_q1);
    } else {
      if (r.sweep_value == 1) ds_q1 = r.bytes_transferred;
      REQUIRE(r.bytes_transferred == ds_q1);
    }
  }
  REQUIRE(fs_q1 > 0);
  REQUIRE(ds_q1 == 16 * spec.base.row_count);
}

TEST_CASE("gnuplot companion script is emitted next to the CSV") {
  ExperimentSpec spec = small_spec(Experiment::vary_queries);
  spec.sweep = {1};
  spec.repetitions = 1;
  spec.out_path = "bench_gp.csv";
  spec.emit_gnuplot = true;
  run_experiment(spec);
  const std::string gp = read_file("bench_gp.csv.gp");
  REQUIRE(gp.find("set datafile separator") != std::string::npos);
  REQUIRE(gp.find("bench_gp.csv") != std::string::npos);
  std::remove("bench_gp.csv");
  std::remove("bench_gp.csv.gp");
}

TEST_CASE("expected sample group estimates track realized captures") {
  const std::uint64_t rows = 200'000;
  const std::uint64_t d = 10'000;
  for (Order order : {Order::shuffled, Order::sorted_by_b}) {
    const Relation rel = generate({rows, d, order, 3});
    const ClusterLayout lay = layout(rel, 1024);
    for (SampleMethod m : {SampleMethod::bernoulli, SampleMethod::cluster}) {
      const SampleSpec spec(m, 0.1, 9);
      const std::uint64_t est = expected_sample_groups(rows, d, spec, order, 1024);
      const std::uint64_t realized = groups_present(sample(rel, lay, spec)).size();
      CAPTURE(order == Order::shuffled, to_string(m), est, realized);
      // estimate within 15% of realized capture
      REQUIRE(static_cast<double>(est) > 0.85 * static_cast<double>(realized));
      REQUIRE(static_cast<double>(est) < 1.15 * static_cast<double>(realized));
    }
  }
  REQUIRE(expected_sample_groups(rows, d, SampleSpec{}, Order::shuffled, 1024) == d);
  REQUIRE(expected_sample_groups(0, d, SampleSpec{}, Order::shuffled, 1024) == 0);
}
