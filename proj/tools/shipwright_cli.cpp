// shipwright CLI: run the benchmark sweeps, dispatch single query batches,
// calibrate a cost profile, or serve a relation over the socket protocol.
//
//   shipwright bench vary-cardinality --out sweep.csv
//   shipwright run --mode auto --sampling bernoulli --rate 0.1
//   shipwright calibrate --rows 1000000 --out my.profile
//   shipwright worker --port 4710 --rows 1000000

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <string>
#include <vector>

#include "shipwright/shipwright.hpp"

using namespace shipwright;

namespace {

struct CommonOpts {
  std::uint64_t rows = 10'000'000;
  std::uint64_t distinct_b = 2;
  std::string order = "sorted-by-b";
  std::uint64_t seed = 42;
  std::uint64_t cluster_size = 1024;
  std::string sampling = "none";
  double rate = 0.1;
  std::uint64_t sample_seed = 7;
  unsigned coordinator_cores = 28;
  unsigned worker_cores = 14;
  unsigned workers = 1;
  double timeout_s = 60.0;
  std::string profile_path;
  std::string backend = "sim";
};

void add_relation_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--rows", o.rows, "table cardinality");
  cmd->add_option("--distinct-b", o.distinct_b, "distinct group keys");
  cmd->add_option("--order", o.order, "tuple order")
      ->check(CLI::IsMember({"shuffled", "sorted-by-b"}));
  cmd->add_option("--seed", o.seed, "data generation seed");
  cmd->add_option("--cluster-size", o.cluster_size, "tuples per sampling cluster");
}

void add_sampling_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--sampling", o.sampling, "sampling method")
      ->check(CLI::IsMember({"none", "bernoulli", "cluster"}));
  cmd->add_option("--rate", o.rate, "sampling rate in [0,1]");
  cmd->add_option("--sample-seed", o.sample_seed, "sample membership seed");
}

void add_cluster_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--coordinator-cores", o.coordinator_cores, "coordinator core budget");
  cmd->add_option("--worker-cores", o.worker_cores, "worker core budget");
  cmd->add_option("--workers", o.workers, "simulated worker count");
  cmd->add_option("--timeout-s", o.timeout_s, "virtual-time cap in seconds");
  cmd->add_option("--profile", o.profile_path, "calibration profile file");
  cmd->add_option("--backend", o.backend, "execution backend")
      ->check(CLI::IsMember({"sim", "socket"}));
}

Order parse_order(const std::string& s) {
  return s == "shuffled" ? Order::shuffled : Order::sorted_by_b;
}

SampleMethod parse_method(const std::string& s) {
  if (s == "bernoulli") return SampleMethod::bernoulli;
  if (s == "cluster") return SampleMethod::cluster;
  return SampleMethod::none;
}

ClusterSetup make_setup(const CommonOpts& o) {
  const CalibrationProfile prof =
      o.profile_path.empty() ? paper_profile() : load_profile(o.profile_path);
  ClusterSetup setup = apply_profile(ClusterSetup{}, prof);
  setup.coordinator_cores = o.coordinator_cores;
  setup.worker_cores = o.worker_cores;
  setup.workers = o.workers;
  setup.timeout_s = o.timeout_s;
  return setup;
}

int cmd_bench(const std::string& experiment, const CommonOpts& o, unsigned reps,
              const std::string& out, bool gnuplot) {
  Experiment exp = Experiment::vary_cardinality;
  if (experiment == "vary-cores") exp = Experiment::vary_cores;
  if (experiment == "vary-queries") exp = Experiment::vary_queries;

  ExperimentSpec spec = default_experiment_spec(exp);
  spec.base.row_count = o.rows;
  spec.base.order = parse_order(o.order);
  spec.base.seed = o.seed;
  if (exp == Experiment::vary_queries) spec.base.distinct_b = std::max<std::uint64_t>(1, o.rows / 20);
  spec.sample = SampleSpec(SampleMethod::bernoulli, o.rate, o.sample_seed);
  spec.cluster_size = o.cluster_size;
  spec.repetitions = reps;
  spec.out_path = out;
  spec.emit_gnuplot = gnuplot;
  spec.backend = o.backend == "socket" ? Backend::socket : Backend::sim;

  const ClusterSetup defaults = spec.setup;
  ClusterSetup setup = make_setup(o);
  // experiments pin their own core budgets unless explicitly overridden
  if (o.coordinator_cores == 28) setup.coordinator_cores = defaults.coordinator_cores;
  if (o.worker_cores == 14) setup.worker_cores = defaults.worker_cores;
  spec.setup = setup;

  const auto rows = run_experiment(spec);
  if (out.empty()) {
    std::printf("%s\n", kCsvHeader);
    for (const CsvRow& r : rows) std::printf("%s\n", to_csv_line(r).c_str());
  } else {
    std::printf("wrote %zu rows to %s\n", rows.size(), out.c_str());
  }
  return 0;
}

int cmd_run(const CommonOpts& o, const std::string& mode_str, std::uint64_t queries,
            bool scale_estimates, const std::string& connect) {
  const Relation rel = generate({o.rows, o.distinct_b, parse_order(o.order), o.seed});
  const ClusterLayout lay = layout(rel, o.cluster_size);
  const ClusterSetup setup = make_setup(o);
  const SampleSpec spec(parse_method(o.sampling), o.rate, o.sample_seed);
  std::vector<Query> batch(queries, Query{0, spec, scale_estimates});
  for (std::uint64_t i = 0; i < queries; ++i) batch[i].id = i;

  ModeChoice choice = ModeChoice::auto_pick;
  if (mode_str == "fs") choice = ModeChoice::fs;
  if (mode_str == "ds") choice = ModeChoice::ds;

  const std::uint64_t est_entries = expected_sample_groups(
      o.rows, o.distinct_b, spec, parse_order(o.order), o.cluster_size);

  Telemetry tel;
  ShipMode chosen = ShipMode::fs;
  if (o.backend == "socket" || !connect.empty()) {
    if (choice == ModeChoice::auto_pick) {
      WorkloadStats stats{o.rows, est_entries, spec, queries, o.cluster_size};
      chosen = choose_mode(estimate(setup, stats));
    } else {
      chosen = choice == ModeChoice::fs ? ShipMode::fs : ShipMode::ds;
    }
    std::optional<SocketWorker> local_worker;
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
    if (connect.empty()) {
      local_worker.emplace(rel, lay);
      port = local_worker->start();
    } else {
      const auto colon = connect.rfind(':');
      if (colon == std::string::npos) throw CLI::ValidationError("--connect expects host:port");
      host = connect.substr(0, colon);
      port = static_cast<std::uint16_t>(std::stoul(connect.substr(colon + 1)));
    }
    SocketCoordinator coord(host, port);
    tel = run_socket_batch(setup, coord, o.rows, lay, batch, chosen).second;
  } else {
    if (choice == ModeChoice::auto_pick) {
      const WorkloadStats stats{o.rows, est_entries, spec, queries, o.cluster_size};
      const CostEstimate est = estimate(setup, stats);
      std::printf("planner: cost(ds)=%.9f cost(fs)=%.9f -> %s\n", est.ds_total,
                  est.fs_total, to_string(choose_mode(est)));
    }
    const DispatchResult r = dispatch(setup, rel, lay, batch, choice, est_entries);
    tel = r.telemetry;
    chosen = r.chosen_mode;
  }

  CsvRow row;
  row.experiment = "run";
  row.mode = to_string(chosen);
  row.sampling = to_string(spec.method);
  row.sweep_param = "queries";
  row.sweep_value = queries;
  row.response_time_s = tel.response_time_s;
  row.bytes_transferred = tel.bytes_transferred;
  row.worker_cpu_s = tel.worker_cpu_s;
  row.coordinator_cpu_s = tel.coordinator_cpu_s;
  row.result_entries = tel.result_entries;
  row.timed_out = tel.timed_out;
  std::printf("%s\n%s\n", kCsvHeader, to_csv_line(row).c_str());
  return 0;
}

int cmd_calibrate(const CommonOpts& o, const std::string& out) {
  const Relation rel = generate({o.rows, o.distinct_b, parse_order(o.order), o.seed});
  const CalibrationProfile prof = calibrate(rel, make_setup(o));
  save_profile(out, prof);
  std::printf("calibrated: scan=%.2f ns/tuple agg=%.2f ns/tuple merge=%.2f ns/entry -> %s\n",
              prof.per_tuple_scan_ns, prof.per_tuple_agg_ns, prof.per_entry_merge_ns,
              out.c_str());
  return 0;
}

int cmd_worker(const CommonOpts& o, std::uint16_t port) {
  const Relation rel = generate({o.rows, o.distinct_b, parse_order(o.order), o.seed});
  const ClusterLayout lay = layout(rel, o.cluster_size);
  SocketWorker worker(rel, lay);
  const std::uint16_t bound = worker.start(port);
  std::printf("worker serving %llu rows on 127.0.0.1:%u (ctrl-c to stop)\n",
              static_cast<unsigned long long>(rel.row_count()), bound);
  static volatile std::sig_atomic_t stop = 0;
  std::signal(SIGINT, [](int) { stop = 1; });
  std::signal(SIGTERM, [](int) { stop = 1; });
  while (!stop) pause();
  worker.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shipwright: function- vs data-shipping query engine"};
  app.require_subcommand(1);

  CommonOpts opts;

  // bench
  auto* bench = app.add_subcommand("bench", "run a response-time sweep");
  bench->require_subcommand(1);
  std::string bench_out;
  unsigned bench_reps = 3;
  bool bench_gnuplot = false;
  for (const char* name : {"vary-cardinality", "vary-cores", "vary-queries"}) {
    auto* sub = bench->add_subcommand(name);
    add_relation_flags(sub, opts);
    add_sampling_flags(sub, opts);
    add_cluster_flags(sub, opts);
    sub->add_option("--out", bench_out, "CSV output path");
    sub->add_option("--reps", bench_reps, "repetitions per sweep point");
    sub->add_flag("--gnuplot", bench_gnuplot, "emit a companion gnuplot script");
  }

  // run
  auto* run = app.add_subcommand("run", "dispatch one query batch");
  std::string run_mode = "auto";
  std::uint64_t run_queries = 1;
  bool run_scale = false;
  std::string run_connect;
  add_relation_flags(run, opts);
  add_sampling_flags(run, opts);
  add_cluster_flags(run, opts);
  run->add_option("--mode", run_mode, "shipping mode")
      ->check(CLI::IsMember({"fs", "ds", "auto"}));
  run->add_option("--queries", run_queries, "batch size")->check(CLI::PositiveNumber);
  run->add_flag("--scale", run_scale, "scale sampled counts by 1/rate");
  run->add_option("--connect", run_connect, "use an external worker at host:port");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "measure CPU cost coefficients");
  std::string cal_out = "calibrated.profile";
  add_relation_flags(cal, opts);
  add_cluster_flags(cal, opts);
  cal->add_option("--out", cal_out, "profile output path");

  // worker
  auto* worker = app.add_subcommand("worker", "serve a relation over TCP");
  std::uint16_t worker_port = 0;
  add_relation_flags(worker, opts);
  worker->add_option("--port", worker_port, "listen port (0 picks one)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench->parsed()) {
      for (auto* sub : bench->get_subcommands()) {
        return cmd_bench(sub->get_name(), opts, bench_reps, bench_out, bench_gnuplot);
      }
    }
    if (run->parsed()) return cmd_run(opts, run_mode, run_queries, run_scale, run_connect);
    if (cal->parsed()) return cmd_calibrate(opts, cal_out);
    if (worker->parsed()) return cmd_worker(opts, worker_port);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
