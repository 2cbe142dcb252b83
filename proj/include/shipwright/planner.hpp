#pragma once

// Executable cost model and mode choice.
//
// cost(data shipping)     = C_read + C_sample + C_cexec
// cost(function shipping) = C_sample + C_wexec + C_write + C_cagg
//
// Term instantiation under the linear model, for a batch of Q queries over
// n rows with sampling rate p and an estimated result cardinality E:
//
//   C_read    one pipelined bulk read: link time of D bytes, where D = 16n
//             for bernoulli/none (the whole table moves) and the expected
//             16pn for cluster sampling (only chosen blocks move).
//   C_sample  inclusion decisions, charged per decision on the node that
//             makes them: n per query for bernoulli, cluster_count per query
//             for cluster, none for unsampled runs.
//   C_cexec / C_wexec  per-tuple aggregation over the expected p*n included
//             tuples, divided by the executing node's core budget.
//   C_write   Q result pushes of wire_size(E) bytes each.
//   C_cagg    per-entry decode+merge of Q*E entries at the coordinator.
//
// Totals are the exact ordered sums of the stored breakdown fields.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "shipwright/exec.hpp"
#include "shipwright/sampling.hpp"
#include "shipwright/telemetry.hpp"

namespace shipwright {

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CostBreakdown {
  double c_read = 0.0;
  double c_sample = 0.0;
  double c_cexec = 0.0;
  double c_wexec = 0.0;
  double c_write = 0.0;
  double c_cagg = 0.0;
};

struct CostEstimate {
  CostBreakdown ds;
  CostBreakdown fs;
  double ds_total = 0.0;
  double fs_total = 0.0;
};

// ds_total and fs_total are always formed by these sums, in this order.
inline double ds_sum(const CostBreakdown& b) noexcept {
  return b.c_read + b.c_sample + b.c_cexec;
}
inline double fs_sum(const CostBreakdown& b) noexcept {
  return b.c_sample + b.c_wexec + b.c_write + b.c_cagg;
}

struct WorkloadStats {
  std::uint64_t row_count = 0;
  std::uint64_t estimated_result_entries = 0;
  SampleSpec sampling{};
  std::uint64_t query_count = 1;
  std::uint64_t cluster_size = 1024;

  void validate() const {
    if (query_count == 0) throw std::invalid_argument("WorkloadStats: query_count must be >= 1");
    if (estimated_result_entries > row_count) {
      throw std::invalid_argument("WorkloadStats: result entries cannot exceed rows");
    }
    if (sampling.method == SampleMethod::cluster && cluster_size == 0) {
      throw std::invalid_argument("WorkloadStats: cluster_size must be >= 1");
    }
  }
};

inline CostEstimate estimate(const ClusterSetup& setup, const WorkloadStats& stats) {
  setup.validate();
  stats.validate();

  const double n = static_cast<double>(stats.row_count);
  const double q = static_cast<double>(stats.query_count);
  const double p = stats.sampling.effective_rate();
  const double expected_included = p * n;

  double decisions_per_query = 0.0;  // inclusion tests per query
  double ds_read_bytes = 16.0 * n;
  switch (stats.sampling.method) {
    case SampleMethod::none:
      break;
    case SampleMethod::bernoulli:
      decisions_per_query = n;
      break;
    case SampleMethod::cluster: {
      const std::uint64_t clusters =
          (stats.row_count + stats.cluster_size - 1) / stats.cluster_size;
      decisions_per_query = static_cast<double>(clusters);
      ds_read_bytes = 16.0 * expected_included;
      break;
    }
  }

  const double to_s = 1e-12;
  CostEstimate est;

  est.ds.c_read = setup.link.transfer_time_ps(ds_read_bytes) * to_s;
  est.ds.c_sample =
      q * decisions_per_query * setup.per_tuple_scan_ps / setup.coordinator_cores * to_s;
  est.ds.c_cexec =
      q * expected_included * setup.per_tuple_agg_ps / setup.coordinator_cores * to_s;
  est.ds_total = ds_sum(est.ds);

  const double w = static_cast<double>(setup.workers);
  const double wire_bytes =
      static_cast<double>(wire_size_bytes(stats.estimated_result_entries));
  est.fs.c_sample =
      q * (decisions_per_query / w) * setup.per_tuple_scan_ps / setup.worker_cores * to_s;
  est.fs.c_wexec =
      q * (expected_included / w) * setup.per_tuple_agg_ps / setup.worker_cores * to_s;
  est.fs.c_write = q * w * setup.link.transfer_time_ps(wire_bytes) * to_s;
  est.fs.c_cagg = q * w * static_cast<double>(stats.estimated_result_entries) *
                  setup.per_entry_merge_ps / setup.coordinator_cores * to_s;
  est.fs_total = fs_sum(est.fs);

  return est;
}

// Data shipping only when strictly cheaper; ties go to function shipping.
inline ShipMode choose_mode(const CostEstimate& est) noexcept {
  return est.fs_total > est.ds_total ? ShipMode::ds : ShipMode::fs;
}

// ---------------------------------------------------------------------------
// Calibration profile
// ---------------------------------------------------------------------------

struct CalibrationProfile {
  double per_tuple_scan_ns = 35.0;
  double per_tuple_agg_ns = 25.0;
  double per_entry_merge_ns = 200.0;
  double link_latency_us = 2.0;
  double link_bandwidth_gbps = 100.0;
};

// Profile reproducing the qualitative response-time curves of a 100 Gb/s
// RDMA deployment at desk scale. Frozen; the acceptance sweeps assume it.
inline CalibrationProfile paper_profile() { return CalibrationProfile{}; }

inline ClusterSetup apply_profile(ClusterSetup setup, const CalibrationProfile& prof) {
  setup.per_tuple_scan_ps = prof.per_tuple_scan_ns * 1e3;
  setup.per_tuple_agg_ps = prof.per_tuple_agg_ns * 1e3;
  setup.per_entry_merge_ps = prof.per_entry_merge_ns * 1e3;
  setup.link = LinkModel::from_profile(prof.link_latency_us, prof.link_bandwidth_gbps);
  return setup;
}

inline void save_profile(const std::string& path, const CalibrationProfile& prof) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open profile for writing: " + path);
  out.precision(17);
  out << "per_tuple_scan_ns=" << prof.per_tuple_scan_ns << "\n"
      << "per_tuple_agg_ns=" << prof.per_tuple_agg_ns << "\n"
      << "per_entry_merge_ns=" << prof.per_entry_merge_ns << "\n"
      << "link.latency_us=" << prof.link_latency_us << "\n"
      << "link.bandwidth_gbps=" << prof.link_bandwidth_gbps << "\n";
  if (!out.flush()) throw std::runtime_error("failed writing profile: " + path);
}

inline CalibrationProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile: " + path);
  CalibrationProfile prof;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("malformed profile line: " + line);
    const std::string key = line.substr(0, eq);
    const double value = std::stod(line.substr(eq + 1));
    if (key == "per_tuple_scan_ns") prof.per_tuple_scan_ns = value;
    else if (key == "per_tuple_agg_ns") prof.per_tuple_agg_ns = value;
    else if (key == "per_entry_merge_ns") prof.per_entry_merge_ns = value;
    else if (key == "link.latency_us") prof.link_latency_us = value;
    else if (key == "link.bandwidth_gbps") prof.link_bandwidth_gbps = value;
    else throw std::runtime_error("unknown profile key: " + key);
  }
  return prof;
}

// ---------------------------------------------------------------------------
// Coefficient calibration
//
// Times single-lane runs of the real operators on the given relation and
// derives per-tuple / per-entry nanosecond costs. Link parameters cannot be
// measured here and are copied from the setup.
// ---------------------------------------------------------------------------

namespace detail {

template <class F>
double best_of_three_seconds(F&& f) {
  double best = -1.0;
  for (int i = 0; i < 3; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(t1 - t0).count();
    if (best < 0.0 || s < best) best = s;
  }
  return best;
}

}  // namespace detail

inline CalibrationProfile calibrate(const Relation& rel, const ClusterSetup& setup) {
  if (rel.row_count() < 100'000) {
    throw std::invalid_argument("calibrate: need at least 1e5 rows");
  }
  const double n = static_cast<double>(rel.row_count());
  const ClusterLayout lay = layout(rel, 1024);

  std::uint64_t sink = 0;

  const double scan_s = detail::best_of_three_seconds([&] {
    SampleView v = bernoulli_sample(rel, SampleSpec(SampleMethod::bernoulli, 0.5, 17));
    sink += v.included_count;
  });

  const SampleView full = sample(rel, lay, SampleSpec{});
  const Query query{};
  GroupCounts agg_result;
  const double agg_s = detail::best_of_three_seconds([&] {
    agg_result = execute_local(full, query, 1);
    sink += agg_result.entry_count();
  });

  const ResultWire wire = wire_encode(agg_result);
  const std::uint64_t entries = agg_result.entry_count();
  const double merge_s = detail::best_of_three_seconds([&] {
    GroupCounts decoded = wire_decode(wire);
    GroupCounts acc(decoded.sampled_rate);
    decoded.for_each([&](std::int64_t k, std::int64_t c) { acc.add(k, c); });
    sink += acc.entry_count();
  });

  // Keeps the measured loops observable.
  volatile std::uint64_t keep = sink;
  (void)keep;

  if (!(scan_s > 0.0) || !(agg_s > 0.0) || !(merge_s > 0.0) || entries == 0) {
    throw CalibrationError("calibrate: degenerate timing measurement");
  }

  CalibrationProfile prof;
  prof.per_tuple_scan_ns = scan_s / n * 1e9;
  prof.per_tuple_agg_ns = agg_s / n * 1e9;
  prof.per_entry_merge_ns = merge_s / static_cast<double>(entries) * 1e9;
  prof.link_latency_us = setup.link.latency_us();
  prof.link_bandwidth_gbps = setup.link.bandwidth_gbps();
  return prof;
}

}  // namespace shipwright
