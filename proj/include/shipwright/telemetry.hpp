#pragma once

// Shared engine value types: the simulated cluster configuration, shipping
// modes, and the per-execution telemetry record.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "shipwright/transport.hpp"

namespace shipwright {

enum class ShipMode { fs, ds };
enum class ModeChoice { fs, ds, auto_pick };

inline const char* to_string(ShipMode m) noexcept {
  return m == ShipMode::fs ? "fs" : "ds";
}

// Cluster configuration: core budgets, simulated worker count, link model,
// and the CPU cost coefficients of the calibration profile (picoseconds).
struct ClusterSetup {
  unsigned coordinator_cores = 28;
  unsigned worker_cores = 14;
  unsigned workers = 1;
  LinkModel link = LinkModel::from_profile(2.0, 100.0);
  double per_tuple_scan_ps = 35'000.0;
  double per_tuple_agg_ps = 25'000.0;
  double per_entry_merge_ps = 200'000.0;
  double timeout_s = 60.0;  // virtual-time cap; <= 0 disables

  void validate() const {
    if (coordinator_cores == 0 || worker_cores == 0) {
      throw std::invalid_argument("ClusterSetup: core budgets must be >= 1");
    }
    if (workers == 0) throw std::invalid_argument("ClusterSetup: workers must be >= 1");
    if (!(per_tuple_scan_ps > 0.0) || !(per_tuple_agg_ps > 0.0) ||
        !(per_entry_merge_ps > 0.0)) {
      throw std::invalid_argument("ClusterSetup: cost coefficients must be > 0");
    }
  }
};

// Virtual-time phase durations, in seconds, mirroring the cost-model terms.
// Fields that do not apply to the executed mode stay 0.
struct PhaseBreakdown {
  double read_s = 0.0;    // data-shipping bulk read
  double sample_s = 0.0;  // sampling scan on whichever node runs it
  double cexec_s = 0.0;   // query execution at the coordinator (DS)
  double wexec_s = 0.0;   // query execution at the worker (FS)
  double write_s = 0.0;   // result transfers worker -> coordinator (FS)
  double cagg_s = 0.0;    // result decode+merge at the coordinator (FS)
};

struct Telemetry {
  ShipMode mode = ShipMode::fs;
  double response_time_s = 0.0;
  std::uint64_t bytes_transferred = 0;
  double worker_cpu_s = 0.0;       // busy time of the busiest worker, summed over queries
  double coordinator_cpu_s = 0.0;
  PhaseBreakdown phases;
  std::uint64_t result_entries = 0;  // entries of the batch's first result
  bool timed_out = false;
};

}  // namespace shipwright
