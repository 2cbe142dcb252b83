#pragma once

// Coordinator/worker execution engine in deterministic virtual time.
//
// Function shipping: each worker samples and aggregates its shard, then
// pushes the encoded partial; the coordinator decodes and merges. Phases of
// one query run strictly sequentially (worker CPU, pushes, merge), queries
// run back to back. With multiple workers the CPU phase composes in parallel
// (max over workers); pushes and merges serialize in worker-id order.
//
// Data shipping: the coordinator bulk-reads the workers' memory once per
// batch (the whole table for bernoulli/none, only chosen clusters for
// cluster sampling) and executes every query locally. Reads within the batch
// are issued back to back and pipeline on the link, so the batch read phase
// costs one latency plus the byte total. Workers spend exactly zero CPU.
//
// Real payloads flow through the same transport calls the accounting charges
// for, so both modes produce bit-identical results over identical samples.

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "shipwright/exec.hpp"
#include "shipwright/planner.hpp"
#include "shipwright/relation.hpp"
#include "shipwright/sampling.hpp"
#include "shipwright/telemetry.hpp"
#include "shipwright/transport.hpp"

namespace shipwright {

namespace detail {

struct Shard {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  std::uint64_t rows() const noexcept { return end - begin; }
};

inline Shard shard_of(std::uint64_t rows, unsigned workers, unsigned j) noexcept {
  return {j * rows / workers, (j + 1) * rows / workers};
}

// The worker's part of the global sample: identical membership to the
// coordinator-side evaluation, restricted to the shard.
inline SampleView sample_for_worker(const Relation& rel, const ClusterLayout& lay,
                                    const SampleSpec& spec, Shard sh) {
  SampleView view;
  view.source = &rel;
  if (sh.rows() == 0) return view;
  switch (spec.method) {
    case SampleMethod::none:
      view.ranges.push_back({sh.begin, sh.end});
      view.included_count = sh.rows();
      break;
    case SampleMethod::bernoulli:
      view.scan_touches = sh.rows();
      bernoulli_runs(sh.begin, sh.end, spec, view.ranges, view.included_count);
      break;
    case SampleMethod::cluster: {
      const std::uint64_t first = sh.begin / lay.cluster_size;
      const std::uint64_t last = (sh.end - 1) / lay.cluster_size;
      view.scan_touches = last - first + 1;
      for (std::uint64_t k = first; k <= last; ++k) {
        if (!cluster_included(spec, k)) continue;
        const IndexRange r{std::max(lay.begin_of(k), sh.begin),
                           std::min(lay.end_of(k), sh.end)};
        if (r.begin < r.end) {
          view.ranges.push_back(r);
          view.included_count += r.length();
        }
      }
      break;
    }
  }
  return view;
}

inline void decode_i64le(std::span<const std::uint8_t> bytes, std::int64_t* out) {
  for (std::size_t i = 0; i + 8 <= bytes.size(); i += 8) {
    out[i / 8] = static_cast<std::int64_t>(get_u64le(bytes.data() + i));
  }
}

inline GroupCounts maybe_scale(GroupCounts result, const Query& q) {
  if (q.scale_estimates && q.sample.effective_rate() > 0.0) {
    return scale(result, q.sample.effective_rate());
  }
  return result;
}

}  // namespace detail

inline std::pair<std::vector<GroupCounts>, Telemetry> run_function_shipping(
    const ClusterSetup& setup, const Relation& rel, const ClusterLayout& lay,
    std::span<const Query> batch) {
  setup.validate();
  if (batch.empty()) throw std::invalid_argument("run_function_shipping: empty batch");
  const std::uint64_t n = rel.row_count();

  Telemetry tel;
  tel.mode = ShipMode::fs;
  double response_ps = 0.0;
  double sample_ps = 0.0, wexec_ps = 0.0, write_ps = 0.0, cagg_ps = 0.0;
  std::vector<GroupCounts> results;
  results.reserve(batch.size());

  for (const Query& q : batch) {
    double worker_sample_ps = 0.0, worker_exec_ps = 0.0, worker_cpu_ps = 0.0;
    double push_ps = 0.0;
    std::vector<GroupCounts> partials;
    partials.reserve(setup.workers);
    for (unsigned j = 0; j < setup.workers; ++j) {
      const detail::Shard sh = detail::shard_of(n, setup.workers, j);
      const SampleView view = detail::sample_for_worker(rel, lay, q.sample, sh);
      GroupCounts partial = execute_local(view, q, setup.worker_cores);
      const ResultWire wire = wire_encode(partial);

      const double s_ps = static_cast<double>(view.scan_touches) * setup.per_tuple_scan_ps /
                          setup.worker_cores;
      const double e_ps = static_cast<double>(view.included_count) * setup.per_tuple_agg_ps /
                          setup.worker_cores;
      worker_sample_ps = std::max(worker_sample_ps, s_ps);
      worker_exec_ps = std::max(worker_exec_ps, e_ps);
      worker_cpu_ps = std::max(worker_cpu_ps, s_ps + e_ps);

      const TransferStats push = result_push(wire, setup.link);
      push_ps += push.sim_time_ps;
      tel.bytes_transferred += push.bytes;

      // Receive side: decode in worker-id order.
      partials.push_back(wire_decode(wire));
    }

    std::uint64_t merged_entries = 0;
    for (const GroupCounts& p : partials) merged_entries += p.entry_count();
    GroupCounts final_result = merge(partials);
    const double merge_ps = static_cast<double>(merged_entries) * setup.per_entry_merge_ps /
                            setup.coordinator_cores;
    results.push_back(detail::maybe_scale(std::move(final_result), q));

    response_ps += worker_cpu_ps + push_ps + merge_ps;
    sample_ps += worker_sample_ps;
    wexec_ps += worker_exec_ps;
    write_ps += push_ps;
    cagg_ps += merge_ps;
    tel.worker_cpu_s += worker_cpu_ps * 1e-12;
    tel.coordinator_cpu_s += merge_ps * 1e-12;
  }

  tel.response_time_s = response_ps * 1e-12;
  tel.phases.sample_s = sample_ps * 1e-12;
  tel.phases.wexec_s = wexec_ps * 1e-12;
  tel.phases.write_s = write_ps * 1e-12;
  tel.phases.cagg_s = cagg_ps * 1e-12;
  tel.result_entries = results.front().entry_count();
  tel.timed_out = setup.timeout_s > 0.0 && tel.response_time_s > setup.timeout_s;
  return {std::move(results), tel};
}

inline std::pair<std::vector<GroupCounts>, Telemetry> run_data_shipping(
    const ClusterSetup& setup, const Relation& rel, const ClusterLayout& lay,
    std::span<const Query> batch) {
  setup.validate();
  if (batch.empty()) throw std::invalid_argument("run_data_shipping: empty batch");
  const SampleMethod method = batch.front().sample.method;
  for (const Query& q : batch) {
    if (q.sample.method != method) {
      throw std::invalid_argument("run_data_shipping: batch mixes sampling methods");
    }
  }
  const std::uint64_t n = rel.row_count();

  Telemetry tel;
  tel.mode = ShipMode::ds;

  // Fetch phase: read once per batch. col_b is decoded for execution; col_a
  // moves too (the table ships whole tuples) and is dropped after counting.
  std::vector<std::int64_t> fetched_b;
  std::vector<std::uint64_t> store_cluster_ids;  // cluster-sampling store map
  std::vector<std::uint64_t> store_offsets;
  std::uint64_t store_len = 0;

  if (method == SampleMethod::cluster) {
    for (std::uint64_t k = 0; k < lay.cluster_count; ++k) {
      const bool wanted = std::any_of(batch.begin(), batch.end(), [&](const Query& q) {
        return cluster_included(q.sample, k);
      });
      if (!wanted) continue;
      store_cluster_ids.push_back(k);
      store_offsets.push_back(store_len);
      store_len += lay.end_of(k) - lay.begin_of(k);
    }
    fetched_b.resize(store_len);
  } else {
    fetched_b.resize(n);
  }

  for (unsigned j = 0; j < setup.workers; ++j) {
    const detail::Shard sh = detail::shard_of(n, setup.workers, j);
    if (sh.rows() == 0) continue;
    const MemoryRegion region(j, rel, sh.begin, sh.end);
    if (method == SampleMethod::cluster) {
      for (std::size_t s = 0; s < store_cluster_ids.size(); ++s) {
        const std::uint64_t k = store_cluster_ids[s];
        const std::uint64_t lo = std::max(lay.begin_of(k), sh.begin);
        const std::uint64_t hi = std::min(lay.end_of(k), sh.end);
        if (lo >= hi) continue;
        const std::uint64_t local = lo - sh.begin;
        const std::uint64_t len = 8 * (hi - lo);
        const ReadResult ra =
            one_sided_read(region, region.col_a_offset(local), len, setup.link);
        const ReadResult rb =
            one_sided_read(region, region.col_b_offset(local), len, setup.link);
        tel.bytes_transferred += ra.stats.bytes + rb.stats.bytes;
        detail::decode_i64le(rb.bytes,
                             fetched_b.data() + store_offsets[s] + (lo - lay.begin_of(k)));
      }
    } else {
      const ReadResult ra =
          one_sided_read(region, region.col_a_offset(0), 8 * sh.rows(), setup.link);
      const ReadResult rb =
          one_sided_read(region, region.col_b_offset(0), 8 * sh.rows(), setup.link);
      tel.bytes_transferred += ra.stats.bytes + rb.stats.bytes;
      detail::decode_i64le(rb.bytes, fetched_b.data() + sh.begin);
    }
  }

  // Back-to-back reads pipeline: one link latency for the whole batch fetch.
  const double read_ps =
      setup.link.transfer_time_ps(static_cast<double>(tel.bytes_transferred));

  double sample_ps = 0.0, cexec_ps = 0.0;
  std::vector<GroupCounts> results;
  results.reserve(batch.size());

  for (const Query& q : batch) {
    std::uint64_t decisions = 0;
    std::uint64_t included = 0;
    std::vector<IndexRange> store_ranges;  // positions within fetched_b
    switch (method) {
      case SampleMethod::none:
        if (n > 0) store_ranges.push_back({0, n});
        included = n;
        break;
      case SampleMethod::bernoulli:
        decisions = n;
        detail::bernoulli_runs(0, n, q.sample, store_ranges, included);
        break;
      case SampleMethod::cluster: {
        decisions = lay.cluster_count;
        for (std::size_t s = 0; s < store_cluster_ids.size(); ++s) {
          const std::uint64_t k = store_cluster_ids[s];
          if (!cluster_included(q.sample, k)) continue;
          const std::uint64_t len = lay.end_of(k) - lay.begin_of(k);
          store_ranges.push_back({store_offsets[s], store_offsets[s] + len});
          included += len;
        }
        break;
      }
    }

    GroupCounts result = aggregate_column(fetched_b, store_ranges, included,
                                          q.sample.effective_rate(), setup.coordinator_cores);
    results.push_back(detail::maybe_scale(std::move(result), q));

    sample_ps += static_cast<double>(decisions) * setup.per_tuple_scan_ps /
                 setup.coordinator_cores;
    cexec_ps +=
        static_cast<double>(included) * setup.per_tuple_agg_ps / setup.coordinator_cores;
  }

  tel.response_time_s = (read_ps + sample_ps + cexec_ps) * 1e-12;
  tel.worker_cpu_s = 0.0;
  tel.coordinator_cpu_s = (sample_ps + cexec_ps) * 1e-12;
  tel.phases.read_s = read_ps * 1e-12;
  tel.phases.sample_s = sample_ps * 1e-12;
  tel.phases.cexec_s = cexec_ps * 1e-12;
  tel.result_entries = results.front().entry_count();
  tel.timed_out = setup.timeout_s > 0.0 && tel.response_time_s > setup.timeout_s;
  return {std::move(results), tel};
}

struct DispatchResult {
  std::vector<GroupCounts> results;
  Telemetry telemetry;
  ShipMode chosen_mode = ShipMode::fs;
};

// Runs the batch under the requested mode; auto_pick consults the planner
// with the caller-supplied result-cardinality estimate.
inline DispatchResult dispatch(const ClusterSetup& setup, const Relation& rel,
                               const ClusterLayout& lay, std::span<const Query> batch,
                               ModeChoice choice, std::uint64_t estimated_result_entries = 0) {
  if (batch.empty()) throw std::invalid_argument("dispatch: empty batch");
  ShipMode mode = ShipMode::fs;
  switch (choice) {
    case ModeChoice::fs:
      mode = ShipMode::fs;
      break;
    case ModeChoice::ds:
      mode = ShipMode::ds;
      break;
    case ModeChoice::auto_pick: {
      WorkloadStats stats;
      stats.row_count = rel.row_count();
      stats.estimated_result_entries = estimated_result_entries;
      stats.sampling = batch.front().sample;
      stats.query_count = batch.size();
      stats.cluster_size = lay.cluster_size;
      mode = choose_mode(estimate(setup, stats));
      break;
    }
  }
  auto [results, tel] = mode == ShipMode::fs
                            ? run_function_shipping(setup, rel, lay, batch)
                            : run_data_shipping(setup, rel, lay, batch);
  return {std::move(results), tel, mode};
}

}  // namespace shipwright
