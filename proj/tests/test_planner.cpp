// Cost model: breakdown-sum exactness, monotonicity, agreement with the
// virtual-time engine, and coefficient calibration on live hardware.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <string>

#include "shipwright/clusternode.hpp"
#include "shipwright/planner.hpp"
#include "shipwright/relation.hpp"

using namespace shipwright;

namespace {

ClusterSetup paper_setup() { return apply_profile(ClusterSetup{}, paper_profile()); }

WorkloadStats stats_for(std::uint64_t rows, std::uint64_t entries, SampleSpec spec,
                        std::uint64_t q = 1) {
  WorkloadStats s;
  s.row_count = rows;
  s.estimated_result_entries = entries;
  s.sampling = spec;
  s.query_count = q;
  return s;
}

}  // namespace

TEST_CASE("abundant worker cores with a tiny result favor function shipping") {
  ClusterSetup setup = paper_setup();
  setup.worker_cores = 1'000;
  const CostEstimate est = estimate(setup, stats_for(10'000'000, 0, SampleSpec{}));
  REQUIRE(est.fs_total < est.ds_total);
  REQUIRE(choose_mode(est) == ShipMode::fs);
}

TEST_CASE("a single worker core under bernoulli sampling favors data shipping") {
  ClusterSetup setup = paper_setup();
  setup.worker_cores = 1;
  const CostEstimate est = estimate(
      setup, stats_for(10'000'000, 2, SampleSpec(SampleMethod::bernoulli, 0.1, 7)));
  REQUIRE(est.ds_total < est.fs_total);
  REQUIRE(choose_mode(est) == ShipMode::ds);
}

TEST_CASE("result cardinality moves only the function-shipping total") {
  const ClusterSetup setup = paper_setup();
  const auto spec = SampleSpec{};
  const CostEstimate small = estimate(setup, stats_for(10'000'000, 1'000, spec));
  const CostEstimate large = estimate(setup, stats_for(10'000'000, 2'000, spec));
  REQUIRE(small.ds_total == large.ds_total);
  REQUIRE(large.fs_total > small.fs_total);
}

TEST_CASE("choose_mode tie-break prefers function shipping") {
  CostEstimate est;
  est.fs_total = 1.0;
  est.ds_total = 1.0;
  REQUIRE(choose_mode(est) == ShipMode::fs);
  est.fs_total = 2.0;
  REQUIRE(choose_mode(est) == ShipMode::ds);
  est.fs_total = 0.5;
  REQUIRE(choose_mode(est) == ShipMode::fs);
}

TEST_CASE("totals are the exact sums of their breakdowns") {
  SplitMix64 rng(3);
  for (int i = 0; i < 40; ++i) {
    ClusterSetup setup = paper_setup();
    setup.worker_cores = 1 + static_cast<unsigned>(rng.next_below(28));
    setup.coordinator_cores = 1 + static_cast<unsigned>(rng.next_below(28));
    setup.workers = 1 + static_cast<unsigned>(rng.next_below(4));
    const auto method = static_cast<SampleMethod>(rng.next_below(3));
    const SampleSpec spec(method, method == SampleMethod::none ? 1.0 : 0.1, rng.next());
    const std::uint64_t rows = 1'000 + rng.next_below(10'000'000);
    const CostEstimate est =
        estimate(setup, stats_for(rows, rng.next_below(rows), spec, 1 + rng.next_below(5)));
    REQUIRE(est.ds_total == est.ds.c_read + est.ds.c_sample + est.ds.c_cexec);
    REQUIRE(est.fs_total == est.fs.c_sample + est.fs.c_wexec + est.fs.c_write + est.fs.c_cagg);
    REQUIRE(est.ds.c_wexec == 0.0);
    REQUIRE(est.ds.c_write == 0.0);
    REQUIRE(est.ds.c_cagg == 0.0);
    REQUIRE(est.fs.c_read == 0.0);
    REQUIRE(est.fs.c_cexec == 0.0);
  }
}

TEST_CASE("monotonicity of the cost model") {
  const auto spec = SampleSpec(SampleMethod::bernoulli, 0.1, 7);
  const std::uint64_t rows = 10'000'000;

  // fs_total non-increasing in worker cores; ds_total independent of them.
  double prev_fs = -1.0;
  double first_ds = -1.0;
  for (unsigned cores = 1; cores <= 28; ++cores) {
    ClusterSetup setup = paper_setup();
    setup.worker_cores = cores;
    const CostEstimate est = estimate(setup, stats_for(rows, 2, spec));
    if (prev_fs >= 0.0) REQUIRE(est.fs_total <= prev_fs);
    prev_fs = est.fs_total;
    if (first_ds < 0.0) first_ds = est.ds_total;
    REQUIRE(est.ds_total == first_ds);
  }

  // fs_total strictly increasing in query count; c_read independent of it.
  const ClusterSetup setup = paper_setup();
  double prev_q_fs = -1.0;
  double first_read = -1.0;
  for (std::uint64_t q = 1; q <= 5; ++q) {
    const CostEstimate est = estimate(setup, stats_for(rows, 100'000, spec, q));
    if (prev_q_fs >= 0.0) REQUIRE(est.fs_total > prev_q_fs);
    prev_q_fs = est.fs_total;
    if (first_read < 0.0) first_read = est.ds.c_read;
    REQUIRE(est.ds.c_read == first_read);
  }
}

TEST_CASE("across a core sweep the chosen mode switches at most once, DS to FS") {
  for (SampleMethod method : {SampleMethod::bernoulli, SampleMethod::cluster}) {
    const SampleSpec spec(method, 0.1, 7);
    int switches = 0;
    ShipMode prev = ShipMode::ds;
    bool first = true;
    for (unsigned cores = 1; cores <= 28; ++cores) {
      ClusterSetup setup = paper_setup();
      setup.worker_cores = cores;
      const ShipMode mode = choose_mode(estimate(setup, stats_for(10'000'000, 2, spec)));
      if (!first && mode != prev) {
        ++switches;
        REQUIRE(prev == ShipMode::ds);
        REQUIRE(mode == ShipMode::fs);
      }
      prev = mode;
      first = false;
    }
    REQUIRE(switches <= 1);
  }
}

TEST_CASE("planner agrees with the engine on a forced-mode run") {
  // Sampling off: estimates involve no randomness, so the planner's totals
  // reproduce the engine's virtual response times almost exactly.
  const ClusterSetup setup = paper_setup();
  const Relation rel = generate({1'000'000, 1'000, Order::sorted_by_b, 2});
  const ClusterLayout lay = layout(rel, 1024);
  const Query q{};
  const auto fs = run_function_shipping(setup, rel, lay, std::span(&q, 1));
  const auto ds = run_data_shipping(setup, rel, lay, std::span(&q, 1));
  const CostEstimate est = estimate(setup, stats_for(rel.row_count(), 1'000, SampleSpec{}));
  REQUIRE(est.fs_total == Catch::Approx(fs.second.response_time_s).epsilon(1e-9));
  REQUIRE(est.ds_total == Catch::Approx(ds.second.response_time_s).epsilon(1e-9));
}

TEST_CASE("workload stats validate") {
  REQUIRE_THROWS_AS(estimate(paper_setup(), stats_for(10, 11, SampleSpec{})),
                    std::invalid_argument);
  WorkloadStats zero_q = stats_for(10, 1, SampleSpec{});
  zero_q.query_count = 0;
  REQUIRE_THROWS_AS(estimate(paper_setup(), zero_q), std::invalid_argument);
}

TEST_CASE("profile files round-trip") {
  CalibrationProfile prof;
  prof.per_tuple_scan_ns = 12.5;
  prof.per_tuple_agg_ns = 42.0;
  prof.per_entry_merge_ns = 333.25;
  prof.link_latency_us = 1.75;
  prof.link_bandwidth_gbps = 40.0;
  const std::string path = "test_profile.tmp";
  save_profile(path, prof);
  const CalibrationProfile back = load_profile(path);
  REQUIRE(back.per_tuple_scan_ns == prof.per_tuple_scan_ns);
  REQUIRE(back.per_tuple_agg_ns == prof.per_tuple_agg_ns);
  REQUIRE(back.per_entry_merge_ns == prof.per_entry_merge_ns);
  REQUIRE(back.link_latency_us == prof.link_latency_us);
  REQUIRE(back.link_bandwidth_gbps == prof.link_bandwidth_gbps);
  std::remove(path.c_str());
  REQUIRE_THROWS(load_profile("does_not_exist.profile"));
}

TEST_CASE("calibration measures positive, stable coefficients") {
  const Relation rel = generate({400'000, 1'000, Order::shuffled, 6});
  const ClusterSetup setup = paper_setup();

  const CalibrationProfile a = calibrate(rel, setup);
  REQUIRE(a.per_tuple_scan_ns > 0.0);
  REQUIRE(a.per_tuple_agg_ns > 0.0);
  REQUIRE(a.per_entry_merge_ns > 0.0);
  REQUIRE(a.link_latency_us == setup.link.latency_us());

  const CalibrationProfile b = calibrate(rel, setup);
  CHECK(a.per_tuple_scan_ns < 2.0 * b.per_tuple_scan_ns);
  CHECK(b.per_tuple_scan_ns < 2.0 * a.per_tuple_scan_ns);
  CHECK(a.per_tuple_agg_ns < 2.0 * b.per_tuple_agg_ns);
  CHECK(b.per_tuple_agg_ns < 2.0 * a.per_tuple_agg_ns);
  CHECK(a.per_entry_merge_ns < 2.0 * b.per_entry_merge_ns);
  CHECK(b.per_entry_merge_ns < 2.0 * a.per_entry_merge_ns);

  REQUIRE_THROWS_AS(calibrate(generate({1'000, 10, Order::shuffled, 0}), setup),
                    std::invalid_argument);
}

TEST_CASE("simulator fed calibrated coefficients reproduces a measured run") {
  const Relation rel = generate({1'000'000, 1'000, Order::shuffled, 6});
  const ClusterLayout lay = layout(rel, 1024);
  ClusterSetup setup = paper_setup();
  const CalibrationProfile prof = calibrate(rel, setup);
  setup = apply_profile(setup, prof);

  // Measure a single-lane full-table aggregation (best of three).
  const SampleView full = sample(rel, lay, SampleSpec{});
  const double measured = shipwright::detail::best_of_three_seconds([&] {
    const GroupCounts r = execute_local(full, Query{}, 1);
    if (r.entry_count() == 0) throw std::runtime_error("impossible");
  });
  const double simulated = static_cast<double>(rel.row_count()) * setup.per_tuple_agg_ps * 1e-12;
  CAPTURE(measured, simulated);
  CHECK(simulated > 0.8 * measured);
  CHECK(simulated < 1.2 * measured);
}
