#pragma once

// Deterministic Bernoulli and cluster sampling over a Relation.
//
// Membership is a pure function of (seed, index, rate): a tuple (or cluster)
// is included iff mix64(seed ^ index) < floor(rate * 2^64). The same spec
// therefore yields an identical sample no matter which node evaluates it or
// in what order — the property every shipping-mode equivalence check in this
// repo rests on.

#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "shipwright/relation.hpp"
#include "shipwright/rng.hpp"

namespace shipwright {

enum class SampleMethod { none, bernoulli, cluster };

inline const char* to_string(SampleMethod m) noexcept {
  switch (m) {
    case SampleMethod::none: return "none";
    case SampleMethod::bernoulli: return "bernoulli";
    case SampleMethod::cluster: return "cluster";
  }
  return "?";
}

struct SampleSpec {
  SampleMethod method = SampleMethod::none;
  double rate = 1.0;
  std::uint64_t seed = 0;

  SampleSpec() = default;
  SampleSpec(SampleMethod m, double r, std::uint64_t s) : method(m), rate(r), seed(s) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
      throw std::invalid_argument("SampleSpec: rate must be in [0, 1]");
    }
    if (method == SampleMethod::none) rate = 1.0;
  }

  double effective_rate() const noexcept {
    return method == SampleMethod::none ? 1.0 : rate;
  }
};

// Hash-threshold inclusion test. Pure: same inputs, same answer, everywhere.
inline bool include_decision(std::uint64_t seed, std::uint64_t index, double rate) noexcept {
  if (rate <= 0.0) return false;
  if (rate >= 1.0) return true;
  // rate < 1 here, so floor(rate * 2^64) < 2^64 and the cast is exact.
  const auto threshold = static_cast<std::uint64_t>(std::floor(std::ldexp(rate, 64)));
  return mix64(seed ^ index) < threshold;
}

struct IndexRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;  // half-open

  std::uint64_t length() const noexcept { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

// A sample as an ordered list of disjoint index ranges over the source
// relation. scan_touches records how many inclusion decisions the sampling
// pass evaluated: one per tuple for bernoulli, one per cluster for cluster
// sampling, zero for none. The CPU cost model charges the per-tuple scan
// coefficient against this count.
struct SampleView {
  const Relation* source = nullptr;
  std::vector<IndexRange> ranges;
  std::uint64_t included_count = 0;
  std::uint64_t scan_touches = 0;

  template <class F>
  void for_each_index(F&& f) const {
    for (const IndexRange& r : ranges) {
      for (std::uint64_t i = r.begin; i < r.end; ++i) f(i);
    }
  }
};

namespace detail {

// Bernoulli membership over [begin, end); adjacent included indices coalesce
// into one run.
inline void bernoulli_runs(std::uint64_t begin, std::uint64_t end, const SampleSpec& spec,
                           std::vector<IndexRange>& out, std::uint64_t& included) {
  std::uint64_t run_begin = 0;
  bool in_run = false;
  for (std::uint64_t i = begin; i < end; ++i) {
    if (include_decision(spec.seed, i, spec.rate)) {
      if (!in_run) {
        run_begin = i;
        in_run = true;
      }
      ++included;
    } else if (in_run) {
      out.push_back({run_begin, i});
      in_run = false;
    }
  }
  if (in_run) out.push_back({run_begin, end});
}

}  // namespace detail

// Visits every index, one inclusion decision per tuple.
inline SampleView bernoulli_sample(const Relation& rel, const SampleSpec& spec) {
  if (spec.method != SampleMethod::bernoulli) {
    throw std::invalid_argument("bernoulli_sample: spec.method must be bernoulli");
  }
  SampleView view;
  view.source = &rel;
  view.scan_touches = rel.row_count();
  detail::bernoulli_runs(0, rel.row_count(), spec, view.ranges, view.included_count);
  return view;
}

inline bool cluster_included(const SampleSpec& spec, std::uint64_t cluster_id) noexcept {
  return include_decision(spec.seed, cluster_id, spec.rate);
}

// Decides inclusion once per cluster id; a chosen cluster enters the view
// whole. Ranges stay one-per-cluster (never coalesced across cluster
// boundaries) so each range is exactly one cluster of the layout.
inline SampleView cluster_sample(const Relation& rel, const ClusterLayout& lay,
                                 const SampleSpec& spec) {
  if (spec.method != SampleMethod::cluster) {
    throw std::invalid_argument("cluster_sample: spec.method must be cluster");
  }
  SampleView view;
  view.source = &rel;
  view.scan_touches = lay.cluster_count;
  for (std::uint64_t k = 0; k < lay.cluster_count; ++k) {
    if (cluster_included(spec, k)) {
      const IndexRange r{lay.begin_of(k), lay.end_of(k)};
      view.ranges.push_back(r);
      view.included_count += r.length();
    }
  }
  return view;
}

// Method dispatcher. none yields the full view with no sampling touches.
inline SampleView sample(const Relation& rel, const ClusterLayout& lay,
                         const SampleSpec& spec) {
  switch (spec.method) {
    case SampleMethod::none: {
      SampleView view;
      view.source = &rel;
      if (rel.row_count() > 0) {
        view.ranges.push_back({0, rel.row_count()});
        view.included_count = rel.row_count();
      }
      return view;
    }
    case SampleMethod::bernoulli:
      return bernoulli_sample(rel, spec);
    case SampleMethod::cluster:
      return cluster_sample(rel, lay, spec);
  }
  throw std::invalid_argument("sample: unknown method");
}

// Distinct group keys among included tuples.
inline std::set<std::int64_t> groups_present(const SampleView& view) {
  std::set<std::int64_t> groups;
  view.for_each_index([&](std::uint64_t i) { groups.insert(view.source->col_b[i]); });
  return groups;
}

}  // namespace shipwright
