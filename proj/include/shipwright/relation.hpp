#pragma once

// In-memory columnar table R(a, b) of 64-bit integers, deterministic data
// generation, and the fixed-size cluster layout that block sampling runs on.
//
// Layout contract: col_a is always the sequence 1..row_count (primary key),
// col_b carries the group key. A tuple is 16 bytes (two 8-byte attributes);
// all byte accounting in the engine derives from that.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "shipwright/rng.hpp"

namespace shipwright {

struct Relation {
  std::vector<std::int64_t> col_a;  // primary key, 1..n
  std::vector<std::int64_t> col_b;  // group key

  std::uint64_t row_count() const noexcept { return col_b.size(); }

  // Two 8-byte attributes per tuple.
  std::uint64_t size_bytes() const noexcept { return 16 * row_count(); }
};

inline std::uint64_t size_bytes(const Relation& rel) noexcept {
  return rel.size_bytes();
}

enum class Order { shuffled, sorted_by_b };

struct GenSpec {
  std::uint64_t row_count = 0;
  std::uint64_t distinct_b = 1;
  Order order = Order::shuffled;
  std::uint64_t seed = 0;
};

// Deterministic generation: col_a = 1..n; base assignment b[i] = (i mod d)+1,
// so every value 1..d appears floor(n/d) or floor(n/d)+1 times. `shuffled`
// permutes the base assignment with a seeded Fisher-Yates pass; `sorted_by_b`
// is the base assignment sorted ascending (built directly as runs, which is
// exactly the sorted multiset).
inline Relation generate(const GenSpec& spec) {
  Relation rel;
  const std::uint64_t n = spec.row_count;
  if (n == 0) return rel;
  if (spec.distinct_b == 0 || spec.distinct_b > n) {
    throw std::invalid_argument("generate: distinct_b must be in [1, row_count]");
  }
  const std::uint64_t d = spec.distinct_b;

  rel.col_a.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    rel.col_a[i] = static_cast<std::int64_t>(i + 1);
  }

  rel.col_b.resize(n);
  if (spec.order == Order::sorted_by_b) {
    const std::uint64_t q = n / d;
    const std::uint64_t r = n % d;
    std::uint64_t i = 0;
    for (std::uint64_t v = 1; v <= d; ++v) {
      const std::uint64_t cnt = q + (v <= r ? 1 : 0);
      for (std::uint64_t k = 0; k < cnt; ++k) {
        rel.col_b[i++] = static_cast<std::int64_t>(v);
      }
    }
  } else {
    for (std::uint64_t i = 0; i < n; ++i) {
      rel.col_b[i] = static_cast<std::int64_t>(i % d + 1);
    }
    SplitMix64 rng(spec.seed);
    for (std::uint64_t i = n - 1; i > 0; --i) {
      const std::uint64_t j = rng.next_below(i + 1);
      std::swap(rel.col_b[i], rel.col_b[j]);
    }
  }
  return rel;
}

// Fixed-size partition of the index range [0, row_count) into clusters of
// cluster_size consecutive tuples; the last cluster may be short.
struct ClusterLayout {
  std::uint64_t row_count = 0;
  std::uint64_t cluster_size = 1;
  std::uint64_t cluster_count = 0;

  std::uint64_t begin_of(std::uint64_t k) const noexcept { return k * cluster_size; }
  std::uint64_t end_of(std::uint64_t k) const noexcept {
    const std::uint64_t e = (k + 1) * cluster_size;
    return e < row_count ? e : row_count;
  }
};

inline ClusterLayout layout(const Relation& rel, std::uint64_t cluster_size) {
  if (cluster_size == 0) {
    throw std::invalid_argument("layout: cluster_size must be >= 1");
  }
  ClusterLayout l;
  l.row_count = rel.row_count();
  l.cluster_size = cluster_size;
  l.cluster_count = (l.row_count + cluster_size - 1) / cluster_size;
  return l;
}

}  // namespace shipwright
