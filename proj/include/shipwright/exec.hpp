#pragma once

// Group-by/count aggregation over a sample view, partial-result merging,
// count scaling, and the wire format results travel in.
//
// The only supported query shape is GROUP BY col_b, COUNT(*). Aggregation is
// hash-based per lane over contiguous chunks of the view; lane results are
// merged, so the output is identical for every core budget and chunking.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "shipwright/rng.hpp"
#include "shipwright/sampling.hpp"

namespace shipwright {

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Query {
  std::uint64_t id = 0;
  SampleSpec sample{};
  bool scale_estimates = false;
};

// Open-addressing (key -> count) map tuned for 64-bit group keys. INT64_MIN
// is the empty-slot sentinel; a real INT64_MIN key is carried in a side slot
// so the full key domain stays usable.
class GroupCounts {
 public:
  GroupCounts() = default;
  explicit GroupCounts(double rate, bool is_scaled = false)
      : sampled_rate(rate), scaled(is_scaled) {}

  double sampled_rate = 1.0;
  bool scaled = false;

  void add(std::int64_t key, std::int64_t delta) {
    if (key == kEmpty) {
      if (!has_min_key_ && delta != 0) has_min_key_ = true;
      min_key_count_ += delta;
      return;
    }
    if (slots_used_ * 2 >= keys_.size()) grow();
    std::uint64_t pos = mix64(static_cast<std::uint64_t>(key)) & mask_;
    while (true) {
      if (keys_[pos] == kEmpty) {
        keys_[pos] = key;
        counts_[pos] = delta;
        ++slots_used_;
        return;
      }
      if (keys_[pos] == key) {
        counts_[pos] += delta;
        return;
      }
      pos = (pos + 1) & mask_;
    }
  }

  std::int64_t count_for(std::int64_t key) const noexcept {
    if (key == kEmpty) return has_min_key_ ? min_key_count_ : 0;
    if (keys_.empty()) return 0;
    std::uint64_t pos = mix64(static_cast<std::uint64_t>(key)) & mask_;
    while (keys_[pos] != kEmpty) {
      if (keys_[pos] == key) return counts_[pos];
      pos = (pos + 1) & mask_;
    }
    return 0;
  }

  bool contains(std::int64_t key) const noexcept {
    if (key == kEmpty) return has_min_key_;
    if (keys_.empty()) return false;
    std::uint64_t pos = mix64(static_cast<std::uint64_t>(key)) & mask_;
    while (keys_[pos] != kEmpty) {
      if (keys_[pos] == key) return true;
      pos = (pos + 1) & mask_;
    }
    return false;
  }

  std::uint64_t entry_count() const noexcept {
    return slots_used_ + (has_min_key_ ? 1 : 0);
  }

  std::int64_t total() const noexcept {
    std::int64_t sum = has_min_key_ ? min_key_count_ : 0;
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (keys_[i] != kEmpty) sum += counts_[i];
    }
    return sum;
  }

  template <class F>
  void for_each(F&& f) const {
    if (has_min_key_) f(kEmpty, min_key_count_);
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (keys_[i] != kEmpty) f(keys_[i], counts_[i]);
    }
  }

  std::vector<std::pair<std::int64_t, std::int64_t>> sorted_entries() const {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    out.reserve(entry_count());
    for_each([&](std::int64_t k, std::int64_t c) { out.emplace_back(k, c); });
    std::sort(out.begin(), out.end());
    return out;
  }

  void reserve(std::uint64_t expected_entries) {
    std::uint64_t cap = 16;
    while (cap < expected_entries * 2) cap <<= 1;
    if (cap > keys_.size()) rehash(cap);
  }

  // Entry-set equality plus matching rate/scaled metadata.
  bool operator==(const GroupCounts& other) const {
    if (sampled_rate != other.sampled_rate || scaled != other.scaled) return false;
    if (entry_count() != other.entry_count()) return false;
    bool equal = true;
    for_each([&](std::int64_t k, std::int64_t c) {
      if (other.count_for(k) != c) equal = false;
    });
    return equal;
  }

  static constexpr std::int64_t kEmpty = INT64_MIN;

 private:
  void grow() { rehash(keys_.empty() ? 16 : keys_.size() * 2); }

  void rehash(std::uint64_t new_cap) {
    std::vector<std::int64_t> old_keys = std::move(keys_);
    std::vector<std::int64_t> old_counts = std::move(counts_);
    keys_.assign(new_cap, kEmpty);
    counts_.assign(new_cap, 0);
    mask_ = new_cap - 1;
    slots_used_ = 0;
    for (std::size_t i = 0; i < old_keys.size(); ++i) {
      if (old_keys[i] == kEmpty) continue;
      std::uint64_t pos = mix64(static_cast<std::uint64_t>(old_keys[i])) & mask_;
      while (keys_[pos] != kEmpty) pos = (pos + 1) & mask_;
      keys_[pos] = old_keys[i];
      counts_[pos] = old_counts[i];
      ++slots_used_;
    }
  }

  std::vector<std::int64_t> keys_;
  std::vector<std::int64_t> counts_;
  std::uint64_t mask_ = 0;
  std::uint64_t slots_used_ = 0;
  std::int64_t min_key_count_ = 0;
  bool has_min_key_ = false;
};

namespace detail {

// Splits the view's included domain into `lanes` contiguous chunks of
// near-equal included-tuple count. Chunk boundaries never affect the merged
// result; they only balance work.
inline std::vector<std::vector<IndexRange>> chunk_ranges(
    std::span<const IndexRange> ranges, std::uint64_t included, unsigned lanes) {
  std::vector<std::vector<IndexRange>> out(lanes);
  if (included == 0 || lanes == 0) return out;
  std::size_t ri = 0;
  std::uint64_t consumed_in_range = 0;
  for (unsigned lane = 0; lane < lanes; ++lane) {
    const std::uint64_t lane_end_pos = (lane + 1) * included / lanes;
    std::uint64_t pos = lane * included / lanes;
    while (pos < lane_end_pos) {
      const IndexRange& r = ranges[ri];
      const std::uint64_t avail = r.length() - consumed_in_range;
      const std::uint64_t take = std::min(avail, lane_end_pos - pos);
      out[lane].push_back({r.begin + consumed_in_range, r.begin + consumed_in_range + take});
      consumed_in_range += take;
      pos += take;
      if (consumed_in_range == r.length()) {
        ++ri;
        consumed_in_range = 0;
      }
    }
  }
  return out;
}

inline void aggregate_ranges(std::span<const std::int64_t> values,
                             std::span<const IndexRange> ranges, GroupCounts& into) {
  for (const IndexRange& r : ranges) {
    for (std::uint64_t i = r.begin; i < r.end; ++i) {
      into.add(values[i], 1);
    }
  }
}

}  // namespace detail

// Counts group keys of `values` over `ranges`, partitioned into core_budget
// lanes. Lanes run on real threads (capped at hardware concurrency); the
// merged result is bit-identical for every budget.
inline GroupCounts aggregate_column(std::span<const std::int64_t> values,
                                    std::span<const IndexRange> ranges,
                                    std::uint64_t included_count, double sampled_rate,
                                    unsigned core_budget) {
  if (core_budget == 0) {
    throw std::invalid_argument("aggregate_column: core_budget must be >= 1");
  }
  GroupCounts result(sampled_rate);
  if (included_count == 0) return result;

  const unsigned lanes = core_budget;
  if (lanes == 1) {
    result.reserve(std::min<std::uint64_t>(included_count, 1u << 20));
    detail::aggregate_ranges(values, ranges, result);
    return result;
  }

  auto chunks = detail::chunk_ranges(ranges, included_count, lanes);
  std::vector<GroupCounts> partials(lanes);
  const unsigned pool = std::min<unsigned>(lanes, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> threads;
  threads.reserve(pool);
  for (unsigned t = 0; t < pool; ++t) {
    threads.emplace_back([&, t] {
      for (unsigned lane = t; lane < lanes; lane += pool) {
        partials[lane].sampled_rate = sampled_rate;
        detail::aggregate_ranges(values, chunks[lane], partials[lane]);
      }
    });
  }
  for (auto& th : threads) th.join();

  result.reserve(std::min<std::uint64_t>(included_count, 1u << 20));
  for (const GroupCounts& p : partials) {
    p.for_each([&](std::int64_t k, std::int64_t c) { result.add(k, c); });
  }
  return result;
}

inline GroupCounts execute_local(const SampleView& view, const Query& query,
                                 unsigned core_budget) {
  return aggregate_column(view.source ? std::span<const std::int64_t>(view.source->col_b)
                                      : std::span<const std::int64_t>(),
                          view.ranges, view.included_count,
                          query.sample.effective_rate(), core_budget);
}

// Pointwise sum of unscaled partials sharing a sampled_rate.
inline GroupCounts merge(std::span<const GroupCounts> partials) {
  if (partials.empty()) return GroupCounts(1.0);
  GroupCounts out(partials.front().sampled_rate);
  for (const GroupCounts& p : partials) {
    if (p.scaled) throw std::invalid_argument("merge: partials must be unscaled");
    if (p.sampled_rate != out.sampled_rate) {
      throw std::invalid_argument("merge: partials must share sampled_rate");
    }
    p.for_each([&](std::int64_t k, std::int64_t c) { out.add(k, c); });
  }
  return out;
}

// Divides each count by the sampling rate, rounding half away from zero.
// The rounding rule is frozen; golden tests depend on it.
inline GroupCounts scale(const GroupCounts& result, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw std::invalid_argument("scale: rate must be in (0, 1]");
  }
  if (result.scaled) throw std::invalid_argument("scale: result already scaled");
  GroupCounts out(result.sampled_rate, true);
  result.for_each([&](std::int64_t k, std::int64_t c) {
    out.add(k, std::llround(static_cast<double>(c) / rate));
  });
  return out;
}

// Single-threaded exact scan; ground truth for equivalence tests.
inline GroupCounts oracle_group_counts(const Relation& rel) {
  GroupCounts out(1.0);
  for (std::int64_t b : rel.col_b) out.add(b, 1);
  return out;
}

// ---------------------------------------------------------------------------
// Wire format
//
// Header (32 bytes):
//   u32  magic 0x53484950, little-endian
//   u8   version = 1
//   3B   reserved (zero)
//   u64  entry_count, little-endian
//   f64  sampled_rate, IEEE-754 bits little-endian
//   u8   scaled
//   7B   reserved (zero)
// Body: entry_count * (i64 key LE, i64 count LE), ascending key order.
// ---------------------------------------------------------------------------

struct ResultWire {
  std::vector<std::uint8_t> bytes;
  std::uint64_t size() const noexcept { return bytes.size(); }
};

constexpr std::uint32_t kResultMagic = 0x53484950;
constexpr std::uint64_t kResultHeaderBytes = 32;

constexpr std::uint64_t wire_size_bytes(std::uint64_t entry_count) noexcept {
  return kResultHeaderBytes + 16 * entry_count;
}

namespace detail {

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline std::uint32_t get_u32le(const std::uint8_t* p) noexcept {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
inline std::uint64_t get_u64le(const std::uint8_t* p) noexcept {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline ResultWire wire_encode(const GroupCounts& result) {
  ResultWire wire;
  const auto entries = result.sorted_entries();
  wire.bytes.reserve(wire_size_bytes(entries.size()));
  detail::put_u32le(wire.bytes, kResultMagic);
  wire.bytes.push_back(1);  // version
  wire.bytes.insert(wire.bytes.end(), 3, 0);
  detail::put_u64le(wire.bytes, entries.size());
  detail::put_u64le(wire.bytes, std::bit_cast<std::uint64_t>(result.sampled_rate));
  wire.bytes.push_back(result.scaled ? 1 : 0);
  wire.bytes.insert(wire.bytes.end(), 7, 0);
  for (const auto& [k, c] : entries) {
    detail::put_u64le(wire.bytes, static_cast<std::uint64_t>(k));
    detail::put_u64le(wire.bytes, static_cast<std::uint64_t>(c));
  }
  return wire;
}

inline GroupCounts wire_decode(const ResultWire& wire) {
  const auto& b = wire.bytes;
  if (b.size() < kResultHeaderBytes) throw DecodeError("result wire: truncated header");
  if (detail::get_u32le(b.data()) != kResultMagic) throw DecodeError("result wire: bad magic");
  if (b[4] != 1) throw DecodeError("result wire: unsupported version");
  const std::uint64_t entry_count = detail::get_u64le(b.data() + 8);
  if (b.size() != wire_size_bytes(entry_count)) {
    throw DecodeError("result wire: size does not match entry count");
  }
  GroupCounts out(std::bit_cast<double>(detail::get_u64le(b.data() + 16)), b[24] != 0);
  out.reserve(entry_count);
  const std::uint8_t* p = b.data() + kResultHeaderBytes;
  for (std::uint64_t i = 0; i < entry_count; ++i, p += 16) {
    out.add(static_cast<std::int64_t>(detail::get_u64le(p)),
            static_cast<std::int64_t>(detail::get_u64le(p + 8)));
  }
  return out;
}

}  // namespace shipwright
