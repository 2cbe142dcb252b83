// Link-model arithmetic (exact in picosecond virtual time), one-sided read
// semantics, and frame codec robustness.

#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <cstring>
#include <vector>

#include "shipwright/relation.hpp"
#include "shipwright/rng.hpp"
#include "shipwright/transport.hpp"

using namespace shipwright;

TEST_CASE("zero-length read costs exactly the latency") {
  const Relation rel = generate({64, 2, Order::shuffled, 0});
  const MemoryRegion region(0, rel);
  const LinkModel link = LinkModel::from_profile(2.0, 100.0);
  const ReadResult r = one_sided_read(region, 0, 0, link);
  REQUIRE(r.bytes.empty());
  REQUIRE(r.stats.bytes == 0);
  REQUIRE(r.stats.sim_time_ps == 2e6);
  REQUIRE(r.stats.worker_cpu_ps == 0.0);
}

TEST_CASE("one second to move 12.5e9 bytes at 100 Gb/s") {
  const LinkModel link = LinkModel::from_profile(0.0, 100.0);
  REQUIRE(link.transfer_time_s(12.5e9) == 1.0);
  REQUIRE(link.ps_per_byte == 80.0);
}

TEST_CASE("column reads round-trip the stored values") {
  const Relation rel = generate({10'000, 50, Order::shuffled, 77});
  const MemoryRegion region(0, rel);
  const LinkModel link = LinkModel::from_profile(1.0, 10.0);

  const ReadResult rb =
      one_sided_read(region, region.col_b_offset(0), 8 * rel.row_count(), link);
  REQUIRE(rb.stats.bytes == 8 * rel.row_count());
  for (std::uint64_t i = 0; i < rel.row_count(); ++i) {
    std::int64_t v;
    std::memcpy(&v, rb.bytes.data() + 8 * i, 8);
    REQUIRE(v == rel.col_b[i]);
  }

  // a slice in the middle of col_a
  const ReadResult ra = one_sided_read(region, region.col_a_offset(100), 8 * 32, link);
  std::int64_t first;
  std::memcpy(&first, ra.bytes.data(), 8);
  REQUIRE(first == rel.col_a[100]);
}

TEST_CASE("reads outside the region fault") {
  const Relation rel = generate({128, 2, Order::shuffled, 0});
  const MemoryRegion region(0, rel);
  REQUIRE(region.length() == 16 * 128);
  REQUIRE_THROWS_AS(region.read_bytes(region.length(), 1), std::out_of_range);
  REQUIRE_THROWS_AS(region.read_bytes(0, region.length() + 1), std::out_of_range);
  REQUIRE_NOTHROW(region.read_bytes(0, region.length()));
}

TEST_CASE("result push times") {
  // 32-byte push at 1 GB/s (= 8 Gb/s), 1 us latency: 1e-6 + 32/1e9 seconds.
  const LinkModel slow = LinkModel::from_profile(1.0, 8.0);
  GroupCounts empty(1.0);
  const TransferStats s = result_push(wire_encode(empty), slow);
  REQUIRE(s.bytes == 32);
  REQUIRE(s.sim_time_ps == 1'032'000.0);  // exact in picoseconds

  // 4 MB result at 12.5 GB/s, zero latency: 3.2e-4 seconds.
  const LinkModel fast = LinkModel::from_profile(0.0, 100.0);
  REQUIRE(fast.transfer_time_s(4e6) == 3.2e-4);
}

TEST_CASE("push then decode returns the original result") {
  const Relation rel = generate({5'000, 40, Order::shuffled, 5});
  const GroupCounts result = oracle_group_counts(rel);
  const ResultWire wire = wire_encode(result);
  const TransferStats stats = result_push(wire, LinkModel::from_profile(2.0, 100.0));
  REQUIRE(stats.bytes == wire.size());
  REQUIRE(wire_decode(wire) == result);
}

TEST_CASE("transfer-time linearity is exact in virtual time") {
  const LinkModel link = LinkModel::from_profile(2.0, 100.0);
  SplitMix64 rng(13);
  for (int i = 0; i < 10'000; ++i) {
    const auto a = static_cast<double>(rng.next_below(1'000'000'000));
    const auto b = static_cast<double>(rng.next_below(1'000'000'000));
    const double lhs = link.transfer_time_ps(a) + link.transfer_time_ps(b) - link.latency_ps;
    const double rhs = link.transfer_time_ps(a + b);
    REQUIRE(lhs == rhs);
  }
}

TEST_CASE("transfer time is strictly increasing in bytes") {
  const LinkModel link = LinkModel::from_profile(2.0, 100.0);
  SplitMix64 rng(14);
  for (int i = 0; i < 1'000; ++i) {
    const auto a = static_cast<double>(rng.next_below(1'000'000'000));
    REQUIRE(link.transfer_time_ps(a) < link.transfer_time_ps(a + 1));
  }
}

TEST_CASE("link model validates its parameters") {
  REQUIRE_THROWS_AS(LinkModel::from_rates(0.0, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(LinkModel::from_rates(-1.0, 1e9), std::invalid_argument);
}

TEST_CASE("ds_read_req round-trips") {
  const Message m = encode_ds_read_req({0, 16});
  const Message back = frame_decode(frame_encode(m));
  REQUIRE(back == m);
  const DsReadReq req = decode_ds_read_req(back);
  REQUIRE(req.offset == 0);
  REQUIRE(req.len == 16);
}

TEST_CASE("query dispatch payload round-trips") {
  QueryDispatchMsg q;
  q.query_id = 77;
  q.method = SampleMethod::cluster;
  q.rate = 0.125;
  q.seed = 0xfeedface;
  q.scale_estimates = true;
  q.core_budget = 28;
  const QueryDispatchMsg back = decode_query_dispatch(frame_decode(frame_encode(
      encode_query_dispatch(q))));
  REQUIRE(back.query_id == q.query_id);
  REQUIRE(back.method == q.method);
  REQUIRE(back.rate == q.rate);
  REQUIRE(back.seed == q.seed);
  REQUIRE(back.scale_estimates == q.scale_estimates);
  REQUIRE(back.core_budget == q.core_budget);
}

TEST_CASE("frames with a bad magic are protocol errors") {
  std::vector<std::uint8_t> frame = frame_encode(Message{MsgType::ds_read_resp, {1, 2, 3}});
  frame[0] ^= 0x01;
  REQUIRE_THROWS_AS(frame_decode(frame), ProtocolError);
}

TEST_CASE("frames with bad type or length are protocol errors") {
  std::vector<std::uint8_t> frame = frame_encode(Message{MsgType::fs_result, {9, 9}});
  auto bad_type = frame;
  bad_type[4] = 99;
  REQUIRE_THROWS_AS(frame_decode(bad_type), ProtocolError);
  auto short_frame = frame;
  short_frame.pop_back();
  REQUIRE_THROWS_AS(frame_decode(short_frame), ProtocolError);
  REQUIRE_THROWS_AS(frame_decode(frame.data(), 5), ProtocolError);
}

TEST_CASE("ten thousand random messages round-trip byte-identically") {
  SplitMix64 rng(101);
  for (int i = 0; i < 10'000; ++i) {
    Message m;
    m.type = static_cast<MsgType>(1 + rng.next_below(4));
    m.payload.resize(rng.next_below(512));
    for (auto& byte : m.payload) byte = static_cast<std::uint8_t>(rng.next());
    const std::vector<std::uint8_t> encoded = frame_encode(m);
    REQUIRE(frame_decode(encoded) == m);
    // re-encoding is byte-identical
    REQUIRE(frame_encode(frame_decode(encoded)) == encoded);
  }
}
