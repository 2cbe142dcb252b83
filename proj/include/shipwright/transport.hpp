#pragma once

// Communication substrate with one-sided-read semantics: a linear link model
// in virtual time, remote-readable memory regions over a relation's columns,
// and the framed message protocol the socket backend speaks.
//
// Virtual time is carried in picoseconds. With profile bandwidths whose
// per-byte cost is an integer picosecond count (100 Gb/s -> 80 ps/byte),
// every transfer time is an exactly representable integer double, so
// transfer-time composition is exact, not approximate.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shipwright/exec.hpp"
#include "shipwright/relation.hpp"

namespace shipwright {

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LinkModel {
  double latency_ps = 0.0;
  double ps_per_byte = 0.0;

  static LinkModel from_rates(double latency_s, double bandwidth_Bps) {
    if (!(bandwidth_Bps > 0.0)) throw std::invalid_argument("LinkModel: bandwidth must be > 0");
    if (!(latency_s >= 0.0)) throw std::invalid_argument("LinkModel: latency must be >= 0");
    LinkModel l;
    l.latency_ps = latency_s * 1e12;
    l.ps_per_byte = 1e12 / bandwidth_Bps;
    return l;
  }

  // latency in microseconds, bandwidth in gigabits per second.
  static LinkModel from_profile(double latency_us, double bandwidth_gbps) {
    return from_rates(latency_us * 1e-6, bandwidth_gbps * 0.125e9);
  }

  double transfer_time_ps(double bytes) const noexcept {
    return latency_ps + bytes * ps_per_byte;
  }
  double transfer_time_s(double bytes) const noexcept {
    return transfer_time_ps(bytes) * 1e-12;
  }

  double latency_s() const noexcept { return latency_ps * 1e-12; }
  double bandwidth_Bps() const noexcept { return 1e12 / ps_per_byte; }
  double latency_us() const noexcept { return latency_ps * 1e-6; }
  double bandwidth_gbps() const noexcept { return bandwidth_Bps() / 0.125e9; }
};

// Remote-readable byte span over a relation's columns, one address space per
// worker shard:
//   [0, 8 * rows)        col_a, i64 little-endian
//   [8 * rows, 16 * rows) col_b, i64 little-endian
// Offsets are local to the shard [row_begin, row_end) of the backing table.
class MemoryRegion {
 public:
  MemoryRegion(std::uint32_t node, const Relation& rel)
      : MemoryRegion(node, rel, 0, rel.row_count()) {}

  MemoryRegion(std::uint32_t node, const Relation& rel, std::uint64_t row_begin,
               std::uint64_t row_end)
      : node_id(node), rel_(&rel), row_begin_(row_begin), rows_(row_end - row_begin) {
    if (row_end < row_begin || row_end > rel.row_count()) {
      throw std::invalid_argument("MemoryRegion: shard out of range");
    }
  }

  std::uint32_t node_id = 0;

  std::uint64_t length() const noexcept { return 16 * rows_; }
  std::uint64_t rows() const noexcept { return rows_; }

  // Byte offset of a column slice within this region's address space.
  std::uint64_t col_a_offset(std::uint64_t local_row = 0) const noexcept {
    return 8 * local_row;
  }
  std::uint64_t col_b_offset(std::uint64_t local_row = 0) const noexcept {
    return 8 * rows_ + 8 * local_row;
  }

  std::vector<std::uint8_t> read_bytes(std::uint64_t offset, std::uint64_t len) const {
    if (offset > length() || len > length() - offset) {
      throw std::out_of_range("MemoryRegion: read outside registered region");
    }
    std::vector<std::uint8_t> out(len);
    std::uint64_t written = 0;
    while (written < len) {
      const std::uint64_t pos = offset + written;
      const bool in_a = pos < 8 * rows_;
      const std::uint64_t col_pos = in_a ? pos : pos - 8 * rows_;
      const std::uint64_t col_avail = 8 * rows_ - col_pos;
      const std::uint64_t take = std::min(len - written, col_avail);
      const auto& col = in_a ? rel_->col_a : rel_->col_b;
      copy_le(col.data() + row_begin_, col_pos, out.data() + written, take);
      written += take;
    }
    return out;
  }

 private:
  static void copy_le(const std::int64_t* base, std::uint64_t byte_off,
                      std::uint8_t* dst, std::uint64_t len) {
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(dst, reinterpret_cast<const std::uint8_t*>(base) + byte_off, len);
    } else {
      for (std::uint64_t i = 0; i < len; ++i) {
        const std::uint64_t pos = byte_off + i;
        const auto word = static_cast<std::uint64_t>(base[pos / 8]);
        dst[i] = static_cast<std::uint8_t>(word >> (8 * (pos % 8)));
      }
    }
  }

  const Relation* rel_;
  std::uint64_t row_begin_;
  std::uint64_t rows_;
};

struct TransferStats {
  std::uint64_t bytes = 0;
  double sim_time_ps = 0.0;
  double worker_cpu_ps = 0.0;  // exactly 0 for one-sided reads

  double sim_time_s() const noexcept { return sim_time_ps * 1e-12; }
  double worker_cpu_s() const noexcept { return worker_cpu_ps * 1e-12; }
};

struct ReadResult {
  std::vector<std::uint8_t> bytes;
  TransferStats stats;
};

// RDMA-read stand-in: returns the exact bytes, costs link time, and never
// touches the remote CPU. Out-of-bounds reads model a protection fault.
inline ReadResult one_sided_read(const MemoryRegion& region, std::uint64_t offset,
                                 std::uint64_t len, const LinkModel& link) {
  ReadResult r;
  r.bytes = region.read_bytes(offset, len);
  r.stats.bytes = len;
  r.stats.sim_time_ps = link.transfer_time_ps(static_cast<double>(len));
  r.stats.worker_cpu_ps = 0.0;
  return r;
}

// Worker-to-coordinator result transfer. Serialization CPU is attributed by
// the engine, not here.
inline TransferStats result_push(const ResultWire& wire, const LinkModel& link) {
  TransferStats s;
  s.bytes = wire.size();
  s.sim_time_ps = link.transfer_time_ps(static_cast<double>(wire.size()));
  s.worker_cpu_ps = 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Framed protocol (socket backend)
//
// Frame: u32 magic 0x51534850 LE, u8 type, u64 payload length LE, payload.
// ---------------------------------------------------------------------------

constexpr std::uint32_t kFrameMagic = 0x51534850;
constexpr std::uint64_t kFrameHeaderBytes = 13;
constexpr std::uint64_t kMaxFramePayload = 1ull << 32;  // sanity bound

enum class MsgType : std::uint8_t {
  query_dispatch = 1,
  fs_result = 2,
  ds_read_req = 3,
  ds_read_resp = 4,
};

struct Message {
  MsgType type = MsgType::query_dispatch;
  std::vector<std::uint8_t> payload;

  bool operator==(const Message&) const = default;
};

inline std::vector<std::uint8_t> frame_encode(const Message& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderBytes + msg.payload.size());
  detail::put_u32le(out, kFrameMagic);
  out.push_back(static_cast<std::uint8_t>(msg.type));
  detail::put_u64le(out, msg.payload.size());
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

inline Message frame_decode(const std::uint8_t* data, std::size_t size) {
  if (size < kFrameHeaderBytes) throw ProtocolError("frame: truncated header");
  if (detail::get_u32le(data) != kFrameMagic) throw ProtocolError("frame: bad magic");
  const std::uint8_t type = data[4];
  if (type < 1 || type > 4) throw ProtocolError("frame: unknown message type");
  const std::uint64_t len = detail::get_u64le(data + 5);
  if (len > kMaxFramePayload) throw ProtocolError("frame: payload length out of bounds");
  if (size != kFrameHeaderBytes + len) throw ProtocolError("frame: size mismatch");
  Message msg;
  msg.type = static_cast<MsgType>(type);
  msg.payload.assign(data + kFrameHeaderBytes, data + size);
  return msg;
}

inline Message frame_decode(const std::vector<std::uint8_t>& buf) {
  return frame_decode(buf.data(), buf.size());
}

// Typed payloads ------------------------------------------------------------

struct QueryDispatchMsg {
  std::uint64_t query_id = 0;
  SampleMethod method = SampleMethod::none;
  double rate = 1.0;
  std::uint64_t seed = 0;
  bool scale_estimates = false;
  std::uint32_t core_budget = 1;
};

inline Message encode_query_dispatch(const QueryDispatchMsg& q) {
  Message m{MsgType::query_dispatch, {}};
  detail::put_u64le(m.payload, q.query_id);
  m.payload.push_back(static_cast<std::uint8_t>(q.method));
  detail::put_u64le(m.payload, std::bit_cast<std::uint64_t>(q.rate));
  detail::put_u64le(m.payload, q.seed);
  m.payload.push_back(q.scale_estimates ? 1 : 0);
  detail::put_u32le(m.payload, q.core_budget);
  return m;
}

inline QueryDispatchMsg decode_query_dispatch(const Message& m) {
  if (m.type != MsgType::query_dispatch || m.payload.size() != 30) {
    throw ProtocolError("query_dispatch: malformed payload");
  }
  const std::uint8_t* p = m.payload.data();
  QueryDispatchMsg q;
  q.query_id = detail::get_u64le(p);
  if (p[8] > 2) throw ProtocolError("query_dispatch: bad sampling method");
  q.method = static_cast<SampleMethod>(p[8]);
  q.rate = std::bit_cast<double>(detail::get_u64le(p + 9));
  q.seed = detail::get_u64le(p + 17);
  q.scale_estimates = p[25] != 0;
  q.core_budget = detail::get_u32le(p + 26);
  return q;
}

struct DsReadReq {
  std::uint64_t offset = 0;
  std::uint64_t len = 0;
};

inline Message encode_ds_read_req(const DsReadReq& r) {
  Message m{MsgType::ds_read_req, {}};
  detail::put_u64le(m.payload, r.offset);
  detail::put_u64le(m.payload, r.len);
  return m;
}

inline DsReadReq decode_ds_read_req(const Message& m) {
  if (m.type != MsgType::ds_read_req || m.payload.size() != 16) {
    throw ProtocolError("ds_read_req: malformed payload");
  }
  return {detail::get_u64le(m.payload.data()), detail::get_u64le(m.payload.data() + 8)};
}

}  // namespace shipwright
