#pragma once

// Optional TCP backend speaking the framed protocol. It demonstrates the
// wire contract with real I/O: payloads must match the virtual-time backend
// byte for byte. Timing over sockets is wall clock and carries no simulation
// guarantees.
//
// The worker serves one relation, one connection at a time, one in-flight
// request per connection. A malformed frame or an out-of-range read aborts
// the connection, mirroring a protection fault.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "shipwright/clusternode.hpp"
#include "shipwright/exec.hpp"
#include "shipwright/relation.hpp"
#include "shipwright/telemetry.hpp"
#include "shipwright/transport.hpp"

namespace shipwright {

namespace detail {

inline void write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n <= 0) throw ProtocolError("socket: send failed");
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

inline bool read_exact(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n == 0) return false;  // orderly shutdown
    if (n < 0) throw ProtocolError("socket: recv failed");
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

inline void send_message(int fd, const Message& msg) {
  const std::vector<std::uint8_t> frame = frame_encode(msg);
  write_all(fd, frame.data(), frame.size());
}

// Reads one frame; returns false on clean EOF before a header byte.
inline bool recv_message(int fd, Message& msg) {
  std::uint8_t header[kFrameHeaderBytes];
  if (!read_exact(fd, header, sizeof(header))) return false;
  if (get_u32le(header) != kFrameMagic) throw ProtocolError("frame: bad magic");
  const std::uint8_t type = header[4];
  if (type < 1 || type > 4) throw ProtocolError("frame: unknown message type");
  const std::uint64_t len = get_u64le(header + 5);
  if (len > kMaxFramePayload) throw ProtocolError("frame: payload length out of bounds");
  msg.type = static_cast<MsgType>(type);
  msg.payload.resize(len);
  if (len > 0 && !read_exact(fd, msg.payload.data(), len)) {
    throw ProtocolError("frame: truncated payload");
  }
  return true;
}

struct FdCloser {
  int fd = -1;
  ~FdCloser() {
    if (fd >= 0) ::close(fd);
  }
};

}  // namespace detail

class SocketWorker {
 public:
  SocketWorker(const Relation& rel, const ClusterLayout& lay)
      : rel_(&rel), lay_(lay), region_(0, rel) {}

  ~SocketWorker() { stop(); }

  // Binds a loopback listener and starts serving; returns the bound port.
  std::uint16_t start(std::uint16_t port = 0) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("worker: socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw std::runtime_error("worker: bind() failed");
    }
    if (::listen(listen_fd_, 4) != 0) throw std::runtime_error("worker: listen() failed");
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    running_ = true;
    thread_ = std::thread([this] { accept_loop(); });
    return ntohs(addr.sin_port);
  }

  void stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
    if (thread_.joinable()) thread_.join();
  }

 private:
  void accept_loop() {
    while (running_) {
      const int conn = ::accept(listen_fd_, nullptr, nullptr);
      if (conn < 0) break;
      serve_connection(conn);
      ::close(conn);
    }
  }

  void serve_connection(int fd) {
    Message msg;
    try {
      while (detail::recv_message(fd, msg)) {
        switch (msg.type) {
          case MsgType::query_dispatch: {
            const QueryDispatchMsg qd = decode_query_dispatch(msg);
            const Query query{qd.query_id, SampleSpec(qd.method, qd.rate, qd.seed),
                              qd.scale_estimates};
            const SampleView view = sample(*rel_, lay_, query.sample);
            GroupCounts result = execute_local(view, query, std::max(1u, qd.core_budget));
            detail::send_message(fd, Message{MsgType::fs_result, wire_encode(result).bytes});
            break;
          }
          case MsgType::ds_read_req: {
            const DsReadReq req = decode_ds_read_req(msg);
            // Throws out_of_range beyond the region; abort the connection.
            detail::send_message(
                fd, Message{MsgType::ds_read_resp, region_.read_bytes(req.offset, req.len)});
            break;
          }
          default:
            throw ProtocolError("worker: unexpected message type");
        }
      }
    } catch (const std::exception&) {
      // Protocol violation or protection fault: drop the connection.
    }
  }

  const Relation* rel_;
  ClusterLayout lay_;
  MemoryRegion region_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread thread_;
};

class SocketCoordinator {
 public:
  SocketCoordinator(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw std::runtime_error("coordinator: socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd_);
      throw std::invalid_argument("coordinator: bad host address: " + host);
    }
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd_);
      throw std::runtime_error("coordinator: connect() failed");
    }
  }

  ~SocketCoordinator() {
    if (fd_ >= 0) ::close(fd_);
  }

  SocketCoordinator(const SocketCoordinator&) = delete;
  SocketCoordinator& operator=(const SocketCoordinator&) = delete;

  ResultWire fs_query(const Query& query, std::uint32_t worker_cores) {
    QueryDispatchMsg qd;
    qd.query_id = query.id;
    qd.method = query.sample.method;
    qd.rate = query.sample.rate;
    qd.seed = query.sample.seed;
    qd.scale_estimates = query.scale_estimates;
    qd.core_budget = worker_cores;
    detail::send_message(fd_, encode_query_dispatch(qd));
    Message reply;
    if (!detail::recv_message(fd_, reply) || reply.type != MsgType::fs_result) {
      throw ProtocolError("coordinator: expected fs_result");
    }
    return ResultWire{std::move(reply.payload)};
  }

  std::vector<std::uint8_t> ds_read(std::uint64_t offset, std::uint64_t len) {
    detail::send_message(fd_, encode_ds_read_req({offset, len}));
    Message reply;
    if (!detail::recv_message(fd_, reply) || reply.type != MsgType::ds_read_resp) {
      throw ProtocolError("coordinator: expected ds_read_resp");
    }
    if (reply.payload.size() != len) throw ProtocolError("coordinator: short read");
    return std::move(reply.payload);
  }

 private:
  int fd_ = -1;
};

// Runs a batch against a live worker, mirroring the virtual-time engine's
// data flow. Response time is wall clock; bytes count message payloads.
inline std::pair<std::vector<GroupCounts>, Telemetry> run_socket_batch(
    const ClusterSetup& setup, SocketCoordinator& coord, std::uint64_t row_count,
    const ClusterLayout& lay, std::span<const Query> batch, ShipMode mode) {
  setup.validate();
  if (batch.empty()) throw std::invalid_argument("run_socket_batch: empty batch");

  const auto t0 = std::chrono::steady_clock::now();
  Telemetry tel;
  tel.mode = mode;
  std::vector<GroupCounts> results;
  results.reserve(batch.size());

  if (mode == ShipMode::fs) {
    std::vector<GroupCounts> partials(1);
    for (const Query& q : batch) {
      const ResultWire wire = coord.fs_query(q, setup.worker_cores);
      tel.bytes_transferred += wire.size();
      partials[0] = wire_decode(wire);
      results.push_back(detail::maybe_scale(merge(partials), q));
    }
  } else {
    const SampleMethod method = batch.front().sample.method;
    for (const Query& q : batch) {
      if (q.sample.method != method) {
        throw std::invalid_argument("run_socket_batch: batch mixes sampling methods");
      }
    }
    std::vector<std::int64_t> fetched_b;
    std::vector<std::uint64_t> store_ids, store_offsets;
    std::uint64_t store_len = 0;
    if (method == SampleMethod::cluster) {
      for (std::uint64_t k = 0; k < lay.cluster_count; ++k) {
        const bool wanted = std::any_of(batch.begin(), batch.end(), [&](const Query& q) {
          return cluster_included(q.sample, k);
        });
        if (!wanted) continue;
        store_ids.push_back(k);
        store_offsets.push_back(store_len);
        store_len += lay.end_of(k) - lay.begin_of(k);
      }
      fetched_b.resize(store_len);
      for (std::size_t s = 0; s < store_ids.size(); ++s) {
        const std::uint64_t k = store_ids[s];
        const std::uint64_t rows = lay.end_of(k) - lay.begin_of(k);
        const auto a = coord.ds_read(8 * lay.begin_of(k), 8 * rows);
        const auto b = coord.ds_read(8 * row_count + 8 * lay.begin_of(k), 8 * rows);
        tel.bytes_transferred += a.size() + b.size();
        detail::decode_i64le(b, fetched_b.data() + store_offsets[s]);
      }
    } else {
      fetched_b.resize(row_count);
      const auto a = coord.ds_read(0, 8 * row_count);
      const auto b = coord.ds_read(8 * row_count, 8 * row_count);
      tel.bytes_transferred += a.size() + b.size();
      detail::decode_i64le(b, fetched_b.data());
    }

    for (const Query& q : batch) {
      std::vector<IndexRange> ranges;
      std::uint64_t included = 0;
      if (method == SampleMethod::none) {
        if (row_count > 0) ranges.push_back({0, row_count});
        included = row_count;
      } else if (method == SampleMethod::bernoulli) {
        detail::bernoulli_runs(0, row_count, q.sample, ranges, included);
      } else {
        for (std::size_t s = 0; s < store_ids.size(); ++s) {
          if (!cluster_included(q.sample, store_ids[s])) continue;
          const std::uint64_t len = lay.end_of(store_ids[s]) - lay.begin_of(store_ids[s]);
          ranges.push_back({store_offsets[s], store_offsets[s] + len});
          included += len;
        }
      }
      GroupCounts result = aggregate_column(fetched_b, ranges, included,
                                            q.sample.effective_rate(),
                                            setup.coordinator_cores);
      results.push_back(detail::maybe_scale(std::move(result), q));
    }
  }

  const auto t1 = std::chrono::steady_clock::now();
  tel.response_time_s = std::chrono::duration<double>(t1 - t0).count();
  tel.result_entries = results.front().entry_count();
  tel.timed_out = setup.timeout_s > 0.0 && tel.response_time_s > setup.timeout_s;
  return {std::move(results), tel};
}

}  // namespace shipwright
