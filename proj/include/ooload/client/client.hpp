#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <future>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ooload/core/records.hpp"
#include "ooload/core/thread_pool.hpp"
#include "ooload/netsim/profile.hpp"
#include "ooload/store/backend.hpp"
#include "ooload/store/wire.hpp"

namespace ooload {

struct ClientConfig {
  std::vector<std::string> endpoints;
  std::size_t io_workers = 1;
  std::size_t connections_per_worker = 2;
  std::size_t max_inflight_per_connection = 1024;
  std::chrono::milliseconds request_timeout{30000};
  std::size_t retry_limit = 1;
  std::chrono::milliseconds connect_timeout{5000};
  // Shapes both directions of every connection on the client side.
  std::optional<netsim::NetProfile> netprofile;
  // Batch copy workers; 0 means one per CPU.
  std::size_t copy_threads = 0;
  std::size_t max_frame = wire::kDefaultMaxFrameBytes;

  std::size_t total_connections() const noexcept { return io_workers * connections_per_worker; }
  void validate() const;
};

// Final outcome of one request. The payload view is only valid during the
// callback.
struct Reply {
  enum class Outcome : std::uint8_t { Response, Timeout, ConnectionLost };
  Outcome outcome = Outcome::Response;
  wire::Status status = wire::Status::Ok;
  std::span<const std::uint8_t> payload;
  std::size_t connection = 0;
  double issued_at = 0.0;
  double arrived_at = 0.0;
};

// Receives request outcomes on I/O threads. Implementations must be cheap and
// must tolerate a second reply for the same index (speculative copies).
class ReplyTarget {
 public:
  virtual ~ReplyTarget() = default;
  virtual void on_reply(std::size_t index, const Reply& reply) = 0;
  // Whether a copy of this request may be sent on another connection.
  virtual bool hedgeable(std::size_t index) const { return false; }
};

struct ConnectionCounters {
  std::uint64_t bytes_in = 0;
  std::uint64_t arrivals = 0;
  std::size_t inflight = 0;
};

struct ClientCounters {
  double time = 0.0;
  std::vector<ConnectionCounters> connections;
  std::uint64_t requests = 0;
  std::uint64_t speculative_requests = 0;
  std::uint64_t retries = 0;
  std::size_t max_inflight_seen = 0;
};

// Multi-connection pipelined client. Requests go to the connection with the
// fewest outstanding requests; beyond the per-connection cap they wait in a
// client-side queue. Thread-safe; shared by every loader of a process.
class StoreClient {
 public:
  // Throws ConnectError when no endpoint is reachable.
  static std::shared_ptr<StoreClient> connect(ClientConfig config);
  ~StoreClient();
  StoreClient(const StoreClient&) = delete;
  StoreClient& operator=(const StoreClient&) = delete;

  const ClientConfig& config() const noexcept;
  std::size_t num_connections() const noexcept;
  // Some configured connections could not be opened.
  bool degraded() const noexcept;

  // Seconds since the client was created; the time base of Reply and Batch.
  double now() const noexcept;

  // Issues one request; the target is called exactly once per issued copy.
  void submit(wire::Opcode op, std::string table, Blob payload, std::shared_ptr<ReplyTarget> target,
              std::size_t index);

  // Issues GETs for ids[i] reported to target as index base + i.
  void submit_gets(const std::string& table, std::span<const SampleId> ids,
                   std::shared_ptr<ReplyTarget> target, std::size_t base);

  // Copies requests the target marks hedgeable from slow connections to fast
  // ones. Returns the number of copies sent.
  std::size_t speculate(double ratio = 1.0);

  // Mean response size so far, used to cost requests still in flight.
  double mean_response_bytes() const noexcept;

  ClientCounters counters() const;

  // Pool used to copy items into batch buffers.
  ThreadPool& copy_pool() noexcept;

  // Synchronous helpers. Errors carried in responses are rethrown as the
  // matching library exception.
  void ping();
  std::optional<StoredSample> get(const std::string& table, const SampleId& id);
  void put(const std::string& table, const SampleRecord& rec);
  void put_atomic(const std::string& data_table, const std::string& meta_table,
                  const SampleRecord& rec, const MetadataRecord& meta);
  std::vector<SampleId> list_ids(const std::string& table);
  std::optional<MetadataRecord> get_metadata(const std::string& table, const SampleId& id);

  // Generic form of the helpers above.
  std::future<wire::WireResponse> call(wire::Opcode op, std::string table, Blob payload);

  class Impl;

 private:
  explicit StoreClient(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

// Throws the exception named by an error payload ("Kind: message").
[[noreturn]] void rethrow_remote_error(wire::Status status, std::span<const std::uint8_t> payload);

}  // namespace ooload
