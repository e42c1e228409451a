// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <memory>
#include <thread>

#include "obliqc/backend.hpp"
#include "obliqc/catalog.hpp"
#include "obliqc/handshake.hpp"
#include "obliqc/ledger.hpp"

namespace obliqc {

struct ServerConfig {
  std::string addr = "127.0.0.1:0";  // port 0 picks an ephemeral port
  std::string backend = "reference";
  std::string catalog_path;  // empty: built-in catalog
  int workers = 0;           // 0: hardware threads
  uint8_t key_mode_policy = wire::kKeyModeSame | wire::kKeyModeDiff;
  uint32_t cadence = 1;
  int64_t scale = 100;
  std::vector<uint16_t> widths = {32, 16};  // preference order

  void validate() const;
};

/// The evaluating end of the trust model: holds the rule catalog, evaluates
/// requests blindly over the oblivious backend, and never decrypts. One
/// session per connection; requests within a session are processed in
/// order; sessions run concurrently.
class Server {
public:
  Server(ServerConfig cfg, std::unique_ptr<Backend> backend, Catalog catalog);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();  // binds and begins accepting; throws on bad addr / busy port
  void stop();   // graceful: stops accepting, closes sessions, joins

  uint16_t port() const { return port_; }
  size_t live_sessions() const;

  /// Per-session transfer totals; throws unknown_session for ids never seen.
  /// Retained after the session closes.
  std::shared_ptr<const wire::TransferLedger> ledger_report(uint64_t session_id) const;

  const ServerConfig& config() const { return cfg_; }

private:
  struct SessionState;

  void accept_loop();
  void serve_connection(int fd);
  wire::Message handle(SessionState& st, const wire::Message& in);
  wire::EvalResponsePayload evaluate(SessionState& st,
                                     const wire::EvalRequestPayload& req);

  ServerConfig cfg_;
  std::unique_ptr<Backend> backend_;
  Catalog catalog_;
  // plans per rule per width; absent when the combination is infeasible
  std::map<std::string, std::map<int, rules::ExecutionPlan>> plans_;

  std::atomic<int> listen_fd_{-1};
  uint16_t port_ = 0;
  std::thread accept_thread_;
  std::atomic<bool> stopping_{false};

  // Session threads are detached; live_ + cv_ let stop() drain them without
  // accumulating joinable zombies across many short sessions.
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<int> open_fds_;
  size_t live_ = 0;
  std::map<uint64_t, std::shared_ptr<wire::TransferLedger>> ledgers_;
};

}  // namespace obliqc
