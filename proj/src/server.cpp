// SPDX-License-Identifier: Apache-2.0
#include "obliqc/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include "net_io.hpp"
#include "obliqc/log.hpp"

namespace obliqc {

using wire::Kind;
using wire::Message;

void ServerConfig::validate() const {
  if (workers < 0) fail(Errc::config_error, "worker count must be >= 1 (or 0 for auto)");
  if (widths.empty()) fail(Errc::config_error, "server must support some width");
  if (scale <= 0) fail(Errc::config_error, "scale must be positive");
}

struct Server::SessionState {
  uint64_t session_id = 0;  // bound by the first frame that names one
  bool hello_done = false;
  wire::Agreement agreement;
  FixedPointConfig cfg;  // filled per eval request from the rule's range
  std::map<std::string, std::map<uint32_t, std::vector<uint8_t>>> pending_chunks;
  std::map<std::string, std::vector<uint8_t>> artifacts;
  std::shared_ptr<wire::TransferLedger> ledger;
};

Server::Server(ServerConfig cfg, std::unique_ptr<Backend> backend, Catalog catalog)
    : cfg_(std::move(cfg)), backend_(std::move(backend)), catalog_(std::move(catalog)) {
  cfg_.validate();
  if (cfg_.workers == 0)
    cfg_.workers = int(std::max(1u, std::thread::hardware_concurrency()));
  if (catalog_.entries.empty())
    fail(Errc::config_error, "catalog must define at least one rule");
  // Plan every (rule, width) pair up front; infeasible pairs simply stay
  // out of the table and requests for them get a plan_overflow error.
  for (const auto& [name, entry] : catalog_.entries) {
    for (uint16_t w : cfg_.widths) {
      FixedPointConfig fc{cfg_.scale, int(w), entry.lo, entry.hi};
      try {
        plans_[name][int(w)] = rules::plan(entry.spec, fc);
      } catch (const Error& e) {
        log::info("rule " + name + " infeasible at width " + std::to_string(w) +
                  ": " + e.what());
      }
    }
    if (plans_[name].empty())
      fail(Errc::plan_overflow,
           "rule " + name + " is infeasible at every configured width");
  }
}

Server::~Server() { stop(); }

void Server::start() {
  auto ep = net::parse_addr(cfg_.addr);
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) fail(Errc::io_error, "cannot create listen socket");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &sa.sin_addr) != 1) {
    ::close(fd);
    fail(Errc::config_error, "listen address must be numeric IPv4");
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    ::close(fd);
    fail(Errc::io_error, "cannot bind " + cfg_.addr + ": " + std::strerror(errno));
  }
  if (::listen(fd, 128) != 0) {
    ::close(fd);
    fail(Errc::io_error, "listen failed");
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  stopping_.store(false);
  listen_fd_.store(fd);
  accept_thread_ = std::thread([this] { accept_loop(); });
  log::info("listening on " + net::parse_addr(cfg_.addr).host + ":" +
            std::to_string(port_));
}

void Server::stop() {
  if (listen_fd_.load() < 0 && !accept_thread_.joinable()) return;
  stopping_.store(true);
  if (int fd = listen_fd_.exchange(-1); fd >= 0) {
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  std::unique_lock lk(mu_);
  for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
  cv_.wait(lk, [this] { return live_ == 0; });
}

size_t Server::live_sessions() const {
  std::lock_guard lk(mu_);
  return live_;
}

std::shared_ptr<const wire::TransferLedger> Server::ledger_report(
    uint64_t session_id) const {
  std::lock_guard lk(mu_);
  auto it = ledgers_.find(session_id);
  if (it == ledgers_.end())
    fail(Errc::unknown_session, "no ledger for session " + std::to_string(session_id));
  return it->second;
}

void Server::accept_loop() {
  const int lfd = listen_fd_.load();
  for (;;) {
    int fd = ::accept(lfd, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_.load()) return;
      if (errno == EINTR) continue;
      return;
    }
    {
      std::lock_guard lk(mu_);
      if (stopping_.load()) {
        ::close(fd);
        return;
      }
      open_fds_.push_back(fd);
      ++live_;
    }
    std::thread([this, fd] { serve_connection(fd); }).detach();
  }
}

namespace {

Message error_reply(const Message& in, Errc code, const std::string& what) {
  Message out;
  out.kind = Kind::error;
  out.session_id = in.session_id;
  out.key_epoch = in.key_epoch;
  out.payload = wire::encode_error({uint16_t(code), what});
  return out;
}

}  // namespace

void Server::serve_connection(int fd) {
  SessionState st;
  st.ledger = std::make_shared<wire::TransferLedger>();
  try {
    for (;;) {
      auto frame = net::read_frame(fd);
      if (!frame) break;  // clean close
      Message in = wire::deserialize(*frame);
      st.ledger->add(in.kind, wire::Direction::received, frame->size());
      if (st.session_id == 0 && in.session_id != 0) {
        st.session_id = in.session_id;
        std::lock_guard lk(mu_);
        ledgers_[st.session_id] = st.ledger;
      }
      Message out = handle(st, in);
      auto bytes = wire::serialize(out);
      st.ledger->add(out.kind, wire::Direction::sent, bytes.size());
      net::write_all(fd, bytes);
    }
  } catch (const Error& e) {
    log::info(std::string("session ended: ") + e.what());
  } catch (const std::exception& e) {
    log::warn(std::string("session crashed: ") + e.what());
  }
  ::close(fd);
  // Final touch of *this: under the lock, then notify. Nothing below.
  std::lock_guard lk(mu_);
  --live_;
  for (auto it = open_fds_.begin(); it != open_fds_.end(); ++it) {
    if (*it == fd) {
      open_fds_.erase(it);
      break;
    }
  }
  cv_.notify_all();
}

Message Server::handle(SessionState& st, const Message& in) {
  try {
    switch (in.kind) {
      case Kind::hello: {
        wire::HelloPayload client_hello = wire::decode_hello(in.payload);
        wire::Caps server_caps;
        server_caps.backends = {backend_->descriptor().name};
        server_caps.widths = cfg_.widths;
        server_caps.key_modes = cfg_.key_mode_policy;
        server_caps.cadence = cfg_.cadence;
        server_caps.scale = uint32_t(cfg_.scale);
        wire::Agreement agreement = wire::agree(client_hello.caps, server_caps);
        st.agreement = agreement;
        st.hello_done = true;
        wire::HelloPayload reply;
        reply.caps.backends = {agreement.backend};
        reply.caps.widths = {agreement.width};
        reply.caps.key_modes = agreement.key_mode;
        reply.caps.cadence = agreement.cadence;
        reply.caps.scale = agreement.scale;
        reply.rules = catalog_.adverts(cfg_.scale);
        Message out;
        out.kind = Kind::hello;
        out.session_id = in.session_id;
        out.key_epoch = in.key_epoch;
        out.payload = wire::encode_hello(reply);
        return out;
      }
      case Kind::context_upload:
      case Kind::key_upload: {
        if (!st.hello_done)
          return error_reply(in, Errc::malformed_payload, "HELLO must come first");
        wire::KeyUploadPayload up = wire::decode_key_upload(in.payload);
        if (up.chunk.size() > wire::kKeyChunkBytes)
          return error_reply(in, Errc::malformed_payload, "key chunk exceeds 4 MiB");
        auto& parts = st.pending_chunks[up.artifact];
        parts[up.chunk_index] = std::move(up.chunk);
        if (parts.size() == up.chunk_count) {
          std::vector<uint8_t> whole;
          for (uint32_t i = 0; i < up.chunk_count; ++i) {
            auto it = parts.find(i);
            if (it == parts.end())
              return error_reply(in, Errc::malformed_payload, "missing key chunk");
            whole.insert(whole.end(), it->second.begin(), it->second.end());
          }
          st.artifacts[up.artifact] = std::move(whole);
          st.pending_chunks.erase(up.artifact);
          backend_->import_artifacts(in.session_id, in.key_epoch, st.artifacts);
        }
        Message ack;
        ack.kind = in.kind;
        ack.session_id = in.session_id;
        ack.key_epoch = in.key_epoch;
        return ack;
      }
      case Kind::rotate: {
        if (!st.hello_done)
          return error_reply(in, Errc::malformed_payload, "HELLO must come first");
        wire::RotatePayload rot = wire::decode_rotate(in.payload);
        backend_->advance_epoch(in.session_id, rot.new_epoch);
        st.artifacts.erase("eval-keys");  // must be re-uploaded under the new epoch
        Message ack;
        ack.kind = Kind::rotate;
        ack.session_id = in.session_id;
        ack.key_epoch = rot.new_epoch;
        return ack;
      }
      case Kind::eval_request: {
        if (!st.hello_done)
          return error_reply(in, Errc::malformed_payload, "HELLO must come first");
        if (st.session_id != 0 &&
            backend_->session_epoch(st.session_id) != in.key_epoch)
          fail(Errc::stale_key_epoch,
               "request epoch does not match the session epoch");
        wire::EvalRequestPayload req = wire::decode_eval_request(in.payload);
        wire::EvalResponsePayload resp = evaluate(st, req);
        Message out;
        out.kind = Kind::eval_response;
        out.session_id = in.session_id;
        out.key_epoch = in.key_epoch;
        out.payload = wire::encode_eval_response(resp);
        return out;
      }
      case Kind::eval_response:
      case Kind::error:
        return error_reply(in, Errc::malformed_payload,
                           "client sent a server-only message kind");
    }
    return error_reply(in, Errc::malformed_payload, "unhandled message kind");
  } catch (const Error& e) {
    return error_reply(in, e.code(), e.what());
  } catch (const std::exception& e) {
    return error_reply(in, Errc::io_error, e.what());
  }
}

wire::EvalResponsePayload Server::evaluate(SessionState& st,
                                           const wire::EvalRequestPayload& req) {
  if (st.session_id == 0)
    fail(Errc::unknown_session, "no key session established on this connection");
  auto plan_rules = plans_.find(req.rule);
  if (plan_rules == plans_.end())
    fail(Errc::unknown_rule, "rule '" + req.rule + "' not in catalog");
  auto plan_it = plan_rules->second.find(int(req.cfg.width));
  if (plan_it == plan_rules->second.end())
    fail(Errc::plan_overflow,
         "rule " + req.rule + " is infeasible at width " + std::to_string(req.cfg.width));
  const rules::ExecutionPlan& plan = plan_it->second;

  if (req.cfg.width != st.agreement.width || req.cfg.scale != st.agreement.scale)
    fail(Errc::config_mismatch, "request codec does not match the handshake");
  if (req.cfg.raw_lo != plan.cfg.raw_lo() || req.cfg.raw_hi != plan.cfg.raw_hi())
    fail(Errc::config_mismatch, "request range does not match the rule");

  const bool matrix_rule = plan.spec.id == rules::RuleId::r3;
  if (matrix_rule) {
    if (req.shape_kind != 1 || int(req.rows) != plan.spec.rows ||
        int(req.cols) != plan.spec.cols)
      fail(Errc::shape_mismatch, "matrix shape does not match the rule");
    if (req.ciphertexts.size() != size_t(req.batch) * size_t(req.rows))
      fail(Errc::shape_mismatch, "ciphertext count does not match batch x rows");
  } else {
    if (req.shape_kind != 0 || int(req.window) != plan.spec.window)
      fail(Errc::shape_mismatch, "window does not match the rule");
    if (req.ciphertexts.size() != size_t(req.batch))
      fail(Errc::shape_mismatch, "ciphertext count does not match the batch");
  }

  wire::EvalResponsePayload resp;
  resp.verdicts.reserve(req.batch);
  for (uint32_t b = 0; b < req.batch; ++b) {
    wire::VerdictBlob out;
    if (matrix_rule) {
      std::vector<ObliviousHandle> rows;
      rows.reserve(req.rows);
      for (uint32_t r = 0; r < req.rows; ++r)
        rows.push_back(backend_->deserialize_handle(
            req.ciphertexts[size_t(b) * req.rows + r], st.session_id));
      rules::RuleVerdict v =
          rules::rule3_eval_parallel(*backend_, rows, plan, cfg_.workers);
      out.flag_or_score = backend_->serialize_handle(*v.score);
      out.row_flags.reserve(v.row_flags.size());
      for (const auto& fb : v.row_flags)
        out.row_flags.push_back(backend_->serialize_bit(fb));
    } else {
      ObliviousHandle batch =
          backend_->deserialize_handle(req.ciphertexts[b], st.session_id);
      rules::RuleVerdict v = plan.spec.id == rules::RuleId::r1
                                 ? rules::rule1_eval(*backend_, batch, plan)
                                 : rules::rule2_eval(*backend_, batch, plan);
      out.flag_or_score = backend_->serialize_bit(*v.flag);
    }
    resp.verdicts.push_back(std::move(out));
  }
  return resp;
}

}  // namespace obliqc
