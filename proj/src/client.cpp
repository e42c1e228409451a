// SPDX-License-Identifier: Apache-2.0
#include "obliqc/client.hpp"

#include <unistd.h>

#include <algorithm>

#include "net_io.hpp"
#include "obliqc/log.hpp"
#include "obliqc/reference_backend.hpp"

namespace obliqc {

using wire::Kind;
using wire::Message;

ClientSession::ClientSession(ClientOptions opts, std::shared_ptr<Backend> backend)
    : opts_(std::move(opts)),
      backend_(backend ? std::move(backend)
                       : std::make_shared<ReferenceBackend>()) {
  if (!opts_.capture_path.empty())
    capture_ = std::make_unique<wire::CaptureWriter>(opts_.capture_path);
}

ClientSession::~ClientSession() { close(); }

void ClientSession::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void ClientSession::connect() {
  fd_ = net::connect_to(net::parse_addr(opts_.addr));
}

Message ClientSession::exchange(const Message& out) {
  if (fd_ < 0) fail(Errc::connection_failed, "session is not connected");
  auto bytes = wire::serialize(out);
  if (capture_) capture_->frame(bytes);
  ledger_.add(out.kind, wire::Direction::sent, bytes.size());
  net::write_all(fd_, bytes);
  auto frame = net::read_frame(fd_);
  if (!frame) fail(Errc::connection_failed, "server closed the connection");
  if (capture_) capture_->frame(*frame);
  Message in = wire::deserialize(*frame);
  ledger_.add(in.kind, wire::Direction::received, frame->size());
  if (in.kind == Kind::error) {
    wire::ErrorPayload err = wire::decode_error(in.payload);
    throw Error(Errc(err.code), "server: " + err.message);
  }
  return in;
}

void ClientSession::adopt_keys(const SessionKeys& keys, int width) {
  keys_ = keys;
  adopted_keys_ = true;
  adopted_width_ = width;
  backend_->restore_session(keys_);
}

void ClientSession::handshake() {
  if (!adopted_keys_)
    keys_ = backend_->keygen({.width = int(opts_.widths.empty() ? 32 : opts_.widths[0])});

  Message hello;
  hello.kind = Kind::hello;
  hello.session_id = keys_.session_id;
  hello.key_epoch = keys_.key_epoch;
  wire::HelloPayload p;
  p.caps.backends = opts_.backends;
  p.caps.widths = opts_.widths;
  p.caps.key_modes = opts_.key_modes;
  p.caps.cadence = opts_.cadence;
  hello.payload = wire::encode_hello(p);
  Message reply = exchange(hello);
  if (reply.kind != Kind::hello)
    fail(Errc::malformed_payload, "expected a HELLO reply");
  wire::HelloPayload sp = wire::decode_hello(reply.payload);
  if (sp.caps.backends.size() != 1 || sp.caps.widths.size() != 1)
    fail(Errc::malformed_payload, "HELLO reply must carry the agreed singletons");
  agreement_.backend = sp.caps.backends[0];
  agreement_.width = sp.caps.widths[0];
  agreement_.key_mode = sp.caps.key_modes;
  agreement_.cadence = sp.caps.cadence;
  agreement_.scale = sp.caps.scale;
  rules_ = sp.rules;

  if (adopted_keys_) {
    if (int(agreement_.width) != adopted_width_)
      fail(Errc::config_mismatch,
           "staged keys were generated for a width the server did not agree to");
  } else if (int(agreement_.width) !=
             (opts_.widths.empty() ? 32 : int(opts_.widths[0]))) {
    // re-key when the agreement lands on a different width
    keys_ = backend_->keygen({.width = int(agreement_.width)});
  }
}

wire::EvalResponsePayload ClientSession::submit_request(
    const wire::EvalRequestPayload& req) {
  Message m;
  m.kind = Kind::eval_request;
  m.session_id = keys_.session_id;
  m.key_epoch = forced_epoch_ ? *forced_epoch_ : keys_.key_epoch;
  m.payload = wire::encode_eval_request(req);
  Message reply = exchange(m);
  ++requests_since_rotate_;
  if (reply.kind != Kind::eval_response)
    fail(Errc::malformed_payload, "expected EVAL_RESPONSE");
  return wire::decode_eval_response(reply.payload);
}

void ClientSession::upload_artifact(Kind kind, const std::string& name,
                                    std::span<const uint8_t> blob) {
  const size_t chunk = std::min(opts_.key_chunk_bytes, wire::kKeyChunkBytes);
  const uint32_t count = uint32_t(std::max<size_t>(1, (blob.size() + chunk - 1) / chunk));
  for (uint32_t i = 0; i < count; ++i) {
    wire::KeyUploadPayload up;
    up.artifact = name;
    up.chunk_index = i;
    up.chunk_count = count;
    const size_t off = size_t(i) * chunk;
    const size_t len = std::min(chunk, blob.size() - off);
    up.chunk.assign(blob.begin() + off, blob.begin() + off + len);
    Message m;
    m.kind = kind;
    m.session_id = keys_.session_id;
    m.key_epoch = keys_.key_epoch;
    m.payload = wire::encode_key_upload(up);
    Message ack = exchange(m);
    if (ack.kind != kind) fail(Errc::malformed_payload, "unexpected upload ack");
  }
}

void ClientSession::upload_keys() {
  auto artifacts = backend_->export_artifacts(keys_);
  for (const auto& [name, blob] : artifacts) {
    const Kind kind = name == "context" ? Kind::context_upload : Kind::key_upload;
    upload_artifact(kind, name, blob);
  }
}

void ClientSession::rotate() {
  keys_ = backend_->rotate_keys(keys_);
  Message m;
  m.kind = Kind::rotate;
  m.session_id = keys_.session_id;
  m.key_epoch = keys_.key_epoch;
  m.payload = wire::encode_rotate({keys_.key_epoch});
  Message ack = exchange(m);
  if (ack.kind != Kind::rotate) fail(Errc::malformed_payload, "unexpected rotate ack");
  // fresh evaluation keys belong to the new epoch
  auto artifacts = backend_->export_artifacts(keys_);
  auto it = artifacts.find("eval-keys");
  if (it != artifacts.end())
    upload_artifact(Kind::key_upload, it->first, it->second);
  requests_since_rotate_ = 0;
}

FixedPointConfig ClientSession::config_for(const wire::RuleAdvert& advert) const {
  FixedPointConfig cfg;
  cfg.scale = int64_t(agreement_.scale);
  cfg.width = int(agreement_.width);
  cfg.lo = double(advert.raw_lo) / double(cfg.scale);
  cfg.hi = double(advert.raw_hi) / double(cfg.scale);
  cfg.validate();
  return cfg;
}

QcOutcome ClientSession::run(const SampleFile& samples) {
  const std::string rule = rules::rule_name(samples.rule);
  auto advert_it =
      std::find_if(rules_.begin(), rules_.end(),
                   [&](const wire::RuleAdvert& a) { return a.rule == rule; });
  if (advert_it == rules_.end())
    fail(Errc::unknown_rule, "server does not offer rule " + rule);
  const wire::RuleAdvert& advert = *advert_it;

  // client-side shape check before anything is encrypted
  const bool matrix_rule = samples.rule == rules::RuleId::r3;
  if (matrix_rule) {
    if (uint32_t(samples.rows) != advert.rows || uint32_t(samples.cols) != advert.cols)
      fail(Errc::shape_mismatch, "sample grid does not match the rule shape");
  } else if (uint32_t(samples.window) != advert.window) {
    fail(Errc::shape_mismatch, "sample window does not match the rule shape");
  }

  FixedPointConfig cfg = config_for(advert);
  for (const auto& row : samples.values_raw)
    for (int64_t v : row)
      if (v < advert.raw_lo || v > advert.raw_hi)
        fail(Errc::out_of_range, "sample outside the rule's codec range");

  QcOutcome outcome;
  outcome.rule = rule;
  outcome.agreement = agreement_;

  wire::ConfigEcho echo{uint32_t(cfg.scale), uint16_t(cfg.width), advert.raw_lo,
                        advert.raw_hi};

  const bool diff_mode = agreement_.key_mode == wire::kKeyModeDiff;
  const uint32_t cadence = std::max(1u, agreement_.cadence);

  auto submit_batch = [&](size_t first, size_t count) {
    if (diff_mode && requests_since_rotate_ >= cadence) rotate();

    wire::EvalRequestPayload req;
    req.rule = rule;
    req.cfg = echo;
    req.batch = uint32_t(count);
    if (matrix_rule) {
      req.shape_kind = 1;
      req.rows = uint32_t(samples.rows);
      req.cols = uint32_t(samples.cols);
      for (size_t i = 0; i < size_t(samples.rows); ++i) {
        auto h = backend_->encrypt_raw(samples.values_raw[i], cfg.width, keys_);
        req.ciphertexts.push_back(backend_->serialize_handle(h));
      }
    } else {
      req.shape_kind = 0;
      req.window = uint32_t(samples.window);
      for (size_t i = first; i < first + count; ++i) {
        auto h = backend_->encrypt_raw(samples.values_raw[i], cfg.width, keys_);
        req.ciphertexts.push_back(backend_->serialize_handle(h));
      }
    }

    wire::EvalResponsePayload resp = submit_request(req);
    if (resp.verdicts.size() != count)
      fail(Errc::malformed_payload, "verdict count does not match the batch");

    for (const auto& v : resp.verdicts) {
      if (matrix_rule) {
        ObliviousHandle score =
            backend_->deserialize_handle(v.flag_or_score, keys_.session_id);
        outcome.score = double(backend_->decrypt_raw(score, keys_)[0]) /
                        double(cfg.scale);
        outcome.row_flags.clear();
        for (const auto& fb : v.row_flags) {
          ObliviousBit bit = backend_->deserialize_bit(fb, keys_.session_id);
          outcome.row_flags.push_back(backend_->decrypt_bit(bit, keys_));
        }
        for (int f : outcome.row_flags) outcome.violation |= f != 0;
      } else {
        ObliviousBit bit =
            backend_->deserialize_bit(v.flag_or_score, keys_.session_id);
        const int flag = backend_->decrypt_bit(bit, keys_);
        outcome.instance_flags.push_back(flag);
        outcome.violation |= flag != 0;
      }
    }
  };

  if (matrix_rule) {
    submit_batch(0, 1);
  } else {
    const size_t total = samples.values_raw.size();
    const size_t step = std::max<uint32_t>(1, opts_.batch_size);
    for (size_t first = 0; first < total; first += step)
      submit_batch(first, std::min(step, total - first));
  }

  outcome.session_id = keys_.session_id;
  return outcome;
}

QcOutcome qc_run(const ClientOptions& opts, const SampleFile& samples,
                 std::shared_ptr<Backend> backend) {
  ClientSession session(opts, std::move(backend));
  session.connect();
  session.handshake();
  session.upload_keys();
  return session.run(samples);
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::connection_failed:
    case Errc::io_error:
      return 2;
    case Errc::stale_key_epoch:
      return 3;
    case Errc::shape_mismatch:
      return 4;
    default:
      return 1;
  }
}

}  // namespace obliqc
