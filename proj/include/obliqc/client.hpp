// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>

#include "obliqc/backend.hpp"
#include "obliqc/handshake.hpp"
#include "obliqc/ledger.hpp"
#include "obliqc/samples.hpp"

namespace obliqc {

struct ClientOptions {
  std::string addr = "127.0.0.1:7643";
  std::vector<std::string> backends = {"reference"};  // capability order
  std::vector<uint16_t> widths = {32, 16};
  uint8_t key_modes = wire::kKeyModeSame | wire::kKeyModeDiff;
  uint32_t cadence = 1;      // requests per epoch when diff-key is agreed
  uint32_t batch_size = 64;  // instances per EVAL_REQUEST
  std::string capture_path;  // when set, every frame is appended here
  size_t key_chunk_bytes = wire::kKeyChunkBytes;  // tests shrink this
};

/// Decrypted, decoded result of one qc run.
struct QcOutcome {
  std::string rule;
  bool violation = false;             // OR over instances (R1/R2) or row flags (R3)
  std::vector<int> instance_flags;    // R1/R2: one bit per window
  std::optional<double> score;        // R3
  std::vector<int> row_flags;         // R3
  uint64_t session_id = 0;
  wire::Agreement agreement;
};

/// One ordered message stream against a server. Owns its connection; the
/// backend is supplied so tests can inject doubles.
class ClientSession {
public:
  ClientSession(ClientOptions opts, std::shared_ptr<Backend> backend);
  ~ClientSession();

  ClientSession(const ClientSession&) = delete;
  ClientSession& operator=(const ClientSession&) = delete;

  void connect();  // throws connection_failed

  /// Use keys produced by an earlier keygen (staged pipeline) instead of
  /// generating fresh ones during handshake.
  void adopt_keys(const SessionKeys& keys, int width);

  /// keygen (at the preferred width) + HELLO. If the agreement lands on a
  /// different width the session re-keys at the agreed one.
  void handshake();

  /// CONTEXT_UPLOAD + KEY_UPLOAD for every keygen artifact, chunked.
  void upload_keys();

  /// Encrypt + submit + await + decrypt for every instance in the file,
  /// honoring batch_size and the agreed rotation cadence.
  QcOutcome run(const SampleFile& samples);

  const wire::Agreement& agreement() const { return agreement_; }
  const std::vector<wire::RuleAdvert>& rules() const { return rules_; }
  const wire::TransferLedger& ledger() const { return ledger_; }
  const SessionKeys& keys() const { return keys_; }
  uint64_t session_id() const { return keys_.session_id; }

  /// Force an epoch rotation now (also used internally per cadence).
  void rotate();

  /// Sends one prepared EVAL_REQUEST and returns the decoded response.
  wire::EvalResponsePayload submit_request(const wire::EvalRequestPayload& req);

  void close();

  /// Test hook: when set, EVAL_REQUEST headers carry this epoch instead of
  /// the real one, to exercise the server's staleness path.
  void force_epoch_for_tests(std::optional<uint32_t> epoch) { forced_epoch_ = epoch; }

private:
  wire::Message exchange(const wire::Message& out);  // send + await reply
  void upload_artifact(wire::Kind kind, const std::string& name,
                       std::span<const uint8_t> blob);
  FixedPointConfig config_for(const wire::RuleAdvert& advert) const;

  ClientOptions opts_;
  std::shared_ptr<Backend> backend_;
  int fd_ = -1;
  SessionKeys keys_;
  wire::Agreement agreement_;
  std::vector<wire::RuleAdvert> rules_;
  wire::TransferLedger ledger_;
  std::unique_ptr<wire::CaptureWriter> capture_;
  uint32_t requests_since_rotate_ = 0;
  std::optional<uint32_t> forced_epoch_;
  bool adopted_keys_ = false;
  int adopted_width_ = 0;
};

/// The one-shot pipeline: keygen, handshake, key upload, encrypt, submit,
/// await, decrypt, decode.
QcOutcome qc_run(const ClientOptions& opts, const SampleFile& samples,
                 std::shared_ptr<Backend> backend = nullptr);

/// Maps an error to the documented process exit code: 2 connection,
/// 3 key epoch, 4 shape; 1 otherwise.
int exit_code_for(const Error& e);

}  // namespace obliqc
