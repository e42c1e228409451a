// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "obliqc/error.hpp"

namespace obliqc::wire {

// Frame layout, little-endian throughout:
//   u32 magic  u16 version  u16 kind  u64 session  u32 epoch  u32 payload_len
// followed by payload_len payload bytes. Messages are self-delimiting.
inline constexpr uint32_t kMagic = 0x4F424C51;  // "OBLQ"
inline constexpr uint16_t kVersion = 1;
inline constexpr size_t kHeaderBytes = 24;
inline constexpr uint32_t kMaxPayloadBytes = 256u << 20;
inline constexpr size_t kKeyChunkBytes = 4u << 20;  // KEY_UPLOAD chunk limit

enum class Kind : uint16_t {
  hello = 1,
  context_upload = 2,
  key_upload = 3,
  eval_request = 4,
  eval_response = 5,
  rotate = 6,
  error = 7,
};

const char* kind_name(Kind k);

struct Message {
  Kind kind = Kind::hello;
  uint64_t session_id = 0;
  uint32_t key_epoch = 0;
  std::vector<uint8_t> payload;

  size_t payload_bytes() const { return payload.size(); }
  size_t frame_bytes() const { return kHeaderBytes + payload.size(); }

  friend bool operator==(const Message&, const Message&) = default;
};

std::vector<uint8_t> serialize(const Message& m);

/// Decodes one whole frame; the buffer must contain exactly the frame.
/// Throws bad_magic / unsupported_version / truncated_payload.
Message deserialize(std::span<const uint8_t> frame);

/// Frame length from a complete 24-byte header (validates magic/version).
size_t frame_size_from_header(std::span<const uint8_t> header);

// --- little-endian primitives -----------------------------------------------

struct Writer {
  std::vector<uint8_t> out;

  void u8(uint8_t v) { out.push_back(v); }
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void i64(int64_t v) { u64(uint64_t(v)); }
  void bytes(std::span<const uint8_t> b);   // u32 length prefix + data
  void str(const std::string& s);           // u32 length prefix + data
};

struct Reader {
  std::span<const uint8_t> in;
  size_t pos = 0;

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  int64_t i64() { return int64_t(u64()); }
  std::vector<uint8_t> bytes();
  std::string str();
  bool done() const { return pos == in.size(); }
  void expect_done() const;
};

// --- typed payloads ----------------------------------------------------------

enum KeyModeBits : uint8_t { kKeyModeSame = 1, kKeyModeDiff = 2 };

struct Caps {
  std::vector<std::string> backends;  // preference order
  std::vector<uint16_t> widths;       // preference order
  uint8_t key_modes = kKeyModeSame;
  uint32_t cadence = 1;  // requests per epoch in diff mode
  uint32_t scale = 100;

  friend bool operator==(const Caps&, const Caps&) = default;
};

/// Public face of one catalog rule: id, required shape and codec range.
/// Control parameters never appear here.
struct RuleAdvert {
  std::string rule;
  uint8_t shape_kind = 0;  // 0 = vector, 1 = matrix
  uint32_t window = 0;
  uint32_t rows = 0, cols = 0;
  int64_t raw_lo = 0, raw_hi = 0;

  friend bool operator==(const RuleAdvert&, const RuleAdvert&) = default;
};

struct HelloPayload {
  Caps caps;
  std::vector<RuleAdvert> rules;  // filled in the server's reply

  friend bool operator==(const HelloPayload&, const HelloPayload&) = default;
};

struct KeyUploadPayload {
  std::string artifact;  // "context", "public-key", "eval-keys"
  uint32_t chunk_index = 0;
  uint32_t chunk_count = 1;
  std::vector<uint8_t> chunk;

  friend bool operator==(const KeyUploadPayload&, const KeyUploadPayload&) = default;
};

struct ConfigEcho {
  uint32_t scale = 100;
  uint16_t width = 16;
  int64_t raw_lo = 0;
  int64_t raw_hi = 0;

  friend bool operator==(const ConfigEcho&, const ConfigEcho&) = default;
};

struct EvalRequestPayload {
  std::string rule;
  uint8_t shape_kind = 0;
  uint32_t window = 0;
  uint32_t rows = 0, cols = 0;
  uint32_t batch = 1;  // instances in this request
  ConfigEcho cfg;
  // one blob per instance for vector rules; rows blobs per instance for
  // matrix rules, row-major
  std::vector<std::vector<uint8_t>> ciphertexts;

  friend bool operator==(const EvalRequestPayload&, const EvalRequestPayload&) = default;
};

struct VerdictBlob {
  std::vector<uint8_t> flag_or_score;
  std::vector<std::vector<uint8_t>> row_flags;

  friend bool operator==(const VerdictBlob&, const VerdictBlob&) = default;
};

struct EvalResponsePayload {
  std::vector<VerdictBlob> verdicts;

  friend bool operator==(const EvalResponsePayload&, const EvalResponsePayload&) = default;
};

struct RotatePayload {
  uint32_t new_epoch = 0;

  friend bool operator==(const RotatePayload&, const RotatePayload&) = default;
};

struct ErrorPayload {
  uint16_t code = 0;  // Errc
  std::string message;

  friend bool operator==(const ErrorPayload&, const ErrorPayload&) = default;
};

std::vector<uint8_t> encode_hello(const HelloPayload& p);
HelloPayload decode_hello(std::span<const uint8_t> b);
std::vector<uint8_t> encode_key_upload(const KeyUploadPayload& p);
KeyUploadPayload decode_key_upload(std::span<const uint8_t> b);
std::vector<uint8_t> encode_eval_request(const EvalRequestPayload& p);
EvalRequestPayload decode_eval_request(std::span<const uint8_t> b);
std::vector<uint8_t> encode_eval_response(const EvalResponsePayload& p);
EvalResponsePayload decode_eval_response(std::span<const uint8_t> b);
std::vector<uint8_t> encode_rotate(const RotatePayload& p);
RotatePayload decode_rotate(std::span<const uint8_t> b);
std::vector<uint8_t> encode_error(const ErrorPayload& p);
ErrorPayload decode_error(std::span<const uint8_t> b);

// --- captures -----------------------------------------------------------------

/// A capture file is nothing but concatenated frames, so replaying one is the
/// same parse the socket path uses.
class CaptureWriter {
public:
  CaptureWriter() = default;
  explicit CaptureWriter(const std::string& path);
  ~CaptureWriter();

  CaptureWriter(const CaptureWriter&) = delete;
  CaptureWriter& operator=(const CaptureWriter&) = delete;

  bool active() const { return fd_ >= 0; }
  void frame(std::span<const uint8_t> bytes);

private:
  int fd_ = -1;
};

std::vector<Message> read_capture(const std::string& path);
std::vector<uint8_t> read_file_bytes(const std::string& path);

}  // namespace obliqc::wire
