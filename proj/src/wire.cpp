// SPDX-License-Identifier: Apache-2.0
#include "obliqc/wire.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstring>

namespace obliqc::wire {

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::hello: return "HELLO";
    case Kind::context_upload: return "CONTEXT_UPLOAD";
    case Kind::key_upload: return "KEY_UPLOAD";
    case Kind::eval_request: return "EVAL_REQUEST";
    case Kind::eval_response: return "EVAL_RESPONSE";
    case Kind::rotate: return "ROTATE";
    case Kind::error: return "ERROR";
  }
  return "?";
}

void Writer::u16(uint16_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
}

void Writer::u32(uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

void Writer::u64(uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

void Writer::bytes(std::span<const uint8_t> b) {
  u32(uint32_t(b.size()));
  out.insert(out.end(), b.begin(), b.end());
}

void Writer::str(const std::string& s) {
  u32(uint32_t(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

namespace {

[[noreturn]] void short_read() {
  fail(Errc::truncated_payload, "payload ends mid-field");
}

}  // namespace

uint8_t Reader::u8() {
  if (pos + 1 > in.size()) short_read();
  return in[pos++];
}

uint16_t Reader::u16() {
  if (pos + 2 > in.size()) short_read();
  uint16_t v = uint16_t(in[pos]) | uint16_t(in[pos + 1]) << 8;
  pos += 2;
  return v;
}

uint32_t Reader::u32() {
  if (pos + 4 > in.size()) short_read();
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(in[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

uint64_t Reader::u64() {
  if (pos + 8 > in.size()) short_read();
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(in[pos + i]) << (8 * i);
  pos += 8;
  return v;
}

std::vector<uint8_t> Reader::bytes() {
  uint32_t n = u32();
  if (pos + n > in.size()) short_read();
  std::vector<uint8_t> v(in.begin() + pos, in.begin() + pos + n);
  pos += n;
  return v;
}

std::string Reader::str() {
  uint32_t n = u32();
  if (pos + n > in.size()) short_read();
  std::string s(reinterpret_cast<const char*>(in.data() + pos), n);
  pos += n;
  return s;
}

void Reader::expect_done() const {
  if (pos != in.size())
    fail(Errc::malformed_payload, "trailing bytes after payload");
}

std::vector<uint8_t> serialize(const Message& m) {
  if (m.payload.size() > kMaxPayloadBytes)
    fail(Errc::malformed_payload, "payload exceeds the frame limit");
  Writer w;
  w.out.reserve(kHeaderBytes + m.payload.size());
  w.u32(kMagic);
  w.u16(kVersion);
  w.u16(uint16_t(m.kind));
  w.u64(m.session_id);
  w.u32(m.key_epoch);
  w.u32(uint32_t(m.payload.size()));
  w.out.insert(w.out.end(), m.payload.begin(), m.payload.end());
  return w.out;
}

size_t frame_size_from_header(std::span<const uint8_t> header) {
  if (header.size() < kHeaderBytes)
    fail(Errc::truncated_payload, "incomplete frame header");
  Reader r{header.subspan(0, kHeaderBytes)};
  if (r.u32() != kMagic) fail(Errc::bad_magic, "frame does not start with OBLQ");
  if (r.u16() != kVersion) fail(Errc::unsupported_version, "unknown protocol version");
  r.u16();  // kind
  r.u64();  // session
  r.u32();  // epoch
  uint32_t len = r.u32();
  if (len > kMaxPayloadBytes)
    fail(Errc::malformed_payload, "declared payload exceeds the frame limit");
  return kHeaderBytes + len;
}

Message deserialize(std::span<const uint8_t> frame) {
  if (frame.size() < kHeaderBytes)
    fail(Errc::truncated_payload, "frame shorter than the header");
  Reader r{frame};
  if (r.u32() != kMagic) fail(Errc::bad_magic, "frame does not start with OBLQ");
  if (r.u16() != kVersion) fail(Errc::unsupported_version, "unknown protocol version");
  Message m;
  uint16_t kind = r.u16();
  if (kind < uint16_t(Kind::hello) || kind > uint16_t(Kind::error))
    fail(Errc::malformed_payload, "unknown message kind");
  m.kind = Kind(kind);
  m.session_id = r.u64();
  m.key_epoch = r.u32();
  uint32_t len = r.u32();
  if (len > kMaxPayloadBytes)
    fail(Errc::malformed_payload, "declared payload exceeds the frame limit");
  if (frame.size() != kHeaderBytes + len)
    fail(Errc::truncated_payload, "payload length does not match the header");
  m.payload.assign(frame.begin() + kHeaderBytes, frame.end());
  return m;
}

namespace {

void put_caps(Writer& w, const Caps& c) {
  w.u8(uint8_t(c.backends.size()));
  for (const auto& b : c.backends) w.str(b);
  w.u8(uint8_t(c.widths.size()));
  for (uint16_t v : c.widths) w.u16(v);
  w.u8(c.key_modes);
  w.u32(c.cadence);
  w.u32(c.scale);
}

Caps get_caps(Reader& r) {
  Caps c;
  c.backends.resize(r.u8());
  for (auto& b : c.backends) b = r.str();
  c.widths.resize(r.u8());
  for (auto& v : c.widths) v = r.u16();
  c.key_modes = r.u8();
  c.cadence = r.u32();
  c.scale = r.u32();
  return c;
}

}  // namespace

std::vector<uint8_t> encode_hello(const HelloPayload& p) {
  Writer w;
  put_caps(w, p.caps);
  w.u16(uint16_t(p.rules.size()));
  for (const auto& ra : p.rules) {
    w.str(ra.rule);
    w.u8(ra.shape_kind);
    w.u32(ra.window);
    w.u32(ra.rows);
    w.u32(ra.cols);
    w.i64(ra.raw_lo);
    w.i64(ra.raw_hi);
  }
  return w.out;
}

HelloPayload decode_hello(std::span<const uint8_t> b) {
  Reader r{b};
  HelloPayload p;
  p.caps = get_caps(r);
  p.rules.resize(r.u16());
  for (auto& ra : p.rules) {
    ra.rule = r.str();
    ra.shape_kind = r.u8();
    ra.window = r.u32();
    ra.rows = r.u32();
    ra.cols = r.u32();
    ra.raw_lo = r.i64();
    ra.raw_hi = r.i64();
  }
  r.expect_done();
  return p;
}

std::vector<uint8_t> encode_key_upload(const KeyUploadPayload& p) {
  Writer w;
  w.str(p.artifact);
  w.u32(p.chunk_index);
  w.u32(p.chunk_count);
  w.bytes(p.chunk);
  return w.out;
}

KeyUploadPayload decode_key_upload(std::span<const uint8_t> b) {
  Reader r{b};
  KeyUploadPayload p;
  p.artifact = r.str();
  p.chunk_index = r.u32();
  p.chunk_count = r.u32();
  p.chunk = r.bytes();
  r.expect_done();
  if (p.chunk_count == 0 || p.chunk_index >= p.chunk_count)
    fail(Errc::malformed_payload, "bad key chunk indices");
  return p;
}

namespace {

void put_cfg(Writer& w, const ConfigEcho& c) {
  w.u32(c.scale);
  w.u16(c.width);
  w.i64(c.raw_lo);
  w.i64(c.raw_hi);
}

ConfigEcho get_cfg(Reader& r) {
  ConfigEcho c;
  c.scale = r.u32();
  c.width = r.u16();
  c.raw_lo = r.i64();
  c.raw_hi = r.i64();
  return c;
}

}  // namespace

std::vector<uint8_t> encode_eval_request(const EvalRequestPayload& p) {
  Writer w;
  w.str(p.rule);
  w.u8(p.shape_kind);
  w.u32(p.window);
  w.u32(p.rows);
  w.u32(p.cols);
  w.u32(p.batch);
  put_cfg(w, p.cfg);
  w.u32(uint32_t(p.ciphertexts.size()));
  for (const auto& ct : p.ciphertexts) w.bytes(ct);
  return w.out;
}

EvalRequestPayload decode_eval_request(std::span<const uint8_t> b) {
  Reader r{b};
  EvalRequestPayload p;
  p.rule = r.str();
  p.shape_kind = r.u8();
  p.window = r.u32();
  p.rows = r.u32();
  p.cols = r.u32();
  p.batch = r.u32();
  p.cfg = get_cfg(r);
  p.ciphertexts.resize(r.u32());
  for (auto& ct : p.ciphertexts) ct = r.bytes();
  r.expect_done();
  if (p.batch == 0) fail(Errc::malformed_payload, "batch count must be >= 1");
  return p;
}

std::vector<uint8_t> encode_eval_response(const EvalResponsePayload& p) {
  Writer w;
  w.u32(uint32_t(p.verdicts.size()));
  for (const auto& v : p.verdicts) {
    w.bytes(v.flag_or_score);
    w.u32(uint32_t(v.row_flags.size()));
    for (const auto& f : v.row_flags) w.bytes(f);
  }
  return w.out;
}

EvalResponsePayload decode_eval_response(std::span<const uint8_t> b) {
  Reader r{b};
  EvalResponsePayload p;
  p.verdicts.resize(r.u32());
  for (auto& v : p.verdicts) {
    v.flag_or_score = r.bytes();
    v.row_flags.resize(r.u32());
    for (auto& f : v.row_flags) f = r.bytes();
  }
  r.expect_done();
  return p;
}

std::vector<uint8_t> encode_rotate(const RotatePayload& p) {
  Writer w;
  w.u32(p.new_epoch);
  return w.out;
}

RotatePayload decode_rotate(std::span<const uint8_t> b) {
  Reader r{b};
  RotatePayload p;
  p.new_epoch = r.u32();
  r.expect_done();
  return p;
}

std::vector<uint8_t> encode_error(const ErrorPayload& p) {
  Writer w;
  w.u16(p.code);
  w.str(p.message);
  return w.out;
}

ErrorPayload decode_error(std::span<const uint8_t> b) {
  Reader r{b};
  ErrorPayload p;
  p.code = r.u16();
  p.message = r.str();
  r.expect_done();
  return p;
}

CaptureWriter::CaptureWriter(const std::string& path) {
  fd_ = ::open(path.c_str(), O_CREAT | O_WRONLY | O_TRUNC, 0644);
  if (fd_ < 0) fail(Errc::io_error, "cannot open capture file " + path);
}

CaptureWriter::~CaptureWriter() {
  if (fd_ >= 0) ::close(fd_);
}

void CaptureWriter::frame(std::span<const uint8_t> bytes) {
  if (fd_ < 0) return;
  size_t off = 0;
  while (off < bytes.size()) {
    ssize_t n = ::write(fd_, bytes.data() + off, bytes.size() - off);
    if (n <= 0) fail(Errc::io_error, "capture write failed");
    off += size_t(n);
  }
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) fail(Errc::io_error, "cannot open " + path);
  std::vector<uint8_t> out;
  uint8_t buf[1 << 16];
  for (;;) {
    ssize_t n = ::read(fd, buf, sizeof buf);
    if (n < 0) {
      ::close(fd);
      fail(Errc::io_error, "read failed for " + path);
    }
    if (n == 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  ::close(fd);
  return out;
}

std::vector<Message> read_capture(const std::string& path) {
  std::vector<uint8_t> all = read_file_bytes(path);
  std::vector<Message> out;
  size_t off = 0;
  while (off < all.size()) {
    std::span<const uint8_t> rest(all.data() + off, all.size() - off);
    size_t n = frame_size_from_header(rest);
    if (rest.size() < n) fail(Errc::truncated_payload, "capture ends mid-frame");
    out.push_back(deserialize(rest.subspan(0, n)));
    off += n;
  }
  return out;
}

}  // namespace obliqc::wire
