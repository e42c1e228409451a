// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <functional>

#include "obliqc/handshake.hpp"
#include "obliqc/ledger.hpp"
#include "obliqc/wire.hpp"
#include "support/test_util.hpp"

using namespace obliqc;
using namespace obliqc::wire;

namespace {

Message sample_message(Kind kind, testutil::Rng& rng) {
  Message m;
  m.kind = kind;
  m.session_id = rng.next();
  m.key_epoch = uint32_t(rng.next());
  const size_t len = size_t(rng.uniform(0, 2000));
  m.payload.resize(len);
  for (auto& b : m.payload) b = uint8_t(rng.next());
  return m;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::io_error;
}

}  // namespace

TEST_CASE("frames are self-delimiting with a 24-byte header") {
  Message m;
  m.kind = Kind::hello;
  m.session_id = 0x1122334455667788ull;
  m.key_epoch = 9;
  m.payload = {1, 2, 3};
  auto bytes = serialize(m);
  REQUIRE(bytes.size() == kHeaderBytes + 3);
  // little-endian magic constant 0x4F424C51
  CHECK(bytes[0] == 0x51);
  CHECK(bytes[1] == 0x4C);
  CHECK(bytes[2] == 0x42);
  CHECK(bytes[3] == 0x4F);
  CHECK(frame_size_from_header(bytes) == bytes.size());
  CHECK(deserialize(bytes) == m);
}

TEST_CASE("every message kind round-trips bit-exactly") {
  testutil::Rng rng(3);
  for (uint16_t k = uint16_t(Kind::hello); k <= uint16_t(Kind::error); ++k) {
    Message m = sample_message(Kind(k), rng);
    auto bytes = serialize(m);
    Message back = deserialize(bytes);
    CHECK(back == m);
    CHECK(serialize(back) == bytes);
    CHECK(back.payload_bytes() == m.payload.size());
  }
}

TEST_CASE("fuzzed messages round-trip bit-exactly") {
  testutil::Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    Message m = sample_message(Kind(1 + rng.uniform(0, 6)), rng);
    auto bytes = serialize(m);
    REQUIRE(deserialize(bytes) == m);
  }
}

TEST_CASE("framing failures are typed") {
  testutil::Rng rng(7);
  Message m = sample_message(Kind::eval_request, rng);
  auto bytes = serialize(m);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK(code_of([&] { deserialize(truncated); }) == Errc::truncated_payload);

  auto bad_magic = bytes;
  bad_magic[0] ^= 0xff;
  CHECK(code_of([&] { deserialize(bad_magic); }) == Errc::bad_magic);

  auto bad_version = bytes;
  bad_version[4] = 0x77;
  CHECK(code_of([&] { deserialize(bad_version); }) == Errc::unsupported_version);

  std::vector<uint8_t> shorty(10, 0);
  CHECK(code_of([&] { deserialize(shorty); }) == Errc::truncated_payload);
  CHECK(code_of([&] { frame_size_from_header(shorty); }) == Errc::truncated_payload);

  // corrupted frames must never crash; any Error is acceptable
  for (int i = 0; i < 2000; ++i) {
    auto noisy = bytes;
    noisy[rng.next() % noisy.size()] ^= uint8_t(1 + (rng.next() & 0xfe));
    try {
      Message got = deserialize(noisy);
      (void)got;
    } catch (const Error&) {
    }
  }
}

TEST_CASE("typed payloads round-trip") {
  testutil::Rng rng(11);

  HelloPayload hello;
  hello.caps.backends = {"reference", "trace"};
  hello.caps.widths = {32, 16};
  hello.caps.key_modes = kKeyModeSame | kKeyModeDiff;
  hello.caps.cadence = 4;
  hello.caps.scale = 100;
  hello.rules.push_back({"R1", 0, 8, 0, 0, 0, 10000});
  hello.rules.push_back({"R3", 1, 0, 4, 8, 4000, 6000});
  CHECK(decode_hello(encode_hello(hello)) == hello);

  KeyUploadPayload key{"eval-keys", 2, 5, {9, 9, 9}};
  CHECK(decode_key_upload(encode_key_upload(key)) == key);
  KeyUploadPayload bad = key;
  bad.chunk_index = 5;
  CHECK(code_of([&] { decode_key_upload(encode_key_upload(bad)); }) ==
        Errc::malformed_payload);

  EvalRequestPayload req;
  req.rule = "R2";
  req.shape_kind = 0;
  req.window = 8;
  req.batch = 3;
  req.cfg = {100, 32, 0, 10000};
  for (int i = 0; i < 3; ++i) {
    std::vector<uint8_t> ct(size_t(rng.uniform(1, 64)));
    for (auto& b : ct) b = uint8_t(rng.next());
    req.ciphertexts.push_back(std::move(ct));
  }
  CHECK(decode_eval_request(encode_eval_request(req)) == req);

  EvalResponsePayload resp;
  resp.verdicts.push_back({{1, 2, 3}, {{4}, {5, 6}}});
  resp.verdicts.push_back({{7}, {}});
  CHECK(decode_eval_response(encode_eval_response(resp)) == resp);

  RotatePayload rot{17};
  CHECK(decode_rotate(encode_rotate(rot)) == rot);

  ErrorPayload err{uint16_t(Errc::shape_mismatch), "wrong window"};
  CHECK(decode_error(encode_error(err)) == err);
}

TEST_CASE("handshake agreement follows server preference") {
  Caps client, server;
  client.backends = {"reference"};
  server.backends = {"reference"};
  client.widths = {32};
  server.widths = {32};
  server.scale = 100;

  SUBCASE("both ends width 32") {
    Agreement a = agree(client, server);
    CHECK(a.width == 32);
    CHECK(a.backend == "reference");
    CHECK(a.scale == 100);
  }

  SUBCASE("intersection picks the server's preferred width") {
    client.widths = {16, 32};
    server.widths = {32};
    CHECK(agree(client, server).width == 32);
    server.widths = {16, 32};
    client.widths = {32, 16};
    CHECK(agree(client, server).width == 16);  // server order wins
  }

  SUBCASE("disjoint widths fail") {
    client.widths = {16};
    server.widths = {32};
    CHECK(code_of([&] { agree(client, server); }) == Errc::no_common_width);
  }

  SUBCASE("disjoint backends fail") {
    client.backends = {"external"};
    CHECK(code_of([&] { agree(client, server); }) == Errc::no_common_backend);
  }

  SUBCASE("key mode prefers diff when both ends allow it") {
    client.key_modes = kKeyModeSame | kKeyModeDiff;
    server.key_modes = kKeyModeSame | kKeyModeDiff;
    server.cadence = 3;
    Agreement a = agree(client, server);
    CHECK(a.key_mode == kKeyModeDiff);
    CHECK(a.cadence == 3);

    server.key_modes = kKeyModeSame;
    CHECK(agree(client, server).key_mode == kKeyModeSame);
  }
}

TEST_CASE("the transfer ledger counts whole frames by kind and direction") {
  TransferLedger ledger;
  CHECK(ledger.total(Direction::sent) == 0);
  CHECK(ledger.total(Direction::received) == 0);

  // one KEY_UPLOAD with a 1000-byte payload: 1000 + 24 header
  Message m;
  m.kind = Kind::key_upload;
  m.payload.assign(1000, 0xab);
  ledger.add(m.kind, Direction::sent, serialize(m).size());
  CHECK(ledger.total(Direction::sent) == 1024);
  CHECK(ledger.total(Kind::key_upload, Direction::sent) == 1024);
  CHECK(ledger.total(Kind::hello, Direction::sent) == 0);

  uint64_t prev = 0;
  testutil::Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    Message r = sample_message(Kind(1 + rng.uniform(0, 6)), rng);
    ledger.add(r.kind, Direction::received, serialize(r).size());
    const uint64_t now = ledger.grand_total();
    CHECK(now > prev);  // monotone
    prev = now;
  }
}

TEST_CASE("captures replay to the exact ledger totals") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "obliqc_capture_test.oblq").string();
  testutil::Rng rng(17);
  TransferLedger ledger;
  uint64_t written = 0;
  {
    CaptureWriter cap(path);
    for (int i = 0; i < 50; ++i) {
      Message m = sample_message(Kind(1 + rng.uniform(0, 6)), rng);
      auto bytes = serialize(m);
      cap.frame(bytes);
      ledger.add(m.kind, Direction::sent, bytes.size());
      written += bytes.size();
    }
  }
  auto replayed = read_capture(path);
  CHECK(replayed.size() == 50);
  uint64_t replay_total = 0;
  for (const auto& m : replayed) replay_total += m.frame_bytes();
  CHECK(replay_total == written);
  CHECK(ledger.total(Direction::sent) == replay_total);
  fs::remove(path);
}
