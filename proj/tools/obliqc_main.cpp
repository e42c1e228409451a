// SPDX-License-Identifier: Apache-2.0
//
// obliqc — privacy-preserving QC engine CLI.
//
//   obliqc server   ...      run the evaluating server
//   obliqc keygen   ...      generate session keys to a file
//   obliqc encrypt  ...      stage an encrypted request from a CSV
//   obliqc submit   ...      send a staged request, save the response
//   obliqc decrypt  ...      decrypt a saved response
//   obliqc qc run   ...      one-shot pipeline, prints PASS / FAIL:<rule> / score
//   obliqc bench    ...      measurement harness (sweep-batch, abs, parallel, report)

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "obliqc/bench.hpp"
#include "obliqc/client.hpp"
#include "obliqc/log.hpp"
#include "obliqc/server.hpp"
#include "obliqc/trace_backend.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace obliqc;

namespace {

volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }

std::string hex_encode(std::span<const uint8_t> b) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (uint8_t v : b) {
    s += digits[v >> 4];
    s += digits[v & 15];
  }
  return s;
}

std::vector<uint8_t> hex_decode(const std::string& s) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  if (s.size() % 2) fail(Errc::malformed_payload, "odd hex length");
  std::vector<uint8_t> out(s.size() / 2);
  for (size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(s[2 * i]), lo = nibble(s[2 * i + 1]);
    if (hi < 0 || lo < 0) fail(Errc::malformed_payload, "bad hex digit");
    out[i] = uint8_t(hi << 4 | lo);
  }
  return out;
}

void save_keys(const std::string& path, const SessionKeys& keys,
               const std::string& backend, int width) {
  json doc;
  doc["session_id"] = keys.session_id;
  doc["key_epoch"] = keys.key_epoch;
  doc["backend"] = backend;
  doc["width"] = width;
  doc["secret_hex"] = hex_encode(keys.secret);
  doc["serialized_sizes"] = keys.serialized_sizes;
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot write " + path);
  out << doc.dump(2) << "\n";
}

struct LoadedKeys {
  SessionKeys keys;
  std::string backend;
  int width = 32;
};

LoadedKeys load_keys(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot read " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(Errc::malformed_payload, std::string("bad key file: ") + e.what());
  }
  LoadedKeys lk;
  lk.keys.session_id = doc.at("session_id").get<uint64_t>();
  lk.keys.key_epoch = doc.at("key_epoch").get<uint32_t>();
  lk.backend = doc.value("backend", "reference");
  lk.width = doc.value("width", 32);
  lk.keys.secret = hex_decode(doc.value("secret_hex", ""));
  if (doc.contains("serialized_sizes"))
    lk.keys.serialized_sizes =
        doc["serialized_sizes"].get<std::map<std::string, uint64_t>>();
  return lk;
}

void write_bytes(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io_error, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
}

std::string timestamp_dir() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", std::localtime(&t));
  return buf;
}

fs::path make_run_dir(const std::string& base) {
  fs::path dir = fs::path(base) / timestamp_dir();
  for (int suffix = 0; fs::exists(dir); ++suffix)
    dir = fs::path(base) / (timestamp_dir() + "-" + std::to_string(suffix));
  fs::create_directories(dir);
  return dir;
}

std::string verdict_line(const QcOutcome& o) {
  if (o.rule == "R3") {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", o.score.value_or(0.0));
    return buf;
  }
  return o.violation ? "FAIL:" + o.rule : "PASS";
}

json outcome_json(const QcOutcome& o) {
  json doc;
  doc["rule"] = o.rule;
  doc["verdict"] = verdict_line(o);
  doc["violation"] = o.violation;
  doc["instance_flags"] = o.instance_flags;
  if (o.score) doc["score"] = *o.score;
  doc["row_flags"] = o.row_flags;
  doc["session_id"] = o.session_id;
  doc["width"] = o.agreement.width;
  doc["scale"] = o.agreement.scale;
  return doc;
}

constexpr uint32_t kStagedRequestMagic = 0x42514c4f;   // "OLQB"
constexpr uint32_t kStagedResponseMagic = 0x52514c4f;  // "OLQR"

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privacy-preserving Westgard QC over an oblivious backend"};
  app.require_subcommand(1);

  // ---- server ---------------------------------------------------------------
  auto* server_cmd = app.add_subcommand("server", "run the evaluating server");
  ServerConfig scfg;
  scfg.addr = "127.0.0.1:7643";
  std::string s_catalog, s_key_policy = "both";
  server_cmd->add_option("--addr", scfg.addr, "listen address host:port");
  server_cmd->add_option("--backend", scfg.backend, "reference|trace|external");
  server_cmd->add_option("--catalog", s_catalog, "rule catalog JSON path");
  server_cmd->add_option("--workers", scfg.workers, "rule-3 worker threads (0 = auto)");
  server_cmd->add_option("--key-mode", s_key_policy, "same|diff|both policy");
  server_cmd->add_option("--cadence", scfg.cadence, "requests per epoch in diff mode");

  // ---- keygen ---------------------------------------------------------------
  auto* keygen_cmd = app.add_subcommand("keygen", "generate session keys");
  std::string kg_backend = "reference", kg_out = "keys.json";
  int kg_width = 32;
  keygen_cmd->add_option("--backend", kg_backend, "client backend");
  keygen_cmd->add_option("--width", kg_width, "integer width (16|32)")
      ->check(CLI::IsMember({16, 32}));
  keygen_cmd->add_option("--out", kg_out, "key file path");

  // ---- encrypt ----------------------------------------------------------------
  auto* encrypt_cmd = app.add_subcommand("encrypt", "stage an encrypted request");
  std::string enc_keys = "keys.json", enc_in, enc_out = "request.bin";
  double enc_lo = 0.0, enc_hi = 100.0;
  int64_t enc_scale = 100;
  encrypt_cmd->add_option("--keys", enc_keys, "key file from keygen");
  encrypt_cmd->add_option("--in", enc_in, "sample CSV")->required();
  encrypt_cmd->add_option("--out", enc_out, "staged request path");
  encrypt_cmd->add_option("--lo", enc_lo, "codec lower bound");
  encrypt_cmd->add_option("--hi", enc_hi, "codec upper bound");
  encrypt_cmd->add_option("--scale", enc_scale, "codec scale");

  // ---- submit -----------------------------------------------------------------
  auto* submit_cmd = app.add_subcommand("submit", "send a staged request");
  std::string sub_addr = "127.0.0.1:7643", sub_keys = "keys.json",
              sub_in = "request.bin", sub_out = "response.bin", sub_capture;
  submit_cmd->add_option("--addr", sub_addr, "server address");
  submit_cmd->add_option("--keys", sub_keys, "key file");
  submit_cmd->add_option("--in", sub_in, "staged request");
  submit_cmd->add_option("--out", sub_out, "response path");
  submit_cmd->add_option("--capture", sub_capture, "write wire capture here");

  // ---- decrypt ----------------------------------------------------------------
  auto* decrypt_cmd = app.add_subcommand("decrypt", "decrypt a saved response");
  std::string dec_keys = "keys.json", dec_in = "response.bin";
  bool dec_json = false;
  decrypt_cmd->add_option("--keys", dec_keys, "key file");
  decrypt_cmd->add_option("--in", dec_in, "response path");
  decrypt_cmd->add_flag("--json", dec_json, "machine-readable output");

  // ---- qc run -------------------------------------------------------------------
  auto* qc_cmd = app.add_subcommand("qc", "quality-control pipeline");
  auto* qc_run_cmd = qc_cmd->add_subcommand("run", "one-shot evaluation");
  std::string qc_addr = "127.0.0.1:7643", qc_rule = "R1", qc_in, qc_backend = "reference",
              qc_key_mode = "same", qc_capture;
  int qc_width = 32;
  uint32_t qc_batch = 64, qc_cadence = 1;
  bool qc_json = false;
  qc_run_cmd->add_option("--addr", qc_addr, "server address");
  qc_run_cmd->add_option("--rule", qc_rule, "rule id (R1|R2|R3)");
  qc_run_cmd->add_option("--in", qc_in, "sample CSV")->required();
  qc_run_cmd->add_option("--backend", qc_backend, "reference|trace|external");
  qc_run_cmd->add_option("--width", qc_width, "preferred width")
      ->check(CLI::IsMember({16, 32}));
  qc_run_cmd->add_option("--batch-size", qc_batch, "instances per request");
  qc_run_cmd->add_option("--key-mode", qc_key_mode, "same|diff");
  qc_run_cmd->add_option("--cadence", qc_cadence, "requests per epoch (diff mode)");
  qc_run_cmd->add_option("--capture", qc_capture, "write wire capture here");
  qc_run_cmd->add_flag("--json", qc_json, "machine-readable output");

  // ---- bench ---------------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "measurement harness");
  std::string bench_out_dir = "bench-out";
  uint64_t bench_seed = 1;
  double bench_gate_us = 10.0;
  uint32_t bench_reps = 5;
  bench_cmd->add_option("--out-dir", bench_out_dir, "output base directory");
  bench_cmd->add_option("--seed", bench_seed, "workload seed");
  bench_cmd->add_option("--gate-cost-us", bench_gate_us, "synthetic per-gate cost");
  bench_cmd->add_option("--reps", bench_reps, "timed repetitions (>= 5)");

  auto* sb_cmd = bench_cmd->add_subcommand("sweep-batch", "batch-size sweep");
  std::string sb_rule = "R1", sb_key_mode = "same";
  std::vector<uint32_t> sb_sizes = {1, 64, 128, 1024};
  sb_cmd->add_option("--rule", sb_rule, "R1|R2");
  sb_cmd->add_option("--sizes", sb_sizes, "ascending batch sizes");
  sb_cmd->add_option("--key-mode", sb_key_mode, "same|diff (fresh keys per item)");

  auto* abs_cmd = bench_cmd->add_subcommand("abs", "abs variant comparison");

  auto* par_cmd = bench_cmd->add_subcommand("parallel", "rule-3 worker sweep");
  std::vector<int> par_workers = {1, 2, 4, 8, 16};
  int par_rows = 16, par_cols = 64;
  double par_lo = 45.0, par_hi = 55.0;
  par_cmd->add_option("--workers", par_workers, "worker counts");
  par_cmd->add_option("--rows", par_rows, "matrix rows");
  par_cmd->add_option("--cols", par_cols, "matrix cols");
  par_cmd->add_option("--lo", par_lo, "codec lower bound");
  par_cmd->add_option("--hi", par_hi, "codec upper bound");

  auto* rep_cmd = bench_cmd->add_subcommand("report", "render saved records");
  std::string rep_in, rep_format = "markdown";
  rep_cmd->add_option("--in", rep_in, "records CSV")->required();
  rep_cmd->add_option("--format", rep_format, "csv|markdown");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*server_cmd) {
      if (s_key_policy == "same") scfg.key_mode_policy = wire::kKeyModeSame;
      else if (s_key_policy == "diff") scfg.key_mode_policy = wire::kKeyModeDiff;
      else scfg.key_mode_policy = wire::kKeyModeSame | wire::kKeyModeDiff;
      Catalog catalog = s_catalog.empty() ? default_catalog() : load_catalog(s_catalog);
      Server server(scfg, make_backend(scfg.backend), std::move(catalog));
      server.start();
      std::fprintf(stderr, "obliqc server on port %u\n", unsigned(server.port()));
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      return 0;
    }

    if (*keygen_cmd) {
      auto backend = make_backend(kg_backend);
      SessionKeys keys = backend->keygen({.width = kg_width});
      save_keys(kg_out, keys, kg_backend, kg_width);
      std::cout << "session " << keys.session_id << " epoch " << keys.key_epoch
                << " -> " << kg_out << "\n";
      return 0;
    }

    if (*encrypt_cmd) {
      LoadedKeys lk = load_keys(enc_keys);
      auto backend = make_backend(lk.backend);
      backend->restore_session(lk.keys);
      FixedPointConfig cfg{enc_scale, lk.width, enc_lo, enc_hi};
      cfg.validate();
      SampleFile samples = load_samples(enc_in, cfg);
      wire::EvalRequestPayload req;
      req.rule = rules::rule_name(samples.rule);
      req.cfg = {uint32_t(cfg.scale), uint16_t(cfg.width), cfg.raw_lo(), cfg.raw_hi()};
      if (samples.rule == rules::RuleId::r3) {
        req.shape_kind = 1;
        req.rows = uint32_t(samples.rows);
        req.cols = uint32_t(samples.cols);
        req.batch = 1;
      } else {
        req.shape_kind = 0;
        req.window = uint32_t(samples.window);
        req.batch = uint32_t(samples.values_raw.size());
      }
      for (const auto& row : samples.values_raw) {
        auto h = backend->encrypt_raw(row, cfg.width, lk.keys);
        req.ciphertexts.push_back(backend->serialize_handle(h));
      }
      wire::Writer w;
      w.u32(kStagedRequestMagic);
      auto body = wire::encode_eval_request(req);
      w.bytes(body);
      write_bytes(enc_out, w.out);
      std::cout << req.ciphertexts.size() << " ciphertexts -> " << enc_out << "\n";
      return 0;
    }

    if (*submit_cmd) {
      LoadedKeys lk = load_keys(sub_keys);
      auto staged = wire::read_file_bytes(sub_in);
      wire::Reader r{staged};
      if (r.u32() != kStagedRequestMagic)
        fail(Errc::malformed_payload, sub_in + " is not a staged request");
      wire::EvalRequestPayload req = wire::decode_eval_request(r.bytes());
      r.expect_done();

      std::shared_ptr<Backend> backend = make_backend(lk.backend);
      ClientOptions opts;
      opts.addr = sub_addr;
      opts.capture_path = sub_capture;
      opts.widths = {uint16_t(lk.width)};
      ClientSession session(opts, backend);
      session.adopt_keys(lk.keys, lk.width);
      session.connect();
      session.handshake();
      session.upload_keys();
      wire::EvalResponsePayload resp = session.submit_request(req);
      wire::Writer w;
      w.u32(kStagedResponseMagic);
      w.str(req.rule);
      w.u32(req.cfg.scale);
      w.bytes(wire::encode_eval_response(resp));
      write_bytes(sub_out, w.out);
      std::cout << resp.verdicts.size() << " verdicts -> " << sub_out << "\n";
      return 0;
    }

    if (*decrypt_cmd) {
      LoadedKeys lk = load_keys(dec_keys);
      auto backend = make_backend(lk.backend);
      backend->restore_session(lk.keys);
      auto staged = wire::read_file_bytes(dec_in);
      wire::Reader r{staged};
      if (r.u32() != kStagedResponseMagic)
        fail(Errc::malformed_payload, dec_in + " is not a saved response");
      const std::string rule = r.str();
      const uint32_t scale = r.u32();
      wire::EvalResponsePayload resp = wire::decode_eval_response(r.bytes());
      r.expect_done();
      json doc;
      doc["rule"] = rule;
      bool violation = false;
      for (const auto& v : resp.verdicts) {
        if (rule == "R3") {
          auto score = backend->deserialize_handle(v.flag_or_score, lk.keys.session_id);
          doc["score"] = double(backend->decrypt_raw(score, lk.keys)[0]) / scale;
          std::vector<int> flags;
          for (const auto& fb : v.row_flags) {
            auto bit = backend->deserialize_bit(fb, lk.keys.session_id);
            flags.push_back(backend->decrypt_bit(bit, lk.keys));
          }
          for (int f : flags) violation |= f != 0;
          doc["row_flags"] = flags;
        } else {
          auto bit = backend->deserialize_bit(v.flag_or_score, lk.keys.session_id);
          violation |= backend->decrypt_bit(bit, lk.keys) != 0;
        }
      }
      doc["verdict"] = rule == "R3" && doc.contains("score")
                           ? json(doc["score"])
                           : json(violation ? "FAIL:" + rule : "PASS");
      if (dec_json)
        std::cout << doc.dump() << "\n";
      else if (rule == "R3")
        std::printf("%.2f\n", doc.value("score", 0.0));
      else
        std::cout << (violation ? "FAIL:" + rule : "PASS") << "\n";
      return 0;
    }

    if (*qc_run_cmd) {
      ClientOptions opts;
      opts.addr = qc_addr;
      opts.backends = {qc_backend};
      opts.widths = qc_width == 32 ? std::vector<uint16_t>{32, 16}
                                   : std::vector<uint16_t>{16, 32};
      opts.key_modes = qc_key_mode == "diff" ? wire::kKeyModeDiff : wire::kKeyModeSame;
      opts.cadence = qc_cadence;
      opts.batch_size = qc_batch;
      opts.capture_path = qc_capture;

      // shape comes from the CSV header; range checks happen against the
      // server's advert during the run, so parse with a loose range here
      std::ifstream in(qc_in);
      if (!in) fail(Errc::io_error, "cannot open sample file " + qc_in);
      FixedPointConfig loose{100, 32, -1.0e7, 1.0e7};
      SampleFile samples = parse_samples(in, loose);
      if (rules::rule_name(samples.rule) != qc_rule)
        fail(Errc::shape_mismatch, "sample file declares rule " +
                                       rules::rule_name(samples.rule) +
                                       " but --rule asked for " + qc_rule);

      QcOutcome outcome = qc_run(opts, samples, make_backend(qc_backend));
      if (qc_json)
        std::cout << outcome_json(outcome).dump() << "\n";
      else
        std::cout << verdict_line(outcome) << "\n";
      return 0;
    }

    if (*bench_cmd) {
      bench::SweepOptions opts;
      opts.seed = bench_seed;
      opts.repetitions = bench_reps;
      opts.gate_cost = std::chrono::nanoseconds(int64_t(bench_gate_us * 1000.0));
      Catalog catalog = default_catalog();

      if (*rep_cmd) {
        std::ifstream in(rep_in);
        if (!in) fail(Errc::io_error, "cannot open " + rep_in);
        auto records = bench::read_records_csv(in);
        fs::path dir = make_run_dir(bench_out_dir);
        fs::path out_path = dir / (rep_format == "csv" ? "report.csv" : "report.md");
        std::ofstream out(out_path);
        bench::report(records, rep_format == "csv" ? bench::ReportFormat::csv
                                                   : bench::ReportFormat::markdown,
                      out);
        std::cout << out_path.string() << "\n";
        return 0;
      }

      fs::path dir = make_run_dir(bench_out_dir);
      if (*sb_cmd) {
        const CatalogEntry& entry = catalog.at(sb_rule);
        FixedPointConfig cfg{100, 32, entry.lo, entry.hi};
        opts.diff_key = sb_key_mode == "diff";
        auto records = bench::sweep_batch(entry, cfg, sb_sizes, opts);
        std::ofstream out(dir / "sweep-batch.csv");
        bench::write_records_csv(out, records);
        for (uint32_t b : sb_sizes)
          std::printf("batch %5u  amortized %10.0f ns/item\n", b,
                      bench::amortized_ns_per_item(records, b));
        std::cout << (dir / "sweep-batch.csv").string() << "\n";
        return 0;
      }
      if (*abs_cmd) {
        auto rows = bench::sweep_abs_variants(opts);
        std::ofstream out(dir / "abs.csv");
        bench::write_abs_csv(out, rows);
        for (const auto& r : rows)
          std::printf("%-10s gates %3lu median %8lu ns\n", r.variant.c_str(),
                      (unsigned long)r.gates, (unsigned long)r.median_ns);
        std::cout << (dir / "abs.csv").string() << "\n";
        return 0;
      }
      if (*par_cmd) {
        CatalogEntry entry = catalog.at("R3");
        entry.spec.rows = par_rows;
        entry.spec.cols = par_cols;
        entry.lo = par_lo;
        entry.hi = par_hi;
        FixedPointConfig cfg{100, 32, entry.lo, entry.hi};
        auto records = bench::sweep_parallel(entry, cfg, par_workers, opts);
        std::ofstream out(dir / "parallel.csv");
        bench::write_records_csv(out, records);
        const double base = double(records.front().median_ns);
        for (const auto& r : records)
          std::printf("workers %2u  median %10lu ns  speedup %.2fx  cpu %.0f%%\n",
                      r.batch_size, (unsigned long)r.median_ns,
                      base / double(r.median_ns), r.cpu_util_pct);
        std::cout << (dir / "parallel.csv").string() << "\n";
        return 0;
      }
      std::cerr << "bench needs a subcommand (sweep-batch | abs | parallel | report)\n";
      return 1;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << errc_name(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
