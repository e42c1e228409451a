// SPDX-License-Identifier: Apache-2.0
#include "obliqc/samples.hpp"

#include <fstream>
#include <sstream>

namespace obliqc {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

int header_int(const std::string& field, const std::string& key) {
  if (field.rfind(key + "=", 0) != 0)
    fail(Errc::malformed_payload, "sample header expects " + key + "=...");
  return std::stoi(field.substr(key.size() + 1));
}

}  // namespace

SampleFile parse_samples(std::istream& in, const FixedPointConfig& cfg) {
  SampleFile f;
  std::string line;
  if (!std::getline(in, line))
    fail(Errc::malformed_payload, "empty sample file");
  auto fields = split(line, ',');
  if (fields.empty() || fields[0].rfind("rule=", 0) != 0)
    fail(Errc::malformed_payload, "sample file must start with rule=<id>");
  f.rule = rules::rule_from_name(fields[0].substr(5));
  if (f.rule == rules::RuleId::r3) {
    if (fields.size() != 3)
      fail(Errc::malformed_payload, "rule=R3 header needs rows= and cols=");
    f.rows = header_int(fields[1], "rows");
    f.cols = header_int(fields[2], "cols");
  } else {
    if (fields.size() != 2)
      fail(Errc::malformed_payload, "header needs n=<window>");
    f.window = header_int(fields[1], "n");
  }

  const size_t expect_len = f.rule == rules::RuleId::r3 ? size_t(f.cols)
                                                        : size_t(f.window);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split(line, ',');
    if (cells.size() != expect_len)
      fail(Errc::shape_mismatch,
           "row has " + std::to_string(cells.size()) + " values, expected " +
               std::to_string(expect_len));
    std::vector<int64_t> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) row.push_back(parse_decimal(cell, cfg));
    f.values_raw.push_back(std::move(row));
  }
  if (f.rule == rules::RuleId::r3 && f.values_raw.size() != size_t(f.rows))
    fail(Errc::shape_mismatch, "matrix file must carry exactly rows lines");
  if (f.values_raw.empty())
    fail(Errc::malformed_payload, "sample file has no data rows");
  return f;
}

SampleFile load_samples(const std::string& path, const FixedPointConfig& cfg) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open sample file " + path);
  return parse_samples(in, cfg);
}

void write_samples(std::ostream& out, const SampleFile& f,
                   const FixedPointConfig& cfg) {
  if (f.rule == rules::RuleId::r3)
    out << "rule=R3,rows=" << f.rows << ",cols=" << f.cols << "\n";
  else
    out << "rule=" << rules::rule_name(f.rule) << ",n=" << f.window << "\n";
  for (const auto& row : f.values_raw) {
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << format_decimal(row[j], cfg);
    }
    out << "\n";
  }
}

}  // namespace obliqc
