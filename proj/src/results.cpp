#include "latentbench/results.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "latentbench/error.hpp"

namespace latentbench {

bool ResultRecord::ok() const noexcept { return std::isfinite(accuracy); }

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_field(const std::string& s) {
  return s.find_first_of(",\"\n\r") == std::string::npos ? s : csv_quote(s);
}

namespace {

std::string number(double v, const char* fmt) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::size_t to_size(const std::string& s, std::uint64_t line) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ParseError("results: bad integer '" + s + "' on line " + std::to_string(line), line);
  return v;
}

double to_double(const std::string& s, std::uint64_t line) {
  if (s == "nan") return std::nan("");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw ParseError("results: bad number '" + s + "' on line " + std::to_string(line), line);
  return v;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string format_record(const ResultRecord& r) {
  std::ostringstream os;
  os << r.fingerprint << ',' << csv_field(r.dataset_id) << ',' << csv_field(r.target) << ','
     << r.embedder << ',' << r.classifier << ',' << r.repetition << ',' << r.labeled_size << ',' << r.unlabeled_size
     << ',' << number(r.accuracy, "%.17g") << ',' << number(r.wall_time_s, "%.6f") << ','
     << csv_quote(r.metadata_json);
  return os.str();
}

ResultRecord parse_record(const std::string& line, std::uint64_t n) {
  const auto f = split_csv_line(line);
  if (f.size() != 11)
    throw ParseError("results: expected 11 fields on line " + std::to_string(n) + ", got " +
                         std::to_string(f.size()),
                     n);
  ResultRecord r;
  r.fingerprint = f[0];
  r.dataset_id = f[1];
  r.target = f[2];
  r.embedder = f[3];
  r.classifier = f[4];
  r.repetition = to_size(f[5], n);
  r.labeled_size = to_size(f[6], n);
  r.unlabeled_size = to_size(f[7], n);
  r.accuracy = to_double(f[8], n);
  r.wall_time_s = to_double(f[9], n);
  r.metadata_json = f[10];
  return r;
}

std::vector<ResultRecord> read_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open results file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::vector<ResultRecord> out;
  std::size_t pos = 0;
  std::uint64_t line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // torn final write
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kResultsHeader) throw ParseError("results: unexpected header in " + path, 1);
      continue;
    }
    if (line.empty()) continue;
    out.push_back(parse_record(line, line_no));
  }
  return out;
}

}  // namespace latentbench
