#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace latentbench {

/// One measured sweep cell. A failed cell has NaN accuracy and the failure
/// reason in its metadata.
struct ResultRecord {
  std::string fingerprint;
  std::string dataset_id;
  std::string target;
  std::string embedder;
  std::string classifier;
  std::size_t repetition = 0;
  std::size_t labeled_size = 0;
  std::size_t unlabeled_size = 0;
  double accuracy = 0.0;
  double wall_time_s = 0.0;
  std::string metadata_json = "{}";

  bool ok() const noexcept;
  bool operator==(const ResultRecord&) const = default;
};

inline constexpr const char* kResultsHeader =
    "fingerprint,dataset_id,target,embedder,classifier,repetition,labeled_size,"
    "unlabeled_size,accuracy,wall_time_s,metadata_json";

/// One CSV line without the trailing newline. metadata_json is quoted.
std::string format_record(const ResultRecord& rec);
ResultRecord parse_record(const std::string& line, std::uint64_t line_number);

/// Reads a results file. A final line without a newline (an interrupted
/// write) is ignored.
std::vector<ResultRecord> read_results(const std::string& path);

/// Always wraps in double quotes, doubling embedded quotes.
std::string csv_quote(const std::string& s);
/// Quotes only when the field holds a delimiter, quote or line break.
std::string csv_field(const std::string& s);

/// Splits one CSV line with RFC 4180 double-quote escaping.
std::vector<std::string> split_csv_line(const std::string& line, char delimiter = ',');

}  // namespace latentbench
