#pragma once

// Binary model container shared by every fitted model.
//
//   "LBMC" | u32 version | u32 kind | u64 p | u64 d | sections...
//   section = 4-byte tag | u64 payload length | payload
//
// Matrix payloads are u64 rows, u64 cols, then row-major little-endian
// IEEE-754 doubles. Text payloads are raw UTF-8.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latentbench/matrix.hpp"

namespace latentbench {

enum class ModelKind : std::uint32_t { pca = 1, isomap = 2, vae = 3, logreg = 4, forest = 5 };

inline constexpr std::uint32_t kModelContainerVersion = 1;

class ModelWriter {
 public:
  ModelWriter(ModelKind kind, std::uint64_t p, std::uint64_t d);

  void matrix(std::string_view tag, const Matrix& m);
  void vector(std::string_view tag, std::span<const double> v);
  void text(std::string_view tag, std::string_view s);

  std::string bytes() const;
  void save(const std::string& path) const;

 private:
  void section(std::string_view tag, const std::string& payload);

  ModelKind kind_;
  std::uint64_t p_, d_;
  std::string body_;
};

class ModelReader {
 public:
  static ModelReader from_bytes(std::string bytes);
  static ModelReader load(const std::string& path);

  ModelKind kind() const noexcept { return kind_; }
  std::uint64_t p() const noexcept { return p_; }
  std::uint64_t d() const noexcept { return d_; }

  /// Throws DataError if the section is missing or the kind differs.
  void expect(ModelKind kind) const;
  bool has(std::string_view tag) const;
  Matrix matrix(std::string_view tag) const;
  std::vector<double> vector(std::string_view tag) const;
  std::string text(std::string_view tag) const;

 private:
  const std::string& payload(std::string_view tag) const;

  ModelKind kind_{};
  std::uint64_t p_ = 0, d_ = 0;
  std::map<std::string, std::string, std::less<>> sections_;
};

}  // namespace latentbench
