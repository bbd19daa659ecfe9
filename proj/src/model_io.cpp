#include "latentbench/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "latentbench/error.hpp"

namespace latentbench {

namespace {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out += static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
}

void put_double(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

template <class T>
T get_le(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size())
    throw ParseError("model container truncated at byte offset " + std::to_string(pos), pos);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= std::uint64_t{static_cast<unsigned char>(bytes[pos + i])} << (8 * i);
  pos += sizeof(T);
  return static_cast<T>(v);
}

double get_double(std::string_view bytes, std::size_t& pos) {
  return std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
}

constexpr std::string_view kMagic = "LBMC";

}  // namespace

ModelWriter::ModelWriter(ModelKind kind, std::uint64_t p, std::uint64_t d)
    : kind_(kind), p_(p), d_(d) {}

void ModelWriter::section(std::string_view tag, const std::string& payload) {
  if (tag.size() != 4) throw std::invalid_argument("section tags are 4 bytes");
  body_.append(tag);
  put_le<std::uint64_t>(body_, payload.size());
  body_ += payload;
}

void ModelWriter::matrix(std::string_view tag, const Matrix& m) {
  std::string payload;
  payload.reserve(16 + 8 * m.size());
  put_le<std::uint64_t>(payload, m.rows());
  put_le<std::uint64_t>(payload, m.cols());
  for (double v : m.values()) put_double(payload, v);
  section(tag, payload);
}

void ModelWriter::vector(std::string_view tag, std::span<const double> v) {
  matrix(tag, Matrix(1, v.size(), std::vector<double>(v.begin(), v.end())));
}

void ModelWriter::text(std::string_view tag, std::string_view s) { section(tag, std::string(s)); }

std::string ModelWriter::bytes() const {
  std::string out(kMagic);
  put_le<std::uint32_t>(out, kModelContainerVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(kind_));
  put_le<std::uint64_t>(out, p_);
  put_le<std::uint64_t>(out, d_);
  return out + body_;
}

void ModelWriter::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path);
  const auto b = bytes();
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

ModelReader ModelReader::from_bytes(std::string bytes) {
  if (bytes.substr(0, 4) != kMagic) throw ParseError("model container: bad magic at byte offset 0", 0);
  std::size_t pos = 4;
  ModelReader r;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kModelContainerVersion)
    throw ParseError("model container: unsupported version " + std::to_string(version), 4);
  r.kind_ = static_cast<ModelKind>(get_le<std::uint32_t>(bytes, pos));
  r.p_ = get_le<std::uint64_t>(bytes, pos);
  r.d_ = get_le<std::uint64_t>(bytes, pos);
  while (pos < bytes.size()) {
    if (pos + 4 > bytes.size())
      throw ParseError("model container: truncated tag at byte offset " + std::to_string(pos), pos);
    std::string tag = bytes.substr(pos, 4);
    pos += 4;
    const auto len = get_le<std::uint64_t>(bytes, pos);
    if (pos + len > bytes.size())
      throw ParseError("model container: section '" + tag + "' truncated at byte offset " +
                           std::to_string(pos),
                       pos);
    r.sections_.emplace(std::move(tag), bytes.substr(pos, len));
    pos += len;
  }
  return r;
}

ModelReader ModelReader::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return from_bytes(os.str());
}

void ModelReader::expect(ModelKind kind) const {
  if (kind_ != kind)
    throw DataError("model container holds kind " + std::to_string(static_cast<int>(kind_)) +
                    ", expected " + std::to_string(static_cast<int>(kind)));
}

bool ModelReader::has(std::string_view tag) const { return sections_.find(tag) != sections_.end(); }

const std::string& ModelReader::payload(std::string_view tag) const {
  auto it = sections_.find(tag);
  if (it == sections_.end()) throw DataError("model container: missing section '" + std::string(tag) + "'");
  return it->second;
}

Matrix ModelReader::matrix(std::string_view tag) const {
  const std::string& b = payload(tag);
  std::size_t pos = 0;
  const auto rows = get_le<std::uint64_t>(b, pos);
  const auto cols = get_le<std::uint64_t>(b, pos);
  if (b.size() != 16 + 8 * rows * cols)
    throw ParseError("model container: section '" + std::string(tag) + "' has wrong size", 0);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = get_double(b, pos);
  return m;
}

std::vector<double> ModelReader::vector(std::string_view tag) const {
  const Matrix m = matrix(tag);
  return {m.values().begin(), m.values().end()};
}

std::string ModelReader::text(std::string_view tag) const { return payload(tag); }

}  // namespace latentbench
