#include "romilab/core/container.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "romilab/core/error.h"

namespace romilab {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

constexpr char kMagic[4] = {'R', 'O', 'M', 'I'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

std::vector<std::uint8_t> encode_container(const Container& c) {
  const std::string header = c.header.dump();
  std::vector<std::uint8_t> out;
  out.reserve(8 + header.size() + 4 * c.payload.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  const std::size_t off = out.size();
  out.resize(off + 4 * c.payload.size());
  if (!c.payload.empty()) std::memcpy(out.data() + off, c.payload.data(), 4 * c.payload.size());
  return out;
}

Container decode_container(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError(source + ": not a romilab container");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[4 + i]) << (8 * i);
  if (8 + static_cast<std::size_t>(len) > bytes.size()) throw IoError(source + ": truncated header");
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(source + ": bad header: " + e.what());
  }
  const std::size_t rest = bytes.size() - 8 - len;
  if (rest % 4 != 0) throw IoError(source + ": payload is not a whole number of float32 values");
  c.payload.resize(rest / 4);
  if (rest) std::memcpy(c.payload.data(), bytes.data() + 8 + len, rest);
  return c;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

void write_container(const std::string& path, const Container& c) {
  write_file_bytes(path, encode_container(c));
}

Container read_container(const std::string& path) {
  return decode_container(read_file_bytes(path), path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string content_hash(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string content_hash(const std::string& text) {
  return content_hash(std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace romilab
