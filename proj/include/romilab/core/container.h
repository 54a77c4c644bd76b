#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace romilab {

// Binary container shared by buffers, tabular models and network
// checkpoints: "ROMI" magic, uint32 LE header length, JSON header, then a
// float32 LE payload.
struct Container {
  nlohmann::json header;
  std::vector<float> payload;
};

std::vector<std::uint8_t> encode_container(const Container& c);
Container decode_container(const std::vector<std::uint8_t>& bytes, const std::string& source);
void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);

// FNV-1a 64-bit, hex encoded.
std::string content_hash(const std::vector<std::uint8_t>& bytes);
std::string content_hash(const std::string& text);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace romilab
