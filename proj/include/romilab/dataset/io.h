#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "romilab/core/container.h"
#include "romilab/dataset/buffer.h"

namespace romilab::data {

// Record per transition: s, a, r, s_next, done, collided, origin. Grid
// actions are stored by index (action_dim 1), point actions by force.
std::vector<std::uint8_t> encode_buffer(const TransitionBuffer& buf);
TransitionBuffer decode_buffer(const std::vector<std::uint8_t>& bytes, const std::string& source);
void write_buffer(const std::string& path, const TransitionBuffer& buf);
TransitionBuffer read_buffer(const std::string& path);
void write_buffer_csv(const std::string& path, const TransitionBuffer& buf);

std::string buffer_checksum(const TransitionBuffer& buf);

}  // namespace romilab::data
