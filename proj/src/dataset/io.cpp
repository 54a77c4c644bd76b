#include "romilab/dataset/io.h"

#include <iomanip>
#include <sstream>

#include "romilab/core/error.h"

namespace romilab::data {

std::vector<std::uint8_t> encode_buffer(const TransitionBuffer& buf) {
  const std::size_t sd = buf.state_dim, ad = buf.action_dim;
  Container c;
  c.header = {{"kind", "transition_buffer"},
              {"version", 1},
              {"layout_id", buf.layout_id},
              {"seed", buf.seed},
              {"state_dim", sd},
              {"action_dim", ad},
              {"count", buf.size()},
              {"record_floats", 2 * sd + ad + 4},
              {"fields", {"s", "a", "r", "s_next", "done", "collided", "origin"}},
              {"episode_boundaries", buf.episode_boundaries}};
  c.payload.reserve(buf.size() * (2 * sd + ad + 4));
  for (const auto& t : buf.transitions) {
    for (std::size_t i = 0; i < sd; ++i) c.payload.push_back(static_cast<float>(t.s.v[i]));
    if (ad == 1)
      c.payload.push_back(static_cast<float>(t.a.index));
    else
      for (std::size_t i = 0; i < ad; ++i) c.payload.push_back(static_cast<float>(t.a.u[i]));
    c.payload.push_back(static_cast<float>(t.r));
    for (std::size_t i = 0; i < sd; ++i) c.payload.push_back(static_cast<float>(t.s_next.v[i]));
    c.payload.push_back(t.done ? 1.0f : 0.0f);
    c.payload.push_back(t.collided ? 1.0f : 0.0f);
    c.payload.push_back(static_cast<float>(static_cast<int>(t.origin)));
  }
  return encode_container(c);
}

TransitionBuffer decode_buffer(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  const Container c = decode_container(bytes, source);
  if (c.header.value("kind", "") != "transition_buffer")
    throw IoError(source + ": container is not a transition buffer");
  TransitionBuffer buf;
  buf.layout_id = c.header.at("layout_id").get<std::string>();
  buf.seed = c.header.at("seed").get<std::uint64_t>();
  buf.state_dim = c.header.at("state_dim").get<std::size_t>();
  buf.action_dim = c.header.at("action_dim").get<std::size_t>();
  buf.episode_boundaries = c.header.at("episode_boundaries").get<std::vector<std::size_t>>();
  const std::size_t count = c.header.at("count").get<std::size_t>();
  const std::size_t sd = buf.state_dim, ad = buf.action_dim;
  const std::size_t rec = 2 * sd + ad + 4;
  if (sd > kMaxStateDim || ad < 1 || ad > 2) throw IoError(source + ": unsupported dimensions");
  if (c.payload.size() != count * rec) throw IoError(source + ": payload size mismatch");
  buf.transitions.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const float* p = c.payload.data() + k * rec;
    Transition t;
    t.s = State::of_dim(sd);
    t.s_next = State::of_dim(sd);
    for (std::size_t i = 0; i < sd; ++i) t.s.v[i] = p[i];
    p += sd;
    if (ad == 1) {
      t.a = Action::discrete(static_cast<int>(p[0]));
    } else {
      t.a = Action::force(p[0], p[1]);
    }
    p += ad;
    t.r = p[0];
    p += 1;
    for (std::size_t i = 0; i < sd; ++i) t.s_next.v[i] = p[i];
    p += sd;
    t.done = p[0] != 0.0f;
    t.collided = p[1] != 0.0f;
    t.origin = p[2] != 0.0f ? Origin::model : Origin::env;
    buf.transitions.push_back(t);
  }
  buf.check_invariants();
  return buf;
}

void write_buffer(const std::string& path, const TransitionBuffer& buf) {
  write_file_bytes(path, encode_buffer(buf));
}

TransitionBuffer read_buffer(const std::string& path) {
  return decode_buffer(read_file_bytes(path), path);
}

void write_buffer_csv(const std::string& path, const TransitionBuffer& buf) {
  std::ostringstream os;
  os << std::setprecision(9);
  const std::size_t sd = buf.state_dim;
  for (std::size_t i = 0; i < sd; ++i) os << "s" << i << ',';
  os << (buf.action_dim == 1 ? "a" : "a0,a1") << ",r,";
  for (std::size_t i = 0; i < sd; ++i) os << "s_next" << i << ',';
  os << "done,collided,origin\n";
  for (const auto& t : buf.transitions) {
    for (std::size_t i = 0; i < sd; ++i) os << t.s.v[i] << ',';
    if (buf.action_dim == 1)
      os << t.a.index << ',';
    else
      os << t.a.u[0] << ',' << t.a.u[1] << ',';
    os << t.r << ',';
    for (std::size_t i = 0; i < sd; ++i) os << t.s_next.v[i] << ',';
    os << int(t.done) << ',' << int(t.collided) << ','
       << (t.origin == Origin::model ? "model" : "env") << '\n';
  }
  write_text_file(path, os.str());
}

std::string buffer_checksum(const TransitionBuffer& buf) { return content_hash(encode_buffer(buf)); }

}  // namespace romilab::data
