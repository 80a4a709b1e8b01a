#include "opo/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace opo::ckpt {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u64(out, s.size());
  out.insert(out.end(), s.begin(), s.end());
}

void put_doubles(std::vector<std::uint8_t>& out, std::span<const double> v) {
  static_assert(sizeof(double) == 8);
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(v.data());
  out.insert(out.end(), bytes, bytes + v.size() * 8);
}

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw std::runtime_error("checkpoint truncated mid-record");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }
  std::vector<double> doubles(std::size_t n) {
    need(n * 8);
    std::vector<double> v(n);
    std::memcpy(v.data(), buf.data() + pos, n * 8);
    pos += n * 8;
    return v;
  }
};

}  // namespace

std::vector<std::uint8_t> serialize(const model::Model& m,
                                    const RngStates& rng_states) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_string(out, cfg::dump(m.config));
  put_string(out, cfg::digest(m.config));
  put_u64(out, m.params.size());
  for (const ad::Tensor& p : m.params) {
    put_string(out, p.name());
    put_u32(out, static_cast<std::uint32_t>(p.shape().size()));
    for (const int e : p.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    put_doubles(out, p.value());
  }
  put_u64(out, rng_states.size());
  for (const auto& [name, state] : rng_states) {
    put_string(out, name);
    put_string(out, state);
  }
  put_u64(out, out.size() + 8);  // trailing total length, self-inclusive
  return out;
}

void save_checkpoint(const std::string& path, const model::Model& m,
                     const RngStates& rng_states) {
  const auto bytes = serialize(m, rng_states);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

Loaded load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());

  if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);

  // trailing length field guards against truncation
  std::uint64_t stated = 0;
  std::memcpy(&stated, buf.data() + buf.size() - 8, 8);
  if (stated != buf.size())
    throw std::runtime_error("checkpoint truncated or corrupt: " + path);

  Reader r{buf, 4};
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));

  const std::string config_text = r.str();
  const std::string digest = r.str();
  const cfg::Config config = cfg::parse_text(config_text, path + "#config");
  if (cfg::digest(config) != digest)
    throw std::runtime_error("checkpoint config digest mismatch");

  Loaded loaded{model::init_model(config), {}};
  const std::uint64_t count = r.u64();
  if (count != loaded.model.params.size())
    throw std::runtime_error("checkpoint parameter count mismatch");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint32_t rank = r.u32();
    std::vector<int> shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int>(r.u32());
      numel *= shape[d];
    }
    ad::Tensor p = loaded.model.params[i];
    if (p.name() != name || p.shape() != shape)
      throw std::runtime_error("checkpoint tensor mismatch at '" + name + "'");
    p.raw() = r.doubles(numel);
  }
  const std::uint64_t states = r.u64();
  for (std::uint64_t i = 0; i < states; ++i) {
    const std::string name = r.str();
    const std::string state = r.str();
    loaded.rng_states.emplace_back(name, state);
  }
  return loaded;
}

}  // namespace opo::ckpt
