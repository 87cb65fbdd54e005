#include "csifb/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "csifb/serial.hpp"

namespace csifb {

namespace {

constexpr int kFormatVersion = 1;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename Visitable>
void write_blocks(Visitable&& visit, KeyValueHeader& header, std::string& payload) {
  visit([&](const std::string& name, Tensor& t) {
    header.set("block." + name, std::to_string(t.size()));
    for (double x : t.v) put_f64le(payload, x);
  });
}

template <typename Visitable>
void read_blocks(Visitable&& visit, const KeyValueHeader& header, const std::string& payload) {
  std::size_t off = 0;
  visit([&](const std::string& name, Tensor& t) {
    const std::string key = "block." + name;
    if (!header.has(key)) throw std::runtime_error("checkpoint: missing block '" + name + "'");
    if (header.get_i64(key) != static_cast<std::int64_t>(t.size()))
      throw std::runtime_error("checkpoint: block '" + name + "' holds " + header.get(key) +
                               " values, expected " + std::to_string(t.size()));
    if (off + 8 * t.size() > payload.size())
      throw std::runtime_error("checkpoint: truncated payload at block '" + name + "'");
    const auto* p = reinterpret_cast<const unsigned char*>(payload.data()) + off;
    for (auto& x : t.v) {
      x = get_f64le(p);
      p += 8;
    }
    off += 8 * t.size();
  });
  if (off != payload.size()) throw std::runtime_error("checkpoint: trailing bytes");
}

void write_file(const KeyValueHeader& header, const std::string& payload,
                const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  header.emit(os);
  os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!os) throw std::runtime_error("checkpoint: write failed on " + path);
}

std::pair<KeyValueHeader, std::string> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  KeyValueHeader header = KeyValueHeader::parse(is);
  std::string payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (header.get_i64("format_version") != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version");
  return {std::move(header), std::move(payload)};
}

}  // namespace

std::uint64_t config_hash(const std::string& text) { return fnv1a(text); }

void save_csinet(const CsiNetParams& p, const std::string& path,
                 const std::string& creation_config) {
  KeyValueHeader h;
  h.set_i64("format_version", kFormatVersion);
  h.set("kind", "csinet");
  h.set_i64("n_delay", p.n_delay);
  h.set_i64("n_tx", p.n_tx);
  h.set_i64("m_codeword", p.m_codeword);
  h.set_i64("m_decoder_in", p.m_decoder_in);
  h.set_f64("cr", static_cast<double>(p.m_codeword) / (2 * p.n_delay * p.n_tx));
  h.set("config_hash", std::to_string(config_hash(creation_config)));
  std::string payload;
  write_blocks([&](auto&& fn) { const_cast<CsiNetParams&>(p).visit("p", fn); }, h, payload);
  write_file(h, payload, path);
}

CsiNetParams load_csinet(const std::string& path) {
  auto [h, payload] = read_file(path);
  if (h.get("kind") != "csinet")
    throw std::runtime_error("checkpoint: expected a csinet checkpoint, found '" +
                             h.get("kind") + "'");
  Rng rng(0);  // placeholder init, immediately overwritten by the blocks
  CsiNetParams p =
      init_csinet(static_cast<int>(h.get_i64("n_delay")), static_cast<int>(h.get_i64("n_tx")),
                  static_cast<int>(h.get_i64("m_codeword")),
                  static_cast<int>(h.get_i64("m_decoder_in")), rng);
  read_blocks([&](auto&& fn) { p.visit("p", fn); }, h, payload);
  return p;
}

void save_csinet_lstm(const CsiNetLstmParams& p, const std::string& path,
                      const std::string& creation_config) {
  KeyValueHeader h;
  h.set_i64("format_version", kFormatVersion);
  h.set("kind", "csinet_lstm");
  h.set_i64("n_delay", p.dims.n_delay);
  h.set_i64("n_tx", p.dims.n_tx);
  h.set_i64("m_high", p.dims.m_high);
  h.set_i64("m_low", p.dims.m_low);
  const double n2 = 2.0 * p.dims.n_delay * p.dims.n_tx;
  h.set_f64("cr_high", p.dims.m_high / n2);
  h.set_f64("cr_low", p.dims.m_low / n2);
  h.set("config_hash", std::to_string(config_hash(creation_config)));
  std::string payload;
  write_blocks([&](auto&& fn) { const_cast<CsiNetLstmParams&>(p).visit(fn); }, h, payload);
  write_file(h, payload, path);
}

CsiNetLstmParams load_csinet_lstm(const std::string& path) {
  auto [h, payload] = read_file(path);
  if (h.get("kind") != "csinet_lstm")
    throw std::runtime_error("checkpoint: expected a csinet_lstm checkpoint, found '" +
                             h.get("kind") + "'");
  ModelDims dims;
  dims.n_delay = static_cast<int>(h.get_i64("n_delay"));
  dims.n_tx = static_cast<int>(h.get_i64("n_tx"));
  dims.m_high = static_cast<int>(h.get_i64("m_high"));
  dims.m_low = static_cast<int>(h.get_i64("m_low"));
  Rng rng(0);
  CsiNetLstmParams p = init_csinet_lstm(dims, rng);
  read_blocks([&](auto&& fn) { p.visit(fn); }, h, payload);
  return p;
}

std::string checkpoint_kind(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  const KeyValueHeader h = KeyValueHeader::parse(is);
  return h.get("kind");
}

}  // namespace csifb
