#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace csifb {

// Little-endian primitives, written byte-by-byte so files are bit-exact
// across platforms regardless of host endianness.

inline void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(out, bits);
}

inline void put_f64le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline std::uint16_t get_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float get_f32le(const unsigned char* p) {
  const std::uint32_t bits = get_u32le(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline double get_f64le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

/// Decimal text for a double that parses back to the identical bits.
inline std::string f64_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Plain "key value" text header, one pair per line, closed by a line
/// containing only "end_header". Keys are single tokens; values run to
/// end of line.
class KeyValueHeader {
 public:
  void set(const std::string& key, const std::string& value) {
    order_.push_back(key);
    map_[key] = value;
  }
  void set_i64(const std::string& key, std::int64_t v) { set(key, std::to_string(v)); }
  void set_f64(const std::string& key, double v) { set(key, f64_text(v)); }

  const std::string& get(const std::string& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) throw std::runtime_error("header: missing key '" + key + "'");
    return it->second;
  }
  std::int64_t get_i64(const std::string& key) const { return std::stoll(get(key)); }
  double get_f64(const std::string& key) const { return std::stod(get(key)); }
  bool has(const std::string& key) const { return map_.count(key) != 0; }
  const std::vector<std::string>& keys_in_order() const { return order_; }

  void emit(std::ostream& os) const {
    for (const auto& key : order_) os << key << ' ' << map_.at(key) << '\n';
    os << "end_header\n";
  }

  static KeyValueHeader parse(std::istream& is) {
    KeyValueHeader h;
    std::string line;
    while (std::getline(is, line)) {
      if (line == "end_header") return h;
      const auto sp = line.find(' ');
      if (sp == std::string::npos)
        throw std::runtime_error("header: malformed line '" + line + "'");
      h.set(line.substr(0, sp), line.substr(sp + 1));
    }
    throw std::runtime_error("header: missing end_header terminator");
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::string> map_;
};

}  // namespace csifb
