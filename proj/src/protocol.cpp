#include "csifb/protocol.hpp"

#include <array>
#include <chrono>
#include <fstream>

#include "csifb/serial.hpp"

namespace csifb {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

constexpr char kMagic[4] = {'C', 'S', 'I', 'F'};

}  // namespace

std::uint32_t crc32(const unsigned char* data, std::size_t len) {
  static const auto table = make_crc_table();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

std::uint32_t crc32(const std::string& bytes) {
  return crc32(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
}

std::string serialize(const FeedbackFrame& frame) {
  std::string out;
  out.reserve(kFrameOverheadBytes + 4 * frame.payload.size());
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kWireVersion));
  put_u32le(out, frame.group_id);
  put_u16le(out, frame.t);
  out.push_back(static_cast<char>(frame.cr_id));
  put_u32le(out, static_cast<std::uint32_t>(4 * frame.payload.size()));
  for (float v : frame.payload) put_f32le(out, v);
  put_u32le(out, crc32(out));
  return out;
}

FeedbackFrame deserialize(const std::string& bytes) {
  constexpr std::size_t kHeader = 16;
  if (bytes.size() < kHeader + 4)
    throw WireError(WireErrorKind::kBadLength,
                    "wire: frame shorter than header+checksum (" +
                        std::to_string(bytes.size()) + " bytes)");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::memcmp(p, kMagic, 4) != 0)
    throw WireError(WireErrorKind::kBadMagic, "wire: bad magic");
  if (p[4] != kWireVersion)
    throw WireError(WireErrorKind::kBadVersion,
                    "wire: unsupported version " + std::to_string(p[4]));
  const std::uint32_t payload_len = get_u32le(p + 12);
  if (payload_len % 4 != 0)
    throw WireError(WireErrorKind::kBadLength, "wire: payload length not a float32 multiple");
  if (bytes.size() != kHeader + payload_len + 4)
    throw WireError(WireErrorKind::kBadLength,
                    "wire: declared size " + std::to_string(kHeader + payload_len + 4) +
                        " != actual " + std::to_string(bytes.size()));
  const std::uint32_t declared_crc = get_u32le(p + kHeader + payload_len);
  if (crc32(p, kHeader + payload_len) != declared_crc)
    throw WireError(WireErrorKind::kBadChecksum, "wire: checksum mismatch");

  FeedbackFrame frame;
  frame.group_id = get_u32le(p + 5);
  frame.t = get_u16le(p + 9);
  const std::uint8_t cr = p[11];
  if (cr > 1) throw WireError(WireErrorKind::kBadLength, "wire: unknown cr_id");
  frame.cr_id = static_cast<CrId>(cr);
  frame.payload.resize(payload_len / 4);
  for (std::size_t i = 0; i < frame.payload.size(); ++i)
    frame.payload[i] = get_f32le(p + kHeader + 4 * i);
  return frame;
}

void write_capture(const std::vector<std::string>& frames, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_capture: cannot open " + path);
  std::string buf;
  for (const auto& f : frames) {
    buf.clear();
    put_u32le(buf, static_cast<std::uint32_t>(f.size()));
    os.write(buf.data(), 4);
    os.write(f.data(), static_cast<std::streamsize>(f.size()));
  }
  if (!os) throw std::runtime_error("write_capture: write failed");
}

std::vector<std::string> read_capture(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_capture: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::vector<std::string> frames;
  std::size_t off = 0;
  while (off < data.size()) {
    if (off + 4 > data.size()) throw std::runtime_error("read_capture: truncated length");
    const std::uint32_t len = get_u32le(reinterpret_cast<const unsigned char*>(data.data()) + off);
    off += 4;
    if (off + len > data.size()) throw std::runtime_error("read_capture: truncated frame");
    frames.push_back(data.substr(off, len));
    off += len;
  }
  return frames;
}

UeSession::UeSession(CsiNetLstmParams& params, int group_len)
    : params_(params), group_len_(group_len) {
  if (group_len < 1) throw std::invalid_argument("UeSession: group length must be >= 1");
}

FeedbackFrame UeSession::step(const AngularDelayFrame& frame) {
  if (frame.re.rows() != params_.dims.n_delay || frame.re.cols() != params_.dims.n_tx)
    throw std::invalid_argument("ue_step: frame is " + std::to_string(frame.re.rows()) + "x" +
                                std::to_string(frame.re.cols()) + ", encoder expects " +
                                std::to_string(params_.dims.n_delay) + "x" +
                                std::to_string(params_.dims.n_tx));
  FeedbackFrame out;
  out.group_id = group_id_;
  out.t = static_cast<std::uint16_t>(t_);
  out.cr_id = t_ == 1 ? CrId::kHigh : CrId::kLow;
  const std::vector<double> code =
      t_ == 1 ? csinet_encode(frame, params_.high) : csinet_encode(frame, params_.low);
  out.payload.assign(code.begin(), code.end());  // wire quantization to float32

  if (++t_ > group_len_) {
    t_ = 1;
    ++group_id_;
  }
  return out;
}

BsSession::BsSession(CsiNetLstmParams& params, int group_len, const NormStats& stats)
    : params_(params), group_len_(group_len), stats_(stats) {
  if (group_len < 1) throw std::invalid_argument("BsSession: group length must be >= 1");
  reset();
}

void BsSession::reset() {
  awaiting_start_ = true;
  progress_ = 0;
  s1_.clear();
  state_ = LstmState::zero(static_cast<int>(params_.lstm.layers.size()), params_.dims.n2());
}

AngularDelayFrame BsSession::step(const FeedbackFrame& frame) {
  const int expected_t = progress_ + 1;
  if (awaiting_start_) {
    if (frame.t != 1) {
      reset();
      throw SequenceError("bs_step: expected a group start (t=1), got t=" +
                          std::to_string(frame.t));
    }
  } else if (frame.t != expected_t || frame.group_id != group_id_) {
    reset();
    throw SequenceError("bs_step: expected t=" + std::to_string(expected_t) + " of group " +
                        std::to_string(group_id_) + ", got t=" + std::to_string(frame.t) +
                        " of group " + std::to_string(frame.group_id));
  }
  const CrId expected_cr = frame.t == 1 ? CrId::kHigh : CrId::kLow;
  if (frame.cr_id != expected_cr) {
    reset();
    throw SequenceError("bs_step: wrong CR id at t=" + std::to_string(frame.t));
  }
  const int expected_m = frame.t == 1 ? params_.dims.m_high : params_.dims.m_low;
  if (static_cast<int>(frame.payload.size()) != expected_m) {
    reset();
    throw SequenceError("bs_step: payload holds " + std::to_string(frame.payload.size()) +
                        " values, expected " + std::to_string(expected_m));
  }

  std::vector<double> code(frame.payload.begin(), frame.payload.end());
  Tensor decoded;
  if (frame.t == 1) {
    group_id_ = frame.group_id;
    awaiting_start_ = false;
    s1_ = code;
    decoded = csinet_decode(s1_, params_.high);
  } else {
    std::vector<double> concat = s1_;
    concat.insert(concat.end(), code.begin(), code.end());
    decoded = csinet_decode(concat, params_.low);
  }

  const LstmStackRun run = lstm_stack_forward({decoded.v}, params_.lstm, state_);
  state_ = run.final_state;
  Tensor out = run.outputs[0];
  out.shape = {2, params_.dims.n_delay, params_.dims.n_tx};

  if (++progress_ >= group_len_) reset();  // group complete: LSTMs cleared for the next one
  return tensor_to_frame(out, stats_);
}

std::int64_t payload_bytes_per_group(int m_high, int m_low, int group_len) {
  return 4LL * (m_high + static_cast<std::int64_t>(group_len - 1) * m_low);
}

std::int64_t total_bytes_per_group(int m_high, int m_low, int group_len) {
  return payload_bytes_per_group(m_high, m_low, group_len) +
         static_cast<std::int64_t>(group_len) * kFrameOverheadBytes;
}

SessionRun simulate_session(const std::vector<ChannelGroup>& groups, CsiNetLstmParams& params,
                            const NormStats& stats, double feedback_interval_s, int n_groups,
                            bool keep_wire) {
  SessionRun run;
  const int limit = n_groups < 0 ? static_cast<int>(groups.size())
                                 : std::min<int>(n_groups, static_cast<int>(groups.size()));
  if (limit == 0) return run;
  const int group_len = static_cast<int>(groups[0].frames.size());
  UeSession ue(params, group_len);
  BsSession bs(params, group_len, stats);

  run.stats.payload_bytes_per_group =
      payload_bytes_per_group(params.dims.m_high, params.dims.m_low, group_len);
  run.stats.total_bytes_per_group =
      total_bytes_per_group(params.dims.m_high, params.dims.m_low, group_len);

  for (int gi = 0; gi < limit; ++gi) {
    std::vector<AngularDelayFrame> recon;
    for (const auto& fr : groups[gi].frames) {
      const FeedbackFrame tx = ue.step(fr);
      const std::string wire = serialize(tx);
      if (keep_wire) run.wire_frames.push_back(wire);

      const auto t0 = std::chrono::steady_clock::now();
      const FeedbackFrame rx = deserialize(wire);
      recon.push_back(bs.step(rx));
      const double dt =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      run.stats.max_bs_step_seconds = std::max(run.stats.max_bs_step_seconds, dt);
      ++run.stats.frames;
    }
    run.reconstructions.push_back(std::move(recon));
    ++run.stats.groups;
  }
  run.stats.real_time = run.stats.max_bs_step_seconds < feedback_interval_s;
  return run;
}

std::vector<std::vector<AngularDelayFrame>> replay_capture(
    const std::vector<std::string>& wire_frames, CsiNetLstmParams& params,
    const NormStats& stats, int group_len) {
  BsSession bs(params, group_len, stats);
  std::vector<std::vector<AngularDelayFrame>> out;
  std::vector<AngularDelayFrame> current;
  for (const auto& wire : wire_frames) {
    current.push_back(bs.step(deserialize(wire)));
    if (static_cast<int>(current.size()) == group_len) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

}  // namespace csifb
