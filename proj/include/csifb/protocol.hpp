#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csifb/dataset.hpp"
#include "csifb/models.hpp"

namespace csifb {

/// IEEE 802.3 CRC-32 (reflected, init/xorout 0xFFFFFFFF).
std::uint32_t crc32(const unsigned char* data, std::size_t len);
std::uint32_t crc32(const std::string& bytes);

enum class WireErrorKind { kBadMagic, kBadVersion, kBadLength, kBadChecksum };

class WireError : public std::runtime_error {
 public:
  WireError(WireErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  WireErrorKind kind() const { return kind_; }

 private:
  WireErrorKind kind_;
};

/// Out-of-order or inconsistent frame inside a group; the BS session has
/// aborted the group and reset itself when this is thrown.
class SequenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CrId : std::uint8_t { kHigh = 0, kLow = 1 };

/// Feedback frame layout (little-endian throughout):
///   magic "CSIF" | version u8 | group_id u32 | t u16 | cr_id u8 |
///   payload_len u32 | payload (float32 x M) | crc32 of all preceding bytes
struct FeedbackFrame {
  std::uint32_t group_id = 0;
  std::uint16_t t = 0;  // 1-based index within the group
  CrId cr_id = CrId::kHigh;
  std::vector<float> payload;

  bool operator==(const FeedbackFrame&) const = default;
};

constexpr int kWireVersion = 1;
constexpr std::size_t kFrameOverheadBytes = 20;  // header (16) + checksum (4)

std::string serialize(const FeedbackFrame& frame);
FeedbackFrame deserialize(const std::string& bytes);

/// Length-prefixed frame stream for capture and replay.
void write_capture(const std::vector<std::string>& frames, const std::string& path);
std::vector<std::string> read_capture(const std::string& path);

/// UE-side state machine: counter t cycles 1..T, emitting a high-CR
/// codeword at t = 1 and low-CR codewords afterwards, then wraps into the
/// next group.
class UeSession {
 public:
  UeSession(CsiNetLstmParams& params, int group_len);

  FeedbackFrame step(const AngularDelayFrame& frame);

  int counter() const { return t_; }
  std::uint32_t group_id() const { return group_id_; }

 private:
  CsiNetLstmParams& params_;
  int group_len_;
  int t_ = 1;
  std::uint32_t group_id_ = 0;
};

/// BS-side state machine: stores s1, decodes through the matching CsiNet
/// decoder, advances the LSTM with carried state, and resets state between
/// groups. Frames must arrive in order; violations abort the group.
class BsSession {
 public:
  BsSession(CsiNetLstmParams& params, int group_len, const NormStats& stats);

  AngularDelayFrame step(const FeedbackFrame& frame);

  /// True between groups (the LSTM state is zero and no s1 is buffered).
  bool at_group_boundary() const { return awaiting_start_; }
  const LstmState& lstm_state() const { return state_; }

 private:
  void reset();

  CsiNetLstmParams& params_;
  int group_len_;
  const NormStats stats_;
  bool awaiting_start_ = true;
  std::uint32_t group_id_ = 0;
  int progress_ = 0;  // frames consumed in the current group
  std::vector<double> s1_;
  LstmState state_;
};

struct SessionStats {
  std::int64_t groups = 0;
  std::int64_t frames = 0;
  std::int64_t payload_bytes_per_group = 0;
  std::int64_t total_bytes_per_group = 0;
  double max_bs_step_seconds = 0.0;
  bool real_time = true;  // every BS step finished within the feedback interval
};

struct SessionRun {
  SessionStats stats;
  std::vector<std::vector<AngularDelayFrame>> reconstructions;  // per group
  std::vector<std::string> wire_frames;  // serialized, in transmission order
};

/// Closed-form per-group byte accounting for the wire format.
std::int64_t payload_bytes_per_group(int m_high, int m_low, int group_len);
std::int64_t total_bytes_per_group(int m_high, int m_low, int group_len);

/// Runs the UE and BS state machines over dataset groups, checking that
/// every BS step completes within the feedback interval.
SessionRun simulate_session(const std::vector<ChannelGroup>& groups, CsiNetLstmParams& params,
                            const NormStats& stats, double feedback_interval_s,
                            int n_groups = -1, bool keep_wire = false);

/// Replays a capture through a fresh BS session.
std::vector<std::vector<AngularDelayFrame>> replay_capture(
    const std::vector<std::string>& wire_frames, CsiNetLstmParams& params,
    const NormStats& stats, int group_len);

}  // namespace csifb
