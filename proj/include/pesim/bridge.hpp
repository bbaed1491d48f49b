#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "pesim/policies.hpp"

namespace pesim {

inline constexpr int kBridgeProtocolVersion = 1;

/// How the PSTO tensor travels inside an "obs" message.
///   json   - psto.data is an array of float32 values
///   base64 - psto.data is base64 of the little-endian float32 bytes
///   frame  - psto.bytes announces a length-prefixed binary frame that follows the line
enum class PayloadMode { Json, Base64, Frame };

std::string to_string(PayloadMode m);
PayloadMode payload_mode_from_string(const std::string& s);

std::string base64_encode(std::string_view bytes);
/// Throws std::invalid_argument on malformed input.
std::string base64_decode(std::string_view text);

/// Line-delimited JSON plus optional binary frames over a pair of file descriptors.
/// Reads honour a deadline; a missed deadline, EOF or I/O error throws BridgeFault.
class LineChannel {
 public:
  LineChannel(int read_fd, int write_fd, bool owns_fds = true);
  ~LineChannel();
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  void write_line(std::string_view line);
  /// 4-byte little-endian length followed by the payload.
  void write_frame(std::string_view payload);

  std::string read_line(std::chrono::milliseconds timeout);
  std::string read_frame(std::chrono::milliseconds timeout);

  /// Returns nullopt on a clean EOF instead of throwing.
  std::optional<std::string> try_read_line(std::chrono::milliseconds timeout);

 private:
  bool fill(std::chrono::steady_clock::time_point deadline);
  void write_all(const char* data, std::size_t n);

  int read_fd_;
  int write_fd_;
  bool owns_;
  std::string buffer_;
};

/// A message plus the binary frame that followed it, if any.
struct WireMessage {
  nlohmann::json body;
  std::optional<std::string> frame;
};

nlohmann::json make_hello(int n_agents, const GridConfig& grid);

/// Serialises {type:"obs", agent_id, tick, psto, proprio, reward, outcome}.
WireMessage encode_obs(const ObservationFrame& frame, PayloadMode mode);

/// Inverse of encode_obs. The PSTO comes back as float32 values widened to double.
ObservationFrame decode_obs(const WireMessage& msg);

/// Reads the PSTO block of an obs or act message as raw float32 bytes plus its shape.
struct RawPsto {
  int rows = 0;
  int cols = 0;
  std::string bytes;
};
std::optional<RawPsto> extract_psto_bytes(const WireMessage& msg);

/// Attaches a PSTO block in the given mode to a message body.
void attach_psto_bytes(WireMessage& msg, const RawPsto& raw, PayloadMode mode);

nlohmann::json make_act(int agent_id, std::int64_t tick, const VelocityCommand& cmd);

struct ActReply {
  int agent_id = 0;
  std::int64_t tick = 0;
  VelocityCommand cmd;
};

/// Throws BridgeFault unless the body is a well-formed act message.
ActReply decode_act(const nlohmann::json& body);

void send_message(LineChannel& ch, const WireMessage& msg);
WireMessage receive_message(LineChannel& ch, std::chrono::milliseconds timeout);

struct BridgeConfig {
  std::string endpoint;  ///< "stdio:<command>", "unix:<path>" or "tcp:<host>:<port>"
  PayloadMode payload = PayloadMode::Frame;
  std::chrono::milliseconds deadline{50};
  std::chrono::milliseconds handshake_deadline{2000};
};

/// Simulator side of the bridge. Owns one connection (and child process for stdio endpoints).
class BridgeClient {
 public:
  explicit BridgeClient(const BridgeConfig& cfg);
  /// Wraps existing descriptors; used for in-process peers.
  BridgeClient(int read_fd, int write_fd, const BridgeConfig& cfg);
  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  /// Sends hello and waits for the peer's hello with a matching version.
  nlohmann::json handshake(int n_agents, const GridConfig& grid);

  /// One obs/act round trip. Stale replies (older ticks) are skipped. The command is clamped.
  VelocityCommand query(const ObservationFrame& frame, double v_max);

  /// Like query but returns the whole reply, including any echoed PSTO.
  WireMessage exchange(const ObservationFrame& frame);

  void notify_end(std::int64_t tick, const Outcome& outcome, const RewardBreakdown& reward);

  const BridgeConfig& config() const { return cfg_; }

 private:
  BridgeConfig cfg_;
  std::unique_ptr<LineChannel> channel_;
  int child_pid_ = -1;
};

/// Team policy served by an external process over the bridge.
class ExternalTeamPolicy : public PursuerTeamPolicy {
 public:
  ExternalTeamPolicy(std::unique_ptr<BridgeClient> client, double v_max);
  bool needs_psto() const override { return true; }
  void begin_episode(const EpisodeInfo& info) override;
  std::vector<VelocityCommand> act(const TeamObservation& obs) override;
  void end_episode(const TeamObservation& obs) override;

 private:
  std::unique_ptr<BridgeClient> client_;
  double v_max_;
};

/// Reference policy peer: answers hello with hello and every obs with a constant act.
struct EchoOptions {
  VelocityCommand cmd{0.0, 0.0};
  std::chrono::milliseconds delay{0};  ///< sleep before each act reply
  bool echo_psto = false;              ///< return the received PSTO inside the act reply
  PayloadMode echo_mode = PayloadMode::Frame;
};

/// Serves until EOF; returns the number of obs messages answered.
int serve_echo_policy(LineChannel& ch, const EchoOptions& opts);

}  // namespace pesim
