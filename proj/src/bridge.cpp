#include "pesim/bridge.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <mutex>
#include <thread>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <openssl/evp.h>

#include "pesim/psto_io.hpp"
#include "pesim/trajectory.hpp"

namespace pesim {

using nlohmann::json;

std::string to_string(PayloadMode m) {
  switch (m) {
    case PayloadMode::Json: return "json";
    case PayloadMode::Base64: return "base64";
    case PayloadMode::Frame: return "frame";
  }
  return "frame";
}

PayloadMode payload_mode_from_string(const std::string& s) {
  if (s == "json") return PayloadMode::Json;
  if (s == "base64") return PayloadMode::Base64;
  if (s == "frame") return PayloadMode::Frame;
  throw std::invalid_argument("unknown payload mode '" + s + "'");
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length is not a multiple of 4");
  if (text.empty()) return {};
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw std::invalid_argument("malformed base64");
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

// ---------------------------------------------------------------------------
// LineChannel

namespace {

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { std::signal(SIGPIPE, SIG_IGN); });
}

constexpr std::size_t kMaxFrameBytes = 64u << 20;

}  // namespace

LineChannel::LineChannel(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns_fds) {
  ignore_sigpipe_once();
}

LineChannel::~LineChannel() {
  if (!owns_) return;
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
}

void LineChannel::write_all(const char* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::write(write_fd_, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw BridgeFault(std::string("bridge write failed: ") + std::strerror(errno));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

void LineChannel::write_line(std::string_view line) {
  std::string buf(line);
  buf.push_back('\n');
  write_all(buf.data(), buf.size());
}

void LineChannel::write_frame(std::string_view payload) {
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string buf(4, '\0');
  for (int i = 0; i < 4; ++i) buf[static_cast<std::size_t>(i)] = static_cast<char>((n >> (8 * i)) & 0xffu);
  buf.append(payload);
  write_all(buf.data(), buf.size());
}

bool LineChannel::fill(std::chrono::steady_clock::time_point deadline) {
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) throw BridgeFault("bridge deadline exceeded");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    pollfd pfd{read_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::max<long long>(left, 1)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw BridgeFault(std::string("bridge poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) continue;
    char tmp[65536];
    const ssize_t r = ::read(read_fd_, tmp, sizeof tmp);
    if (r < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw BridgeFault(std::string("bridge read failed: ") + std::strerror(errno));
    }
    if (r == 0) return false;
    buffer_.append(tmp, static_cast<std::size_t>(r));
    return true;
  }
}

std::optional<std::string> LineChannel::try_read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (!fill(deadline)) {
      if (buffer_.empty()) return std::nullopt;
      throw BridgeFault("bridge closed mid-line");
    }
  }
}

std::string LineChannel::read_line(std::chrono::milliseconds timeout) {
  auto line = try_read_line(timeout);
  if (!line) throw BridgeFault("bridge peer closed the connection");
  return *line;
}

std::string LineChannel::read_frame(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (buffer_.size() < 4) {
    if (!fill(deadline)) throw BridgeFault("bridge closed before frame header");
  }
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i])) << (8 * i);
  if (n > kMaxFrameBytes) throw BridgeFault("bridge frame too large");
  while (buffer_.size() < 4 + static_cast<std::size_t>(n)) {
    if (!fill(deadline)) throw BridgeFault("bridge closed mid-frame");
  }
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + static_cast<std::size_t>(n));
  return payload;
}

// ---------------------------------------------------------------------------
// Codec

json make_hello(int n_agents, const GridConfig& grid) {
  return {{"type", "hello"}, {"version", kBridgeProtocolVersion}, {"n_agents", n_agents},
          {"grid", {{"V_d", grid.rows}, {"H_d", grid.cols}}}};
}

namespace {

std::string floats_to_bytes(const json& data) {
  std::string out;
  out.reserve(data.size() * sizeof(float));
  for (const auto& v : data) {
    const float f = static_cast<float>(v.get<double>());
    char buf[sizeof(float)];
    std::memcpy(buf, &f, sizeof f);
    out.append(buf, sizeof f);
  }
  return out;
}

json bytes_to_floats(std::string_view bytes) {
  json arr = json::array();
  for (std::size_t i = 0; i + sizeof(float) <= bytes.size(); i += sizeof(float)) {
    float f;
    std::memcpy(&f, bytes.data() + i, sizeof f);
    arr.push_back(static_cast<double>(f));
  }
  return arr;
}

}  // namespace

void attach_psto_bytes(WireMessage& msg, const RawPsto& raw, PayloadMode mode) {
  json block = {{"shape", {2, raw.rows, raw.cols}}, {"encoding", to_string(mode)}};
  switch (mode) {
    case PayloadMode::Json: block["data"] = bytes_to_floats(raw.bytes); break;
    case PayloadMode::Base64: block["data"] = base64_encode(raw.bytes); break;
    case PayloadMode::Frame:
      block["bytes"] = raw.bytes.size();
      msg.frame = raw.bytes;
      break;
  }
  msg.body["psto"] = std::move(block);
}

std::optional<RawPsto> extract_psto_bytes(const WireMessage& msg) {
  if (!msg.body.contains("psto") || msg.body.at("psto").is_null()) return std::nullopt;
  const json& block = msg.body.at("psto");
  const json& shape = block.at("shape");
  if (!shape.is_array() || shape.size() != 3 || shape.at(0).get<int>() != 2) {
    throw std::invalid_argument("psto.shape must be [2, V_d, H_d]");
  }
  RawPsto raw;
  raw.rows = shape.at(1).get<int>();
  raw.cols = shape.at(2).get<int>();
  const std::string enc = block.value("encoding", "json");
  if (enc == "frame") {
    if (!msg.frame) throw std::invalid_argument("psto announced a frame but none followed");
    raw.bytes = *msg.frame;
  } else if (enc == "base64") {
    raw.bytes = base64_decode(block.at("data").get<std::string>());
  } else {
    raw.bytes = floats_to_bytes(block.at("data"));
  }
  const std::size_t expected = 2u * static_cast<std::size_t>(raw.rows) * static_cast<std::size_t>(raw.cols) * sizeof(float);
  if (raw.rows <= 0 || raw.cols <= 0 || raw.bytes.size() != expected) {
    throw std::invalid_argument("psto payload size does not match its shape");
  }
  return raw;
}

WireMessage encode_obs(const ObservationFrame& frame, PayloadMode mode) {
  WireMessage msg;
  msg.body = {{"type", "obs"},
              {"agent_id", frame.agent_id},
              {"tick", frame.tick},
              {"proprio", frame.proprio},
              {"reward", reward_to_json(frame.reward)},
              {"outcome", to_string(frame.outcome.kind)}};
  if (frame.psto) {
    attach_psto_bytes(msg, {frame.psto->lidar.rows(), frame.psto->lidar.cols(), psto_to_f32_bytes(*frame.psto)}, mode);
  } else {
    msg.body["psto"] = nullptr;
  }
  return msg;
}

ObservationFrame decode_obs(const WireMessage& msg) {
  const json& b = msg.body;
  if (b.value("type", "") != "obs") throw std::invalid_argument("not an obs message");
  ObservationFrame f;
  f.agent_id = b.at("agent_id").get<int>();
  f.tick = b.at("tick").get<std::int64_t>();
  const auto& pro = b.at("proprio");
  if (!pro.is_array() || pro.size() != f.proprio.size()) throw std::invalid_argument("proprio must have 12 values");
  for (std::size_t i = 0; i < f.proprio.size(); ++i) f.proprio[i] = pro.at(i).get<double>();
  f.reward = reward_from_json(b.at("reward"));
  f.outcome.kind = outcome_kind_from_string(b.at("outcome").get<std::string>());
  if (auto raw = extract_psto_bytes(msg)) f.psto = psto_from_f32_bytes(raw->bytes, raw->rows, raw->cols);
  return f;
}

json make_act(int agent_id, std::int64_t tick, const VelocityCommand& cmd) {
  return {{"type", "act"}, {"agent_id", agent_id}, {"tick", tick}, {"cmd", {cmd.vx, cmd.vy}}};
}

ActReply decode_act(const json& body) {
  try {
    if (body.value("type", "") != "act") throw BridgeFault("expected an act message");
    ActReply r;
    r.agent_id = body.at("agent_id").get<int>();
    r.tick = body.at("tick").get<std::int64_t>();
    const auto& cmd = body.at("cmd");
    if (!cmd.is_array() || cmd.size() != 2 || !cmd.at(0).is_number() || !cmd.at(1).is_number()) {
      throw BridgeFault("act.cmd must be two numbers");
    }
    r.cmd = {cmd.at(0).get<double>(), cmd.at(1).get<double>()};
    if (!std::isfinite(r.cmd.vx) || !std::isfinite(r.cmd.vy)) throw BridgeFault("act.cmd is not finite");
    return r;
  } catch (const BridgeFault&) {
    throw;
  } catch (const std::exception& ex) {
    throw BridgeFault(std::string("malformed act message: ") + ex.what());
  }
}

void send_message(LineChannel& ch, const WireMessage& msg) {
  ch.write_line(msg.body.dump());
  if (msg.frame) ch.write_frame(*msg.frame);
}

WireMessage receive_message(LineChannel& ch, std::chrono::milliseconds timeout) {
  const auto start = std::chrono::steady_clock::now();
  WireMessage msg;
  const std::string line = ch.read_line(timeout);
  try {
    msg.body = json::parse(line);
  } catch (const std::exception& ex) {
    throw BridgeFault(std::string("malformed bridge message: ") + ex.what());
  }
  if (!msg.body.is_object()) throw BridgeFault("bridge message is not a JSON object");
  if (msg.body.contains("psto") && msg.body["psto"].is_object() &&
      msg.body["psto"].value("encoding", "") == "frame") {
    const auto used = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    msg.frame = ch.read_frame(std::max(timeout - used, std::chrono::milliseconds(1)));
  }
  return msg;
}

// ---------------------------------------------------------------------------
// BridgeClient

namespace {

int connect_unix(const std::string& path) {
  const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw BridgeFault("socket() failed");
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof addr.sun_path) {
    ::close(fd);
    throw BridgeFault("unix socket path too long");
  }
  std::strncpy(addr.sun_path, path.c_str(), sizeof addr.sun_path - 1);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    throw BridgeFault("cannot connect to unix socket " + path);
  }
  return fd;
}

int connect_tcp(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0) throw BridgeFault("cannot resolve " + host);
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw BridgeFault("cannot connect to " + host + ":" + port);
  return fd;
}

}  // namespace

BridgeClient::BridgeClient(const BridgeConfig& cfg) : cfg_(cfg) {
  const auto colon = cfg.endpoint.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("bridge endpoint needs a scheme: " + cfg.endpoint);
  const std::string scheme = cfg.endpoint.substr(0, colon);
  const std::string rest = cfg.endpoint.substr(colon + 1);

  if (scheme == "stdio") {
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw BridgeFault("pipe() failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw BridgeFault("pipe() failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw BridgeFault("fork() failed");
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", rest.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    child_pid_ = pid;
    channel_ = std::make_unique<LineChannel>(from_child[0], to_child[1]);
  } else if (scheme == "unix") {
    const int fd = connect_unix(rest);
    channel_ = std::make_unique<LineChannel>(fd, ::dup(fd));
  } else if (scheme == "tcp") {
    const auto c2 = rest.rfind(':');
    if (c2 == std::string::npos) throw std::invalid_argument("tcp endpoint must be tcp:<host>:<port>");
    const int fd = connect_tcp(rest.substr(0, c2), rest.substr(c2 + 1));
    channel_ = std::make_unique<LineChannel>(fd, ::dup(fd));
  } else {
    throw std::invalid_argument("unknown bridge scheme '" + scheme + "'");
  }
}

BridgeClient::BridgeClient(int read_fd, int write_fd, const BridgeConfig& cfg)
    : cfg_(cfg), channel_(std::make_unique<LineChannel>(read_fd, write_fd)) {}

BridgeClient::~BridgeClient() {
  channel_.reset();
  if (child_pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(child_pid_, &status, WNOHANG) == child_pid_) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(child_pid_, SIGKILL);
    ::waitpid(child_pid_, &status, 0);
  }
}

json BridgeClient::handshake(int n_agents, const GridConfig& grid) {
  send_message(*channel_, {make_hello(n_agents, grid), std::nullopt});
  const auto deadline = std::chrono::steady_clock::now() + cfg_.handshake_deadline;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw BridgeFault("bridge handshake deadline exceeded");
    WireMessage reply = receive_message(*channel_, left);
    // Leftovers from an aborted episode are skipped.
    if (reply.body.value("type", "") != "hello") continue;
    if (reply.body.value("version", -1) != kBridgeProtocolVersion) {
      throw BridgeFault("bridge peer speaks an unsupported protocol version");
    }
    return reply.body;
  }
}

WireMessage BridgeClient::exchange(const ObservationFrame& frame) {
  send_message(*channel_, encode_obs(frame, cfg_.payload));
  const auto deadline = std::chrono::steady_clock::now() + cfg_.deadline;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw BridgeFault("bridge deadline exceeded");
    WireMessage reply = receive_message(*channel_, left);
    const ActReply act = decode_act(reply.body);
    if (act.tick < frame.tick || (act.tick == frame.tick && act.agent_id != frame.agent_id)) continue;
    if (act.tick != frame.tick) throw BridgeFault("bridge reply for a future tick");
    return reply;
  }
}

VelocityCommand BridgeClient::query(const ObservationFrame& frame, double v_max) {
  return clamp_command(decode_act(exchange(frame).body).cmd, v_max);
}

void BridgeClient::notify_end(std::int64_t tick, const Outcome& outcome, const RewardBreakdown& reward) {
  json end = {{"type", "end"}, {"tick", tick}, {"outcome", to_string(outcome.kind)}, {"reward", reward_to_json(reward)}};
  send_message(*channel_, {end, std::nullopt});
}

ExternalTeamPolicy::ExternalTeamPolicy(std::unique_ptr<BridgeClient> client, double v_max)
    : client_(std::move(client)), v_max_(v_max) {}

void ExternalTeamPolicy::begin_episode(const EpisodeInfo& info) { client_->handshake(info.n_agents, info.grid); }

std::vector<VelocityCommand> ExternalTeamPolicy::act(const TeamObservation& obs) {
  std::vector<VelocityCommand> out;
  out.reserve(obs.frames.size());
  for (const auto& f : obs.frames) out.push_back(client_->query(f, v_max_));
  return out;
}

void ExternalTeamPolicy::end_episode(const TeamObservation& obs) {
  if (obs.frames.empty()) return;
  const auto& f = obs.frames.front();
  client_->notify_end(f.tick, f.outcome, f.reward);
}

// ---------------------------------------------------------------------------
// Reference peer

int serve_echo_policy(LineChannel& ch, const EchoOptions& opts) {
  int answered = 0;
  for (;;) {
    auto line = ch.try_read_line(std::chrono::hours(24));
    if (!line) return answered;
    WireMessage msg;
    msg.body = json::parse(*line);
    if (msg.body.contains("psto") && msg.body["psto"].is_object() &&
        msg.body["psto"].value("encoding", "") == "frame") {
      msg.frame = ch.read_frame(std::chrono::seconds(10));
    }
    const std::string type = msg.body.value("type", "");
    if (type == "hello") {
      send_message(ch, {{{"type", "hello"}, {"version", kBridgeProtocolVersion}, {"role", "policy"}}, std::nullopt});
    } else if (type == "obs") {
      if (opts.delay.count() > 0) std::this_thread::sleep_for(opts.delay);
      WireMessage reply{make_act(msg.body.at("agent_id").get<int>(), msg.body.at("tick").get<std::int64_t>(), opts.cmd),
                        std::nullopt};
      if (opts.echo_psto) {
        if (auto raw = extract_psto_bytes(msg)) attach_psto_bytes(reply, *raw, opts.echo_mode);
      }
      send_message(ch, reply);
      ++answered;
    }
  }
}

}  // namespace pesim
