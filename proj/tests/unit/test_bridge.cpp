#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "pesim/bridge.hpp"
#include "pesim/episode.hpp"
#include "pesim/psto_io.hpp"

using namespace pesim;
using namespace std::chrono_literals;

namespace {

PstoTensor random_psto(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3, 10);
  PstoTensor t{Grid(6, 120), Grid(6, 120)};
  for (auto& v : t.lidar.data()) v = static_cast<float>(u(rng));
  for (auto& v : t.intent.data()) v = static_cast<float>(u(rng));
  return t;
}

ObservationFrame sample_frame(std::int64_t tick, int agent = 0) {
  ObservationFrame f;
  f.agent_id = agent;
  f.tick = tick;
  f.psto = random_psto(static_cast<std::uint64_t>(tick) * 3 + agent);
  for (std::size_t i = 0; i < f.proprio.size(); ++i) f.proprio[i] = 0.25 * static_cast<double>(i);
  f.reward.r_purs = 0.5;
  f.reward.total = -0.75;
  return f;
}

// In-process echo peer on one end of a socketpair.
struct Peer {
  int client_fd = -1;
  std::thread thread;
  int answered = 0;

  explicit Peer(EchoOptions opts) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) throw std::runtime_error("socketpair");
    client_fd = sv[0];
    const int server_fd = sv[1];
    thread = std::thread([this, server_fd, opts] {
      try {
        LineChannel ch(server_fd, ::dup(server_fd));
        answered = serve_echo_policy(ch, opts);
      } catch (const std::exception&) {
      }
    });
  }
  std::unique_ptr<BridgeClient> client(BridgeConfig cfg) {
    return std::make_unique<BridgeClient>(client_fd, ::dup(client_fd), cfg);
  }
  ~Peer() {
    if (thread.joinable()) thread.join();
  }
};

}  // namespace

TEST(Base64, KnownVectors) {
  EXPECT_EQ(base64_encode(""), "");
  EXPECT_EQ(base64_encode("f"), "Zg==");
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(base64_decode("Zm9vYg=="), "foob");
  EXPECT_THROW(base64_decode("abc"), std::invalid_argument);
  EXPECT_THROW(base64_decode("@@@@"), std::invalid_argument);
}

TEST(Base64, RandomRoundTrip) {
  std::mt19937_64 rng(1);
  for (int n = 0; n < 300; ++n) {
    std::string s(static_cast<std::size_t>(n), '\0');
    for (auto& c : s) c = static_cast<char>(rng());
    ASSERT_EQ(base64_decode(base64_encode(s)), s);
  }
}

TEST(Codec, ObsRoundTripAllModes) {
  const ObservationFrame f = sample_frame(7, 1);
  for (auto mode : {PayloadMode::Json, PayloadMode::Base64, PayloadMode::Frame}) {
    const WireMessage m = encode_obs(f, mode);
    EXPECT_EQ(m.frame.has_value(), mode == PayloadMode::Frame);
    const ObservationFrame back = decode_obs(m);
    EXPECT_EQ(back.agent_id, 1);
    EXPECT_EQ(back.tick, 7);
    EXPECT_EQ(back.proprio, f.proprio);
    EXPECT_EQ(back.reward, f.reward);
    ASSERT_TRUE(back.psto);
    EXPECT_EQ(psto_to_f32_bytes(*back.psto), psto_to_f32_bytes(*f.psto)) << to_string(mode);
  }
}

TEST(Codec, ObsHeaderFields) {
  const WireMessage m = encode_obs(sample_frame(3), PayloadMode::Base64);
  EXPECT_EQ(m.body["type"], "obs");
  EXPECT_EQ(m.body["psto"]["shape"], nlohmann::json::array({2, 6, 120}));
  EXPECT_EQ(m.body["proprio"].size(), 12u);
  EXPECT_EQ(m.body["outcome"], "Running");
  const nlohmann::json hello = make_hello(3, GridConfig{});
  EXPECT_EQ(hello["type"], "hello");
  EXPECT_EQ(hello["version"], 1);
  EXPECT_EQ(hello["n_agents"], 3);
  EXPECT_EQ(hello["grid"]["V_d"], 6);
  EXPECT_EQ(hello["grid"]["H_d"], 120);
}

TEST(Codec, MalformedActIsBridgeFault) {
  EXPECT_NO_THROW(decode_act(make_act(0, 1, {0.1, 0.2})));
  EXPECT_THROW(decode_act({{"type", "obs"}}), BridgeFault);
  EXPECT_THROW(decode_act({{"type", "act"}, {"agent_id", 0}, {"tick", 1}}), BridgeFault);
  EXPECT_THROW(decode_act({{"type", "act"}, {"agent_id", 0}, {"tick", 1}, {"cmd", {1}}}), BridgeFault);
  EXPECT_THROW(decode_act({{"type", "act"}, {"agent_id", 0}, {"tick", 1}, {"cmd", {"a", 1}}}), BridgeFault);
  EXPECT_THROW(decode_act({{"type", "act"}, {"agent_id", "x"}, {"tick", 1}, {"cmd", {1, 1}}}), BridgeFault);
}

TEST(Channel, GarbageLineIsBridgeFault) {
  int sv[2];
  ASSERT_EQ(::socketpair(AF_UNIX, SOCK_STREAM, 0, sv), 0);
  LineChannel a(sv[0], ::dup(sv[0]));
  LineChannel b(sv[1], ::dup(sv[1]));
  b.write_line("this is not json");
  EXPECT_THROW(receive_message(a, 100ms), BridgeFault);
  EXPECT_THROW(a.read_line(20ms), BridgeFault);
}

TEST(Client, HandshakeAndRoundTrip) {
  EchoOptions opts;
  opts.cmd = {0.3, -0.2};
  Peer peer(opts);
  {
    auto client = peer.client({});
    const auto hello = client->handshake(2, GridConfig{});
    EXPECT_EQ(hello["type"], "hello");
    EXPECT_EQ(hello["version"], 1);
    for (std::int64_t t = 0; t < 5; ++t) {
      const auto cmd = client->query(sample_frame(t), 0.8);
      EXPECT_EQ(cmd, (VelocityCommand{0.3, -0.2}));
    }
  }
  peer.thread.join();
  EXPECT_EQ(peer.answered, 5);
}

TEST(Client, CommandIsClamped) {
  EchoOptions opts;
  opts.cmd = {3.0, 4.0};
  Peer peer(opts);
  auto client = peer.client({});
  client->handshake(1, GridConfig{});
  const auto c = client->query(sample_frame(0), 0.5);
  EXPECT_NEAR(c.vx, 0.3, 1e-15);
  EXPECT_NEAR(c.vy, 0.4, 1e-15);
}

TEST(Client, FramePayloadEchoIsByteIdentical) {
  EchoOptions opts;
  opts.echo_psto = true;
  opts.echo_mode = PayloadMode::Frame;
  Peer peer(opts);
  BridgeConfig cfg;
  cfg.payload = PayloadMode::Frame;
  auto client = peer.client(cfg);
  client->handshake(1, GridConfig{});
  const ObservationFrame f = sample_frame(4);
  const WireMessage reply = client->exchange(f);
  const auto raw = extract_psto_bytes(reply);
  ASSERT_TRUE(raw);
  EXPECT_EQ(raw->bytes, psto_to_f32_bytes(*f.psto));
}

TEST(Client, LateReplyIsBridgeFault) {
  EchoOptions opts;
  opts.delay = 150ms;
  Peer peer(opts);
  BridgeConfig cfg;
  cfg.deadline = 50ms;
  auto client = peer.client(cfg);
  client->handshake(1, GridConfig{});
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(client->query(sample_frame(0), 0.8), BridgeFault);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 140ms);
}

TEST(Client, SilentPeerFailsHandshake) {
  int sv[2];
  ASSERT_EQ(::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv), 0);
  BridgeConfig cfg;
  cfg.handshake_deadline = 50ms;
  BridgeClient client(sv[0], ::dup(sv[0]), cfg);
  EXPECT_THROW(client.handshake(1, GridConfig{}), BridgeFault);
  ::close(sv[1]);
}

TEST(Client, StdioChildProcess) {
  BridgeConfig cfg;
  cfg.endpoint = std::string("stdio:") + PESIM_ECHO_POLICY + " --cmd 0.1 0.2";
  cfg.deadline = 2000ms;
  BridgeClient client(cfg);
  client.handshake(2, GridConfig{});
  EXPECT_EQ(client.query(sample_frame(0), 0.8), (VelocityCommand{0.1, 0.2}));
  EXPECT_EQ(client.query(sample_frame(0, 1), 0.8), (VelocityCommand{0.1, 0.2}));
}

TEST(Client, UnixSocketEndpoint) {
  const std::string path = (std::filesystem::temp_directory_path() / ("pesim_test_" + std::to_string(::getpid()) + ".sock")).string();
  ::unlink(path.c_str());
  const int lfd = ::socket(AF_UNIX, SOCK_STREAM, 0);
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  std::strncpy(addr.sun_path, path.c_str(), sizeof addr.sun_path - 1);
  ASSERT_EQ(::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  ASSERT_EQ(::listen(lfd, 1), 0);
  std::thread server([lfd] {
    const int fd = ::accept(lfd, nullptr, nullptr);
    try {
      LineChannel ch(fd, ::dup(fd));
      serve_echo_policy(ch, {{0.5, 0.0}});
    } catch (const std::exception&) {
    }
  });
  {
    BridgeConfig cfg;
    cfg.endpoint = "unix:" + path;
    cfg.payload = PayloadMode::Base64;
    BridgeClient client(cfg);
    client.handshake(1, GridConfig{});
    EXPECT_EQ(client.query(sample_frame(2), 0.8), (VelocityCommand{0.5, 0.0}));
  }
  server.join();
  ::close(lfd);
  ::unlink(path.c_str());
}

TEST(Client, BadEndpointRejected) {
  BridgeConfig cfg;
  cfg.endpoint = "carrier-pigeon:coop";
  EXPECT_THROW(BridgeClient{cfg}, std::invalid_argument);
  cfg.endpoint = "unix:/nonexistent/socket";
  EXPECT_THROW(BridgeClient{cfg}, BridgeFault);
}

TEST(ExternalEpisode, ZeroCommandsTimeOut) {
  Peer peer({});
  ExternalTeamPolicy policy(peer.client({}), 0.8);
  EpisodeConfig cfg;
  cfg.seed = 4;
  const auto r = run_episode(cfg, {}, {}, policy);
  EXPECT_EQ(r.fault, FaultKind::None) << r.fault_message;
  EXPECT_EQ(r.outcome.kind, OutcomeKind::Timeout);
  EXPECT_EQ(r.cycles, 300);
}

TEST(ExternalEpisode, LatePeerIsBridgeFaultNotOutcome) {
  EchoOptions opts;
  opts.delay = 120ms;
  Peer peer(opts);
  BridgeConfig cfg;
  cfg.deadline = 50ms;
  ExternalTeamPolicy policy(peer.client(cfg), 0.8);
  const auto r = run_episode(EpisodeConfig{}, {}, {}, policy);
  EXPECT_EQ(r.fault, FaultKind::Bridge);
  EXPECT_EQ(r.outcome.kind, OutcomeKind::Running);
}
