// Reference policy peer for the bridge: answers every observation with a constant command.

#include <iostream>
#include <unistd.h>

#include <CLI11.hpp>

#include "pesim/bridge.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Constant-command bridge peer speaking JSON lines on stdin/stdout"};
  std::vector<double> cmd{0.0, 0.0};
  int delay_ms = 0;
  bool echo = false;
  std::string mode = "frame";
  app.add_option("--cmd", cmd, "body-frame command vx vy")->expected(2);
  app.add_option("--delay-ms", delay_ms, "sleep before each reply")->check(CLI::NonNegativeNumber);
  app.add_flag("--echo-psto", echo, "send the received PSTO back inside each act");
  app.add_option("--echo-mode", mode, "payload mode for echoed PSTO")->check(CLI::IsMember({"json", "base64", "frame"}));
  CLI11_PARSE(app, argc, argv);

  pesim::EchoOptions opts;
  opts.cmd = {cmd[0], cmd[1]};
  opts.delay = std::chrono::milliseconds(delay_ms);
  opts.echo_psto = echo;
  opts.echo_mode = pesim::payload_mode_from_string(mode);
  try {
    pesim::LineChannel ch(STDIN_FILENO, STDOUT_FILENO, false);
    const int n = pesim::serve_echo_policy(ch, opts);
    std::cerr << "answered " << n << " observations\n";
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
