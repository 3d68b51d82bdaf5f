#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "habs/calib.hpp"
#include "habs/control.hpp"
#include "habs/sim.hpp"

namespace habs::live {

// Wire format: one JSON object per line, in both directions.
//   sample:   {"type":"sample","seq":n,"t":s,"setpoint":c,"T":c,"V":v,"u":v,
//              "region":"I|II|III","throttle":f}
//   commands: set_setpoint{value}, set_throttle{value}, pause, resume, reset,
//             set_controller{controller}
//   replies:  {"type":"ack","command":...} or {"type":"error","message":...}

struct Sample {
  std::uint64_t seq = 0;
  double t = 0.0;
  double setpoint = 0.0;
  double temp = 0.0;   // measured
  double volts = 0.0;  // measured
  double u = 0.0;      // DAQ output
  std::size_t region = 0;
  double throttle = 1.0;
};

std::string format_sample(const Sample& s);

enum class CommandKind { SetSetpoint, SetThrottle, Pause, Resume, Reset, SetController };

struct Command {
  CommandKind kind = CommandKind::Pause;
  double value = 0.0;
  std::optional<ControllerConfig> controller;
};

std::string_view command_name(CommandKind kind) noexcept;

/// Parses one message line. Throws Error(ParseError) for malformed JSON, an
/// unknown type, or a missing/non-finite value; the `controller` document of
/// set_controller is validated against loop_ts.
Command parse_command(std::string_view line, double loop_ts);

std::string format_ack(CommandKind kind);
std::string format_error(std::string_view message);

/// Closed loop plus a bounded command queue. Commands enqueued from any
/// thread are applied together at the start of the next step().
class LiveEngine {
 public:
  LiveEngine(Scenario scenario, CalibrationPoly calib, std::size_t queue_capacity = 64);

  /// Thread-safe. When the queue is full the oldest command is dropped.
  void enqueue(Command cmd);

  /// Applies pending commands, then advances one tick unless paused.
  /// Returns the tick's sample, or nullopt while paused.
  std::optional<Sample> step();

  bool paused() const noexcept { return paused_; }
  std::size_t dropped_commands() const noexcept { return dropped_.load(); }
  const ClosedLoop& loop() const noexcept { return loop_; }

 private:
  void apply(const Command& cmd);

  ClosedLoop loop_;
  std::size_t capacity_;
  std::mutex queue_mutex_;
  std::deque<Command> queue_;
  std::atomic<std::size_t> dropped_{0};
  bool paused_ = false;
  std::uint64_t seq_ = 0;
};

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  double speed = 1.0;      // simulated seconds per wall second; <= 0 runs unpaced
  std::size_t subscriber_queue = 256;
  std::size_t command_queue = 64;
};

/// TCP service streaming samples to every connected client. A connection
/// that opens with an HTTP WebSocket upgrade is served over WebSocket text
/// frames; anything else is treated as raw newline-delimited JSON.
class LiveServer {
 public:
  LiveServer(Scenario scenario, CalibrationPoly calib, ServerOptions opts = {});
  ~LiveServer();

  LiveServer(const LiveServer&) = delete;
  LiveServer& operator=(const LiveServer&) = delete;

  /// Binds and starts the simulation and accept threads. Throws IoError when
  /// the address cannot be bound.
  void start();
  void stop();

  std::uint16_t port() const noexcept { return port_; }
  std::size_t subscriber_count() const;
  const LiveEngine& engine() const noexcept { return engine_; }

 private:
  struct Connection;

  void accept_loop(std::stop_token stop);
  void simulation_loop(std::stop_token stop);
  void serve_connection(Connection& conn);
  void write_connection(Connection& conn);
  void handle_line(Connection& conn, std::string_view line);
  void broadcast(const std::string& message);
  void reap_closed();

  LiveEngine engine_;
  ServerOptions opts_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  mutable std::mutex connections_mutex_;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::jthread sim_thread_;
  std::jthread accept_thread_;
};

}  // namespace habs::live
