#include "habs/live.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "habs/error.hpp"
#include "habs/io.hpp"
#include "habs/websocket.hpp"

namespace habs::live {

using json = nlohmann::json;

namespace {

constexpr int kPollMs = 50;
constexpr int kSniffMs = 200;
constexpr std::size_t kMaxLine = 64 * 1024;

double finite_value(const json& doc) {
  if (!doc.contains("value") || !doc["value"].is_number()) {
    throw Error(Errc::ParseError, "command needs a numeric 'value'");
  }
  const double v = doc["value"].get<double>();
  if (!std::isfinite(v)) throw Error(Errc::ParseError, "command value must be finite");
  return v;
}

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

std::string format_sample(const Sample& s) {
  const json doc = {{"type", "sample"},   {"seq", s.seq},          {"t", s.t},
                    {"setpoint", s.setpoint}, {"T", s.temp},       {"V", s.volts},
                    {"u", s.u},           {"region", region_label(s.region)},
                    {"throttle", s.throttle}};
  return doc.dump() + "\n";
}

std::string_view command_name(CommandKind kind) noexcept {
  switch (kind) {
    case CommandKind::SetSetpoint: return "set_setpoint";
    case CommandKind::SetThrottle: return "set_throttle";
    case CommandKind::Pause: return "pause";
    case CommandKind::Resume: return "resume";
    case CommandKind::Reset: return "reset";
    case CommandKind::SetController: return "set_controller";
  }
  return "unknown";
}

Command parse_command(std::string_view line, double loop_ts) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, fmt::format("malformed message: {}", e.what()));
  }
  if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string()) {
    throw Error(Errc::ParseError, "message must be an object with a string 'type'");
  }
  const auto type = doc["type"].get<std::string>();
  Command cmd;
  if (type == "set_setpoint") {
    cmd.kind = CommandKind::SetSetpoint;
    cmd.value = finite_value(doc);
  } else if (type == "set_throttle") {
    cmd.kind = CommandKind::SetThrottle;
    cmd.value = finite_value(doc);
    if (!(cmd.value > 0.0)) throw Error(Errc::ParseError, "throttle factor must be > 0");
  } else if (type == "pause") {
    cmd.kind = CommandKind::Pause;
  } else if (type == "resume") {
    cmd.kind = CommandKind::Resume;
  } else if (type == "reset") {
    cmd.kind = CommandKind::Reset;
  } else if (type == "set_controller") {
    cmd.kind = CommandKind::SetController;
    if (!doc.contains("controller")) throw Error(Errc::ParseError, "set_controller needs 'controller'");
    ControllerConfig base = ControllerConfig::standard();
    base.ts = loop_ts;
    try {
      cmd.controller = io::controller_config_from_json(doc["controller"], base);
    } catch (const Error& e) {
      throw Error(Errc::ParseError, e.what());
    }
    if (std::abs(cmd.controller->ts - loop_ts) > 1e-12 * loop_ts) {
      throw Error(Errc::ParseError, "controller ts must match the loop period");
    }
  } else {
    throw Error(Errc::ParseError, fmt::format("unknown message type '{}'", type));
  }
  return cmd;
}

std::string format_ack(CommandKind kind) {
  return json{{"type", "ack"}, {"command", command_name(kind)}}.dump() + "\n";
}

std::string format_error(std::string_view message) {
  return json{{"type", "error"}, {"message", message}}.dump() + "\n";
}

LiveEngine::LiveEngine(Scenario scenario, CalibrationPoly calib, std::size_t queue_capacity)
    : loop_(std::move(scenario), calib), capacity_(std::max<std::size_t>(queue_capacity, 1)) {}

void LiveEngine::enqueue(Command cmd) {
  std::lock_guard lock(queue_mutex_);
  if (queue_.size() >= capacity_) {
    spdlog::warn("command queue full, dropping oldest '{}'", command_name(queue_.front().kind));
    queue_.pop_front();
    ++dropped_;
  }
  queue_.push_back(std::move(cmd));
}

void LiveEngine::apply(const Command& cmd) {
  switch (cmd.kind) {
    case CommandKind::SetSetpoint: loop_.override_setpoint(cmd.value); break;
    case CommandKind::SetThrottle: loop_.override_throttle(cmd.value); break;
    case CommandKind::Pause: paused_ = true; break;
    case CommandKind::Resume: paused_ = false; break;
    case CommandKind::Reset: loop_.reset(); break;
    case CommandKind::SetController: loop_.set_controller(*cmd.controller); break;
  }
}

std::optional<Sample> LiveEngine::step() {
  std::deque<Command> pending;
  {
    std::lock_guard lock(queue_mutex_);
    pending.swap(queue_);
  }
  for (const auto& cmd : pending) {
    try {
      apply(cmd);
    } catch (const Error& e) {
      spdlog::warn("command '{}' rejected: {}", command_name(cmd.kind), e.what());
    }
  }
  if (paused_) return std::nullopt;

  const auto row = loop_.tick();
  Sample s;
  s.seq = seq_++;
  s.t = row.t;
  s.setpoint = row.setpoint;
  s.temp = row.temp_measured;
  s.volts = row.volts_measured;
  s.u = row.u_daq;
  s.region = row.region;
  s.throttle = row.throttle;
  return s;
}

struct Outgoing {
  std::string text;
  ws::Opcode op = ws::Opcode::Text;
};

struct LiveServer::Connection {
  explicit Connection(int socket_fd) : fd(socket_fd) {}
  ~Connection() {
    if (fd >= 0) ::close(fd);
  }

  void close() {
    if (!closed.exchange(true)) ::shutdown(fd, SHUT_RDWR);
    cv.notify_all();
  }

  /// False when the subscriber is too far behind.
  bool push(std::string message, std::size_t limit, ws::Opcode op = ws::Opcode::Text) {
    {
      std::lock_guard lock(mutex);
      if (outbox.size() >= limit) return false;
      outbox.push_back({std::move(message), op});
    }
    cv.notify_one();
    return true;
  }

  int fd;
  std::atomic<bool> ready{false};
  std::atomic<bool> closed{false};
  bool websocket = false;
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Outgoing> outbox;
  std::thread reader;
  std::thread writer;
};

LiveServer::LiveServer(Scenario scenario, CalibrationPoly calib, ServerOptions opts)
    : engine_(std::move(scenario), calib, opts.command_queue), opts_(std::move(opts)) {}

LiveServer::~LiveServer() { stop(); }

void LiveServer::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(Errc::IoError, fmt::format("socket: {}", std::strerror(errno)));
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(opts_.port);
  if (::inet_pton(AF_INET, opts_.bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(Errc::IoError, fmt::format("bad bind address '{}'", opts_.bind_address));
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    const auto msg = fmt::format("cannot bind {}:{}: {}", opts_.bind_address, opts_.port,
                                 std::strerror(errno));
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(Errc::IoError, msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  spdlog::info("live service on {}:{}", opts_.bind_address, port_);
  accept_thread_ = std::jthread([this](std::stop_token st) { accept_loop(st); });
  sim_thread_ = std::jthread([this](std::stop_token st) { simulation_loop(st); });
}

void LiveServer::stop() {
  if (sim_thread_.joinable()) {
    sim_thread_.request_stop();
    sim_thread_.join();
  }
  if (accept_thread_.joinable()) {
    accept_thread_.request_stop();
    accept_thread_.join();
  }
  std::vector<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(connections_mutex_);
    conns.swap(connections_);
  }
  for (auto& c : conns) {
    c->close();
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
  }
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

std::size_t LiveServer::subscriber_count() const {
  std::lock_guard lock(connections_mutex_);
  std::size_t n = 0;
  for (const auto& c : connections_) n += c->ready && !c->closed ? 1 : 0;
  return n;
}

void LiveServer::reap_closed() {
  std::vector<std::shared_ptr<Connection>> dead;
  {
    std::lock_guard lock(connections_mutex_);
    std::erase_if(connections_, [&](const auto& c) {
      if (!c->closed) return false;
      dead.push_back(c);
      return true;
    });
  }
  for (auto& c : dead) {
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
  }
}

void LiveServer::accept_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    reap_closed();
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, kPollMs) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    auto conn = std::make_shared<Connection>(fd);
    Connection* raw = conn.get();
    {
      std::lock_guard lock(connections_mutex_);
      connections_.push_back(conn);
    }
    // Threads hold a raw pointer; the connection list owns the object and
    // reap_closed()/stop() join both threads before releasing it.
    raw->reader = std::thread([this, raw] { serve_connection(*raw); });
  }
}

void LiveServer::simulation_loop(std::stop_token stop) {
  using clock = std::chrono::steady_clock;
  const bool paced = opts_.speed > 0.0;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(paced ? engine_.loop().scenario().ts / opts_.speed : 0.0));
  auto next = clock::now();
  while (!stop.stop_requested()) {
    std::optional<Sample> sample;
    try {
      sample = engine_.step();
    } catch (const Error& e) {
      spdlog::error("simulation tick failed: {}", e.what());
    }
    if (sample) broadcast(format_sample(*sample));
    if (paced) {
      next += period;
      std::this_thread::sleep_until(next);
    } else {
      std::this_thread::yield();
    }
  }
}

void LiveServer::broadcast(const std::string& message) {
  std::lock_guard lock(connections_mutex_);
  for (auto& c : connections_) {
    if (!c->ready || c->closed) continue;
    if (!c->push(message, opts_.subscriber_queue)) {
      spdlog::warn("disconnecting slow subscriber (fd {})", c->fd);
      c->close();
    }
  }
}

void LiveServer::handle_line(Connection& conn, std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
  if (line.empty()) return;
  try {
    auto cmd = parse_command(line, engine_.loop().scenario().ts);
    const auto kind = cmd.kind;
    engine_.enqueue(std::move(cmd));
    conn.push(format_ack(kind), opts_.subscriber_queue);
  } catch (const Error& e) {
    conn.push(format_error(e.what()), opts_.subscriber_queue);
  }
}

void LiveServer::write_connection(Connection& conn) {
  for (;;) {
    Outgoing message;
    {
      std::unique_lock lock(conn.mutex);
      conn.cv.wait(lock, [&] { return conn.closed || !conn.outbox.empty(); });
      if (conn.closed) return;
      message = std::move(conn.outbox.front());
      conn.outbox.pop_front();
    }
    const std::string wire =
        conn.websocket ? ws::encode_frame(message.text, message.op) : message.text;
    if (!send_all(conn.fd, wire)) {
      conn.close();
      return;
    }
  }
}

void LiveServer::serve_connection(Connection& conn) {
  std::string pending;
  char buf[4096];

  // A client that speaks first with "GET " is negotiating a WebSocket;
  // silent or other clients get raw line-delimited JSON.
  pollfd pfd{conn.fd, POLLIN, 0};
  if (::poll(&pfd, 1, kSniffMs) > 0) {
    const ssize_t n = ::recv(conn.fd, buf, sizeof buf, 0);
    if (n <= 0) {
      conn.close();
      return;
    }
    pending.append(buf, static_cast<std::size_t>(n));
  }
  if (pending.starts_with("GET ")) {
    while (pending.find("\r\n\r\n") == std::string::npos && pending.size() < kMaxLine) {
      const ssize_t n = ::recv(conn.fd, buf, sizeof buf, 0);
      if (n <= 0) {
        conn.close();
        return;
      }
      pending.append(buf, static_cast<std::size_t>(n));
    }
    const auto head_end = pending.find("\r\n\r\n");
    const auto key = head_end == std::string::npos
                         ? std::nullopt
                         : ws::upgrade_key(std::string_view(pending).substr(0, head_end));
    if (!key) {
      send_all(conn.fd, "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
      conn.close();
      return;
    }
    send_all(conn.fd, ws::handshake_response(*key));
    pending.erase(0, head_end + 4);
    conn.websocket = true;
  }

  conn.writer = std::thread([this, &conn] { write_connection(conn); });
  conn.ready = true;

  ws::FrameDecoder decoder;
  std::string message;  // reassembly of fragmented websocket messages
  std::string lines;
  auto consume = [&](std::string_view bytes) -> bool {
    if (!conn.websocket) {
      lines.append(bytes);
    } else {
      for (auto& frame : decoder.feed(bytes)) {
        switch (frame.op) {
          case ws::Opcode::Close:
            return false;
          case ws::Opcode::Ping:
            conn.push(frame.payload, opts_.subscriber_queue, ws::Opcode::Pong);
            break;
          case ws::Opcode::Pong: break;
          default:
            message += frame.payload;
            if (frame.fin) {
              lines += message;
              lines += '\n';
              message.clear();
            }
        }
      }
    }
    std::size_t nl;
    while ((nl = lines.find('\n')) != std::string::npos) {
      handle_line(conn, std::string_view(lines).substr(0, nl));
      lines.erase(0, nl + 1);
    }
    if (lines.size() > kMaxLine) {
      conn.push(format_error("message too long"), opts_.subscriber_queue);
      lines.clear();
    }
    return true;
  };

  try {
    bool open = consume(pending);
    while (open && !conn.closed) {
      const ssize_t n = ::recv(conn.fd, buf, sizeof buf, 0);
      if (n <= 0) break;
      open = consume(std::string_view(buf, static_cast<std::size_t>(n)));
    }
  } catch (const Error& e) {
    spdlog::warn("dropping connection: {}", e.what());
  }
  conn.close();
}

}  // namespace habs::live
