#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Minimal RFC 6455 framing for the live channel: enough for a browser panel
// to speak the same newline-delimited JSON as a raw TCP client.
namespace habs::ws {

enum class Opcode : std::uint8_t {
  Continuation = 0x0,
  Text = 0x1,
  Binary = 0x2,
  Close = 0x8,
  Ping = 0x9,
  Pong = 0xA,
};

/// Sec-WebSocket-Accept value for a client's Sec-WebSocket-Key.
std::string accept_key(std::string_view client_key);

/// Server frames are unmasked; pass a mask to build client frames.
std::string encode_frame(std::string_view payload, Opcode op = Opcode::Text,
                         std::optional<std::uint32_t> mask = std::nullopt);

struct Frame {
  Opcode op = Opcode::Text;
  bool fin = true;
  std::string payload;
};

/// Incremental decoder; throws Error(ParseError) on protocol violations.
class FrameDecoder {
 public:
  /// Appends raw bytes and returns every complete frame, unmasked.
  std::vector<Frame> feed(std::string_view bytes);

 private:
  std::string buffer_;
};

/// Parsed HTTP upgrade request. Returns nullopt when the request is not a
/// WebSocket upgrade.
std::optional<std::string> upgrade_key(std::string_view request_head);

std::string handshake_response(std::string_view client_key);

}  // namespace habs::ws
