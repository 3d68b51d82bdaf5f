#include "habs/websocket.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "habs/error.hpp"

namespace habs::ws {

namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
constexpr std::uint64_t kMaxPayload = 1 << 20;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string accept_key(std::string_view client_key) {
  const std::string material = std::string(client_key) + std::string(kGuid);
  std::array<unsigned char, SHA_DIGEST_LENGTH> digest{};
  SHA1(reinterpret_cast<const unsigned char*>(material.data()), material.size(), digest.data());
  std::array<unsigned char, 4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1> encoded{};
  const int n = EVP_EncodeBlock(encoded.data(), digest.data(), SHA_DIGEST_LENGTH);
  return std::string(reinterpret_cast<const char*>(encoded.data()), static_cast<std::size_t>(n));
}

std::string encode_frame(std::string_view payload, Opcode op, std::optional<std::uint32_t> mask) {
  std::string out;
  out.push_back(static_cast<char>(0x80 | static_cast<std::uint8_t>(op)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::uint64_t len = payload.size();
  if (len < 126) {
    out.push_back(static_cast<char>(mask_bit | len));
  } else if (len <= 0xFFFF) {
    out.push_back(static_cast<char>(mask_bit | 126));
    out.push_back(static_cast<char>((len >> 8) & 0xFF));
    out.push_back(static_cast<char>(len & 0xFF));
  } else {
    out.push_back(static_cast<char>(mask_bit | 127));
    for (int shift = 56; shift >= 0; shift -= 8) {
      out.push_back(static_cast<char>((len >> shift) & 0xFF));
    }
  }
  if (!mask) {
    out.append(payload);
    return out;
  }
  std::array<char, 4> key{};
  for (int i = 0; i < 4; ++i) key[i] = static_cast<char>((*mask >> (24 - 8 * i)) & 0xFF);
  out.append(key.begin(), key.end());
  for (std::size_t i = 0; i < payload.size(); ++i) out.push_back(payload[i] ^ key[i % 4]);
  return out;
}

std::vector<Frame> FrameDecoder::feed(std::string_view bytes) {
  buffer_.append(bytes);
  std::vector<Frame> frames;
  for (;;) {
    if (buffer_.size() < 2) break;
    const auto b0 = static_cast<std::uint8_t>(buffer_[0]);
    const auto b1 = static_cast<std::uint8_t>(buffer_[1]);
    if (b0 & 0x70) throw Error(Errc::ParseError, "websocket frame uses reserved bits");
    const bool masked = b1 & 0x80;
    std::uint64_t len = b1 & 0x7F;
    std::size_t pos = 2;
    if (len == 126) {
      if (buffer_.size() < 4) break;
      len = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(buffer_[2])) << 8) |
            static_cast<std::uint8_t>(buffer_[3]);
      pos = 4;
    } else if (len == 127) {
      if (buffer_.size() < 10) break;
      len = 0;
      for (std::size_t i = 2; i < 10; ++i) len = (len << 8) | static_cast<std::uint8_t>(buffer_[i]);
      pos = 10;
    }
    if (len > kMaxPayload) throw Error(Errc::ParseError, "websocket frame too large");
    const std::size_t key_pos = pos;
    if (masked) pos += 4;
    if (buffer_.size() < pos + len) break;

    Frame frame;
    frame.fin = b0 & 0x80;
    frame.op = static_cast<Opcode>(b0 & 0x0F);
    frame.payload = buffer_.substr(pos, static_cast<std::size_t>(len));
    if (masked) {
      for (std::size_t i = 0; i < frame.payload.size(); ++i) {
        frame.payload[i] = static_cast<char>(frame.payload[i] ^ buffer_[key_pos + i % 4]);
      }
    }
    buffer_.erase(0, pos + static_cast<std::size_t>(len));
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::optional<std::string> upgrade_key(std::string_view request_head) {
  bool upgrade = false;
  std::optional<std::string> key;
  std::size_t start = request_head.find("\r\n");
  while (start != std::string_view::npos && start + 2 < request_head.size()) {
    const std::size_t end = request_head.find("\r\n", start + 2);
    const auto line = request_head.substr(start + 2, end == std::string_view::npos
                                                         ? std::string_view::npos
                                                         : end - start - 2);
    const auto colon = line.find(':');
    if (colon != std::string_view::npos) {
      const auto name = lower(trim(line.substr(0, colon)));
      const auto value = trim(line.substr(colon + 1));
      if (name == "upgrade" && lower(value) == "websocket") upgrade = true;
      if (name == "sec-websocket-key") key = std::string(value);
    }
    start = end;
  }
  if (!upgrade || !key) return std::nullopt;
  return key;
}

std::string handshake_response(std::string_view client_key) {
  return "HTTP/1.1 101 Switching Protocols\r\n"
         "Upgrade: websocket\r\n"
         "Connection: Upgrade\r\n"
         "Sec-WebSocket-Accept: " +
         accept_key(client_key) + "\r\n\r\n";
}

}  // namespace habs::ws
