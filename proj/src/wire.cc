/*
 * Copyright 2026 The Maskfed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cstring>
#include <string>

#include "maskfed/errors.h"
#include "maskfed/transport.h"

namespace maskfed {
namespace {

constexpr size_t kReadChunk = 64 * 1024;

class WireWriter {
 public:
  void U8(uint8_t v) { out_.push_back(v); }
  void U16(uint16_t v) { Le(v, 2); }
  void U32(uint32_t v) { Le(v, 4); }
  void U64(uint64_t v) { Le(v, 8); }
  void Bytes(std::span<const uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void Str16(const std::string& s) {
    if (s.size() > UINT16_MAX) throw Error("string too long for wire: " + s.substr(0, 32));
    U16(static_cast<uint16_t>(s.size()));
    Bytes({reinterpret_cast<const uint8_t*>(s.data()), s.size()});
  }
  std::vector<uint8_t> Take() { return std::move(out_); }

 private:
  void Le(uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  std::vector<uint8_t> out_;
};

// Bounds-checked little-endian reader; failures throw MalformedModel with the
// byte offset.
class WireReader {
 public:
  explicit WireReader(std::span<const uint8_t> in) : in_(in) {}

  size_t offset() const { return pos_; }
  size_t remaining() const { return in_.size() - pos_; }

  void Need(size_t n, const char* what) const {
    if (remaining() < n) {
      throw MalformedModel(pos_, std::string("truncated ") + what);
    }
  }
  uint8_t U8(const char* what) { return static_cast<uint8_t>(Le(1, what)); }
  uint16_t U16(const char* what) { return static_cast<uint16_t>(Le(2, what)); }
  uint32_t U32(const char* what) { return static_cast<uint32_t>(Le(4, what)); }
  uint64_t U64(const char* what) { return Le(8, what); }
  std::span<const uint8_t> Bytes(size_t n, const char* what) {
    Need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::string Utf8(size_t n, const char* what) {
    const size_t at = pos_;
    auto b = Bytes(n, what);
    if (!IsValidUtf8(b)) throw MalformedModel(at, std::string("invalid UTF-8 in ") + what);
    return std::string(b.begin(), b.end());
  }
  std::span<const uint8_t> Rest() { return Bytes(remaining(), "rest"); }
  void ExpectEnd() const {
    if (remaining() != 0) {
      throw MalformedModel(pos_, std::to_string(remaining()) + " trailing bytes");
    }
  }

 private:
  uint64_t Le(int n, const char* what) {
    Need(static_cast<size_t>(n), what);
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<size_t>(n);
    return v;
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
};

void WriteModel(WireWriter& w, const FixedModel& m) {
  w.U32(static_cast<uint32_t>(m.layers.size()));
  for (const auto& layer : m.layers) {
    w.Str16(layer.name);
    w.U32(static_cast<uint32_t>(layer.values.size()));
    for (FixedWord v : layer.values) w.U64(v.bits());
  }
}

FixedModel ReadModel(WireReader& r) {
  FixedModel m;
  const uint32_t layers = r.U32("layer count");
  // Each layer needs at least 6 header bytes; never reserve beyond that.
  if (static_cast<uint64_t>(layers) * 6 > r.remaining()) {
    throw MalformedModel(r.offset(), "layer count exceeds buffer");
  }
  m.layers.reserve(layers);
  for (uint32_t l = 0; l < layers; ++l) {
    const uint16_t name_len = r.U16("layer name length");
    std::string name = r.Utf8(name_len, "layer name");
    const uint32_t count = r.U32("word count");
    if (static_cast<uint64_t>(count) * 8 > r.remaining()) {
      throw MalformedModel(r.offset(), "word count exceeds buffer");
    }
    Layer<FixedWord> layer{std::move(name), std::vector<FixedWord>(count)};
    for (auto& v : layer.values) v = FixedWord::FromBits(r.U64("word"));
    m.layers.push_back(std::move(layer));
  }
  return m;
}

// Message parsers surface malformed payloads as IoError.
template <typename Fn>
auto ParseMessage(const char* name, std::span<const uint8_t> payload, Fn&& fn) {
  try {
    WireReader r(payload);
    auto msg = fn(r);
    r.ExpectEnd();
    return msg;
  } catch (const MalformedModel& e) {
    throw IoError(std::string("malformed ") + name + " message: " + e.what());
  }
}

}  // namespace

bool IsKnownMsgType(uint8_t type) {
  switch (static_cast<MsgType>(type)) {
    case MsgType::kInitRoster:
    case MsgType::kKeyRequest:
    case MsgType::kKeyResponse:
    case MsgType::kGlobalModel:
    case MsgType::kMaskedUpdate:
    case MsgType::kRoundAbort:
    case MsgType::kAck:
    case MsgType::kError:
      return true;
  }
  return false;
}

const char* MsgTypeName(MsgType type) {
  switch (type) {
    case MsgType::kInitRoster: return "InitRoster";
    case MsgType::kKeyRequest: return "KeyRequest";
    case MsgType::kKeyResponse: return "KeyResponse";
    case MsgType::kGlobalModel: return "GlobalModel";
    case MsgType::kMaskedUpdate: return "MaskedUpdate";
    case MsgType::kRoundAbort: return "RoundAbort";
    case MsgType::kAck: return "Ack";
    case MsgType::kError: return "Error";
  }
  return "?";
}

bool IsValidUtf8(std::span<const uint8_t> b) {
  size_t i = 0;
  while (i < b.size()) {
    const uint8_t c = b[i];
    if (c < 0x80) {
      ++i;
      continue;
    }
    size_t len;
    uint32_t cp;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > b.size()) return false;
    for (size_t k = 1; k < len; ++k) {
      if ((b[i + k] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (b[i + k] & 0x3F);
    }
    static constexpr uint32_t kMinForLength[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMinForLength[len] || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

void ReadExact(ByteStream& stream, std::span<uint8_t> out) {
  size_t got = 0;
  while (got < out.size()) {
    const size_t n = stream.ReadSome(out.subspan(got));
    if (n == 0) {
      throw IoError("stream ended after " + std::to_string(got) + " of " +
                    std::to_string(out.size()) + " bytes");
    }
    got += n;
  }
}

std::vector<uint8_t> EncodeFrame(MsgType type, std::span<const uint8_t> payload) {
  if (payload.size() > kMaxFramePayload) throw OversizePayload(payload.size());
  WireWriter w;
  w.U32(static_cast<uint32_t>(payload.size()));
  w.U8(static_cast<uint8_t>(type));
  w.Bytes(payload);
  return w.Take();
}

void WriteFrame(ByteStream& stream, MsgType type,
                std::span<const uint8_t> payload) {
  stream.WriteAll(EncodeFrame(type, payload));
}

Frame ReadFrame(ByteStream& stream) {
  uint8_t header[kFrameHeaderBytes];
  ReadExact(stream, header);
  const uint32_t length = static_cast<uint32_t>(header[0]) |
                          static_cast<uint32_t>(header[1]) << 8 |
                          static_cast<uint32_t>(header[2]) << 16 |
                          static_cast<uint32_t>(header[3]) << 24;
  if (length > kMaxFramePayload) throw OversizePayload(length);
  if (!IsKnownMsgType(header[4])) throw UnknownMsgType(header[4]);

  Frame frame{static_cast<MsgType>(header[4]), {}};
  while (frame.payload.size() < length) {
    const size_t chunk = std::min<size_t>(kReadChunk, length - frame.payload.size());
    const size_t at = frame.payload.size();
    frame.payload.resize(at + chunk);
    ReadExact(stream, std::span(frame.payload).subspan(at, chunk));
  }
  return frame;
}

Frame ReceiveFrame(ByteStream& stream) {
  Frame frame;
  try {
    frame = ReadFrame(stream);
  } catch (const UnknownMsgType& e) {
    try {
      WriteFrame(stream, MsgType::kError, EncodeError({1, e.what()}));
    } catch (const Error&) {
      // Peer may already be gone; closing below is all that is left.
    }
    stream.Close();
    throw;
  }
  if (frame.type == MsgType::kError) {
    ErrorMsg err;
    try {
      err = ParseError(frame.payload);
    } catch (const IoError&) {
      err.message = "(unparseable error frame)";
    }
    throw RemoteError(err.message);
  }
  return frame;
}

std::vector<uint8_t> SerializeModel(const FixedModel& m) {
  WireWriter w;
  WriteModel(w, m);
  return w.Take();
}

FixedModel ParseModel(std::span<const uint8_t> bytes) {
  WireReader r(bytes);
  FixedModel m = ReadModel(r);
  r.ExpectEnd();
  return m;
}

std::vector<uint8_t> EncodeInitRoster(const InitRosterMsg& msg) {
  WireWriter w;
  w.U32(msg.recipient);
  w.U8(msg.insecure ? 1 : 0);
  w.U32(static_cast<uint32_t>(msg.roster.size()));
  for (const auto& e : msg.roster) {
    w.U32(e.id);
    w.Str16(e.address);
  }
  return w.Take();
}

InitRosterMsg ParseInitRoster(std::span<const uint8_t> payload) {
  return ParseMessage("InitRoster", payload, [](WireReader& r) {
    InitRosterMsg msg;
    msg.recipient = r.U32("recipient");
    const uint8_t flags = r.U8("flags");
    if (flags > 1) throw MalformedModel(r.offset() - 1, "unknown roster flags");
    msg.insecure = flags == 1;
    const uint32_t n = r.U32("roster size");
    if (static_cast<uint64_t>(n) * 6 > r.remaining()) {
      throw MalformedModel(r.offset(), "roster size exceeds buffer");
    }
    for (uint32_t i = 0; i < n; ++i) {
      RosterEntry e;
      e.id = r.U32("client id");
      e.address = r.Utf8(r.U16("address length"), "address");
      msg.roster.push_back(std::move(e));
    }
    return msg;
  });
}

std::vector<uint8_t> EncodeKeyRequest(const KeyRequestMsg& msg) {
  WireWriter w;
  w.U32(msg.initiator);
  w.U32(msg.responder);
  return w.Take();
}

KeyRequestMsg ParseKeyRequest(std::span<const uint8_t> payload) {
  return ParseMessage("KeyRequest", payload, [](WireReader& r) {
    KeyRequestMsg msg;
    msg.initiator = r.U32("initiator");
    msg.responder = r.U32("responder");
    return msg;
  });
}

std::vector<uint8_t> EncodeKeyResponse(const KeyResponseMsg& msg) {
  WireWriter w;
  w.U32(msg.initiator);
  w.U32(msg.responder);
  w.Bytes(msg.key.bytes);
  return w.Take();
}

KeyResponseMsg ParseKeyResponse(std::span<const uint8_t> payload) {
  return ParseMessage("KeyResponse", payload, [](WireReader& r) {
    KeyResponseMsg msg;
    msg.initiator = r.U32("initiator");
    msg.responder = r.U32("responder");
    auto key = r.Bytes(kPairKeyBytes, "pair key");
    std::copy(key.begin(), key.end(), msg.key.bytes.begin());
    return msg;
  });
}

std::vector<uint8_t> EncodeGlobalModel(const GlobalModelMsg& msg) {
  WireWriter w;
  w.U64(msg.round);
  WriteModel(w, msg.model);
  return w.Take();
}

GlobalModelMsg ParseGlobalModel(std::span<const uint8_t> payload) {
  return ParseMessage("GlobalModel", payload, [](WireReader& r) {
    GlobalModelMsg msg;
    msg.round = r.U64("round");
    msg.model = ReadModel(r);
    return msg;
  });
}

std::vector<uint8_t> EncodeMaskedUpdate(const MaskedUpdate& msg) {
  WireWriter w;
  w.U32(msg.client_id);
  w.U64(msg.round);
  WriteModel(w, msg.payload);
  return w.Take();
}

MaskedUpdate ParseMaskedUpdate(std::span<const uint8_t> payload) {
  return ParseMessage("MaskedUpdate", payload, [](WireReader& r) {
    MaskedUpdate msg;
    msg.client_id = r.U32("client id");
    msg.round = r.U64("round");
    msg.payload = ReadModel(r);
    return msg;
  });
}

std::vector<uint8_t> EncodeU64(uint64_t value) {
  WireWriter w;
  w.U64(value);
  return w.Take();
}

uint64_t ParseU64(std::span<const uint8_t> payload) {
  return ParseMessage("u64", payload, [](WireReader& r) { return r.U64("value"); });
}

std::vector<uint8_t> EncodeError(const ErrorMsg& msg) {
  WireWriter w;
  w.U16(msg.code);
  std::string text = msg.message.substr(0, 4096);
  // Truncation may split a code point; the peer validates UTF-8.
  while (!text.empty() &&
         !IsValidUtf8({reinterpret_cast<const uint8_t*>(text.data()), text.size()})) {
    text.pop_back();
  }
  w.Str16(text);
  return w.Take();
}

ErrorMsg ParseError(std::span<const uint8_t> payload) {
  return ParseMessage("Error", payload, [](WireReader& r) {
    ErrorMsg msg;
    msg.code = r.U16("code");
    msg.message = r.Utf8(r.U16("message length"), "message");
    return msg;
  });
}

}  // namespace maskfed
