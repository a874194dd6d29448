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

#ifndef MASKFED_TRANSPORT_H_
#define MASKFED_TRANSPORT_H_

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maskfed/fixedpoint.h"
#include "maskfed/masking.h"

namespace maskfed {

// Frame layout: u32 LE payload length, u8 message type, payload bytes.
inline constexpr size_t kFrameHeaderBytes = 5;
inline constexpr uint32_t kMaxFramePayload = 256u << 20;

enum class MsgType : uint8_t {
  kInitRoster = 0x01,
  kKeyRequest = 0x02,
  kKeyResponse = 0x03,
  kGlobalModel = 0x10,
  kMaskedUpdate = 0x11,
  kRoundAbort = 0x12,
  kAck = 0x20,
  kError = 0x7F,
};

bool IsKnownMsgType(uint8_t type);
const char* MsgTypeName(MsgType type);

struct Frame {
  MsgType type = MsgType::kAck;
  std::vector<uint8_t> payload;

  bool operator==(const Frame&) const = default;
};

// A reliable ordered byte stream. One reader and one writer at a time.
class ByteStream {
 public:
  virtual ~ByteStream() = default;

  virtual void WriteAll(std::span<const uint8_t> bytes) = 0;
  // Reads at least one byte unless the peer closed (returns 0).
  virtual size_t ReadSome(std::span<uint8_t> out) = 0;
  virtual void Close() = 0;
  // True when the channel protects the confidentiality of its contents.
  virtual bool IsConfidential() const { return false; }
};

// Throws IoError if the stream ends first.
void ReadExact(ByteStream& stream, std::span<uint8_t> out);

// In-memory stream: reads consume `input`, writes append to output().
class BufferStream : public ByteStream {
 public:
  BufferStream() = default;
  explicit BufferStream(std::vector<uint8_t> input) : input_(std::move(input)) {}

  void WriteAll(std::span<const uint8_t> bytes) override;
  size_t ReadSome(std::span<uint8_t> out) override;
  void Close() override { closed_ = true; }

  const std::vector<uint8_t>& output() const { return output_; }
  size_t consumed() const { return pos_; }
  bool closed() const { return closed_; }

 private:
  std::vector<uint8_t> input_;
  size_t pos_ = 0;
  std::vector<uint8_t> output_;
  bool closed_ = false;
};

// Two connected in-process endpoints, usable from different threads.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>>
MakeMemoryPipe(bool confidential);

class TcpStream : public ByteStream {
 public:
  explicit TcpStream(int fd);
  ~TcpStream() override;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  // Connects to "host:port", retrying refused connections until `timeout`.
  static std::unique_ptr<TcpStream> Connect(const std::string& address,
                                            std::chrono::milliseconds timeout);

  // Applies to subsequent reads and writes; zero disables the limit. An
  // expired read or write throws Timeout.
  void SetIoTimeout(std::chrono::milliseconds timeout);

  void WriteAll(std::span<const uint8_t> bytes) override;
  size_t ReadSome(std::span<uint8_t> out) override;
  void Close() override;

 private:
  int fd_;
};

class TcpListener {
 public:
  // Binds "host:port"; port 0 picks an ephemeral port.
  explicit TcpListener(const std::string& address);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t port() const { return port_; }
  // Returns nullptr when nothing arrives within `timeout`.
  std::unique_ptr<TcpStream> Accept(std::chrono::milliseconds timeout);

 private:
  int fd_;
  uint16_t port_ = 0;
};

// Splits "host:port". Throws std::invalid_argument.
std::pair<std::string, uint16_t> SplitAddress(const std::string& address);

// Writes exactly kFrameHeaderBytes + payload.size() bytes. Throws
// OversizePayload before writing anything if the payload is too large.
void WriteFrame(ByteStream& stream, MsgType type,
                std::span<const uint8_t> payload);
std::vector<uint8_t> EncodeFrame(MsgType type, std::span<const uint8_t> payload);

// Inverse of WriteFrame. The length bound and message type are validated
// from the header before any payload buffer is allocated, and the payload is
// then read in bounded chunks, so a lying length field cannot force a large
// allocation. Throws IoError, OversizePayload or UnknownMsgType.
Frame ReadFrame(ByteStream& stream);

// ReadFrame for a live connection: on UnknownMsgType answers with an Error
// frame and closes the stream before rethrowing; an incoming Error frame is
// raised as RemoteError.
Frame ReceiveFrame(ByteStream& stream);

// Model wire format: u32 layer count; per layer u16 name length, UTF-8 name,
// u32 word count, words as 8-byte LE two's complement.
std::vector<uint8_t> SerializeModel(const FixedModel& m);
// Rejects truncation, trailing bytes and invalid UTF-8 with MalformedModel.
FixedModel ParseModel(std::span<const uint8_t> bytes);

bool IsValidUtf8(std::span<const uint8_t> bytes);

// Message payloads carried inside frames.
struct RosterEntry {
  ClientId id = 0;
  std::string address;

  bool operator==(const RosterEntry&) const = default;
};

struct InitRosterMsg {
  ClientId recipient = 0;
  bool insecure = false;
  std::vector<RosterEntry> roster;

  bool operator==(const InitRosterMsg&) const = default;
};

struct KeyRequestMsg {
  ClientId initiator = 0;
  ClientId responder = 0;

  bool operator==(const KeyRequestMsg&) const = default;
};

struct KeyResponseMsg {
  ClientId initiator = 0;
  ClientId responder = 0;
  PairKey key;

  bool operator==(const KeyResponseMsg&) const = default;
};

struct GlobalModelMsg {
  uint64_t round = 0;
  FixedModel model;

  bool operator==(const GlobalModelMsg&) const = default;
};

struct ErrorMsg {
  uint16_t code = 0;
  std::string message;
};

std::vector<uint8_t> EncodeInitRoster(const InitRosterMsg& msg);
std::vector<uint8_t> EncodeKeyRequest(const KeyRequestMsg& msg);
std::vector<uint8_t> EncodeKeyResponse(const KeyResponseMsg& msg);
std::vector<uint8_t> EncodeGlobalModel(const GlobalModelMsg& msg);
std::vector<uint8_t> EncodeMaskedUpdate(const MaskedUpdate& msg);
std::vector<uint8_t> EncodeU64(uint64_t value);  // RoundAbort, Ack
std::vector<uint8_t> EncodeError(const ErrorMsg& msg);

// Parsers throw IoError on malformed payloads.
InitRosterMsg ParseInitRoster(std::span<const uint8_t> payload);
KeyRequestMsg ParseKeyRequest(std::span<const uint8_t> payload);
KeyResponseMsg ParseKeyResponse(std::span<const uint8_t> payload);
GlobalModelMsg ParseGlobalModel(std::span<const uint8_t> payload);
MaskedUpdate ParseMaskedUpdate(std::span<const uint8_t> payload);
uint64_t ParseU64(std::span<const uint8_t> payload);
ErrorMsg ParseError(std::span<const uint8_t> payload);

}  // namespace maskfed

#endif  // MASKFED_TRANSPORT_H_
