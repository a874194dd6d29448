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

#include <gtest/gtest.h>

#include <sys/resource.h>

#include <chrono>
#include <random>
#include <thread>

#include "maskfed/errors.h"
#include "maskfed/transport.h"
#include "wire_support.h"

namespace maskfed {
namespace {

using testing::GoldenFrameNames;
using testing::ReadFileBytes;
using testing::ReencodeFrame;

std::string Wire(const std::string& name) { return std::string(MASKFED_TESTDATA) + "/wire/" + name; }

TEST(WireTest, GoldenFramesRoundTripByteExactly) {
  for (const auto& name : GoldenFrameNames()) {
    const auto bytes = ReadFileBytes(Wire(name));
    EXPECT_EQ(ReencodeFrame(bytes), bytes) << name;
  }
}

TEST(WireTest, GoldenFieldValues) {
  BufferStream gm(ReadFileBytes(Wire("global_model.bin")));
  const Frame f = ReadFrame(gm);
  ASSERT_EQ(f.type, MsgType::kGlobalModel);
  const GlobalModelMsg msg = ParseGlobalModel(f.payload);
  EXPECT_EQ(msg.round, 3u);
  ASSERT_EQ(msg.model.layers.size(), 2u);
  EXPECT_EQ(msg.model.layers[0].name, "weights");
  EXPECT_EQ(msg.model.layers[0].values[0].raw(), 16777216);
  EXPECT_EQ(msg.model.layers[0].values[1].raw(), -8388608);
  EXPECT_EQ(msg.model.layers[0].values[2].raw(), 1677722);
  EXPECT_EQ(msg.model.layers[1].name, "bias");

  BufferStream mu(ReadFileBytes(Wire("masked_update.bin")));
  const MaskedUpdate u = ParseMaskedUpdate(ReadFrame(mu).payload);
  EXPECT_EQ(u.client_id, 2u);
  EXPECT_EQ(u.round, 7u);
  EXPECT_EQ(u.payload.layers[0].name, "layer.\xce\xb1");
  EXPECT_EQ(u.payload.layers[0].values[2].raw(), -1);

  BufferStream ir(ReadFileBytes(Wire("init_roster.bin")));
  const InitRosterMsg roster = ParseInitRoster(ReadFrame(ir).payload);
  EXPECT_EQ(roster.recipient, 1u);
  EXPECT_TRUE(roster.insecure);
  EXPECT_EQ(roster.roster[1], (RosterEntry{1, "127.0.0.1:7001"}));

  BufferStream kr(ReadFileBytes(Wire("key_response.bin")));
  const KeyResponseMsg key = ParseKeyResponse(ReadFrame(kr).payload);
  EXPECT_EQ(key.key.bytes[127], 127);

  BufferStream er(ReadFileBytes(Wire("error.bin")));
  EXPECT_THROW(
      {
        try {
          ReceiveFrame(er);
        } catch (const RemoteError& e) {
          EXPECT_NE(std::string(e.what()).find("round aborted"), std::string::npos);
          throw;
        }
      },
      RemoteError);
}

TEST(WireTest, InvalidCorpusIsRejected) {
  EXPECT_THROW(ReencodeFrame(ReadFileBytes(Wire("invalid/unknown_type.bin"))), UnknownMsgType);
  EXPECT_THROW(ReencodeFrame(ReadFileBytes(Wire("invalid/oversize_length.bin"))), OversizePayload);
  EXPECT_THROW(ReencodeFrame(ReadFileBytes(Wire("invalid/truncated_payload.bin"))), IoError);
  EXPECT_THROW(ReencodeFrame(ReadFileBytes(Wire("invalid/truncated_header.bin"))), IoError);
  EXPECT_THROW(ReencodeFrame(ReadFileBytes(Wire("invalid/bad_utf8_name.bin"))), IoError);
  EXPECT_THROW(ReencodeFrame(ReadFileBytes(Wire("invalid/trailing_bytes.bin"))), IoError);
  EXPECT_THROW(ReencodeFrame(ReadFileBytes(Wire("invalid/word_count_overflow.bin"))), IoError);
}

TEST(WireTest, ModelParserErrors) {
  const std::vector<uint8_t> empty;
  EXPECT_THROW(ParseModel(empty), MalformedModel);
  FixedModel m{{{"w", {FixedWord(1), FixedWord(2)}}}};
  auto bytes = SerializeModel(m);
  EXPECT_EQ(ParseModel(bytes), m);
  bytes.push_back(0);
  EXPECT_THROW(ParseModel(bytes), MalformedModel);
  bytes.resize(bytes.size() - 2);
  EXPECT_THROW(ParseModel(bytes), MalformedModel);
}

TEST(WireTest, Utf8Validation) {
  auto ok = [](std::string s) {
    return IsValidUtf8({reinterpret_cast<const uint8_t*>(s.data()), s.size()});
  };
  EXPECT_TRUE(ok("plain"));
  EXPECT_TRUE(ok("\xe2\x82\xac"));
  EXPECT_FALSE(ok("\xc0\xaf"));          // overlong
  EXPECT_FALSE(ok("\xed\xa0\x80"));      // surrogate
  EXPECT_FALSE(ok("\xf4\x90\x80\x80"));  // above U+10FFFF
  EXPECT_FALSE(ok("\xe2\x82"));
}

TEST(WireTest, RosterFlagsMustBeCanonical) {
  auto payload = EncodeInitRoster({0, true, {{0, "a:1"}}});
  payload[4] = 2;
  EXPECT_THROW(ParseInitRoster(payload), IoError);
}

TEST(WireTest, UnknownTypeGetsErrorReplyAndClose) {
  BufferStream s(ReadFileBytes(Wire("invalid/unknown_type.bin")));
  EXPECT_THROW(ReceiveFrame(s), UnknownMsgType);
  EXPECT_TRUE(s.closed());
  BufferStream reply(s.output());
  const Frame f = ReadFrame(reply);
  EXPECT_EQ(f.type, MsgType::kError);
  EXPECT_EQ(ParseError(f.payload).code, 1);
}

TEST(WireTest, HugeDeclaredLengthDoesNotPreallocate) {
  // Length just under the cap, body absent: must fail fast without a 256 MiB buffer.
  std::vector<uint8_t> bytes{0xff, 0xff, 0xff, 0x0f, 0x10};
  rusage before{}, after{};
  getrusage(RUSAGE_SELF, &before);
  BufferStream s(bytes);
  EXPECT_THROW(ReadFrame(s), IoError);
  getrusage(RUSAGE_SELF, &after);
  EXPECT_LT(after.ru_maxrss - before.ru_maxrss, 16 * 1024);
}

TEST(WireTest, EncodeFrameRejectsOversize) {
  std::vector<uint8_t> big(size_t{kMaxFramePayload} + 1);
  EXPECT_THROW(EncodeFrame(MsgType::kAck, big), OversizePayload);
}

TEST(WireTest, FuzzedFramesNeverCrash) {
  std::vector<std::vector<uint8_t>> corpus;
  for (const auto& name : GoldenFrameNames()) corpus.push_back(ReadFileBytes(Wire(name)));
  std::mt19937_64 gen(99);
  size_t accepted = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto bytes = testing::MutateFrame(corpus, gen);
    try {
      EXPECT_EQ(ReencodeFrame(bytes), bytes);
      ++accepted;
    } catch (const Error&) {
    }
  }
  EXPECT_GT(accepted, 0u);
}

TEST(MemoryPipeTest, CarriesFramesBothWays) {
  auto [a, b] = MakeMemoryPipe(true);
  EXPECT_TRUE(a->IsConfidential());
  WriteFrame(*a, MsgType::kAck, EncodeU64(9));
  EXPECT_EQ(ParseU64(ReadFrame(*b).payload), 9u);
  WriteFrame(*b, MsgType::kRoundAbort, EncodeU64(1));
  EXPECT_EQ(ReadFrame(*a).type, MsgType::kRoundAbort);
  a->Close();
  uint8_t byte;
  EXPECT_EQ(b->ReadSome({&byte, 1}), 0u);
  EXPECT_FALSE(MakeMemoryPipe(false).first->IsConfidential());
}

TEST(TcpTest, LoopbackFrameExchange) {
  TcpListener listener("127.0.0.1:0");
  ASSERT_NE(listener.port(), 0);
  std::thread peer([port = listener.port()] {
    auto s = TcpStream::Connect("127.0.0.1:" + std::to_string(port), std::chrono::seconds(5));
    std::vector<uint8_t> big(300000, 0xab);
    WriteFrame(*s, MsgType::kMaskedUpdate, big);
  });
  auto conn = listener.Accept(std::chrono::seconds(5));
  ASSERT_NE(conn, nullptr);
  EXPECT_FALSE(conn->IsConfidential());
  const Frame f = ReadFrame(*conn);
  EXPECT_EQ(f.payload.size(), 300000u);
  peer.join();
  uint8_t byte;
  EXPECT_EQ(conn->ReadSome({&byte, 1}), 0u);
}

TEST(TcpTest, TimeoutsAndUnreachable) {
  TcpListener listener("127.0.0.1:0");
  EXPECT_EQ(listener.Accept(std::chrono::milliseconds(50)), nullptr);
  uint16_t dead_port;
  {
    TcpListener tmp("127.0.0.1:0");
    dead_port = tmp.port();
  }
  EXPECT_THROW(TcpStream::Connect("127.0.0.1:" + std::to_string(dead_port),
                                  std::chrono::milliseconds(200)),
               Timeout);

  std::thread peer([port = listener.port()] {
    auto s = TcpStream::Connect("127.0.0.1:" + std::to_string(port), std::chrono::seconds(5));
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
  });
  auto conn = listener.Accept(std::chrono::seconds(5));
  conn->SetIoTimeout(std::chrono::milliseconds(100));
  EXPECT_THROW(ReadFrame(*conn), Timeout);
  peer.join();
}

TEST(TcpTest, SplitAddress) {
  EXPECT_EQ(SplitAddress("10.0.0.1:8080"), (std::pair<std::string, uint16_t>{"10.0.0.1", 8080}));
  EXPECT_THROW(SplitAddress("nohost"), std::exception);
  EXPECT_THROW(SplitAddress("h:99999"), std::exception);
}

}  // namespace
}  // namespace maskfed
