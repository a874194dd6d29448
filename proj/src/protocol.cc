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

#include "maskfed/protocol.h"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "maskfed/chacha20.h"
#include "maskfed/errors.h"

namespace maskfed {
namespace {

constexpr uint16_t kErrUnexpectedMessage = 2;
constexpr uint16_t kErrKeyExchange = 3;
// Recorder round tag for frames received before round 0.
constexpr uint64_t kSetupRound = ~uint64_t{0};

void SendErrorQuietly(ByteStream& stream, uint16_t code, const std::string& text) {
  try {
    WriteFrame(stream, MsgType::kError, EncodeError({code, text}));
  } catch (const Error&) {
  }
}

}  // namespace

void ValidateSessionConfig(const SessionConfig& cfg) {
  if (cfg.clients.empty()) throw std::invalid_argument("session needs at least one client");
  if (cfg.local_epochs == 0 || cfg.aggregate_every == 0) {
    throw std::invalid_argument("local_epochs and aggregate_every must be positive");
  }
  std::set<ClientId> ids;
  for (const auto& c : cfg.clients) {
    if (!ids.insert(c.id).second) throw DuplicateClientId(c.id);
  }
  if (*ids.rbegin() != cfg.clients.size() - 1) {
    throw std::invalid_argument("client ids must be exactly 0..n-1");
  }
}

uint64_t RoundCount(const SessionConfig& cfg) {
  return (cfg.global_epochs + cfg.aggregate_every - 1) / cfg.aggregate_every;
}

TrainerConfig RoundTrainerConfig(const SessionConfig& cfg, const TrainerConfig& base,
                                 uint64_t round) {
  const uint64_t first_epoch = round * cfg.aggregate_every;
  const uint64_t epochs =
      std::min<uint64_t>(cfg.aggregate_every, cfg.global_epochs - first_epoch);
  TrainerConfig out = base;
  out.local_epochs = static_cast<uint32_t>(epochs * cfg.local_epochs);
  out.first_epoch_index = base.first_epoch_index + first_epoch * cfg.local_epochs;
  return out;
}

FixedModel ComputeLocalUpdate(const ModelVector& global, const Trainer& trainer,
                              const Dataset& shard, const SessionConfig& cfg,
                              const TrainerConfig& base, uint64_t round) {
  return EncodeModel(
      trainer.TrainLocal(global, shard, RoundTrainerConfig(cfg, base, round)));
}

KeySource SeededKeySource(uint64_t seed) {
  return [seed](ClientId i, ClientId j) {
    KeystreamRng rng(seed ^ (static_cast<uint64_t>(i) << 32 | j) ^
                     0x6d61736b66656421ull);
    PairKey key;
    for (size_t w = 0; w < kPairKeyBytes / 8; ++w) {
      const uint64_t v = rng.NextWord();
      for (int b = 0; b < 8; ++b) key.bytes[8 * w + b] = static_cast<uint8_t>(v >> (8 * b));
    }
    return key;
  };
}

PairKey RequestPairKey(ByteStream& channel, ClientId self, ClientId peer,
                       bool insecure) {
  if (self >= peer) {
    throw std::invalid_argument("the lower client id initiates key exchange");
  }
  if (!channel.IsConfidential() && !insecure) throw ChannelNotConfidential();
  WriteFrame(channel, MsgType::kKeyRequest, EncodeKeyRequest({self, peer}));
  const Frame reply = ReceiveFrame(channel);
  if (reply.type != MsgType::kKeyResponse) {
    throw KeyExchangeFailure(self, peer, std::string("unexpected ") + MsgTypeName(reply.type));
  }
  const auto msg = ParseKeyResponse(reply.payload);
  if (msg.initiator != self || msg.responder != peer) {
    throw KeyExchangeFailure(self, peer, "response names the wrong pair");
  }
  return msg.key;
}

PairKey ServePairKey(ByteStream& channel, const KeyRequestMsg& request,
                     ClientId self, bool insecure, const KeySource& source) {
  if (request.responder != self || request.initiator >= self) {
    SendErrorQuietly(channel, kErrKeyExchange, "bad key request pair");
    throw KeyExchangeFailure(request.initiator, request.responder,
                             "request not addressed to a higher-id responder");
  }
  if (!channel.IsConfidential() && !insecure) {
    SendErrorQuietly(channel, kErrKeyExchange, "channel not confidential");
    throw ChannelNotConfidential();
  }
  const PairKey key = source ? source(request.initiator, self) : RandomPairKey();
  WriteFrame(channel, MsgType::kKeyResponse,
             EncodeKeyResponse({request.initiator, self, key}));
  return key;
}

// ---------------------------------------------------------------------------
// ClientNode

ClientNode::ClientNode(SessionConfig session, ClientOptions options,
                       const Trainer& trainer, Dataset shard,
                       TrainerConfig trainer_config)
    : session_(std::move(session)),
      options_(std::move(options)),
      trainer_(trainer),
      shard_(std::move(shard)),
      trainer_config_(trainer_config),
      listener_(std::make_unique<TcpListener>(options_.listen_address)) {}

ClientNode::~ClientNode() { StopAcceptor(); }

size_t ClientNode::key_count() const {
  std::lock_guard lock(mu_);
  return keys_.size();
}

void ClientNode::StopAcceptor() {
  stop_ = true;
  if (acceptor_.joinable()) acceptor_.join();
}

void ClientNode::AcceptLoop() {
  while (!stop_) {
    std::unique_ptr<TcpStream> conn;
    try {
      conn = listener_->Accept(std::chrono::milliseconds(50));
    } catch (const Error& e) {
      std::lock_guard lock(mu_);
      key_error_ = e.what();
      cv_.notify_all();
      return;
    }
    if (conn) HandleIncoming(std::move(conn));
  }
}

void ClientNode::HandleIncoming(std::unique_ptr<TcpStream> conn) {
  conn->SetIoTimeout(options_.io_timeout);
  try {
    const Frame first = ReceiveFrame(*conn);
    if (first.type == MsgType::kKeyRequest) {
      const auto request = ParseKeyRequest(first.payload);
      const PairKey key = ServePairKey(*conn, request, options_.id,
                                       session_.insecure, options_.key_source);
      std::lock_guard lock(mu_);
      if (!keys_.emplace(request.initiator, key).second) {
        key_error_ = "second key request from client " + std::to_string(request.initiator);
      }
      cv_.notify_all();
    } else if (first.type == MsgType::kInitRoster) {
      std::lock_guard lock(mu_);
      if (coordinator_) {
        SendErrorQuietly(*conn, kErrUnexpectedMessage, "session already initialized");
        return;
      }
      roster_payload_ = first.payload;
      coordinator_ = std::move(conn);
      cv_.notify_all();
    } else {
      SendErrorQuietly(*conn, kErrUnexpectedMessage,
                       std::string("unexpected ") + MsgTypeName(first.type));
    }
  } catch (const Error& e) {
    std::lock_guard lock(mu_);
    if (key_error_.empty()) key_error_ = e.what();
    cv_.notify_all();
  }
}

void ClientNode::EstablishKeys(const InitRosterMsg& roster) {
  const ClientId self = options_.id;
  for (const auto& peer : roster.roster) {
    if (peer.id <= self) continue;
    std::unique_ptr<TcpStream> conn;
    try {
      conn = TcpStream::Connect(peer.address, options_.connect_timeout);
    } catch (const Error& e) {
      throw KeyExchangeFailure(self, peer.id, e.what());
    }
    conn->SetIoTimeout(options_.io_timeout);
    PairKey key;
    try {
      key = RequestPairKey(*conn, self, peer.id, session_.insecure);
    } catch (const KeyExchangeFailure&) {
      throw;
    } catch (const Error& e) {
      throw KeyExchangeFailure(self, peer.id, e.what());
    }
    std::lock_guard lock(mu_);
    keys_[peer.id] = key;
  }

  std::unique_lock lock(mu_);
  const auto have_lower = [&] {
    for (const auto& peer : roster.roster) {
      if (peer.id < self && !keys_.contains(peer.id)) return false;
    }
    return true;
  };
  const bool done = cv_.wait_for(lock, options_.session_timeout,
                                 [&] { return have_lower() || !key_error_.empty(); });
  if (!key_error_.empty()) throw KeyExchangeFailure(self, self, key_error_);
  if (!done) {
    for (const auto& peer : roster.roster) {
      if (peer.id < self && !keys_.contains(peer.id)) {
        throw KeyExchangeFailure(peer.id, self, "timed out waiting for key request");
      }
    }
  }
}

ClientOutcome ClientNode::Run() {
  stop_ = false;
  acceptor_ = std::thread(&ClientNode::AcceptLoop, this);

  InitRosterMsg roster;
  {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, options_.session_timeout,
                      [&] { return coordinator_ != nullptr; })) {
      lock.unlock();
      StopAcceptor();
      throw Timeout("client " + std::to_string(options_.id) +
                    ": coordinator never connected");
    }
    roster = ParseInitRoster(roster_payload_);
  }

  try {
    if (roster.recipient != options_.id) {
      throw std::invalid_argument("roster addressed to client " +
                                  std::to_string(roster.recipient));
    }
    SessionConfig check = session_;
    check.clients = roster.roster;
    ValidateSessionConfig(check);
    peers_.clear();
    for (const auto& e : roster.roster) peers_.push_back(e.id);
    std::sort(peers_.begin(), peers_.end());
    EstablishKeys(roster);
  } catch (const std::exception& e) {
    SendErrorQuietly(*coordinator_, kErrKeyExchange, e.what());
    StopAcceptor();
    throw;
  }
  StopAcceptor();

  coordinator_->SetIoTimeout(options_.session_timeout);
  WriteFrame(*coordinator_, MsgType::kAck, EncodeU64(key_count()));

  for (;;) {
    const Frame frame = ReceiveFrame(*coordinator_);
    switch (frame.type) {
      case MsgType::kGlobalModel: {
        auto msg = ParseGlobalModel(frame.payload);
        if (options_.fail_at_round && *options_.fail_at_round == msg.round) {
          coordinator_->Close();
          return ClientOutcome::kInjectedFailure;
        }
        const ModelVector global = DecodeModel(msg.model);
        CheckSchema(session_.schema, global.Schema(), "global model");
        const FixedModel update = ComputeLocalUpdate(global, trainer_, shard_, session_,
                                                     trainer_config_, msg.round);
        const MaskedUpdate masked = MaskModel(update, options_.id, peers_, keys_, msg.round);
        WriteFrame(*coordinator_, MsgType::kMaskedUpdate, EncodeMaskedUpdate(masked));
        ++rounds_completed_;
        break;
      }
      case MsgType::kRoundAbort:
        break;
      case MsgType::kAck:
        coordinator_->Close();
        return ClientOutcome::kCompleted;
      default:
        SendErrorQuietly(*coordinator_, kErrUnexpectedMessage,
                         std::string("unexpected ") + MsgTypeName(frame.type));
        throw IoError(std::string("unexpected ") + MsgTypeName(frame.type) +
                      " from coordinator");
    }
  }
}

// ---------------------------------------------------------------------------
// Coordinator

Coordinator::Coordinator(SessionConfig session, const ModelVector& initial,
                         CoordinatorOptions options)
    : session_(std::move(session)), options_(std::move(options)) {
  ValidateSessionConfig(session_);
  std::sort(session_.clients.begin(), session_.clients.end(),
            [](const RosterEntry& a, const RosterEntry& b) { return a.id < b.id; });
  CheckSchema(session_.schema, initial.Schema(), "initial model");
  global_ = Quantize(initial);
}

Coordinator::~Coordinator() { CloseAll(); }

void Coordinator::CloseAll() {
  for (auto& c : conns_) {
    if (c) c->Close();
  }
  conns_.clear();
}

void Coordinator::InitializeSession() {
  const size_t n = session_.clients.size();
  conns_.clear();
  conns_.resize(n);
  for (const auto& client : session_.clients) {
    try {
      conns_[client.id] = TcpStream::Connect(client.address, options_.connect_timeout);
    } catch (const Error& e) {
      CloseAll();
      throw UnreachableClient(client.id, e.what());
    }
    conns_[client.id]->SetIoTimeout(options_.io_timeout);
  }
  for (const auto& client : session_.clients) {
    WriteFrame(*conns_[client.id], MsgType::kInitRoster,
               EncodeInitRoster({client.id, session_.insecure, session_.clients}));
  }

  size_t total_keys = 0;
  for (const auto& client : session_.clients) {
    try {
      const Frame f = ReceiveFrame(*conns_[client.id]);
      if (options_.recorder) options_.recorder(kSetupRound, client.id, f.type, f.payload);
      if (f.type != MsgType::kAck) throw IoError("expected Ack");
      const uint64_t keys = ParseU64(f.payload);
      if (keys != n - 1) {
        throw IoError("holds " + std::to_string(keys) + " keys, expected " +
                      std::to_string(n - 1));
      }
      total_keys += keys;
    } catch (const Error& e) {
      CloseAll();
      throw KeyExchangeFailure(client.id, client.id, e.what());
    }
  }
  established_pairs_ = total_keys / 2;
  next_round_ = 0;
}

const ModelVector& Coordinator::RunGlobalEpoch(uint64_t round) {
  const size_t n = session_.clients.size();
  if (conns_.size() != n) throw std::logic_error("session not initialized");

  state_ = RoundState{};
  state_.round = round;
  for (const auto& c : session_.clients) state_.expected.insert(c.id);
  state_.phase = RoundState::Phase::kDistributing;

  const auto broadcast = EncodeFrame(MsgType::kGlobalModel,
                                     EncodeGlobalModel({round, EncodeModel(global_)}));
  std::vector<ClientId> failed;
  std::string detail;
  enum class Cause { kIo, kSchema, kRound } cause = Cause::kIo;
  auto fail = [&](ClientId id, const std::string& why, bool drop) {
    failed.push_back(id);
    if (detail.empty()) detail = "client " + std::to_string(id) + ": " + why;
    if (drop && conns_[id]) {
      conns_[id]->Close();
      conns_[id].reset();
    }
  };

  for (ClientId id = 0; id < n; ++id) {
    if (!conns_[id]) {
      fail(id, "connection lost earlier", false);
      continue;
    }
    try {
      conns_[id]->WriteAll(broadcast);
    } catch (const Error& e) {
      fail(id, e.what(), true);
    }
  }

  state_.phase = RoundState::Phase::kCollecting;
  for (ClientId id = 0; id < n; ++id) {
    if (!conns_[id] || std::find(failed.begin(), failed.end(), id) != failed.end()) continue;
    try {
      const Frame f = ReceiveFrame(*conns_[id]);
      if (options_.recorder) options_.recorder(round, id, f.type, f.payload);
      if (f.type != MsgType::kMaskedUpdate) {
        throw IoError(std::string("expected MaskedUpdate, got ") + MsgTypeName(f.type));
      }
      MaskedUpdate update = ParseMaskedUpdate(f.payload);
      if (update.client_id != id) throw IoError("update carries a foreign client id");
      if (update.round != round) {
        throw RoundMismatch("client " + std::to_string(id) + " sent round " +
                            std::to_string(update.round));
      }
      CheckSchema(session_.schema, update.payload.Schema(),
                  "update from client " + std::to_string(id));
      state_.received.emplace(id, std::move(update));
    } catch (const SchemaMismatch& e) {
      cause = Cause::kSchema;
      fail(id, e.what(), false);
    } catch (const RoundMismatch& e) {
      cause = Cause::kRound;
      fail(id, e.what(), false);
    } catch (const Error& e) {
      fail(id, e.what(), true);
    }
  }

  if (!failed.empty()) {
    state_.phase = RoundState::Phase::kAborted;
    const auto abort = EncodeU64(round);
    for (ClientId id = 0; id < n; ++id) {
      if (!conns_[id]) continue;
      try {
        WriteFrame(*conns_[id], MsgType::kRoundAbort, abort);
      } catch (const Error&) {
        conns_[id].reset();
      }
    }
    std::sort(failed.begin(), failed.end());
    switch (cause) {
      case Cause::kSchema: throw SchemaMismatch(detail);
      case Cause::kRound: throw RoundMismatch(detail);
      case Cause::kIo: throw IncompleteRound(round, failed, detail);
    }
  }

  std::vector<MaskedUpdate> updates;
  updates.reserve(n);
  for (auto& [id, u] : state_.received) updates.push_back(u);
  global_ = Quantize(Aggregate(updates, n));
  state_.phase = RoundState::Phase::kComplete;
  next_round_ = round + 1;
  return global_;
}

const ModelVector& Coordinator::RunSession(
    const std::function<void(uint64_t, const ModelVector&)>& on_round) {
  const uint64_t rounds = RoundCount(session_);
  int failures = 0;
  while (next_round_ < rounds) {
    const uint64_t round = next_round_;
    auto on_failure = [&](const Error& e) {
      if (++failures >= options_.max_failed_rounds) {
        CloseAll();
        throw SessionAborted(round, failures, e.what());
      }
    };
    try {
      RunGlobalEpoch(round);
      failures = 0;
      if (on_round) on_round(round, global_);
    } catch (const IncompleteRound& e) {
      on_failure(e);
    } catch (const SchemaMismatch& e) {
      on_failure(e);
    } catch (const RoundMismatch& e) {
      on_failure(e);
    }
  }
  for (auto& c : conns_) {
    if (!c) continue;
    try {
      WriteFrame(*c, MsgType::kAck, EncodeU64(rounds));
    } catch (const Error&) {
    }
  }
  CloseAll();
  return global_;
}

}  // namespace maskfed
