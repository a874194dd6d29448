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

#ifndef MASKFED_PROTOCOL_H_
#define MASKFED_PROTOCOL_H_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "maskfed/dataset.h"
#include "maskfed/fixedpoint.h"
#include "maskfed/masking.h"
#include "maskfed/model.h"
#include "maskfed/trainer.h"
#include "maskfed/transport.h"

namespace maskfed {

// Shared by coordinator and clients. Client ids must be exactly 0..n-1; the
// id order fixes mask signs and who initiates each key exchange.
struct SessionConfig {
  std::vector<RosterEntry> clients;
  uint64_t global_epochs = 20;
  uint32_t local_epochs = 1;
  // Aggregate once per this many global epochs; local passes accumulate.
  uint32_t aggregate_every = 1;
  ModelSchema schema;
  uint64_t rng_seed = 0;
  bool insecure = false;
};

// Throws DuplicateClientId, or std::invalid_argument for ids that are not a
// permutation of 0..n-1 or for zero epochs counts.
void ValidateSessionConfig(const SessionConfig& cfg);

// Number of aggregation rounds: ceil(global_epochs / aggregate_every).
uint64_t RoundCount(const SessionConfig& cfg);

// Trainer settings for `round`: local_epochs * (global epochs the round
// covers) passes, with epoch indices continuing across rounds.
TrainerConfig RoundTrainerConfig(const SessionConfig& cfg,
                                 const TrainerConfig& base, uint64_t round);

// Client-side work for one round, shared verbatim by the distributed client
// and the single-process mock: train from `global` and encode.
FixedModel ComputeLocalUpdate(const ModelVector& global, const Trainer& trainer,
                              const Dataset& shard, const SessionConfig& cfg,
                              const TrainerConfig& base, uint64_t round);

// Produces the pair key for (initiator, responder) on the responder side.
using KeySource = std::function<PairKey(ClientId initiator, ClientId responder)>;

// Development-only deterministic keys derived from `seed`; never use with
// real data.
KeySource SeededKeySource(uint64_t seed);

// Initiator side: self < peer. Refuses (ChannelNotConfidential) to run over a
// plain channel unless `insecure`.
PairKey RequestPairKey(ByteStream& channel, ClientId self, ClientId peer,
                       bool insecure);

// Responder side for a received KeyRequest: samples the key, returns it over
// the channel and to the caller. On refusal an Error frame is sent first.
PairKey ServePairKey(ByteStream& channel, const KeyRequestMsg& request,
                     ClientId self, bool insecure, const KeySource& source);

struct ClientOptions {
  ClientId id = 0;
  std::string listen_address;  // "host:port"; port 0 picks one
  std::chrono::milliseconds connect_timeout{10000};
  std::chrono::milliseconds io_timeout{60000};
  // How long to wait for the coordinator and for lower-id peers.
  std::chrono::milliseconds session_timeout{60000};
  KeySource key_source;  // defaults to RandomPairKey
  // Fault injection: drop every connection on receiving this round's model.
  std::optional<uint64_t> fail_at_round;
};

enum class ClientOutcome { kCompleted, kInjectedFailure };

// One participant. Owns a listener that serves key requests from lower-id
// peers and the coordinator's control connection; training and
// communication then alternate in lockstep.
class ClientNode {
 public:
  // Binds the listener immediately so port() is known before Run().
  ClientNode(SessionConfig session, ClientOptions options, const Trainer& trainer,
             Dataset shard, TrainerConfig trainer_config);
  ~ClientNode();
  ClientNode(const ClientNode&) = delete;
  ClientNode& operator=(const ClientNode&) = delete;

  uint16_t port() const { return listener_->port(); }

  // Blocks until the coordinator ends the session. Throws on protocol or
  // I/O failure.
  ClientOutcome Run();

  size_t key_count() const;
  uint64_t rounds_completed() const { return rounds_completed_; }

 private:
  void AcceptLoop();
  void HandleIncoming(std::unique_ptr<TcpStream> conn);
  void EstablishKeys(const InitRosterMsg& roster);
  void StopAcceptor();

  SessionConfig session_;
  ClientOptions options_;
  const Trainer& trainer_;
  Dataset shard_;
  TrainerConfig trainer_config_;

  std::unique_ptr<TcpListener> listener_;
  std::thread acceptor_;
  std::atomic<bool> stop_{false};

  mutable std::mutex mu_;
  std::condition_variable cv_;
  KeyRing keys_;
  std::unique_ptr<TcpStream> coordinator_;
  std::vector<uint8_t> roster_payload_;
  std::string key_error_;

  std::vector<ClientId> peers_;
  uint64_t rounds_completed_ = 0;
};

struct RoundState {
  enum class Phase { kDistributing, kCollecting, kComplete, kAborted };

  uint64_t round = 0;
  std::set<ClientId> expected;
  std::map<ClientId, MaskedUpdate> received;
  Phase phase = Phase::kDistributing;
};

struct CoordinatorOptions {
  // Sees every frame payload the coordinator receives. Setup frames carry
  // round ~0.
  using Recorder = std::function<void(uint64_t round, ClientId from, MsgType type,
                                      std::span<const uint8_t> payload)>;

  std::chrono::milliseconds connect_timeout{10000};
  std::chrono::milliseconds io_timeout{60000};
  int max_failed_rounds = 3;
  Recorder recorder;
};

// Coordinator role. Sees only the roster, masked payloads and aggregates.
class Coordinator {
 public:
  // `initial` is snapped to the fixed-point grid so that what clients decode
  // equals the coordinator's global model exactly.
  Coordinator(SessionConfig session, const ModelVector& initial,
              CoordinatorOptions options = {});
  ~Coordinator();

  // Connects to every client, broadcasts the roster and waits until each
  // client reports all n-1 pair keys. Throws UnreachableClient,
  // KeyExchangeFailure, DuplicateClientId.
  void InitializeSession();

  // Distributes the global model, collects one masked update per client and
  // installs the quantized secure average. On any failure the round is
  // aborted, survivors are told so, the global model is left unchanged and
  // IncompleteRound / SchemaMismatch / RoundMismatch is thrown.
  const ModelVector& RunGlobalEpoch(uint64_t round);

  // Runs every round, retrying a failed round up to max_failed_rounds
  // consecutive times before throwing SessionAborted. `on_round` runs after
  // each successful round.
  const ModelVector& RunSession(
      const std::function<void(uint64_t round, const ModelVector&)>& on_round = {});

  const ModelVector& global_model() const { return global_; }
  const RoundState& last_round() const { return state_; }
  size_t established_pairs() const { return established_pairs_; }
  uint64_t next_round() const { return next_round_; }

 private:
  void CloseAll();

  SessionConfig session_;
  CoordinatorOptions options_;
  ModelVector global_;
  std::vector<std::unique_ptr<TcpStream>> conns_;
  RoundState state_;
  size_t established_pairs_ = 0;
  uint64_t next_round_ = 0;
};

}  // namespace maskfed

#endif  // MASKFED_PROTOCOL_H_
