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

#ifndef MASKFED_HARNESS_H_
#define MASKFED_HARNESS_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "maskfed/datadist.h"
#include "maskfed/metrics.h"
#include "maskfed/protocol.h"
#include "maskfed/trainer.h"

namespace maskfed {

inline constexpr const char* kVersion = "0.3.0";

// Everything needed to reproduce a run; mirrors run.json.
struct RunConfig {
  std::vector<RosterEntry> clients;  // port 0 is replaced by a free port
  uint64_t global_epochs = 20;
  uint32_t local_epochs = 1;
  uint32_t aggregate_every = 1;
  double learning_rate = 0.01;
  size_t batch_size = 32;
  struct Seeds {
    uint64_t data = 42;
    uint64_t shuffle = 7;
    uint64_t keys = 0;  // 0: OS randomness; otherwise deterministic (insecure only)
  } seeds;
  Regime regime = Regime::kIID;
  std::string dataset_path;  // empty: generate `synthetic` with seeds.data
  bool insecure = false;

  SyntheticSpec synthetic;
  double test_fraction = 0.2;
  std::string attribute = "age";
  std::vector<Band> bands = DefaultAgeBands();
  BandMapping band_mapping = BandMapping::kMergeTail;
  double shift_boundary = 60;

  std::string output_dir;  // empty: write nothing
  int max_failed_rounds = 3;
  uint32_t connect_timeout_ms = 10000;
  uint32_t io_timeout_ms = 60000;
  bool float_aggregate = false;

  size_t client_count() const { return clients.size(); }
};

// Unknown keys are ignored, so a run manifest is itself a valid config.
// Throws std::invalid_argument / nlohmann::json::exception on bad input.
RunConfig RunConfigFromJson(const nlohmann::json& j);
nlohmann::json RunConfigToJson(const RunConfig& cfg);
RunConfig LoadRunConfig(const std::string& path);

// Digest over every result-affecting field (not addresses or output paths).
std::string ConfigDigest(const RunConfig& cfg);

// Loopback roster "127.0.0.1:0" x n.
std::vector<RosterEntry> LoopbackRoster(size_t n);

// Data, split and per-client shards derived deterministically from a config.
struct Experiment {
  Dataset data;
  SplitPlan plan;
  std::vector<Dataset> train_shards;
  Dataset train_union;
  Dataset eval_set;  // union of every client's test rows
  SessionConfig session;
  std::string digest;

  TrainerConfig ClientTrainerConfig(const RunConfig& cfg, ClientId id) const;
};

Experiment BuildExperiment(const RunConfig& cfg);

struct RunResult {
  bool completed = false;
  std::string error;
  ModelVector final_model;  // on abort: the last successfully installed model
  uint64_t rounds_completed = 0;
  std::vector<EvalReport> reports;  // one per completed round
  std::vector<double> train_loss;   // global model, union of train shards
};

struct MockHooks {
  // Each client's plaintext encoded update, before aggregation.
  std::function<void(uint64_t round, ClientId id, const FixedModel& update)>
      on_plaintext_update;
};

// Single process: clients train serially in id order and are aggregated
// through the same encode / wrapping-sum / decode / divide path as the
// distributed protocol (masks are omitted; they cancel exactly). With
// cfg.float_aggregate the naive floating-point mean is used instead.
RunResult RunMock(const RunConfig& cfg, const MockHooks& hooks = {});

// Coordinator side of a distributed run against already-listening clients.
RunResult RunCoordinator(const RunConfig& cfg,
                         const CoordinatorOptions::Recorder& recorder = {});

// Client process body. Returns the process exit status.
int RunClient(const RunConfig& cfg, ClientId id,
              std::optional<uint64_t> fail_at_round = std::nullopt);

struct TrueRunOptions {
  std::string client_executable;  // the maskfed binary
  std::map<ClientId, uint64_t> fail_at_round;
  CoordinatorOptions::Recorder recorder;
  std::function<void(ClientId, int pid)> on_spawn;
};

// Spawns one `maskfed client` child process per roster entry, then runs the
// coordinator in this process.
RunResult RunTrue(const RunConfig& cfg, const TrueRunOptions& options);

enum class RunMode { kMock, kTrue };

// Runs IID, non-IID-by-attribute and shifted train/test regimes on the same
// data and returns {regime -> {auc, confusion, n_eval, completed}}.
nlohmann::json RunRegimeSuite(const RunConfig& base, RunMode mode,
                              const TrueRunOptions& options = {});

// Bytes of final.bin for a model (wire format of its fixed-point encoding).
std::vector<uint8_t> FinalModelBytes(const ModelVector& m);
ModelVector LoadFinalModel(const std::string& path);

}  // namespace maskfed

#endif  // MASKFED_HARNESS_H_
