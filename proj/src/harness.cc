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

#include "maskfed/harness.h"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "maskfed/errors.h"
#include "maskfed/fixedpoint.h"
#include "maskfed/masking.h"
#include "maskfed/transport.h"

extern char** environ;

namespace maskfed {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void WriteJson(const fs::path& path, const json& j) { WriteText(path, j.dump(2) + "\n"); }

std::string EpochFileName(uint64_t round) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%03llu.json", static_cast<unsigned long long>(round));
  return buf;
}

json BandsToJson(const std::vector<Band>& bands) {
  json out = json::array();
  for (const auto& b : bands) out.push_back({b.lo, b.hi});
  return out;
}

// Collects per-round metrics and mirrors them to output_dir when set.
class RunWriter {
 public:
  RunWriter(const RunConfig& cfg, const Experiment& exp)
      : dir_(cfg.output_dir), exp_(exp) {
    if (dir_.empty()) return;
    fs::create_directories(dir_);
    fs::remove(dir_ / "final.bin");
    fs::remove(dir_ / "final.json");

    json manifest = RunConfigToJson(cfg);
    manifest["manifest"] = {
        {"version", kVersion},
        {"regime", RegimeName(exp.plan.regime)},
        {"config_digest", exp.digest},
        {"split_digest", SplitPlanDigest(exp.plan)},
        {"rounds", RoundCount(exp.session)},
        {"schema", {{"weights", exp.data.dim()}, {"bias", 1}}},
        {"trainer",
         {{"kind", "logistic_sgd"},
          {"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},
          {"momentum", 0.0},
          {"shuffle", "chacha20 fisher-yates, seed ^ epoch"}}},
        {"band_to_client", exp.plan.band_to_client},
        {"rows", exp.data.rows()},
    };
    WriteJson(dir_ / "manifest.json", manifest);
    WriteJson(dir_ / "split_plan.json", SplitPlanToJson(exp.plan));
  }

  void Round(RunResult& result, uint64_t round, const ModelVector& global) {
    EvalReport report = Evaluate(global, exp_.eval_set, round, exp_.digest);
    result.train_loss.push_back(LogisticLoss(global, exp_.train_union));
    result.rounds_completed = round + 1;
    if (!dir_.empty()) WriteJson(dir_ / EpochFileName(round), ReportToJson(report));
    result.reports.push_back(std::move(report));
  }

  void Final(RunResult& result) {
    result.completed = true;
    if (dir_.empty()) return;
    EvalReport final_report = result.reports.empty()
                                  ? Evaluate(result.final_model, exp_.eval_set, 0, exp_.digest)
                                  : result.reports.back();
    WriteJson(dir_ / "final.json", ReportToJson(final_report));
    const auto bytes = FinalModelBytes(result.final_model);
    WriteText(dir_ / "final.bin", std::string(bytes.begin(), bytes.end()));
    WriteText(dir_ / "report.txt", FormatReportTable(result.reports));
  }

 private:
  fs::path dir_;
  const Experiment& exp_;
};

uint16_t FreeLoopbackPort() {
  TcpListener probe("127.0.0.1:0");
  return probe.port();
}

RunConfig WithAssignedPorts(RunConfig cfg) {
  for (auto& c : cfg.clients) {
    auto [host, port] = SplitAddress(c.address);
    if (port == 0) c.address = (host.empty() ? "127.0.0.1" : host) + ":" +
                               std::to_string(FreeLoopbackPort());
  }
  return cfg;
}

pid_t Spawn(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, args[0].c_str(), nullptr, nullptr, argv.data(), environ);
  if (rc != 0) {
    throw std::runtime_error("cannot spawn " + args[0] + ": " + std::strerror(rc));
  }
  return pid;
}

// Waits up to `grace` for the child, then kills it. Returns the exit status
// (128 + signal for signalled children).
int Reap(pid_t pid, std::chrono::milliseconds grace) {
  const auto deadline = std::chrono::steady_clock::now() + grace;
  int status = 0;
  for (;;) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) return -1;
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

}  // namespace

RunConfig RunConfigFromJson(const json& j) {
  RunConfig cfg;
  if (j.contains("clients")) {
    for (const auto& c : j.at("clients")) {
      cfg.clients.push_back({c.at("id").get<ClientId>(), c.at("addr").get<std::string>()});
    }
  } else if (j.contains("client_count")) {
    cfg.clients = LoopbackRoster(j.at("client_count").get<size_t>());
  } else {
    throw std::invalid_argument("config needs 'clients' or 'client_count'");
  }
  cfg.global_epochs = j.value("global_epochs", cfg.global_epochs);
  cfg.local_epochs = j.value("local_epochs", cfg.local_epochs);
  cfg.aggregate_every = j.value("aggregate_every", cfg.aggregate_every);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    cfg.seeds.data = s.value("data", cfg.seeds.data);
    cfg.seeds.shuffle = s.value("shuffle", cfg.seeds.shuffle);
    cfg.seeds.keys = s.value("keys", cfg.seeds.keys);
  }
  cfg.regime = ParseRegime(j.value("regime", std::string(RegimeName(cfg.regime))));
  cfg.dataset_path = j.value("dataset_path", cfg.dataset_path);
  cfg.insecure = j.value("insecure", cfg.insecure);
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    cfg.synthetic.rows = s.value("rows", cfg.synthetic.rows);
    cfg.synthetic.dim = s.value("dim", cfg.synthetic.dim);
    cfg.synthetic.separation = s.value("separation", cfg.synthetic.separation);
    cfg.synthetic.age_label_correlation =
        s.value("age_label_correlation", cfg.synthetic.age_label_correlation);
  }
  cfg.synthetic.seed = cfg.seeds.data;
  cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
  cfg.attribute = j.value("attribute", cfg.attribute);
  if (j.contains("bands")) {
    cfg.bands.clear();
    for (const auto& b : j.at("bands")) cfg.bands.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  }
  const std::string mapping = j.value("band_mapping", std::string("merge_tail"));
  if (mapping == "merge_tail") {
    cfg.band_mapping = BandMapping::kMergeTail;
  } else if (mapping == "round_robin") {
    cfg.band_mapping = BandMapping::kRoundRobin;
  } else {
    throw std::invalid_argument("band_mapping must be merge_tail or round_robin");
  }
  cfg.shift_boundary = j.value("shift_boundary", cfg.shift_boundary);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.max_failed_rounds = j.value("max_failed_rounds", cfg.max_failed_rounds);
  cfg.connect_timeout_ms = j.value("connect_timeout_ms", cfg.connect_timeout_ms);
  cfg.io_timeout_ms = j.value("io_timeout_ms", cfg.io_timeout_ms);
  cfg.float_aggregate = j.value("float_aggregate", cfg.float_aggregate);

  if (cfg.clients.empty()) throw std::invalid_argument("at least one client required");
  if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (cfg.local_epochs == 0 || cfg.aggregate_every == 0) {
    throw std::invalid_argument("local_epochs and aggregate_every must be positive");
  }
  if (cfg.max_failed_rounds < 1) throw std::invalid_argument("max_failed_rounds must be >= 1");
  if (cfg.seeds.keys != 0 && !cfg.insecure) {
    throw std::invalid_argument("deterministic keys (seeds.keys) require insecure mode");
  }
  return cfg;
}

json RunConfigToJson(const RunConfig& cfg) {
  json clients = json::array();
  for (const auto& c : cfg.clients) clients.push_back({{"id", c.id}, {"addr", c.address}});
  return {
      {"clients", std::move(clients)},
      {"global_epochs", cfg.global_epochs},
      {"local_epochs", cfg.local_epochs},
      {"aggregate_every", cfg.aggregate_every},
      {"learning_rate", cfg.learning_rate},
      {"batch_size", cfg.batch_size},
      {"seeds", {{"data", cfg.seeds.data}, {"shuffle", cfg.seeds.shuffle}, {"keys", cfg.seeds.keys}}},
      {"regime", RegimeName(cfg.regime)},
      {"dataset_path", cfg.dataset_path},
      {"insecure", cfg.insecure},
      {"synthetic",
       {{"rows", cfg.synthetic.rows},
        {"dim", cfg.synthetic.dim},
        {"separation", cfg.synthetic.separation},
        {"age_label_correlation", cfg.synthetic.age_label_correlation}}},
      {"test_fraction", cfg.test_fraction},
      {"attribute", cfg.attribute},
      {"bands", BandsToJson(cfg.bands)},
      {"band_mapping", cfg.band_mapping == BandMapping::kMergeTail ? "merge_tail" : "round_robin"},
      {"shift_boundary", cfg.shift_boundary},
      {"output_dir", cfg.output_dir},
      {"max_failed_rounds", cfg.max_failed_rounds},
      {"connect_timeout_ms", cfg.connect_timeout_ms},
      {"io_timeout_ms", cfg.io_timeout_ms},
      {"float_aggregate", cfg.float_aggregate},
  };
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return RunConfigFromJson(json::parse(in));
}

std::string ConfigDigest(const RunConfig& cfg) {
  json j = RunConfigToJson(cfg);
  j.erase("output_dir");
  j.erase("connect_timeout_ms");
  j.erase("io_timeout_ms");
  j.erase("max_failed_rounds");
  j["clients"] = cfg.clients.size();
  j["seeds"].erase("keys");
  return Fnv1aHex(j.dump());
}

std::vector<RosterEntry> LoopbackRoster(size_t n) {
  std::vector<RosterEntry> roster;
  for (size_t i = 0; i < n; ++i) roster.push_back({static_cast<ClientId>(i), "127.0.0.1:0"});
  return roster;
}

TrainerConfig Experiment::ClientTrainerConfig(const RunConfig& cfg, ClientId id) const {
  TrainerConfig t;
  t.learning_rate = cfg.learning_rate;
  t.local_epochs = cfg.local_epochs;
  t.batch_size = cfg.batch_size;
  t.seed = cfg.seeds.shuffle ^ (static_cast<uint64_t>(id) * 0x9e3779b97f4a7c15ull);
  return t;
}

Experiment BuildExperiment(const RunConfig& cfg) {
  Experiment exp;
  exp.data = cfg.dataset_path.empty() ? GenerateSynthetic(cfg.synthetic)
                                      : ReadCsvFile(cfg.dataset_path);
  const size_t n = cfg.client_count();
  switch (cfg.regime) {
    case Regime::kIID:
      exp.plan = SplitIID(exp.data, n, cfg.seeds.data, cfg.test_fraction);
      break;
    case Regime::kNonIIDByAttribute:
      exp.plan = SplitNonIIDByAttribute(exp.data, n, cfg.attribute, cfg.bands,
                                        cfg.seeds.data, cfg.test_fraction, cfg.band_mapping);
      break;
    case Regime::kIIDShiftedTrainTest:
      exp.plan = SplitIIDShifted(exp.data, n, cfg.attribute, cfg.shift_boundary, cfg.seeds.data);
      break;
  }
  ValidateSplitPlan(exp.plan, exp.data.rows());

  std::vector<size_t> train_rows, test_rows;
  for (const auto& c : exp.plan.clients) {
    exp.train_shards.push_back(exp.data.Subset(c.train));
    train_rows.insert(train_rows.end(), c.train.begin(), c.train.end());
    test_rows.insert(test_rows.end(), c.test.begin(), c.test.end());
  }
  exp.train_union = exp.data.Subset(train_rows);
  exp.eval_set = exp.data.Subset(test_rows);

  exp.session.clients = cfg.clients;
  exp.session.global_epochs = cfg.global_epochs;
  exp.session.local_epochs = cfg.local_epochs;
  exp.session.aggregate_every = cfg.aggregate_every;
  exp.session.schema = LogisticSchema(exp.data.dim());
  exp.session.rng_seed = cfg.seeds.shuffle;
  exp.session.insecure = cfg.insecure;
  ValidateSessionConfig(exp.session);
  exp.digest = ConfigDigest(cfg);
  return exp;
}

RunResult RunMock(const RunConfig& cfg, const MockHooks& hooks) {
  const Experiment exp = BuildExperiment(cfg);
  RunWriter writer(cfg, exp);
  const LogisticTrainer trainer(exp.data.dim());
  const size_t n = cfg.client_count();

  RunResult result;
  ModelVector global = Quantize(ModelVector::Zeros(exp.session.schema));
  const uint64_t rounds = RoundCount(exp.session);
  for (uint64_t round = 0; round < rounds; ++round) {
    if (cfg.float_aggregate) {
      ModelVector sum = ModelVector::Zeros(exp.session.schema);
      for (ClientId id = 0; id < n; ++id) {
        const ModelVector local = trainer.TrainLocal(
            global, exp.train_shards[id],
            RoundTrainerConfig(exp.session, exp.ClientTrainerConfig(cfg, id), round));
        for (size_t l = 0; l < sum.layers.size(); ++l) {
          for (size_t i = 0; i < sum.layers[l].values.size(); ++i) {
            sum.layers[l].values[i] += local.layers[l].values[i];
          }
        }
      }
      for (auto& layer : sum.layers) {
        for (auto& v : layer.values) v /= static_cast<double>(n);
      }
      global = std::move(sum);
    } else {
      std::vector<MaskedUpdate> updates;
      for (ClientId id = 0; id < n; ++id) {
        FixedModel update = ComputeLocalUpdate(global, trainer, exp.train_shards[id],
                                               exp.session, exp.ClientTrainerConfig(cfg, id),
                                               round);
        if (hooks.on_plaintext_update) hooks.on_plaintext_update(round, id, update);
        updates.push_back({id, round, std::move(update)});
      }
      global = Quantize(Aggregate(updates, n));
    }
    writer.Round(result, round, global);
  }
  result.final_model = global;
  writer.Final(result);
  return result;
}

RunResult RunCoordinator(const RunConfig& cfg, const CoordinatorOptions::Recorder& recorder) {
  const Experiment exp = BuildExperiment(cfg);
  RunWriter writer(cfg, exp);

  CoordinatorOptions options;
  options.connect_timeout = std::chrono::milliseconds(cfg.connect_timeout_ms);
  options.io_timeout = std::chrono::milliseconds(cfg.io_timeout_ms);
  options.max_failed_rounds = cfg.max_failed_rounds;
  options.recorder = recorder;
  Coordinator coordinator(exp.session, ModelVector::Zeros(exp.session.schema), options);

  RunResult result;
  try {
    coordinator.InitializeSession();
    coordinator.RunSession([&](uint64_t round, const ModelVector& global) {
      writer.Round(result, round, global);
    });
  } catch (const Error& e) {
    result.completed = false;
    result.error = e.what();
    result.final_model = coordinator.global_model();
    return result;
  }
  result.final_model = coordinator.global_model();
  writer.Final(result);
  return result;
}

int RunClient(const RunConfig& cfg, ClientId id, std::optional<uint64_t> fail_at_round) {
  const Experiment exp = BuildExperiment(cfg);
  if (id >= cfg.client_count()) {
    throw std::invalid_argument("client id " + std::to_string(id) + " not in roster");
  }
  const LogisticTrainer trainer(exp.data.dim());
  ClientOptions options;
  options.id = id;
  for (const auto& c : cfg.clients) {
    if (c.id == id) options.listen_address = c.address;
  }
  options.connect_timeout = std::chrono::milliseconds(cfg.connect_timeout_ms);
  options.io_timeout = std::chrono::milliseconds(cfg.io_timeout_ms);
  options.session_timeout = std::chrono::milliseconds(cfg.io_timeout_ms);
  if (cfg.seeds.keys != 0) options.key_source = SeededKeySource(cfg.seeds.keys);
  options.fail_at_round = fail_at_round;

  ClientNode node(exp.session, options, trainer, exp.train_shards[id],
                  exp.ClientTrainerConfig(cfg, id));
  const ClientOutcome outcome = node.Run();
  return outcome == ClientOutcome::kCompleted ? 0 : 3;
}

RunResult RunTrue(const RunConfig& cfg_in, const TrueRunOptions& options) {
  if (options.client_executable.empty()) {
    throw std::invalid_argument("RunTrue needs the client executable path");
  }
  RunConfig cfg = WithAssignedPorts(cfg_in);

  fs::path config_dir;
  bool temp_dir = false;
  if (cfg.output_dir.empty()) {
    std::string templ = (fs::temp_directory_path() / "maskfed_XXXXXX").string();
    if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
    config_dir = templ;
    temp_dir = true;
  } else {
    config_dir = cfg.output_dir;
    fs::create_directories(config_dir);
  }
  const fs::path config_path = config_dir / "run.resolved.json";
  WriteJson(config_path, RunConfigToJson(cfg));

  std::vector<pid_t> children;
  for (const auto& c : cfg.clients) {
    std::vector<std::string> args{options.client_executable, "client", "--id",
                                  std::to_string(c.id), "--config", config_path.string()};
    if (auto it = options.fail_at_round.find(c.id); it != options.fail_at_round.end()) {
      args.push_back("--fail-at-round");
      args.push_back(std::to_string(it->second));
    }
    children.push_back(Spawn(args));
    if (options.on_spawn) options.on_spawn(c.id, children.back());
  }

  RunResult result;
  try {
    result = RunCoordinator(cfg, options.recorder);
  } catch (...) {
    for (pid_t pid : children) Reap(pid, std::chrono::milliseconds(0));
    if (temp_dir) fs::remove_all(config_dir);
    throw;
  }
  // Children exit once the coordinator hangs up; stragglers are killed.
  for (pid_t pid : children) Reap(pid, std::chrono::seconds(10));
  if (temp_dir) fs::remove_all(config_dir);
  return result;
}

json RunRegimeSuite(const RunConfig& base, RunMode mode, const TrueRunOptions& options) {
  json table = json::object();
  for (Regime regime : {Regime::kIID, Regime::kNonIIDByAttribute, Regime::kIIDShiftedTrainTest}) {
    RunConfig cfg = base;
    cfg.regime = regime;
    if (!base.output_dir.empty()) cfg.output_dir = (fs::path(base.output_dir) / RegimeName(regime)).string();
    json row;
    try {
      const RunResult r = mode == RunMode::kMock ? RunMock(cfg) : RunTrue(cfg, options);
      row["completed"] = r.completed;
      if (r.completed && !r.reports.empty()) {
        const auto report_json = ReportToJson(r.reports.back());
        row["auc"] = r.reports.back().auc;
        row["confusion"] = report_json["confusion"];
        row["n_eval"] = r.reports.back().n_eval;
      } else {
        row["error"] = r.error;
      }
    } catch (const std::exception& e) {
      row["completed"] = false;
      row["error"] = e.what();
    }
    table[RegimeName(regime)] = std::move(row);
  }
  if (!base.output_dir.empty()) {
    fs::create_directories(base.output_dir);
    WriteJson(fs::path(base.output_dir) / "suite.json", table);
  }
  return table;
}

std::vector<uint8_t> FinalModelBytes(const ModelVector& m) {
  return SerializeModel(EncodeModel(m));
}

ModelVector LoadFinalModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return DecodeModel(ParseModel(bytes));
}

}  // namespace maskfed
