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

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <signal.h>
#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gradcheck.h"
#include "maskfed/chacha20.h"
#include "maskfed/datadist.h"
#include "maskfed/errors.h"
#include "maskfed/fixedpoint.h"
#include "maskfed/harness.h"
#include "maskfed/masking.h"
#include "maskfed/trainer.h"
#include "maskfed/transport.h"
#include "wire_support.h"

namespace maskfed {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void Report(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (limit_s > 0 && secs >= limit_s) {
    out.pass = false;
    out.detail += " [over time limit " + std::to_string(limit_s) + " s]";
  }
  if (!out.pass) ++failures;
  std::printf("CRITERION %2d %s  %-34s %7.2fs  %s\n", id, out.pass ? "PASS" : "FAIL", title, secs,
              out.detail.c_str());
  std::fflush(stdout);
}

ModelVector RandomModel(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> d(-100.0, 100.0);
  ModelVector m{{{"conv", std::vector<double>(64)}, {"fc", std::vector<double>(33)},
                 {"bias", std::vector<double>(3)}}};
  for (auto& l : m.layers) {
    for (auto& v : l.values) v = d(gen);
  }
  return m;
}

// Criteria 1 and 2 share the trials.
struct MaskTrials {
  size_t trials = 0;
  size_t sum_mismatches = 0;
  size_t mean_violations = 0;
  double worst_ratio = 0;  // max |err| / (n 2^-25)
};

MaskTrials RunMaskTrials() {
  MaskTrials t;
  std::mt19937_64 gen(20260101);
  for (size_t n : {2, 3, 5, 10}) {
    std::vector<ClientId> ids(n);
    for (ClientId i = 0; i < n; ++i) ids[i] = i;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<KeyRing> rings(n);
      for (ClientId i = 0; i < n; ++i) {
        for (ClientId j = i + 1; j < n; ++j) {
          const PairKey k = RandomPairKey();
          rings[i][j] = k;
          rings[j][i] = k;
        }
      }
      std::vector<ModelVector> plain;
      std::vector<MaskedUpdate> masked;
      FixedModel plain_sum;
      for (ClientId i = 0; i < n; ++i) {
        plain.push_back(RandomModel(gen));
        const FixedModel enc = EncodeModel(plain.back());
        plain_sum = i == 0 ? enc : WrappingAdd(plain_sum, enc);
        masked.push_back(MaskModel(enc, i, ids, rings[i], static_cast<uint64_t>(trial)));
      }
      ++t.trials;
      if (SumPayloads(masked) != plain_sum) ++t.sum_mismatches;

      const ModelVector agg = Aggregate(masked, n);
      const double bound = static_cast<double>(n) * 0x1.0p-25;
      bool ok = true;
      for (size_t l = 0; l < agg.layers.size(); ++l) {
        for (size_t k = 0; k < agg.layers[l].values.size(); ++k) {
          long double mean = 0;
          for (const auto& p : plain) mean += p.layers[l].values[k];
          mean /= static_cast<long double>(n);
          const double err = static_cast<double>(std::fabs(agg.layers[l].values[k] - mean));
          t.worst_ratio = std::max(t.worst_ratio, err / bound);
          if (err > bound) ok = false;
        }
      }
      if (!ok) ++t.mean_violations;
    }
  }
  return t;
}

MaskTrials mask_trials;

Outcome Criterion1() {
  mask_trials = RunMaskTrials();
  return {mask_trials.sum_mismatches == 0 && mask_trials.trials == 400,
          std::to_string(mask_trials.trials) + " trials, " +
              std::to_string(mask_trials.sum_mismatches) + " sum mismatches"};
}

Outcome Criterion2() {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu trials, %zu violations, worst |err| = %.3f x n*2^-25",
                mask_trials.trials, mask_trials.mean_violations, mask_trials.worst_ratio);
  return {mask_trials.trials == 400 && mask_trials.mean_violations == 0, buf};
}

Outcome Criterion3() {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> uniform(-kEncodeLimit, kEncodeLimit);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> exponent(-60, 39);
  double worst = 0;
  size_t bad = 0;
  for (int i = 0; i < 1000000; ++i) {
    // Half uniform over the whole range, half log-uniform so small magnitudes are covered.
    double x = (i & 1) ? uniform(gen) : std::ldexp(unit(gen), exponent(gen));
    if (!(std::fabs(x) < kEncodeLimit)) x = 0;
    const double err = std::fabs(Decode(Encode(x)) - x);
    worst = std::max(worst, err);
    if (err > 0x1.0p-25) ++bad;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "10^6 samples, %zu over bound, worst %.3g (bound %.3g)", bad,
                worst, 0x1.0p-25);
  return {bad == 0, buf};
}

RunConfig EquivalenceConfig() {
  RunConfig cfg;
  cfg.clients = LoopbackRoster(2);
  cfg.global_epochs = 20;
  cfg.learning_rate = 0.01;
  cfg.regime = Regime::kIID;
  cfg.synthetic = {.rows = 2000, .dim = 10, .separation = 2.0, .age_label_correlation = 0.3,
                   .seed = 42};
  cfg.seeds = {42, 7, 0};
  cfg.insecure = true;
  return cfg;
}

struct Recorded {
  uint64_t round;
  ClientId from;
  MsgType type;
  std::vector<uint8_t> payload;
};
std::vector<Recorded> recorded;
std::vector<std::vector<std::vector<uint8_t>>> plaintexts;  // [round][client]
RunResult mock_run, true_run;

bool SameBits(const ModelVector& a, const ModelVector& b) {
  if (a.Schema() != b.Schema()) return false;
  for (size_t l = 0; l < a.layers.size(); ++l) {
    if (std::memcmp(a.layers[l].values.data(), b.layers[l].values.data(),
                    a.layers[l].values.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

Outcome Criterion4() {
  const RunConfig cfg = EquivalenceConfig();
  MockHooks hooks;
  hooks.on_plaintext_update = [](uint64_t round, ClientId id, const FixedModel& update) {
    if (plaintexts.size() <= round) plaintexts.resize(round + 1);
    if (plaintexts[round].size() <= id) plaintexts[round].resize(id + 1);
    plaintexts[round][id] = SerializeModel(update);
  };
  mock_run = RunMock(cfg, hooks);
  TrueRunOptions options;
  options.client_executable = MASKFED_BINARY;
  options.recorder = [](uint64_t round, ClientId from, MsgType type, std::span<const uint8_t> p) {
    recorded.push_back({round, from, type, {p.begin(), p.end()}});
  };
  true_run = RunTrue(cfg, options);
  if (!true_run.completed) return {false, "true run failed: " + true_run.error};
  const bool same = SameBits(mock_run.final_model, true_run.final_model) &&
                    FinalModelBytes(mock_run.final_model) == FinalModelBytes(true_run.final_model);
  const double mock_auc = mock_run.reports.back().auc, true_auc = true_run.reports.back().auc;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "final models %s; AUC mock %.6f true %.6f diff %.1g",
                same ? "bit-identical" : "DIFFER", mock_auc, true_auc, true_auc - mock_auc);
  return {same && mock_auc == true_auc && true_run.rounds_completed == 20, buf};
}

Outcome Criterion5() {
  if (plaintexts.size() != 20 || recorded.empty()) return {false, "run (4) did not produce data"};
  size_t checks = 0, hits = 0, updates = 0;
  for (const auto& rec : recorded) {
    if (rec.type == MsgType::kMaskedUpdate) ++updates;
    // Every received payload against every client's plaintext of every round.
    for (const auto& round : plaintexts) {
      for (const auto& needle : round) {
        ++checks;
        if (std::search(rec.payload.begin(), rec.payload.end(), needle.begin(), needle.end()) !=
            rec.payload.end()) {
          ++hits;
        }
      }
    }
  }
  return {hits == 0 && updates == 40,
          std::to_string(updates) + " masked updates, " + std::to_string(checks) +
              " substring checks, " + std::to_string(hits) + " plaintext hits"};
}

Outcome Criterion6() {
  std::ifstream in(std::string(MASKFED_TESTDATA) + "/keystream_zero_key.txt");
  std::vector<std::vector<uint64_t>> rounds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# round", 0) == 0) {
      rounds.emplace_back();
    } else if (!line.empty() && line[0] != '#') {
      rounds.back().push_back(std::stoull(line, nullptr, 16));
    }
  }
  size_t matched = 0, total = 0;
  for (uint64_t r = 0; r < rounds.size(); ++r) {
    const auto mask = ExpandMask(PairKey{}, r, rounds[r].size());
    for (size_t i = 0; i < rounds[r].size(); ++i, ++total) matched += mask[i].bits() == rounds[r][i];
  }
  return {rounds.size() == 4 && total == 64 && matched == total,
          std::to_string(matched) + "/" + std::to_string(total) + " words over " +
              std::to_string(rounds.size()) + " rounds"};
}

Outcome Criterion7() {
  RunConfig cfg = EquivalenceConfig();
  cfg.clients = LoopbackRoster(5);
  TrueRunOptions options;
  options.client_executable = MASKFED_BINARY;
  const auto table = RunRegimeSuite(cfg, RunMode::kTrue, options);
  bool all_done = true;
  for (const char* r : {"iid", "non_iid", "iid_shifted"}) {
    all_done = all_done && table.contains(r) && table[r].value("completed", false);
  }
  if (!all_done) return {false, "a regime failed: " + table.dump()};
  const double iid = table["iid"]["auc"], non_iid = table["non_iid"]["auc"],
               shifted = table["iid_shifted"]["auc"];
  char buf[200];
  std::snprintf(buf, sizeof(buf), "AUC iid %.7f non_iid %.7f shifted %.7f", iid, non_iid, shifted);
  return {iid > 0.80 && shifted < iid, buf};
}

Outcome Criterion8() {
  const Dataset data = GenerateSynthetic({.rows = 2000, .dim = 10, .seed = 42});
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd(0.0, 0.5);
  double worst = 0;
  size_t bad = 0;
  for (int b = 0; b < 100; ++b) {
    ModelVector m = ModelVector::Zeros(LogisticSchema(10));
    for (auto& l : m.layers) {
      for (auto& v : l.values) v = nd(gen);
    }
    std::vector<size_t> rows(1 + gen() % 64);
    for (auto& r : rows) r = gen() % data.rows();
    const double err = testing::MaxGradientRelError(m, data, rows);
    worst = std::max(worst, err);
    if (err > 1e-5) ++bad;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "100 batches, worst relative error %.3g, %zu over 1e-5", worst,
                bad);
  return {bad == 0, buf};
}

long MaxRssKb() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return u.ru_maxrss;
}

Outcome Criterion9() {
  const std::string dir = std::string(MASKFED_TESTDATA) + "/wire/";
  std::vector<std::vector<uint8_t>> corpus;
  size_t golden_ok = 0;
  for (const auto& name : testing::GoldenFrameNames()) {
    corpus.push_back(testing::ReadFileBytes(dir + name));
    golden_ok += testing::ReencodeFrame(corpus.back()) == corpus.back();
  }
  const long rss_before = MaxRssKb();
  std::mt19937_64 gen(9);
  size_t accepted = 0, rejected = 0, noncanonical = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto bytes = testing::MutateFrame(corpus, gen);
    try {
      if (testing::ReencodeFrame(bytes) != bytes) ++noncanonical;
      ++accepted;
    } catch (const Error&) {
      ++rejected;
    }
  }
  const long growth_kb = MaxRssKb() - rss_before;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "golden %zu/%zu; fuzz %zu accepted %zu rejected, %zu non-canonical, "
                "peak RSS growth %ld KiB",
                golden_ok, corpus.size(), accepted, rejected, noncanonical, growth_kb);
  return {golden_ok == corpus.size() && noncanonical == 0 && growth_kb < 64 * 1024, buf};
}

Outcome Criterion10() {
  const uint64_t kill_round = 5;
  RunConfig cfg = EquivalenceConfig();
  cfg.clients = LoopbackRoster(3);
  RunConfig reference_cfg = cfg;
  reference_cfg.global_epochs = kill_round;
  const ModelVector expected = RunMock(reference_cfg).final_model;

  std::string detail;
  bool pass = true;
  const fs::path out = fs::temp_directory_path() / ("maskfed_atomicity_" + std::to_string(getpid()));
  for (ClientId victim = 0; victim < 3; ++victim) {
    fs::remove_all(out);
    cfg.output_dir = out.string();
    std::map<ClientId, int> pids;
    TrueRunOptions options;
    options.client_executable = MASKFED_BINARY;
    options.on_spawn = [&](ClientId id, int pid) { pids[id] = pid; };
    // Once round kill_round-1 is fully collected, SIGKILL the victim so it
    // dies before it can answer round kill_round.
    options.recorder = [&](uint64_t round, ClientId from, MsgType type, std::span<const uint8_t>) {
      if (round == kill_round - 1 && from == 2 && type == MsgType::kMaskedUpdate) {
        kill(pids.at(victim), SIGKILL);
      }
    };
    const RunResult r = RunTrue(cfg, options);
    const bool ok = !r.completed && r.rounds_completed == kill_round &&
                    SameBits(r.final_model, expected) && !fs::exists(out / "final.bin") &&
                    r.error.find("after 3 failed attempts") != std::string::npos;
    pass = pass && ok;
    detail += "kill " + std::to_string(victim) + (ok ? " ok; " : " BAD (" + r.error + "); ");
  }

  // Process-level check: a client dropping mid-round makes `maskfed run` exit nonzero.
  cfg.output_dir = (out / "cli").string();
  fs::create_directories(out);
  std::ofstream(out / "run.json") << RunConfigToJson(cfg).dump();
  const std::string cmd = std::string(MASKFED_BINARY) + " run --config " + (out / "run.json").string() +
                          " --fail-client 1:" + std::to_string(kill_round) + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const bool cli_ok = WIFEXITED(status) && WEXITSTATUS(status) != 0 &&
                      !fs::exists(out / "cli" / "final.bin");
  detail += "cli exit " + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1);
  fs::remove_all(out);
  return {pass && cli_ok, detail};
}

}  // namespace
}  // namespace maskfed

int main() {
  using namespace maskfed;
  Report(1, "mask cancellation (exact)", 10, Criterion1);
  Report(2, "secure-average accuracy", 0, Criterion2);
  Report(3, "fixed-point round trip", 0, Criterion3);
  Report(4, "mock/true equivalence", 120, Criterion4);
  Report(5, "coordinator blindness", 0, Criterion5);
  Report(6, "keystream conformance", 0, Criterion6);
  Report(7, "regime suite", 300, Criterion7);
  Report(8, "gradient check", 0, Criterion8);
  Report(9, "wire fuzz", 0, Criterion9);
  Report(10, "round atomicity", 0, Criterion10);
  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
