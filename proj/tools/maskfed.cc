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

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maskfed/dataset.h"
#include "maskfed/datadist.h"
#include "maskfed/errors.h"
#include "maskfed/harness.h"
#include "maskfed/metrics.h"

namespace {

using namespace maskfed;

constexpr int kExitAborted = 2;

std::string SelfExecutable(const char* argv0) {
  std::error_code ec;
  auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::string(argv0) : p.string();
}

int Report(const RunResult& r) {
  if (!r.completed) {
    std::cerr << "run aborted after " << r.rounds_completed << " round(s): " << r.error << "\n";
    return kExitAborted;
  }
  std::cout << FormatReportTable(r.reports);
  return 0;
}

RunConfig Load(const std::string& path, const std::string& output_override) {
  RunConfig cfg = LoadRunConfig(path);
  if (!output_override.empty()) cfg.output_dir = output_override;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maskfed: federated averaging with pairwise-masked secure aggregation"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path, output_dir;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run.json")->required()->check(CLI::ExistingFile);
    sub->add_option("--output", output_dir, "output directory (overrides output_dir)");
  };

  auto* coordinator = app.add_subcommand("coordinator", "run the coordinator against listening clients");
  add_config(coordinator);

  uint32_t client_id = 0;
  std::optional<uint64_t> fail_at_round;
  auto* client = app.add_subcommand("client", "run one client");
  add_config(client);
  client->add_option("--id", client_id, "client id")->required();
  client->add_option("--fail-at-round", fail_at_round, "drop the connection during this round");

  bool float_aggregate = false;
  auto* mock = app.add_subcommand("mock", "single-process serial simulation");
  add_config(mock);
  mock->add_flag("--float-aggregate", float_aggregate, "average in floating point instead");

  std::vector<std::string> injected;
  auto* run = app.add_subcommand("run", "spawn loopback clients and coordinate them");
  add_config(run);
  run->add_option("--fail-client", injected, "fault injection: ID:ROUND (repeatable)");

  std::string suite_mode = "mock";
  auto* suite = app.add_subcommand("suite", "IID / non-IID / shifted comparison");
  add_config(suite);
  suite->add_option("--mode", suite_mode, "mock or true")->check(CLI::IsMember({"mock", "true"}));

  SyntheticSpec spec;
  std::string out_path;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  gen->add_option("--rows", spec.rows)->default_val(spec.rows);
  gen->add_option("--dim", spec.dim)->default_val(spec.dim);
  gen->add_option("--sep", spec.separation)->default_val(spec.separation);
  gen->add_option("--seed", spec.seed)->default_val(spec.seed);
  gen->add_option("--age-corr", spec.age_label_correlation)->default_val(spec.age_label_correlation);
  gen->add_option("--out", out_path)->required();

  std::string model_path, data_path;
  auto* eval = app.add_subcommand("eval", "score a saved model on a CSV dataset");
  eval->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_path)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*coordinator) return Report(RunCoordinator(Load(config_path, output_dir)));
    if (*client) return RunClient(Load(config_path, ""), client_id, fail_at_round);
    if (*mock) {
      RunConfig cfg = Load(config_path, output_dir);
      cfg.float_aggregate = cfg.float_aggregate || float_aggregate;
      return Report(RunMock(cfg));
    }
    if (*run) {
      TrueRunOptions options;
      options.client_executable = SelfExecutable(argv[0]);
      for (const auto& spec : injected) {
        const auto colon = spec.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("--fail-client wants ID:ROUND");
        options.fail_at_round[static_cast<ClientId>(std::stoul(spec.substr(0, colon)))] =
            std::stoull(spec.substr(colon + 1));
      }
      return Report(RunTrue(Load(config_path, output_dir), options));
    }
    if (*suite) {
      TrueRunOptions options;
      options.client_executable = SelfExecutable(argv[0]);
      const auto table = RunRegimeSuite(Load(config_path, output_dir),
                                        suite_mode == "true" ? RunMode::kTrue : RunMode::kMock,
                                        options);
      std::cout << table.dump(2) << "\n";
      for (const auto& [name, row] : table.items()) {
        if (!row.value("completed", false)) return kExitAborted;
      }
      return 0;
    }
    if (*gen) {
      WriteCsvFile(GenerateSynthetic(spec), out_path);
      return 0;
    }
    if (*eval) {
      const ModelVector m = LoadFinalModel(model_path);
      const Dataset data = ReadCsvFile(data_path);
      std::cout << ReportToJson(Evaluate(m, data, 0, "")).dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "maskfed";
    if (*client) std::cerr << " client " << client_id;
    std::cerr << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
