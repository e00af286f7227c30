// Copyright 2026 The IWR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "commands.hpp"
#include "iwr/error.hpp"
#include "iwr/parallel.hpp"

namespace {

using iwr::cli::RunConfig;

void add_scoring_flags(CLI::App* cmd, RunConfig& c, std::string& method) {
  cmd->add_option("--method", method, "nn | lse | kde | iwr")
      ->check(CLI::IsMember({"nn", "nn_l2", "lse", "kde", "kde_target", "iwr"}))
      ->capture_default_str();
  cmd->add_option("--bandwidth-scale", c.bandwidth_scale, "Scott's-rule multiplier c")->capture_default_str();
  cmd->add_option("--lse-temp", c.lse_temperature, "LSE temperature (default: target Scott bandwidth)");
  cmd->add_option("--batch-size", c.batch_size, "prior batch size B (default min(4096, N_prior))");
  cmd->add_option("--num-batches", c.num_batches, "number of prior batches K")->capture_default_str();
  cmd->add_option("--seed", c.seed, "RNG seed (required for iwr)");
  cmd->add_flag("--leave-self-out", c.leave_self_out, "drop a prior row's own kernel from its batches");
  cmd->add_option("--target", c.target, "target embeddings (.bin or .csv)");
  cmd->add_option("--prior", c.prior, "prior embeddings (.bin or .csv)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Importance-weighted retrieval over embedding datasets"};
  app.set_config("--config", "", "TOML/INI file with default flag values");
  app.require_subcommand(1);

  RunConfig c;
  std::string method = "iwr";
  std::vector<double> fractions;
  std::vector<double> bandwidth_scales;
  iwr::cli::SynthRequest synth;
  app.add_option("--threads", c.threads, "worker threads (default: all cores)");

  auto* score = app.add_subcommand("score", "score every prior row against the target");
  add_scoring_flags(score, c, method);
  score->add_option("--out", c.out, "score file to write (sidecar at <out>.json)");

  auto* retrieve = app.add_subcommand("retrieve", "select prior rows from a score file");
  add_scoring_flags(retrieve, c, method);
  retrieve->add_option("--scores", c.scores, "score file written by `score`");
  auto* fraction = retrieve->add_option("--fraction", c.fraction, "retrieve the top fraction of rows");
  auto* threshold = retrieve->add_option("--threshold", c.threshold, "retrieve rows scoring >= threshold");
  auto* resample = retrieve->add_option("--resample", c.resample_count, "draw this many rows by importance resampling");
  fraction->excludes(threshold)->excludes(resample);
  threshold->excludes(resample);
  retrieve->add_flag("--with-replacement", c.with_replacement, "resample with replacement");
  retrieve->add_option("--alpha", c.alpha, "co-training weight of the target data")->capture_default_str();
  retrieve->add_option("--meta", c.meta, "prior metadata sidecar");
  retrieve->add_option("--out", c.out, "output directory");

  auto* sweep = app.add_subcommand("sweep", "retrieve at several fractions (and bandwidth scales)");
  add_scoring_flags(sweep, c, method);
  sweep->add_option("--fractions", fractions, "fractions to retrieve")->delimiter(',')->required();
  sweep->add_option("--bandwidth-scales", bandwidth_scales, "bandwidth scales to sweep")->delimiter(',');
  sweep->add_option("--meta", c.meta, "prior metadata sidecar");
  sweep->add_option("--labels", c.labels, "task relevance labels (JSON)");
  sweep->add_option("--out", c.out, "output directory");

  auto* analyze = app.add_subcommand("analyze", "task and timestep breakdown of a manifest");
  analyze->add_option("--manifest", c.manifest, "manifest.json from retrieve or sweep");
  analyze->add_option("--meta", c.meta, "prior metadata sidecar");
  analyze->add_option("--labels", c.labels, "task relevance labels (JSON)");
  analyze->add_option("--bins", c.bins, "timestep bins per episode")->capture_default_str();
  analyze->add_option("--out", c.out, "report file to write");

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic benchmark fixture");
  synth_cmd->add_option("--scenario", synth.scenario, "fig2_toy | gaussian_ratio | cluster_bias")->required();
  synth_cmd->add_option("--n-target", synth.n_target, "target rows (default depends on scenario)");
  synth_cmd->add_option("--n-prior", synth.n_prior, "prior rows (default depends on scenario)");
  synth_cmd->add_option("--dim", synth.dim, "dimension (gaussian_ratio only)");
  synth_cmd->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    iwr::set_default_thread_count(c.threads);
    c.method = iwr::parse_score_method(method);
    if (*score) {
      iwr::cli::cmd_score(c, std::cout);
    } else if (*retrieve) {
      iwr::cli::cmd_retrieve(c, std::cout);
    } else if (*sweep) {
      iwr::cli::cmd_sweep(c, fractions, bandwidth_scales, std::cout);
    } else if (*analyze) {
      iwr::cli::cmd_analyze(c, std::cout);
    } else if (*synth_cmd) {
      iwr::cli::cmd_synth(synth, std::cout);
    }
  } catch (const iwr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return iwr::exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
