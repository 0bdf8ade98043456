// tools/ngsgd.cc

// Copyright 2026 The ngsgd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ngsgd: data generation, training, model combination and the oracle
// verification battery.
//
//   ngsgd gen-data --classes 10 --dim 50 --samples 200000 --jobs 4
//       --iters-per-epoch 5 --seed 1 --out-dir data
//   ngsgd train --data-dir data --precond online --out-dir run1
//   ngsgd train-parallel --data-dir data --jobs 4 --out-dir run4
//   ngsgd combine --model-dir run4 --combine-last 3 --tune-data data/valid.ngex
//   ngsgd verify
//
// Every training command writes a manifest that can be fed back with
// --config to repeat the run.  Exit status: 0 success, 1 runtime error,
// 2 usage error.

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ngsgd-oracle/verify.h"
#include "ngsgd/combine.h"
#include "ngsgd/datakit.h"
#include "ngsgd/nnet.h"
#include "ngsgd/parallel.h"
#include "ngsgd/trainer.h"

namespace fs = std::filesystem;
using namespace ngsgd;

namespace {

std::string Timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string BlockPath(const std::string &dir, Index b) {
  std::ostringstream os;
  os << "block_" << std::setw(5) << std::setfill('0') << b << ".ngex";
  return (fs::path(dir) / os.str()).string();
}

std::string CheckpointPath(const std::string &dir, int iter) {
  return (fs::path(dir) / "models" / ("iter_" + std::to_string(iter) + ".mdl"))
      .string();
}

// Writes the resolved configuration of `app` as key=value lines (readable
// with --config), followed by run metadata as comments.
void WriteManifest(const std::string &path, const CLI::App &app,
                   const std::vector<std::pair<std::string, std::string>> &meta) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write manifest " + path);
  os << "# ngsgd " << app.get_name() << " manifest\n";
  std::istringstream cfg(app.config_to_str(true, false));
  for (std::string line; std::getline(cfg, line);)
    if (line.rfind("config=", 0) != 0) os << line << '\n';
  for (const auto &[k, v] : meta) os << "# " << k << ": " << v << '\n';
  if (!os) throw Error("cannot write manifest " + path);
}

// Fills options not given on the command line from a key=value file, then
// falls back to NGSGD_SEED for the seed.  Unknown keys are usage errors.
void ApplyConfig(CLI::App *sub, const std::string &path) {
  if (!path.empty()) {
    std::vector<CLI::ConfigItem> items;
    try {
      items = CLI::ConfigTOML().from_file(path);
    } catch (const CLI::FileError &) {
      throw CLI::FileError::Missing(path);
    }
    for (const CLI::ConfigItem &item : items) {
      if (item.name == "config" || item.name == "++" || item.name == "--")
        continue;
      CLI::Option *opt = sub->get_option_no_throw("--" + item.name);
      if (opt == nullptr || !item.parents.empty())
        throw CLI::ConfigError("unknown key '" + item.fullname() + "' in " +
                               path);
      if (opt->count() > 0) continue;
      std::vector<std::string> values = item.inputs;
      if (values.size() == 1 && values[0].empty()) continue;
      for (const std::string &v : values) opt->add_result(v);
      opt->run_callback();
    }
  }
  CLI::Option *seed = sub->get_option_no_throw("--seed");
  if (seed != nullptr && seed->count() == 0) {
    if (const char *env = std::getenv("NGSGD_SEED"); env && *env) {
      seed->add_result(env);
      seed->run_callback();
    }
  }
}

std::vector<Dataset> LoadBlocks(const std::string &dir) {
  std::vector<Dataset> blocks;
  for (Index b = 0;; b++) {
    const std::string path = BlockPath(dir, b);
    if (!fs::exists(path)) break;
    blocks.push_back(DecodeBlock(ReadBlockFile(path)));
  }
  if (blocks.empty())
    throw Error("no example blocks in " + dir + " (expected " +
                BlockPath(dir, 0) + ")");
  return blocks;
}

Dataset LoadValid(const std::string &dir) {
  const std::string path = (fs::path(dir) / "valid.ngex").string();
  if (!fs::exists(path)) return Dataset();
  return DecodeBlock(ReadBlockFile(path));
}

Dataset EvalSubset(const std::vector<Dataset> &blocks, Index n) {
  std::vector<Dataset> parts;
  Index have = 0;
  for (const Dataset &b : blocks) {
    if (have >= n) break;
    const Index take = std::min(n - have, b.size());
    parts.push_back(b.Slice(0, take));
    have += take;
  }
  return Concatenate(parts);
}

// ----------------------------------------------------------------------------
// gen-data

struct GenDataOptions {
  int classes = 0;
  Index dim = 0;
  Index samples = 0;
  int jobs = 1;
  int iters_per_epoch = 1;
  double separation = 3.0;
  Index valid_samples = 5000;
  bool normalize = false;
  std::string csv;
  std::uint64_t seed = 0;
  std::string out_dir = "data";
};

void RunGenData(const GenDataOptions &o, const CLI::App &app) {
  const std::string start = Timestamp();
  Dataset train, valid;
  if (!o.csv.empty()) {
    Dataset all = ReadCsvDataset(o.csv);
    const Index nv = std::min(o.valid_samples, all.size() / 10);
    train = all.Slice(0, all.size() - nv);
    valid = all.Slice(all.size() - nv, nv);
  } else {
    Dataset all = GenerateSynthetic(o.classes, o.dim,
                                    o.samples + o.valid_samples, o.separation,
                                    o.seed);
    train = all.Slice(0, o.samples);
    valid = all.Slice(o.samples, o.valid_samples);
  }
  fs::create_directories(o.out_dir);
  if (o.normalize) {
    NormalizationTransform t = ComputeInputTransform(train);
    for (const std::string &w : t.warnings) std::cerr << "warning: " << w << '\n';
    ApplyInputTransform(t, &train);
    if (valid.size() > 0) ApplyInputTransform(t, &valid);
    std::ofstream ts((fs::path(o.out_dir) / "transform.txt").string());
    ts << std::setprecision(17);
    for (Index i = 0; i < t.affine.rows(); i++) {
      for (Index j = 0; j < t.affine.cols(); j++)
        ts << (j ? " " : "") << t.affine(i, j);
      ts << '\n';
    }
  }
  std::vector<Dataset> blocks =
      RandomizeBlocks(train, o.jobs, o.iters_per_epoch, o.seed);
  for (std::size_t b = 0; b < blocks.size(); b++)
    WriteBlockFile(BlockPath(o.out_dir, b), EncodeBlock(blocks[b]));
  if (valid.size() > 0)
    WriteBlockFile((fs::path(o.out_dir) / "valid.ngex").string(),
                   EncodeBlock(valid));
  WriteManifest((fs::path(o.out_dir) / "manifest.txt").string(), app,
                {{"num_blocks", std::to_string(blocks.size())},
                 {"block_order", "block b is read by worker b % jobs at "
                                 "outer iteration b / jobs"},
                 {"start_time", start},
                 {"end_time", Timestamp()}});
  std::cout << "wrote " << blocks.size() << " blocks of ~"
            << blocks.front().size() << " examples to " << o.out_dir << '\n';
}

// ----------------------------------------------------------------------------
// train / train-parallel

struct TrainOptions {
  std::string data_dir = "data";
  std::string out_dir = "exp";
  int epochs = 4;
  Index minibatch = 512;
  double lr_initial = 0.01, lr_final = 0.001;
  std::string precond = "online";
  int rank_in = 20, rank_out = 80;
  double alpha = 4.0;
  double s_samples = 2000;
  int update_period = 4;
  double max_change_per_sample = 0.075;
  std::vector<Index> hidden_dims = {128, 128};
  std::string nonlinearity = "relu";
  double pnorm_p = 2.0;
  int pnorm_group = 2;
  Index eval_samples = 5000;
  std::uint64_t seed = 0;
  // train-parallel only
  int jobs = 1;
  Index samples_per_iter = 0;
  double sim_seconds_per_iter = -1;
  bool concurrent_workers = false;
  std::vector<Index> grow_dims;
  int grow_every = 2;
  int combine_last = 0;
};

void AddTrainOptions(CLI::App *sub, TrainOptions *o) {
  sub->add_option("--data-dir", o->data_dir, "Directory written by gen-data")
      ->capture_default_str();
  sub->add_option("--out-dir", o->out_dir, "Output directory")
      ->capture_default_str();
  sub->add_option("--epochs", o->epochs)->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--minibatch", o->minibatch)->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--lr-initial", o->lr_initial)->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--lr-final", o->lr_final)->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--precond", o->precond)
      ->check(CLI::IsMember({"none", "simple", "online"}))
      ->capture_default_str();
  sub->add_option("--rank-in", o->rank_in)->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--rank-out", o->rank_out)->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--alpha", o->alpha)->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--s-samples", o->s_samples)->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--update-period", o->update_period)
      ->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--max-change-per-sample", o->max_change_per_sample)
      ->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--hidden-dims", o->hidden_dims, "Hidden layer sizes")
      ->delimiter(',')->capture_default_str();
  sub->add_option("--nonlinearity", o->nonlinearity)
      ->check(CLI::IsMember({"relu", "pnorm"}))->capture_default_str();
  sub->add_option("--pnorm-p", o->pnorm_p)->capture_default_str();
  sub->add_option("--pnorm-group", o->pnorm_group)->capture_default_str();
  sub->add_option("--eval-samples", o->eval_samples,
                  "Training samples used for the objective in the run log")
      ->capture_default_str();
  sub->add_option("--seed", o->seed, "Default from NGSGD_SEED")
      ->capture_default_str();
}

TrainerConfig MakeTrainerConfig(const TrainOptions &o) {
  TrainerConfig c;
  c.lr_initial = o.lr_initial;
  c.lr_final = o.lr_final;
  c.num_epochs = o.epochs;
  c.minibatch_size = o.minibatch;
  c.max_change_per_sample = o.max_change_per_sample;
  c.preconditioner = ParsePrecondType(o.precond);
  for (OnlineNgConfig *ng : {&c.ng_cfg_input, &c.ng_cfg_output}) {
    ng->alpha = o.alpha;
    ng->s_samples = o.s_samples;
    ng->update_period = o.update_period;
  }
  c.ng_cfg_input.rank = o.rank_in;
  c.ng_cfg_output.rank = o.rank_out;
  c.simple_cfg.alpha = o.alpha;
  c.seed = o.seed;
  c.Check();
  return c;
}

Network<BaseFloat> MakeInitialNetwork(const TrainOptions &o, Index input_dim,
                                      int num_classes) {
  std::vector<Index> dims = {input_dim};
  dims.insert(dims.end(), o.hidden_dims.begin(), o.hidden_dims.end());
  dims.push_back(num_classes);
  return InitNetwork<BaseFloat>(
      dims, Nonlinearity::Parse(o.nonlinearity, o.pnorm_p, o.pnorm_group),
      o.seed);
}

void RunTrain(const TrainOptions &o, const CLI::App &app) {
  const std::string start = Timestamp();
  const TrainerConfig cfg = MakeTrainerConfig(o);
  std::vector<Dataset> blocks = LoadBlocks(o.data_dir);
  const Dataset valid = LoadValid(o.data_dir);
  Network<BaseFloat> net =
      MakeInitialNetwork(o, blocks[0].dim(), blocks[0].num_classes);
  fs::create_directories(o.out_dir);

  std::vector<ObjectiveLogRow> log = TrainSerial(&net, blocks, cfg);

  const std::string log_path = (fs::path(o.out_dir) / "objective.csv").string();
  const std::string model_path = (fs::path(o.out_dir) / "final.mdl").string();
  {
    std::ofstream os(log_path);
    WriteObjectiveCsv(os, log);
    if (!os) throw Error("cannot write " + log_path);
  }
  WriteNetworkFile(model_path, net);
  const double train_obj =
      ObjectivePerSample(net, EvalSubset(blocks, o.eval_samples));
  const double valid_obj = ObjectivePerSample(net, valid);
  WriteManifest((fs::path(o.out_dir) / "manifest.txt").string(), app,
                {{"objective_log", log_path},
                 {"final_model", model_path},
                 {"final_train_objective", std::to_string(train_obj)},
                 {"final_valid_objective", std::to_string(valid_obj)},
                 {"start_time", start},
                 {"end_time", Timestamp()}});
  std::cout << "trained " << log.size() << " minibatches; train objective "
            << train_obj << ", valid objective " << valid_obj << '\n';
}

void RunTrainParallel(const TrainOptions &o, const CLI::App &app) {
  const std::string start = Timestamp();
  const TrainerConfig tcfg = MakeTrainerConfig(o);
  ParallelConfig pcfg;
  pcfg.num_jobs = o.jobs;
  pcfg.samples_per_iter = o.samples_per_iter;
  pcfg.num_epochs = o.epochs;
  pcfg.sim_seconds_per_iter = o.sim_seconds_per_iter;
  pcfg.seed = o.seed;
  pcfg.concurrent_workers = o.concurrent_workers;
  pcfg.grow_dims = o.grow_dims;
  pcfg.grow_every = o.grow_every;
  if (o.combine_last > 0) pcfg.combine_last = o.combine_last;

  std::vector<Dataset> blocks = LoadBlocks(o.data_dir);
  const Dataset valid = LoadValid(o.data_dir);
  const Dataset eval = EvalSubset(blocks, o.eval_samples);
  Network<BaseFloat> net =
      MakeInitialNetwork(o, blocks[0].dim(), blocks[0].num_classes);
  fs::create_directories(fs::path(o.out_dir) / "models");

  ParallelResult res = RunParallelTraining(
      pcfg, tcfg, blocks, std::move(net), eval, valid,
      [&](int iter, const Network<BaseFloat> &m) {
        WriteNetworkFile(CheckpointPath(o.out_dir, iter), m);
        std::cerr << "iter " << iter << " written\n";
      });
  if (res.unused_blocks > 0)
    std::cerr << "warning: " << res.unused_blocks
              << " blocks are not a multiple of --jobs and were not used\n";

  const std::string log_path = (fs::path(o.out_dir) / "run_log.csv").string();
  const std::string model_path = (fs::path(o.out_dir) / "final.mdl").string();
  {
    std::ofstream os(log_path);
    WriteRunLogCsv(os, res.log);
    if (!os) throw Error("cannot write " + log_path);
  }
  WriteNetworkFile(model_path, res.models.back());

  std::vector<std::pair<std::string, std::string>> meta = {
      {"run_log", log_path},
      {"final_model", model_path},
      {"worker_lr_initial", std::to_string(res.worker_lr_initial)},
      {"worker_lr_final", std::to_string(res.worker_lr_final)},
      {"iters_per_epoch", std::to_string(res.iters_per_epoch)},
      {"final_train_objective", std::to_string(res.log.back().train_objective)},
  };
  if (o.combine_last > 1) {
    if (valid.size() == 0)
      throw Error("--combine-last needs validation data (valid.ngex)");
    const std::size_t p =
        std::min<std::size_t>(o.combine_last, res.models.size() - 1);
    std::vector<Network<BaseFloat>> last(res.models.end() - p,
                                         res.models.end());
    CombineResult comb = CombineModels(last, valid);
    const std::string comb_path =
        (fs::path(o.out_dir) / "combined.mdl").string();
    WriteNetworkFile(comb_path, comb.model);
    meta.push_back({"combined_model", comb_path});
    meta.push_back({"combined_tune_objective",
                    std::to_string(comb.final_objective)});
  }
  meta.push_back({"start_time", start});
  meta.push_back({"end_time", Timestamp()});
  WriteManifest((fs::path(o.out_dir) / "manifest.txt").string(), app, meta);
  std::cout << res.log.size() - 1 << " outer iterations with " << o.jobs
            << " jobs (worker lr " << res.worker_lr_initial << " -> "
            << res.worker_lr_final << "); final train objective "
            << res.log.back().train_objective << '\n';
}

// ----------------------------------------------------------------------------
// combine

struct CombineOptions {
  std::string model_dir;
  int combine_last = 20;
  int last_iter = -1;
  std::string tune_data;
  std::string out;
};

void RunCombine(const CombineOptions &o) {
  int last = o.last_iter;
  if (last < 0) {
    const fs::path dir = fs::path(o.model_dir) / "models";
    if (!fs::is_directory(dir))
      throw Error("no checkpoint directory " + dir.string());
    for (const auto &entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("iter_", 0) == 0 && entry.path().extension() == ".mdl") {
        try {
          last = std::max(last, std::stoi(name.substr(5)));
        } catch (const std::exception &) {
        }
      }
    }
    if (last < 0) throw Error("no checkpoints in " + dir.string());
  }
  const int first = last - o.combine_last + 1;
  if (first < 0)
    throw Error("--combine-last " + std::to_string(o.combine_last) +
                " needs checkpoints back to iteration " +
                std::to_string(first) + "; the last one is " +
                std::to_string(last));
  std::vector<Network<BaseFloat>> models;
  for (int k = first; k <= last; k++) {
    const std::string path = CheckpointPath(o.model_dir, k);
    if (!fs::exists(path)) throw Error("missing checkpoint " + path);
    models.push_back(ReadNetworkFile<BaseFloat>(path));
  }
  const Dataset tune = DecodeBlock(ReadBlockFile(o.tune_data));
  CombineResult res = CombineModels(models, tune);

  std::cout << std::setprecision(9);
  for (int k = first; k <= last; k++)
    std::cout << "iter_" << k << " tune objective "
              << res.candidate_objectives[k - first] << '\n';
  if (res.candidate_objectives.size() > models.size())
    std::cout << "average tune objective " << res.candidate_objectives.back()
              << '\n';
  double best_single = res.candidate_objectives[0];
  for (std::size_t i = 0; i < models.size(); i++)
    best_single = std::max(best_single, res.candidate_objectives[i]);
  std::cout << "start objective " << res.start_objective << '\n'
            << "combined tune objective " << res.final_objective
            << " (best single " << best_single << ", L-BFGS iterations "
            << res.iterations << ")\n";
  const std::string out = o.out.empty()
                              ? (fs::path(o.model_dir) / "combined.mdl").string()
                              : o.out;
  WriteNetworkFile(out, res.model);
  std::cout << "wrote " << out << '\n';
}

// ----------------------------------------------------------------------------
// verify

struct VerifyCliOptions {
  std::vector<std::string> suites;
  int seeds = 10;
  bool inject_fault = false;
};

int RunVerify(const VerifyCliOptions &o) {
  const std::vector<std::string> suites =
      o.suites.empty() ? oracle::SuiteNames() : o.suites;
  oracle::VerifyOptions vo;
  vo.inject_fault = o.inject_fault;
  int failures = 0;
  for (const std::string &s : suites) {
    double worst = 0, tol = 0;
    bool ok = true;
    for (int seed = 0; seed < o.seeds; seed++) {
      oracle::SuiteResult r = oracle::RunSuite(s, seed, vo);
      worst = std::max(worst, r.max_error);
      tol = r.tolerance;
      if (!r.passed) {
        ok = false;
        std::cout << "  " << s << " seed " << seed << ": max error "
                  << r.max_error << " > " << r.tolerance << " (" << r.detail
                  << ")\n";
      }
    }
    std::cout << (ok ? "PASS " : "FAIL ") << std::left << std::setw(10) << s
              << " seeds 0.." << o.seeds - 1 << "  max error " << worst
              << "  tolerance " << tol << '\n';
    if (!ok) failures++;
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Natural-gradient SGD with parameter averaging"};
  app.require_subcommand(1);

  GenDataOptions gen;
  CLI::App *gen_cmd = app.add_subcommand(
      "gen-data", "Generate synthetic data and write randomized blocks");
  std::string gen_config;
  gen_cmd->add_option("--config", gen_config,
                      "key=value file; command-line flags take precedence");
  auto *classes = gen_cmd->add_option("--classes", gen.classes)
                      ->check(CLI::Range(2, 1 << 20));
  auto *dim = gen_cmd->add_option("--dim", gen.dim)->check(CLI::Range(2, 1 << 20));
  auto *samples =
      gen_cmd->add_option("--samples", gen.samples)->check(CLI::PositiveNumber);
  auto *csv = gen_cmd->add_option("--csv", gen.csv,
                                  "Import a CSV (column 'label') instead");
  classes->excludes(csv);
  dim->excludes(csv);
  samples->excludes(csv);
  gen_cmd->add_option("--jobs", gen.jobs)->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->add_option("--iters-per-epoch", gen.iters_per_epoch)
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--separation", gen.separation,
                      "Radius of the sphere holding the class means")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  gen_cmd->add_option("--valid-samples", gen.valid_samples)
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  gen_cmd->add_flag("--normalize", gen.normalize,
                    "Apply the LDA-based input normalization");
  gen_cmd->add_option("--seed", gen.seed, "Default from NGSGD_SEED")
      ->capture_default_str();
  gen_cmd->add_option("--out-dir", gen.out_dir)->capture_default_str();

  TrainOptions train;
  CLI::App *train_cmd =
      app.add_subcommand("train", "Single-worker training over all blocks");
  std::string train_config;
  train_cmd->add_option("--config", train_config,
                        "Manifest or key=value file; flags take precedence");
  AddTrainOptions(train_cmd, &train);

  TrainOptions par;
  CLI::App *par_cmd = app.add_subcommand(
      "train-parallel", "Parallel training with parameter averaging");
  std::string par_config;
  par_cmd->add_option("--config", par_config,
                      "Manifest or key=value file; flags take precedence");
  AddTrainOptions(par_cmd, &par);
  par_cmd->add_option("--jobs", par.jobs)->check(CLI::PositiveNumber)
      ->capture_default_str();
  par_cmd->add_option("--samples-per-iter", par.samples_per_iter,
                      "Samples per worker per outer iteration (0: a block)")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  par_cmd->add_option("--sim-seconds-per-iter", par.sim_seconds_per_iter,
                      "Simulated seconds per outer iteration (default: by "
                      "preconditioner)")
      ->capture_default_str();
  par_cmd->add_flag("--concurrent-workers", par.concurrent_workers);
  par_cmd->add_option("--grow-dims", par.grow_dims,
                      "Hidden layers to add during training")
      ->delimiter(',');
  par_cmd->add_option("--grow-every", par.grow_every)
      ->check(CLI::PositiveNumber)->capture_default_str();
  par_cmd->add_option("--combine-last", par.combine_last,
                      "If > 1, combine the last P models on valid.ngex")
      ->check(CLI::NonNegativeNumber)->capture_default_str();

  CombineOptions comb;
  CLI::App *comb_cmd = app.add_subcommand(
      "combine", "Combine the last P checkpoints on tuning data");
  comb_cmd->add_option("--model-dir", comb.model_dir,
                       "Output directory of train-parallel")
      ->required();
  comb_cmd->add_option("--combine-last", comb.combine_last)
      ->check(CLI::PositiveNumber)->capture_default_str();
  comb_cmd->add_option("--last-iter", comb.last_iter,
                       "Last checkpoint to use (default: the newest)");
  comb_cmd->add_option("--tune-data", comb.tune_data, "Example block file")
      ->required();
  comb_cmd->add_option("--out", comb.out,
                       "Output model (default: <model-dir>/combined.mdl)");

  VerifyCliOptions ver;
  CLI::App *ver_cmd =
      app.add_subcommand("verify", "Run the oracle equivalence battery");
  ver_cmd->add_option("--suite", ver.suites, "Suites to run (default: all)")
      ->check(CLI::IsMember(oracle::SuiteNames()));
  ver_cmd->add_option("--seeds", ver.seeds, "Seeds 0..n-1")
      ->check(CLI::PositiveNumber)->capture_default_str();
  ver_cmd->add_flag("--inject-fault", ver.inject_fault,
                    "Flip the sign of the hold-out correction (self test)");

  try {
    app.parse(argc, argv);
    if (gen_cmd->parsed()) ApplyConfig(gen_cmd, gen_config);
    if (train_cmd->parsed()) ApplyConfig(train_cmd, train_config);
    if (par_cmd->parsed()) ApplyConfig(par_cmd, par_config);
    if (gen_cmd->parsed() && gen.csv.empty() &&
        (classes->count() == 0 || dim->count() == 0 || samples->count() == 0))
      throw CLI::ValidationError(
          "gen-data", "--classes, --dim and --samples are required without --csv");
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) RunGenData(gen, *gen_cmd);
    if (train_cmd->parsed()) RunTrain(train, *train_cmd);
    if (par_cmd->parsed()) RunTrainParallel(par, *par_cmd);
    if (comb_cmd->parsed()) RunCombine(comb);
    if (ver_cmd->parsed()) return RunVerify(ver);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
