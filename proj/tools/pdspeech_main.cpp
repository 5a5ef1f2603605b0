// tools/pdspeech_main.cpp

// Copyright 2026 The pdspeech Authors.
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

// Command-line driver for the pipeline stages. Each subcommand reads its
// inputs from files and writes one artifact plus a provenance sidecar.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "pdspeech/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace pdspeech;

std::string DataDir() {
  const char* env = std::getenv("PDSPEECH_DATA_DIR");
  return env && *env ? std::string(env) : std::string("data");
}

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 1;
  bool quiet = false;
  bool force = false;
};

pipeline::Context MakeContext(const Globals& g, const std::string& command) {
  pipeline::Context ctx;
  ctx.cfg = g.config_path.empty() ? config::PipelineConfig() : config::LoadToml(g.config_path);
  for (const auto& o : g.overrides) config::ApplyOverride(ctx.cfg, o);
  ctx.cfg.Validate();
  if (g.jobs < 1) throw Error("invalid_argument", "--jobs must be at least 1");
  ctx.jobs = g.jobs;
  ctx.log = g.quiet ? nullptr : &std::cerr;
  ctx.command = command;
  ctx.force = g.force;
  return ctx;
}

// Error lines must stay on one line for machine parsing.
std::string OneLine(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

void PrintMetrics(const nlohmann::json& report) {
  for (const char* level : {"per_person", "per_segment"}) {
    std::cout << level << ":";
    for (const auto& [k, v] : report.at("average").at(level).items()) {
      if (k == "folds_present" || k == "folds") continue;
      std::cout << " " << k << "=" << (v.is_null() ? std::string("n/a") : std::to_string(v.get<double>()));
    }
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::string command;
  for (int i = 1; i < argc; ++i) command += (i > 1 ? " " : "") + std::string(argv[i]);

  CLI::App app{"Parkinson's disease detection from speech: preprocessing, pretraining, "
               "domain-adversarial fine-tuning and evaluation."};
  app.require_subcommand(1);
  app.footer("Configuration keys (override with --set section.key=value):\n" + config::DefaultsTable());

  Globals g;
  app.add_option("--config", g.config_path, "TOML configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "override one key, e.g. --set grl.lambda=0.5");
  app.add_option("--jobs", g.jobs, "worker threads for per-file stages");
  app.add_flag("--quiet", g.quiet, "suppress progress output");
  app.fallthrough();

  std::function<void()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic multi-domain corpus");
  std::string synth_out = (fs::path(DataDir()) / "synth").string();
  synth->add_option("--out", synth_out, "output directory (default $PDSPEECH_DATA_DIR/synth)");
  synth->callback([&] {
    action = [&] { pipeline::RunSynth(MakeContext(g, command), synth_out); };
  });

  // prep
  auto* prep = app.add_subcommand("prep", "resample to 16 kHz and remove long silences");
  std::string prep_in, prep_out;
  prep->add_option("--manifest", prep_in, "input manifest JSONL")->required();
  prep->add_option("--out", prep_out, "output directory")->required();
  prep->callback([&] { action = [&] { pipeline::RunPrep(MakeContext(g, command), prep_in, prep_out); }; });

  // mfcc
  auto* mfcc = app.add_subcommand("mfcc", "extract MFCC feature caches");
  std::string mfcc_in, mfcc_out;
  mfcc->add_option("--manifest", mfcc_in, "preprocessed manifest JSONL")->required();
  mfcc->add_option("--out", mfcc_out, "output directory")->required();
  mfcc->callback([&] { action = [&] { pipeline::RunMfcc(MakeContext(g, command), mfcc_in, mfcc_out); }; });

  // split
  auto* split = app.add_subcommand("split", "split a manifest by speaker into labeled and unlabeled parts");
  std::string split_in, split_out;
  split->add_option("--manifest", split_in, "input manifest JSONL")->required();
  split->add_option("--out", split_out, "output directory")->required();
  split->callback([&] {
    action = [&] {
      const auto ctx = MakeContext(g, command);
      const data::Manifest m = data::ReadManifest(split_in);
      auto [unlabeled, labeled] =
          data::SplitUnlabeled(m, ctx.cfg.eval.unlabeled_fraction, DeriveSeed(ctx.cfg.seed, 601));
      fs::create_directories(split_out);
      // Record paths are rewritten relative to the output directory.
      const fs::path out_abs = fs::absolute(split_out).lexically_normal();
      for (auto* part : {&labeled, &unlabeled})
        for (auto& r : part->records)
          r.path = fs::absolute(m.Resolve(r)).lexically_normal().lexically_relative(out_abs).string();
      const std::string lp = (fs::path(split_out) / "labeled.jsonl").string();
      const std::string up = (fs::path(split_out) / "unlabeled.jsonl").string();
      data::WriteManifest(lp, labeled);
      data::WriteManifest(up, unlabeled);
      pipeline::WriteSidecar(lp, ctx, {split_in});
      pipeline::WriteSidecar(up, ctx, {split_in});
    };
  });

  // pseudolabel
  auto* pl = app.add_subcommand("pseudolabel", "k-means pseudo-labels (stage 1: MFCC, stage 2: encoder layer)");
  std::string pl_feats, pl_ckpt, pl_out;
  int pl_stage = 1;
  pl->add_option("--features", pl_feats, "feature manifest")->required();
  pl->add_option("--stage", pl_stage, "1 or 2")->check(CLI::IsMember({1, 2}));
  pl->add_option("--checkpoint", pl_ckpt, "pretrained checkpoint (stage 2)");
  pl->add_option("--out", pl_out, "output directory")->required();
  pl->callback([&] {
    action = [&] { pipeline::RunPseudolabel(MakeContext(g, command), pl_feats, pl_stage, pl_ckpt, pl_out); };
  });

  // dapt
  auto* dapt = app.add_subcommand("dapt", "masked-prediction pretraining on unlabeled speech");
  std::string dapt_feats, dapt_labels, dapt_init, dapt_out;
  dapt->add_option("--features", dapt_feats, "feature manifest")->required();
  dapt->add_option("--labels", dapt_labels, "pseudo-label file")->required();
  dapt->add_option("--init", dapt_init, "continue from this checkpoint");
  dapt->add_option("--out", dapt_out, "output checkpoint")->required();
  dapt->callback([&] {
    action = [&] { pipeline::RunDapt(MakeContext(g, command), dapt_feats, dapt_labels, dapt_init, dapt_out); };
  });

  // finetune
  auto* ft = app.add_subcommand("finetune", "train the PD classifier, optionally domain-adversarial");
  std::string ft_feats, ft_out;
  pipeline::FinetuneRequest req;
  std::optional<double> grl_lambda;
  ft->add_option("--features", ft_feats, "feature manifest")->required();
  ft->add_flag("--dat", req.dat, "add the domain head behind a gradient reversal layer");
  ft->add_flag("--freeze-encoder", req.freeze_encoder, "train the heads only");
  ft->add_option("--grl-lambda", grl_lambda, "gradient reversal weight (sets grl.lambda)");
  ft->add_option("--init", req.init, "start from this checkpoint");
  ft->add_option("--folds", req.folds_path, "fold plan; the held-out fold is excluded");
  ft->add_option("--fold", req.fold, "held-out fold index");
  ft->add_option("--out", ft_out, "output checkpoint")->required();
  ft->callback([&] {
    action = [&] {
      Globals gg = g;
      if (grl_lambda) gg.overrides.push_back("grl.lambda=" + std::to_string(*grl_lambda));
      if (!req.folds_path.empty() && req.fold < 0) throw Error("invalid_argument", "--folds needs --fold");
      pipeline::RunFinetune(MakeContext(gg, command), ft_feats, req, ft_out);
    };
  });

  // predict
  auto* pr = app.add_subcommand("predict", "segment-level PD predictions");
  std::string pr_ckpt, pr_feats, pr_folds, pr_out;
  int pr_fold = -1;
  pr->add_option("--checkpoint", pr_ckpt, "fine-tuned checkpoint")->required();
  pr->add_option("--features", pr_feats, "feature manifest")->required();
  pr->add_option("--folds", pr_folds, "fold plan; predict the held-out fold only");
  pr->add_option("--fold", pr_fold, "fold index");
  pr->add_option("--out", pr_out, "prediction JSONL")->required();
  pr->callback([&] {
    action = [&] {
      if (!pr_folds.empty() && pr_fold < 0) throw Error("invalid_argument", "--folds needs --fold");
      pipeline::RunPredict(MakeContext(g, command), pr_ckpt, pr_feats, pr_folds, pr_fold, pr_out);
    };
  });

  // baseline
  auto* bl = app.add_subcommand("baseline", "sparse-representation and SVM baselines, cross-validated");
  std::string bl_feats, bl_folds, bl_method = "lsrc", bl_out;
  bl->add_option("--features", bl_feats, "feature manifest")->required();
  bl->add_option("--folds", bl_folds, "fold plan")->required();
  bl->add_option("--method", bl_method, "lsrc, lsrc-cd or svm")->check(CLI::IsMember({"lsrc", "lsrc-cd", "svm"}));
  bl->add_option("--out", bl_out, "prediction JSONL")->required();
  bl->callback([&] {
    action = [&] { pipeline::RunBaseline(MakeContext(g, command), bl_feats, bl_folds, bl_method, bl_out); };
  });

  // folds
  auto* fo = app.add_subcommand("folds", "stratified speaker-disjoint fold plan");
  std::string fo_in, fo_out;
  fo->add_option("--manifest", fo_in, "labeled manifest")->required();
  fo->add_option("--out", fo_out, "fold plan JSON")->required();
  fo->callback([&] { action = [&] { pipeline::RunFolds(MakeContext(g, command), fo_in, fo_out); }; });

  // eval
  auto* ev = app.add_subcommand("eval", "per-segment and per-person metrics");
  std::vector<std::string> ev_preds;
  std::string ev_out;
  std::optional<int> ev_k;
  ev->add_option("--predictions", ev_preds, "prediction JSONL files")->required();
  ev->add_option("--folds", ev_k, "number of folds (default eval.folds)");
  ev->add_option("--out", ev_out, "report JSON")->required();
  ev->add_flag("--force", g.force, "accept predictions with different config hashes");
  ev->callback([&] {
    action = [&] {
      const auto ctx = MakeContext(g, command);
      PrintMetrics(pipeline::RunEval(ctx, ev_preds, ev_k.value_or(ctx.cfg.eval.folds), ev_out));
    };
  });

  // report
  auto* rp = app.add_subcommand("report", "side-by-side summary of eval reports");
  std::vector<std::string> rp_in;
  std::string rp_out;
  rp->add_option("--reports", rp_in, "report JSON files")->required();
  rp->add_option("--out", rp_out, "summary JSON")->required();
  rp->add_flag("--force", g.force, "aggregate reports with different config hashes");
  rp->callback([&] { action = [&] { pipeline::RunReport(MakeContext(g, command), rp_in, rp_out); }; });

  // defaults
  auto* df = app.add_subcommand("defaults", "print the default configuration as TOML");
  df->callback([&] { action = [&] { std::cout << config::DefaultsToml(); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: invalid_argument: " << OneLine(e.what()) << "\n";
    return 2;
  }

  try {
    action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << OneLine(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << OneLine(e.what()) << "\n";
    return 1;
  }
  return 0;
}
