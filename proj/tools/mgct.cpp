// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: corpus generation, training, synthesis, eval and
// checkpoint inspection.

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "mgct/errors.hpp"
#include "mgct/pipeline/checkpoint.hpp"
#include "mgct/pipeline/config.hpp"
#include "mgct/pipeline/corpus.hpp"
#include "mgct/pipeline/eval.hpp"
#include "mgct/pipeline/synthesis.hpp"
#include "mgct/pipeline/train.hpp"

namespace fs = std::filesystem;
using namespace mgct;
using namespace mgct::pipeline;

namespace {

struct CommonOptions {
  std::string preset = "desk";
  std::vector<std::string> config_files;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
};

Config resolve(const CommonOptions& o) {
  Config c = Config::preset(o.preset);
  for (const auto& f : o.config_files) c.merge_file(f);
  if (o.seed) c.set("seed", std::to_string(*o.seed));
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ContractViolation("--set expects key=value, got '" + s + "'");
    c.merge_text(s, "--set");
  }
  return c;
}

void log_config(const Config& c, std::string_view command, const fs::path& out) {
  std::cerr << "# " << command << " config " << c.hash() << "\n";
  std::istringstream lines(c.dump());
  for (std::string line; std::getline(lines, line);) std::cerr << "#   " << line << "\n";
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream(out / (std::string(command) + ".config")) << c.dump();
  }
}

TokenSequence parse_ids(const std::string& text, const char* what) {
  TokenSequence out;
  std::string s = text;
  for (char& ch : s)
    if (ch == ',') ch = ' ';
  std::istringstream is(s);
  for (std::string tok; is >> tok;) {
    Token v = 0;
    const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (r.ec != std::errc() || r.ptr != tok.data() + tok.size() || v < 0)
      throw ContractViolation(std::string(what) + ": bad token id '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

void add_common(CLI::App& app, CommonOptions& o, const std::string& out_help) {
  app.add_option("--preset", o.preset, "Base preset")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--config", o.config_files, "Config file(s) of key = value lines");
  app.add_option("--set", o.sets, "Override one key (key=value), repeatable");
  app.add_option("--seed", o.seed, "Seed for every random stream");
  app.add_option("--out", o.out, out_help);
}

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

int fail(std::string_view code, const std::string& msg) {
  std::cerr << "error: code=" << code << " msg=" << one_line(msg) << "\n";
  return 2;
}

void inspect(const fs::path& path) {
  const Checkpoint ck = load_checkpoint(path);
  const Config c = config_from_dump(ck.config);
  std::size_t values = 0;
  for (const auto& t : ck.tensors) values += t.values.size();
  std::cout << "kind=" << ck.kind << "\n"
            << "version=" << kCheckpointVersion << "\n"
            << "step=" << ck.step << "\n"
            << "config_hash=" << c.hash() << "\n"
            << "rng=" << ck.rng_seed << ":" << ck.rng_position << "\n"
            << "tensors=" << ck.tensors.size() << "\n"
            << "values=" << values << "\n";
  for (const auto& t : ck.tensors) std::cout << t.name << " " << shape_str(t.shape) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mgct: masked generative codec-token TTS at desk scale"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* gen = app.add_subcommand("gen-corpus", "Write the synthetic corpora");
  add_common(*gen, common, "Corpus directory");

  struct TrainCmd {
    ModuleKind kind;
    CLI::App* cmd;
  };
  std::string corpus = "corpus", resume;
  std::vector<TrainCmd> trains;
  for (ModuleKind k : {ModuleKind::semantic_codec, ModuleKind::acoustic_codec, ModuleKind::t2s,
                       ModuleKind::s2a, ModuleKind::duration}) {
    std::string name(kind_name(k));
    std::replace(name.begin(), name.end(), '_', '-');
    auto* cmd = app.add_subcommand("train-" + name, "Train the " + std::string(kind_name(k)) + " module");
    add_common(*cmd, common, "Checkpoint directory");
    cmd->add_option("--corpus", corpus, "Corpus directory");
    cmd->add_option("--resume", resume, "Continue from this checkpoint");
    trains.push_back({k, cmd});
  }

  std::string checkpoints = "checkpoints", text, phones, prompt_semantic, prompt_grid, prompt_phones,
              prompt_durations;
  std::optional<std::size_t> length;
  bool predict = false;
  auto* synth = app.add_subcommand("synthesize", "Text to semantic tokens to acoustic grid");
  add_common(*synth, common, "Output directory");
  synth->add_option("--checkpoints", checkpoints, "Directory holding <module>.ckpt files");
  synth->add_option("--text", text, "Text symbol ids")->required();
  auto* len_opt = synth->add_option("--length", length, "Number of semantic tokens to generate");
  auto* pred_opt = synth->add_flag("--predict-length", predict, "Take the length from the duration model");
  len_opt->excludes(pred_opt);
  synth->add_option("--prompt-semantic", prompt_semantic, "Semantic prompt ids");
  synth->add_option("--prompt-grid", prompt_grid, "Grid file holding the prompt's acoustic codes");
  synth->add_option("--phones", phones, "Target phone ids for --predict-length (default: the text ids)");
  synth->add_option("--prompt-phones", prompt_phones, "Prompt phone ids (for --predict-length)");
  synth->add_option("--prompt-durations", prompt_durations, "Prompt phone durations in frames");

  bool no_sweep = false;
  auto* eval = app.add_subcommand("eval", "Evaluate the trained modules on held-out data");
  add_common(*eval, common, "Output directory for report.txt");
  eval->add_option("--checkpoints", checkpoints, "Directory holding <module>.ckpt files");
  eval->add_option("--corpus", corpus, "Corpus directory");
  eval->add_flag("--no-sweep", no_sweep, "Skip the decode-step sweep");

  std::string ckpt_path;
  auto* insp = app.add_subcommand("inspect-checkpoint", "Print a checkpoint's header and tensor index");
  insp->add_option("path", ckpt_path, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    return fail("USAGE", e.what());
  }

  try {
    if (insp->parsed()) {
      inspect(ckpt_path);
      return 0;
    }
    const Config c = resolve(common);
    const fs::path out = common.out;

    if (gen->parsed()) {
      const fs::path dir = out.empty() ? fs::path("corpus") : out;
      log_config(c, "gen-corpus", dir);
      gen_corpus(c, dir);
      std::cout << "corpus written to " << dir.string() << "\n";
      return 0;
    }
    for (const auto& t : trains) {
      if (!t.cmd->parsed()) continue;
      const fs::path dir = out.empty() ? fs::path("checkpoints") : out;
      log_config(c, t.cmd->get_name(), dir);
      TrainOptions opt{corpus, dir, std::nullopt, &std::cerr};
      if (!resume.empty()) opt.resume = resume;
      const TrainResult r = train(t.kind, c, opt);
      std::cout << "module=" << kind_name(t.kind) << " steps=" << r.first_step << ".." << r.final_step
                << " first_loss=" << r.first_loss << " last_loss=" << r.last_loss
                << " checkpoint=" << r.checkpoint.string() << "\n";
      return 0;
    }
    if (synth->parsed()) {
      if (!length && !predict) throw ContractViolation("synthesize needs --length N or --predict-length");
      const fs::path dir = out.empty() ? fs::path("synth") : out;
      log_config(c, "synthesize", dir);
      const Synthesizer s(c, checkpoints, predict);
      PromptRecord prompt;
      prompt.semantic = parse_ids(prompt_semantic, "--prompt-semantic");
      if (!prompt_grid.empty()) {
        const auto grids = read_grids(prompt_grid);
        if (grids.size() != 1) throw ContractViolation("--prompt-grid file must hold one grid");
        prompt.acoustic = grids[0];
      }
      prompt.phones = parse_ids(prompt_phones, "--prompt-phones");
      for (Token d : parse_ids(prompt_durations, "--prompt-durations"))
        prompt.durations.push_back(static_cast<float>(d));
      Rng rng(derive_seed(c.count("seed"), "synthesize"));
      const TokenSequence ids = parse_ids(text, "--text");
      const TokenSequence target_phones = parse_ids(phones, "--phones");
      const SynthesisResult r = s.run(ids, prompt, length, rng, target_phones);
      const std::vector<TokenSequence> seqs{r.semantic};
      write_sequences(dir / "semantic.txt", seqs);
      const std::vector<TokenGrid> grids{r.acoustic};
      write_grids(dir / "acoustic.grid", grids);
      std::ofstream meta(dir / "synth.meta");
      meta << "config_hash=" << c.hash() << "\n"
           << "length=" << r.semantic.size() << "\n"
           << "length_mode=" << (r.predicted_length ? "predicted" : "given") << "\n"
           << "prompt_frames=" << prompt.semantic.size() << "\n"
           << "layers=" << r.acoustic.layers << "\n";
      std::cout << "length=" << r.semantic.size() << " output=" << dir.string() << "\n";
      return 0;
    }
    if (eval->parsed()) {
      const fs::path dir = out.empty() ? fs::path("eval") : out;
      log_config(c, "eval", dir);
      EvalOptions opt{checkpoints, corpus, {}, &std::cerr};
      if (!no_sweep) opt.sweep = c.list("eval.sweep");
      const EvalReport r = evaluate(c, opt);
      write_report(dir / "report.txt", r);
      std::cout << format_report(r);
      return 0;
    }
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("IO_ERROR", e.what());
  } catch (const std::exception& e) {
    return fail("INTERNAL", e.what());
  }
  return 0;
}
