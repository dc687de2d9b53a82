// SPDX-License-Identifier: Apache-2.0
// kanli: command-line front end for lexicon ingestion, knowledge matrices,
// synthetic tasks, training, evaluation, sweeps and gradient checks.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "kanli/binary_io.hpp"
#include "kanli/errors.hpp"
#include "kanli/gradcheck.hpp"
#include "kanli/harness/experiment.hpp"
#include "kanli/kb/lexicon.hpp"
#include "kanli/kb/triples.hpp"
#include "kanli/matrix/knowledge_matrix.hpp"
#include "kanli/model/checkpoint.hpp"

namespace {

using namespace kanli;
using nlohmann::json;

constexpr int kExitContract = 1;
constexpr int kExitIo = 2;

struct CommonFlags {
  std::string config;
  int m1 = 0, m2 = 0, m3 = 0;  // +1 on, -1 off, 0 unspecified
  std::optional<double> knowledge_fraction;
  std::optional<double> data_fraction;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd, bool model_flags) {
    cmd->add_option("--config", config, "Experiment config JSON");
    cmd->add_option("--seed", seed, "Run seed");
    if (!model_flags) return;
    cmd->add_flag("--m1,!--no-m1", m1, "Enable M1 (attention adjustment)");
    cmd->add_flag("--m2,!--no-m2", m2, "Enable M2 (knowledge attention layer)");
    cmd->add_flag("--m3,!--no-m3", m3, "Enable M3 (global knowledge block)");
    cmd->add_option("--knowledge-fraction", knowledge_fraction, "Share of lexicon pairs kept");
    cmd->add_option("--data-fraction", data_fraction, "Share of training data used");
  }

  // Naming any mechanism positively selects exactly the named ones; --no-mX
  // switches one off.
  harness::ExperimentConfig resolve() const {
    harness::ExperimentConfig cfg =
        config.empty() ? harness::default_experiment_config() : harness::load_experiment_config(config);
    if (m1 > 0 || m2 > 0 || m3 > 0) {
      cfg.model.m1_enabled = m1 > 0;
      cfg.model.m2_enabled = m2 > 0;
      cfg.model.m3_enabled = m3 > 0;
    }
    if (m1 < 0) cfg.model.m1_enabled = false;
    if (m2 < 0) cfg.model.m2_enabled = false;
    if (m3 < 0) cfg.model.m3_enabled = false;
    if (knowledge_fraction) cfg.train.knowledge_fraction = *knowledge_fraction;
    if (data_fraction) cfg.train.data_fraction = *data_fraction;
    if (seed) cfg.train.seed = *seed;
    cfg.train.validate();
    cfg.model.validate();
    return cfg;
  }
};

json metrics_json(const harness::Metrics& m) {
  json j = {{"accuracy", m.accuracy}, {"count", m.count}, {"confusion", m.confusion}};
  for (std::size_t c = 0; c < harness::kNumLabels; ++c) {
    const std::string name(harness::label_name(static_cast<harness::Label>(c)));
    j["precision"][name] = m.precision[c];
    j["recall"][name] = m.recall[c];
  }
  if (!m.loss_curve.empty()) j["loss_curve"] = m.loss_curve;
  return j;
}

// Sentence pairs with an optional label column and optional header row.
std::vector<harness::NliExample> read_pairs(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::vector<harness::NliExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("premise\thypothesis", 0) == 0)) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string s; std::getline(ss, s, '\t');) f.push_back(s);
    if (f.size() < 2 || f.size() > 3) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected 2 or 3 fields");
    }
    harness::NliExample ex{f[0], f[1], harness::Label::kNeutral, "", ""};
    if (f.size() == 3) {
      const auto label = harness::label_from_name(f[2]);
      if (!label) throw FormatError(path + ":" + std::to_string(lineno) + ": unknown label");
      ex.label = *label;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    io::write_file(path, text);
  }
}

int cmd_ingest(const std::string& wordnet, const std::string& conceptnet, const std::string& out,
               const std::string& stats_out) {
  auto wn = kb::parse_triples(wordnet, kb::Source::kWordNet);
  std::vector<kb::RelationTriple> cn;
  std::size_t warnings = wn.warnings.size();
  if (!conceptnet.empty()) {
    auto parsed = kb::parse_triples(conceptnet, kb::Source::kConceptNet);
    warnings += parsed.warnings.size();
    const auto condensed = kb::condense_conceptnet(parsed.triples);
    std::cerr << "conceptnet: kept " << condensed.triples.size() << ", dropped "
              << condensed.dropped_unmapped << " unmapped and " << condensed.dropped_multiword
              << " multi-word\n";
    cn = condensed.triples;
  }
  for (const auto& w : wn.warnings) std::cerr << wordnet << ":" << w.line << ": " << w.message << "\n";
  kb::BuildReport report;
  const auto lexicon =
      kb::build_lexicon(wn.triples, cn, kb::HypernymGraph::from_wordnet(wn.triples), &report);
  kb::save_lexicon(out, lexicon);
  std::cerr << "lexicon: " << lexicon.size() << " ordered pairs, " << warnings
            << " malformed lines skipped, " << report.conceptnet_shadowed
            << " conceptnet triples shadowed by wordnet\n";
  write_text(stats_out, kb::stats_tsv(kb::stats(lexicon)));
  return 0;
}

int cmd_build_matrix(const std::string& lexicon_path, const std::string& input, std::size_t n,
                     const std::string& out) {
  const auto lexicon = kb::load_lexicon(lexicon_path);
  std::vector<Tensor> matrices;
  for (const auto& ex : read_pairs(input)) {
    matrices.push_back(matrix::build_E(matrix::tokenize_pair(ex.premise, ex.hypothesis, n), lexicon));
  }
  std::ostringstream bytes(std::ios::binary);
  matrix::write_batch(bytes, matrices);
  io::write_file(out, bytes.str());
  std::cerr << "wrote " << matrices.size() << " knowledge matrices of size " << n << "x" << n
            << "x5\n";
  return 0;
}

int cmd_gen_task(const CommonFlags& flags, const std::string& dir) {
  const auto cfg = flags.resolve();
  const auto task = harness::generate_task(cfg.task, cfg.train.seed);
  const auto violations = harness::find_split_violations(task);
  if (!violations.empty()) throw ContractError("generated split is not clean: " + violations[0]);
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  harness::save_examples((d / "train.tsv").string(), task.train);
  harness::save_examples((d / "test.tsv").string(), task.test);
  std::string triples;
  for (const auto& t : task.triples) triples += t.head + "\t" + t.relation + "\t" + t.tail + "\n";
  io::write_file((d / "wordnet.tsv").string(), triples);
  kb::save_lexicon((d / "lexicon.kal").string(), task.lexicon);
  std::cerr << "train " << task.train.size() << ", test " << task.test.size() << ", lexicon "
            << task.lexicon.size() << " ordered pairs\n";
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& train_path, const std::string& test_path,
              const std::string& lexicon_path, const std::string& out,
              const std::string& metrics_out) {
  const auto cfg = flags.resolve();
  auto log = [](const harness::EpochLog& e) {
    std::fprintf(stderr, "epoch %zu  loss %.6f  train_acc %.4f\n", e.epoch, e.mean_loss,
                 e.train_accuracy);
  };
  harness::GeneratedTask task;
  if (train_path.empty()) {
    task = harness::generate_task(cfg.task, cfg.train.seed);
  } else {
    task.train = harness::load_examples(train_path);
    if (!test_path.empty()) task.test = harness::load_examples(test_path);
    if (!lexicon_path.empty()) task.lexicon = kb::load_lexicon(lexicon_path);
  }
  harness::RunResult r = harness::run_experiment(cfg, task, log);
  if (!out.empty()) model::save_checkpoint(out, *r.encoder, r.vocab.tokens());
  json report = {{"train", metrics_json(r.train)}, {"config", harness::to_json(cfg)}};
  if (!task.test.empty()) report["test"] = metrics_json(r.test);
  write_text(metrics_out, report.dump(2) + "\n");
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint, const std::string& data,
             const std::string& lexicon_path, std::size_t workers) {
  const auto ck = model::load_checkpoint(checkpoint);
  const auto vocab = harness::Vocabulary::from_tokens(ck.vocab);
  kb::RelationLexicon lexicon;
  if (!lexicon_path.empty()) lexicon = kb::load_lexicon(lexicon_path);
  if (flags.knowledge_fraction) {
    lexicon = harness::subsample_knowledge(lexicon, *flags.knowledge_fraction,
                                           flags.seed.value_or(1));
  }
  const auto examples = harness::encode_examples(harness::load_examples(data), vocab, lexicon,
                                                 ck.encoder->config().seq_len);
  const auto metrics = harness::evaluate(*ck.encoder, examples, workers);
  std::cout << metrics_json(metrics).dump(2) << "\n";
  return 0;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad grid value '" + item + "'");
    }
  }
  return grid;
}

int cmd_sweep(const CommonFlags& flags, const std::string& kind, const std::string& grid_text,
              std::size_t seeds, std::size_t workers, const std::string& out) {
  const auto cfg = flags.resolve();
  harness::SweepKind k;
  std::vector<double> grid;
  if (kind == "data_fraction") {
    k = harness::SweepKind::kDataFraction;
    grid = {0.01, 0.05, 0.1, 0.5, 1.0};
  } else if (kind == "knowledge_fraction") {
    k = harness::SweepKind::kKnowledgeFraction;
    grid = {0.2, 0.4, 0.6, 0.8, 1.0};
  } else {
    throw ConfigError("--kind must be data_fraction or knowledge_fraction");
  }
  if (!grid_text.empty()) grid = parse_grid(grid_text);
  harness::ExperimentRunner runner(workers);
  write_text(out, harness::sweep_csv(harness::run_sweep(k, grid, cfg, seeds, runner)));
  return 0;
}

int cmd_gradcheck(const CommonFlags& flags, double h, double tol) {
  harness::ExperimentConfig cfg = flags.resolve();
  cfg.model.vocab_size = 8;
  model::Encoder enc(cfg.model, cfg.train.seed);
  std::mt19937_64 rng(cfg.train.seed);
  // Nudge every parameter so no gradient sits on a symmetric initial point.
  for (auto& [name, var] : enc.params()) {
    Tensor t = var.value();
    for (auto& v : t.data()) v += 0.2 * (unit_uniform(rng()) - 0.5);
    enc.params().assign(name, t);
  }
  const std::size_t n = cfg.model.seq_len;
  model::EncoderInput in;
  in.attention_len = n - n / 4;
  for (std::size_t i = 0; i < n; ++i) {
    in.token_ids.push_back(rng() % 8);
    in.segment_ids.push_back(i >= in.attention_len / 2 && i < in.attention_len ? 1 : 0);
  }
  in.E = Tensor({n, n, 5});
  for (std::size_t i = 0; i < in.attention_len; ++i)
    for (std::size_t j = 0; j < in.attention_len; ++j)
      for (std::size_t r = 0; r < 5; ++r) in.E.at(i, j, r) = unit_uniform(rng());
  const auto report = finite_diff_check([&](ParamStore&) { return enc.loss(in, 2); },
                                        enc.params(), h, tol);
  for (const auto& p : report.params) {
    std::printf("%-28s %6zu  max_abs %.3e  rel %.3e\n", p.name.c_str(), p.count, p.max_abs_error,
                p.rel_error);
  }
  std::printf("max relative error %.3e (tolerance %.1e): %s\n", report.max_rel_error, tol,
              report.passed ? "PASS" : "FAIL");
  return report.passed ? 0 : kExitContract;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-augmented NLI encoder toolkit"};
  app.require_subcommand(1);

  // Each subcommand owns its storage; CLI11 misbehaves when subcommands bind
  // the same variable.
  struct {
    std::string wordnet, conceptnet, out, stats = "-";
  } ig;
  struct {
    std::string lexicon, input, out;
    std::size_t n = 32;
  } bm;
  struct {
    CommonFlags flags;
    std::string dir;
  } gt;
  struct {
    CommonFlags flags;
    std::string train, test, lexicon, out, metrics = "-";
  } tr;
  struct {
    CommonFlags flags;
    std::string checkpoint, data, lexicon;
    std::size_t workers = 1;
  } ev;
  struct {
    CommonFlags flags;
    std::string kind, grid, out;
    std::size_t seeds = 3, workers = 1;
  } sw;
  struct {
    CommonFlags flags;
    double step = 1e-5, tol = 1e-5;
  } gc;

  auto* ingest = app.add_subcommand("ingest", "Build a relation lexicon from triples");
  ingest->add_option("--wordnet", ig.wordnet, "WordNet-style triples TSV")->required();
  ingest->add_option("--conceptnet", ig.conceptnet, "ConceptNet triples TSV");
  ingest->add_option("--out", ig.out, "Lexicon output (KAL1)")->required();
  ingest->add_option("--stats", ig.stats, "Relation statistics TSV (- for stdout)");

  auto* build = app.add_subcommand("build-matrix", "Knowledge matrices for sentence pairs");
  build->add_option("--lexicon", bm.lexicon, "Lexicon file")->required();
  build->add_option("--input", bm.input, "Pairs TSV: premise, hypothesis[, label]")->required();
  build->add_option("--n", bm.n, "Sequence length")->check(CLI::Range(5, 4096));
  build->add_option("--out", bm.out, "Batch output file")->required();

  auto* gen = app.add_subcommand("gen-task", "Write a synthetic task to a directory");
  gt.flags.attach(gen, false);
  gen->add_option("--out-dir", gt.dir, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train on a synthetic or given task");
  tr.flags.attach(train, true);
  train->add_option("--train", tr.train, "Training TSV (default: synthesize from config)");
  train->add_option("--test", tr.test, "Test TSV scored after training");
  train->add_option("--lexicon", tr.lexicon, "Lexicon for given data");
  train->add_option("--out", tr.out, "Checkpoint output (KAM1)");
  train->add_option("--metrics", tr.metrics, "Metrics JSON (- for stdout)");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  ev.flags.attach(eval, true);
  eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", ev.data, "Dataset TSV")->required();
  eval->add_option("--lexicon", ev.lexicon, "Lexicon file");
  eval->add_option("--workers", ev.workers, "Evaluation threads");

  auto* sweep = app.add_subcommand("sweep", "Accuracy over data or knowledge fractions");
  sw.flags.attach(sweep, true);
  sweep->add_option("--kind", sw.kind, "data_fraction or knowledge_fraction")->required();
  sweep->add_option("--grid", sw.grid, "Comma-separated ascending points");
  sweep->add_option("--seeds", sw.seeds, "Seeds per point")->check(CLI::PositiveNumber);
  sweep->add_option("--workers", sw.workers, "Parallel runs");
  sweep->add_option("--out", sw.out, "CSV output (default stdout)");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  gc.flags.attach(grad, true);
  grad->add_option("--step", gc.step, "Central difference step");
  grad->add_option("--tol", gc.tol, "Relative error tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitContract;
  }

  try {
    if (*ingest) return cmd_ingest(ig.wordnet, ig.conceptnet, ig.out, ig.stats);
    if (*build) return cmd_build_matrix(bm.lexicon, bm.input, bm.n, bm.out);
    if (*gen) return cmd_gen_task(gt.flags, gt.dir);
    if (*train) return cmd_train(tr.flags, tr.train, tr.test, tr.lexicon, tr.out, tr.metrics);
    if (*eval) return cmd_eval(ev.flags, ev.checkpoint, ev.data, ev.lexicon, ev.workers);
    if (*sweep) return cmd_sweep(sw.flags, sw.kind, sw.grid, sw.seeds, sw.workers, sw.out);
    if (*grad) return cmd_gradcheck(gc.flags, gc.step, gc.tol);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  }
  return kExitContract;
}
