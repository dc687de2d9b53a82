// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every selected criterion passes.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "kanli/binary_io.hpp"
#include "kanli/gradcheck.hpp"
#include "kanli/harness/experiment.hpp"
#include "kanli/kb/lexicon.hpp"
#include "kanli/kb/triples.hpp"
#include "kanli/kernels.hpp"
#include "kanli/model/checkpoint.hpp"
#include "support/oracles.hpp"

namespace {

using namespace kanli;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

std::size_t dim(std::mt19937_64& rng, std::size_t lo = 1, std::size_t hi = 8) {
  return lo + rng() % (hi - lo + 1);
}

// ------------------------------------------------------------------ 1

Outcome kernel_oracles() {
  const auto t0 = Clock::now();
  constexpr int kTrials = 120;
  constexpr double kTol = 1e-12;
  std::mt19937_64 rng(20240601);
  std::map<std::string, double> worst;
  auto note = [&](const std::string& k, const Tensor& got, const Tensor& want) {
    const double e = got.shape() == want.shape() ? oracle::max_abs_diff(got, want) : INFINITY;
    worst[k] = std::max(worst[k], e);
  };
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t m = dim(rng), p = dim(rng), q = dim(rng);
    const Tensor a = oracle::random_tensor(rng, {m, p}), b = oracle::random_tensor(rng, {p, q});
    note("matmul", kernels::matmul(a, b), oracle::matmul(a, b));
    note("matmul", kernels::matmul(oracle::transpose(a), b, true, false), oracle::matmul(a, b));
    note("matmul", kernels::matmul(a, oracle::transpose(b), false, true), oracle::matmul(a, b));

    const Tensor x = oracle::random_tensor(rng, {m, q}, -20, 20);
    note("softmax_rows", kernels::softmax_rows(x), oracle::softmax_rows(x));
    const std::size_t valid = dim(rng, 1, q);
    note("softmax_rows", kernels::softmax_rows(x, valid), oracle::masked_softmax_rows(x, valid));

    const Tensor g = oracle::random_tensor(rng, {q}), bias = oracle::random_tensor(rng, {q});
    const Tensor xs = oracle::random_tensor(rng, {m, q}, -3, 3);
    note("layer_norm", kernels::layer_norm(xs, g, bias), oracle::layer_norm(xs, g, bias, 1e-5));

    const std::size_t H = dim(rng), W = dim(rng), C = dim(rng, 1, 5), F = dim(rng, 1, 4);
    const std::size_t kh = dim(rng, 1, std::min<std::size_t>(H, 5));
    const std::size_t stride = dim(rng, 1, 2);
    const Tensor in = oracle::random_tensor(rng, {H, W, C});
    const Tensor square = oracle::random_tensor(rng, {kh, kh, C, F});
    note("conv2d", kernels::conv2d(in, square, stride, kernels::Padding::kSame),
         oracle::conv2d(in, square, stride, true));
    if (kh <= W) {
      note("conv2d", kernels::conv2d(in, square, stride, kernels::Padding::kValid),
           oracle::conv2d(in, square, stride, false));
    }

    const std::size_t size = dim(rng, 1, std::min(H, W));
    note("max_pool2d", kernels::max_pool2d(in, size, stride), oracle::max_pool2d(in, size, stride));
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = secs < 10.0;
  std::ostringstream ss;
  for (const auto& [k, e] : worst) {
    o.pass = o.pass && e <= kTol;
    ss << k << " " << fmt("%.1e", e) << ", ";
  }
  ss << kTrials << "+ instances each, " << fmt("%.2fs", secs);
  o.detail = ss.str();
  return o;
}

// ------------------------------------------------------------------ 2

model::EncoderConfig small_full_config() {
  model::EncoderConfig cfg = harness::default_experiment_config().model;
  cfg.num_layers = 2;
  cfg.num_heads = 2;
  cfg.d_model = 16;
  cfg.seq_len = 12;
  cfg.vocab_size = 10;
  cfg.m1_enabled = cfg.m2_enabled = cfg.m3_enabled = true;
  return cfg;
}

model::EncoderInput random_input(std::mt19937_64& rng, std::size_t n, std::size_t vocab,
                                 bool zero_E) {
  model::EncoderInput in;
  in.attention_len = dim(rng, 5, n);
  const std::size_t premise = dim(rng, 2, in.attention_len - 2);
  for (std::size_t i = 0; i < n; ++i) {
    in.token_ids.push_back(i < in.attention_len ? rng() % vocab : 0);
    in.segment_ids.push_back(i > premise && i < in.attention_len ? 1 : 0);
  }
  in.E = Tensor({n, n, 5});
  if (!zero_E) {
    for (std::size_t i = 0; i < in.attention_len; ++i)
      for (std::size_t j = 0; j < in.attention_len; ++j)
        for (std::size_t r = 0; r < 5; ++r) in.E.at(i, j, r) = unit_uniform(rng());
  }
  return in;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto cfg = small_full_config();
  model::Encoder enc(cfg, 11);
  std::mt19937_64 rng(12);
  // Move away from the structured initial values (unit gains, zero biases).
  for (auto& [name, var] : enc.params()) {
    Tensor v = var.value();
    for (auto& x : v.data()) x += 0.2 * (unit_uniform(rng()) - 0.5);
    enc.params().assign(name, v);
  }
  const auto in = random_input(rng, cfg.seq_len, cfg.vocab_size, false);
  const auto report = finite_diff_check([&](ParamStore&) { return enc.loss(in, 1); }, enc.params(),
                                        1e-5, 1e-5);
  std::size_t scalars = 0;
  for (const auto& p : report.params) scalars += p.count;
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = report.passed && report.max_rel_error < 1e-5 &&
           report.params.size() == enc.params().size() && secs < 300.0;
  o.detail = std::to_string(report.params.size()) + " tensors, " + std::to_string(scalars) +
             " scalars, max rel error " + fmt("%.2e", report.max_rel_error) + ", " +
             fmt("%.1fs", secs);
  return o;
}

// ------------------------------------------------------------------ 3

Outcome m1_identity() {
  auto knowledge = small_full_config();
  knowledge.m2_enabled = knowledge.m3_enabled = false;
  auto vanilla = knowledge;
  vanilla.m1_enabled = false;
  std::mt19937_64 rng(33);
  std::size_t identical = 0;
  constexpr std::size_t kInputs = 100;
  for (std::size_t t = 0; t < kInputs; ++t) {
    const std::uint64_t seed = rng();
    const model::Encoder a(knowledge, seed), b(vanilla, seed);
    const auto in = random_input(rng, knowledge.seq_len, knowledge.vocab_size, true);
    const Tensor la = a.forward(in).value(), lb = b.forward(in).value();
    bool same = la.shape() == lb.shape();
    for (std::size_t i = 0; same && i < la.size(); ++i) {
      same = std::memcmp(&la.values()[i], &lb.values()[i], sizeof(double)) == 0;
    }
    identical += same;
  }
  return {identical == kInputs,
          std::to_string(identical) + "/" + std::to_string(kInputs) + " inputs bit-identical"};
}

// ------------------------------------------------------------------ 4

Outcome knowledge_fidelity() {
  std::vector<std::string> problems;
  // Chains w0 -> w1 -> ... -> wn.
  for (int n = 1; n <= 8; ++n) {
    kb::HypernymGraph g;
    for (int i = 0; i < n; ++i) g.add_hypernym("w" + std::to_string(i), "w" + std::to_string(i + 1));
    const double want = 1.0 - n / 8.0;
    const double got = kb::hypernymy_feature(g, "w0", "w" + std::to_string(n));
    if (got != want) problems.push_back("chain n=" + std::to_string(n));
  }
  {
    kb::HypernymGraph g;
    for (int i = 0; i < 7; ++i) g.add_hypernym("w" + std::to_string(i), "w" + std::to_string(i + 1));
    if (kb::hypernymy_feature(g, "w0", "w7") != 0.125) problems.push_back("n=7 value");
  }

  // Directional invariant on random DAGs with synonyms, antonyms and
  // ConceptNet edges mixed in.
  std::mt19937_64 rng(44);
  std::size_t checked = 0, nonzero = 0;
  while (checked < 1000) {
    const std::size_t words = 12 + rng() % 10;
    auto w = [](std::size_t i) { return "x" + std::to_string(i); };
    std::vector<kb::RelationTriple> wn, cn;
    for (std::size_t i = 1; i < words; ++i) {
      wn.push_back({w(i), w(rng() % i), "Hypernym"});
      if (rng() % 3 == 0) wn.push_back({w(i), w(rng() % i), "Hypernym"});
    }
    wn.push_back({w(rng() % words), w(rng() % words), "Antonym"});
    wn.push_back({w(rng() % words), "s" + std::to_string(rng() % 3), "InSynset"});
    cn.push_back({w(rng() % words), "c" + std::to_string(rng() % 4), "hyponymy",
                  kb::Source::kConceptNet});
    const auto lex = kb::build_lexicon(wn, cn, kb::HypernymGraph::from_wordnet(wn));
    for (int k = 0; k < 100 && checked < 1000; ++k, ++checked) {
      const std::string a = w(rng() % words), b = w(rng() % words);
      const auto ab = lex.lookup(a, b), ba = lex.lookup(b, a);
      if (ab[kb::Relation::kHypernymy] != ba[kb::Relation::kHyponymy]) {
        problems.push_back("mirror " + a + "," + b);
      }
      nonzero += ab[kb::Relation::kHypernymy] > 0.0;
    }
  }

  // Relation condensation table.
  const std::vector<std::pair<std::string, kb::Relation>> table = {
      {"HasA", kb::Relation::kHypernymy},        {"InstanceOf", kb::Relation::kHyponymy},
      {"Entails", kb::Relation::kHyponymy},      {"IsA", kb::Relation::kHyponymy},
      {"MannerOf", kb::Relation::kHyponymy},     {"MadeOf", kb::Relation::kHyponymy},
      {"PartOf", kb::Relation::kHyponymy},       {"DerivedFrom", kb::Relation::kHyponymy},
      {"DistinctFrom", kb::Relation::kCoHyponyms}, {"Antonym", kb::Relation::kAntonymy},
      {"FormOf", kb::Relation::kSynonymy},       {"SimilarTo", kb::Relation::kSynonymy},
      {"Synonym", kb::Relation::kSynonymy}};
  for (const auto& [name, rel] : table) {
    const auto r = kb::condense_conceptnet({{"x", "y", "/r/" + name, kb::Source::kConceptNet}});
    if (r.triples.size() != 1 || r.triples[0].relation != kb::relation_name(rel)) {
      problems.push_back("table " + name);
    }
  }
  for (const std::string name : {"AtLocation", "RelatedTo", "UsedFor", "Causes", "HasProperty",
                                 "CapableOf", "Desires", "HasContext", "SymbolOf"}) {
    const auto r = kb::condense_conceptnet({{"x", "y", name, kb::Source::kConceptNet}});
    if (!r.triples.empty() || r.dropped_unmapped != 1) problems.push_back("kept " + name);
  }

  Outcome o;
  o.pass = problems.empty() && nonzero > 0;
  o.detail = "chains 1..8, " + std::to_string(checked) + " random pairs (" +
             std::to_string(nonzero) + " hypernymous), " + std::to_string(table.size()) +
             " mapped relations";
  if (!problems.empty()) o.detail += "; first problem: " + problems.front();
  return o;
}

// ------------------------------------------------------------------ 5-8

constexpr std::size_t kSeeds = 3;

double mean_accuracy(harness::ExperimentRunner& runner, harness::ExperimentConfig cfg) {
  std::vector<harness::ExperimentConfig> cfgs;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    cfgs.push_back(cfg);
    cfgs.back().train.seed = cfg.train.seed + s;
  }
  const auto acc = runner.accuracies(cfgs);
  double sum = 0.0;
  for (double a : acc) sum += a;
  return sum / static_cast<double>(acc.size());
}

harness::ExperimentConfig only(harness::ExperimentConfig cfg, bool m1, bool m2, bool m3) {
  cfg.model.m1_enabled = m1;
  cfg.model.m2_enabled = m2;
  cfg.model.m3_enabled = m3;
  return cfg;
}

Outcome causal_benefit(harness::ExperimentRunner& runner, const harness::ExperimentConfig& base) {
  const auto t0 = Clock::now();
  const double knowledge = mean_accuracy(runner, harness::with_knowledge(base));
  const double baseline = mean_accuracy(runner, harness::without_knowledge(base));
  const double secs = seconds_since(t0);
  return {knowledge >= 0.85 && baseline <= 0.45 && secs < 900.0 &&
              base.task.test_examples >= 300,
          fmt("knowledge %.4f (>= 0.85), baseline %.4f (<= 0.45), %.0f test examples, %.0fs",
              knowledge, baseline, static_cast<double>(base.task.test_examples), secs)};
}

Outcome knowledge_trend(harness::ExperimentRunner& runner, const harness::ExperimentConfig& base,
                        const std::string& out_dir) {
  const std::vector<double> grid = {0.2, 0.4, 0.6, 0.8, 1.0};
  const auto rows = harness::run_sweep(harness::SweepKind::kKnowledgeFraction, grid,
                                       harness::with_knowledge(base), kSeeds, runner);
  if (!out_dir.empty()) io::write_file(out_dir + "/knowledge_fraction.csv", harness::sweep_csv(rows));
  bool monotone = true;
  std::string seq;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].accuracy < rows[i - 1].accuracy - 0.02) monotone = false;
    seq += (i ? " " : "") + fmt("%.3f", rows[i].accuracy);
  }
  const double gain = rows.back().accuracy - rows.front().accuracy;
  return {monotone && gain >= 0.10 && rows.size() == grid.size(),
          "[" + seq + "], gain " + fmt("%.3f", gain) + " (>= 0.10), drops within 0.02"};
}

Outcome ablation(harness::ExperimentRunner& runner, const harness::ExperimentConfig& base) {
  const double baseline = mean_accuracy(runner, harness::without_knowledge(base));
  const double m1 = mean_accuracy(runner, only(base, true, false, false));
  const double m2 = mean_accuracy(runner, only(base, false, true, false));
  const double m3 = mean_accuracy(runner, only(base, false, false, true));
  const double need = baseline + 0.15;
  return {m1 >= need && m2 >= need && m3 >= need,
          fmt("baseline %.4f; M1 %.4f, M2 %.4f, M3 %.4f", baseline, m1, m2, m3) +
              fmt(" (each >= %.4f)", need)};
}

Outcome determinism(const harness::ExperimentConfig& base) {
  std::vector<std::string> problems;
  // Sweep CSVs from two independent runners, one threaded.
  harness::ExperimentConfig small = base;
  small.train.epochs = 3;
  small.task.train_examples = 300;
  small.task.test_examples = 90;
  const std::vector<double> grid = {0.25, 0.5, 1.0};
  harness::ExperimentRunner r1(1), r2(2);
  const auto a = harness::sweep_csv(
      harness::run_sweep(harness::SweepKind::kDataFraction, grid, small, 2, r1));
  const auto b = harness::sweep_csv(
      harness::run_sweep(harness::SweepKind::kDataFraction, grid, small, 2, r2));
  if (a != b) problems.push_back("sweep CSV differs");

  // Checkpoint through a file.
  const auto dir = std::filesystem::temp_directory_path() / "kanli_acceptance";
  std::filesystem::create_directories(dir);
  small.train.epochs = 1;
  const auto run = harness::run_experiment(small);
  const std::string ck = (dir / "model.kam").string();
  model::save_checkpoint(ck, *run.encoder, run.vocab.tokens());
  const auto back = model::load_checkpoint(ck);
  if (!(back.encoder->config() == run.encoder->config())) problems.push_back("config");
  if (back.vocab != run.vocab.tokens()) problems.push_back("vocab");
  if (back.encoder->params().size() != run.encoder->params().size()) problems.push_back("count");
  for (const auto& [name, var] : run.encoder->params()) {
    if (!back.encoder->params().contains(name) ||
        !(back.encoder->params().get(name).value() == var.value())) {
      problems.push_back("param " + name);
    }
  }
  // Lexicon through a file (values are stored as f32; the task lexicon's
  // values are all exactly representable).
  const auto task = harness::generate_task(small.task, 5);
  const std::string lx = (dir / "lexicon.kal").string();
  kb::save_lexicon(lx, task.lexicon);
  if (!(kb::load_lexicon(lx) == task.lexicon)) problems.push_back("lexicon");
  std::filesystem::remove_all(dir);

  Outcome o;
  o.pass = problems.empty();
  o.detail = "sweep CSV (" + std::to_string(std::count(a.begin(), a.end(), '\n')) +
             " lines) reproduced bit-for-bit; checkpoint " +
             std::to_string(run.encoder->params().size()) + " tensors and lexicon " +
             std::to_string(task.lexicon.size()) + " pairs round-trip";
  if (!problems.empty()) o.detail = "mismatch: " + problems.front();
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  std::size_t workers = 1;
  std::string out_dir;
  app.add_option("--only", selected, "Run only these criteria (1-8)")->check(CLI::Range(1, 8));
  app.add_option("--workers", workers, "Parallel training runs");
  app.add_option("--out-dir", out_dir, "Directory for sweep CSVs");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> want(selected.begin(), selected.end());
  auto enabled = [&](int i) { return want.empty() || want.count(i) > 0; };
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  harness::ExperimentRunner runner(workers);
  const harness::ExperimentConfig base = harness::default_experiment_config();

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"kernel oracles", kernel_oracles},
      {"gradient check", gradient_suite},
      {"M1 identity with zero knowledge", m1_identity},
      {"knowledge representation fidelity", knowledge_fidelity},
      {"causal knowledge benefit", [&] { return causal_benefit(runner, base); }},
      {"knowledge-fraction trend", [&] { return knowledge_trend(runner, base, out_dir); }},
      {"ablation coverage", [&] { return ablation(runner, base); }},
      {"determinism and serialization", [&] { return determinism(base); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!enabled(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%s (%zu training runs)\n", failures ? "SOME CRITERIA FAILED" : "ALL CRITERIA PASSED",
              runner.runs_performed());
  return failures ? 1 : 0;
}
