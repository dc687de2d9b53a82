// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "kanli/errors.hpp"
#include "kanli/harness/experiment.hpp"
#include "kanli/matrix/knowledge_matrix.hpp"
#include "kanli/model/checkpoint.hpp"

namespace kanli::harness {
namespace {

using kb::Relation;

SyntheticTaskSpec small_spec() {
  SyntheticTaskSpec s;
  s.vocab_size = 90;
  s.num_relation_pairs = 30;
  s.train_examples = 90;
  s.test_examples = 36;
  return s;
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig cfg = default_experiment_config();
  cfg.task = small_spec();
  cfg.train.epochs = 2;
  return cfg;
}

std::size_t count_label(const std::vector<NliExample>& xs, Label l) {
  return static_cast<std::size_t>(
      std::count_if(xs.begin(), xs.end(), [&](const NliExample& e) { return e.label == l; }));
}

// ---------------------------------------------------------------- task

TEST(SyntheticTask, SizesAndCleanSplit) {
  const auto spec = small_spec();
  const auto task = generate_task(spec, 7);
  EXPECT_EQ(task.train.size(), spec.train_examples);
  EXPECT_EQ(task.test.size(), spec.test_examples);
  EXPECT_TRUE(find_split_violations(task).empty());
}

TEST(SyntheticTask, TestWordsNeverAppearInTraining) {
  const auto task = generate_task(SyntheticTaskSpec{}, 3);
  std::set<std::string> train_tokens;
  for (const auto& ex : task.train) {
    for (const auto* s : {&ex.premise, &ex.hypothesis}) {
      for (auto& t : matrix::word_tokenize(*s)) train_tokens.insert(t);
    }
  }
  std::set<std::string> train_words(task.train_words.begin(), task.train_words.end());
  for (const auto& w : task.test_words) EXPECT_FALSE(train_words.count(w)) << w;
  for (const auto& ex : task.test) {
    EXPECT_FALSE(train_tokens.count(ex.premise_word)) << ex.premise_word;
    EXPECT_FALSE(train_tokens.count(ex.hypothesis_word)) << ex.hypothesis_word;
  }
}

TEST(SyntheticTask, LabelsAgreeWithLexicon) {
  const auto task = generate_task(SyntheticTaskSpec{}, 11);
  for (const auto* split : {&task.train, &task.test}) {
    for (const auto& ex : *split) {
      const auto v = task.lexicon.lookup(ex.premise_word, ex.hypothesis_word);
      switch (ex.label) {
        case Label::kEntailment:
          EXPECT_GT(v[Relation::kHypernymy], 0.0) << ex.premise << " / " << ex.hypothesis;
          break;
        case Label::kContradiction:
          EXPECT_TRUE(v[Relation::kAntonymy] > 0.0 || v[Relation::kCoHyponyms] > 0.0)
              << ex.premise << " / " << ex.hypothesis;
          break;
        case Label::kNeutral:
          EXPECT_TRUE(v.is_zero()) << ex.premise << " / " << ex.hypothesis;
          break;
      }
    }
  }
}

TEST(SyntheticTask, SentencesShareOneFrame) {
  const auto task = generate_task(small_spec(), 2);
  for (const auto& ex : task.train) {
    const auto p = matrix::word_tokenize(ex.premise);
    const auto h = matrix::word_tokenize(ex.hypothesis);
    ASSERT_EQ(p.size(), h.size());
    std::size_t diffs = 0;
    for (std::size_t i = 0; i < p.size(); ++i) diffs += p[i] != h[i];
    EXPECT_EQ(diffs, 1u);
    EXPECT_NE(ex.premise.find(ex.premise_word), std::string::npos);
    EXPECT_NE(ex.hypothesis.find(ex.hypothesis_word), std::string::npos);
  }
}

TEST(SyntheticTask, ClassesBalanced) {
  const auto task = generate_task(SyntheticTaskSpec{}, 5);
  for (const auto* split : {&task.train, &task.test}) {
    const double third = split->size() / 3.0;
    for (Label l : {Label::kEntailment, Label::kNeutral, Label::kContradiction}) {
      EXPECT_LE(std::abs(count_label(*split, l) - third), 0.05 * split->size());
    }
  }
}

TEST(SyntheticTask, NoRelationsMeansAllNeutral) {
  auto spec = small_spec();
  spec.num_relation_pairs = 0;
  const auto task = generate_task(spec, 1);
  EXPECT_TRUE(task.lexicon.empty());
  EXPECT_EQ(count_label(task.train, Label::kNeutral), task.train.size());
  EXPECT_EQ(count_label(task.test, Label::kNeutral), task.test.size());
}

TEST(SyntheticTask, AntonymPairsBecomeContradictions) {
  const auto task = generate_task(SyntheticTaskSpec{}, 9);
  std::size_t antonym_examples = 0;
  for (const auto& ex : task.train) {
    if (ex.label != Label::kContradiction) continue;
    for (const auto& t : task.triples) {
      if (t.relation == "Antonym" && ((t.head == ex.premise_word && t.tail == ex.hypothesis_word) ||
                                      (t.tail == ex.premise_word && t.head == ex.hypothesis_word))) {
        ++antonym_examples;
        break;
      }
    }
  }
  EXPECT_GT(antonym_examples, 0u);
}

TEST(SyntheticTask, SeedDeterminism) {
  const auto a = generate_task(small_spec(), 4);
  const auto b = generate_task(small_spec(), 4);
  const auto c = generate_task(small_spec(), 5);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.lexicon, b.lexicon);
  EXPECT_NE(a.train, c.train);
}

TEST(SyntheticTask, TooFewWordsIsConfigError) {
  auto spec = small_spec();
  spec.vocab_size = 10;
  spec.num_relation_pairs = 40;
  EXPECT_THROW(generate_task(spec, 1), ConfigError);
}

TEST(SyntheticTask, SpecValidation) {
  auto spec = small_spec();
  spec.templates = {"no slot here"};
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.templates = {"{} and {}"};
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = small_spec();
  spec.test_share = 1.5;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(SyntheticTask, SpecJsonRoundTrip) {
  auto spec = small_spec();
  spec.templates = {"look, a {}!"};
  EXPECT_EQ(task_spec_from_json(to_json(spec)), spec);
  EXPECT_THROW(task_spec_from_json({{"vocab", 3}}), ConfigError);
}

// ------------------------------------------------------- subsampling

kb::RelationLexicon ten_pair_lexicon() {
  std::vector<kb::RelationTriple> triples;
  for (int i = 0; i < 10; ++i) {
    triples.push_back({"w" + std::to_string(2 * i), "w" + std::to_string(2 * i + 1), "Antonym"});
  }
  return kb::build_lexicon(triples, {}, kb::HypernymGraph::from_wordnet(triples));
}

TEST(SubsampleKnowledge, Extremes) {
  const auto lex = ten_pair_lexicon();
  ASSERT_EQ(lex.size(), 20u);
  EXPECT_EQ(subsample_knowledge(lex, 1.0, 3), lex);
  EXPECT_TRUE(subsample_knowledge(lex, 0.0, 3).empty());
}

TEST(SubsampleKnowledge, HalfKeepsBothDirections) {
  const auto lex = ten_pair_lexicon();
  const auto half = subsample_knowledge(lex, 0.5, 3);
  EXPECT_EQ(half.size(), 10u);
  for (const auto& [key, entry] : half) {
    const auto* mirror = half.find(key.second, key.first);
    ASSERT_NE(mirror, nullptr);
    EXPECT_EQ(entry, *lex.find(key.first, key.second));
  }
  EXPECT_EQ(subsample_knowledge(lex, 0.5, 3), half);
  EXPECT_EQ(subsample_knowledge(lex, 0.3, 3).size(), 6u);
}

TEST(SubsampleKnowledge, NestedAcrossFractionsForOneSeed) {
  const auto lex = generate_task(small_spec(), 1).lexicon;
  const auto small = subsample_knowledge(lex, 0.2, 8);
  const auto large = subsample_knowledge(lex, 0.6, 8);
  for (const auto& [key, _] : small) EXPECT_NE(large.find(key.first, key.second), nullptr);
}

TEST(SubsampleKnowledge, OutOfRangeFraction) {
  const auto lex = ten_pair_lexicon();
  EXPECT_THROW(subsample_knowledge(lex, -0.1, 1), ContractError);
  EXPECT_THROW(subsample_knowledge(lex, 1.1, 1), ContractError);
}

// ------------------------------------------------------ example files

TEST(ExampleFiles, RoundTrip) {
  const auto task = generate_task(small_spec(), 1);
  std::stringstream ss;
  write_examples(ss, task.test);
  const auto back = read_examples(ss);
  ASSERT_EQ(back.size(), task.test.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].premise, task.test[i].premise);
    EXPECT_EQ(back[i].hypothesis, task.test[i].hypothesis);
    EXPECT_EQ(back[i].label, task.test[i].label);
  }
}

TEST(ExampleFiles, Malformed) {
  std::stringstream no_header("a\tb\tneutral\n");
  EXPECT_THROW(read_examples(no_header), FormatError);
  std::stringstream bad_label("premise\thypothesis\tlabel\na\tb\tmaybe\n");
  EXPECT_THROW(read_examples(bad_label), FormatError);
  EXPECT_THROW(load_examples("/nonexistent/dir/x.tsv"), IoError);
}

// ------------------------------------------------------------ dataset

TEST(Vocabulary, SpecialsAndUnknowns) {
  const auto v = Vocabulary::from_examples({{"the cat", "a dog", Label::kNeutral, "", ""}});
  EXPECT_EQ(v.token(0), matrix::kPad);
  EXPECT_EQ(v.token(1), matrix::kUnk);
  EXPECT_EQ(v.token(2), matrix::kCls);
  EXPECT_EQ(v.token(3), matrix::kSep);
  EXPECT_EQ(v.size(), 8u);
  EXPECT_EQ(v.id("zebra"), Vocabulary::kUnkId);
  EXPECT_EQ(v.token(v.id("dog")), "dog");
  EXPECT_EQ(Vocabulary::from_tokens(v.tokens()).tokens(), v.tokens());
  EXPECT_THROW(Vocabulary::from_tokens({"cat"}), FormatError);
}

TEST(Dataset, OutOfVocabularyWordsKeepKnowledge) {
  const std::vector<kb::RelationTriple> triples = {{"hot", "cold", "Antonym"}};
  const auto lex = kb::build_lexicon(triples, {}, kb::HypernymGraph::from_wordnet(triples));
  const auto vocab = Vocabulary::from_examples({{"it is", "it is", Label::kNeutral, "", ""}});
  const auto enc = encode_example({"it is hot", "it is cold", Label::kContradiction, "", ""},
                                  vocab, lex, 12);
  EXPECT_EQ(enc.label, static_cast<std::size_t>(Label::kContradiction));
  EXPECT_EQ(enc.input.token_ids[3], Vocabulary::kUnkId);
  EXPECT_EQ(enc.input.E.at(3, 7, static_cast<std::size_t>(Relation::kAntonymy)), 1.0);
}

// ------------------------------------------------------------ metrics

TEST(Metrics, HandFixture) {
  const auto m = metrics_from_predictions({0, 1, 1, 1, 2, 0}, {0, 0, 1, 1, 2, 2});
  EXPECT_DOUBLE_EQ(m.accuracy, 4.0 / 6.0);
  EXPECT_EQ(m.count, 6u);
  EXPECT_EQ(m.confusion[0][0], 1u);
  EXPECT_EQ(m.confusion[0][1], 1u);
  EXPECT_EQ(m.confusion[1][1], 2u);
  EXPECT_EQ(m.confusion[2][2], 1u);
  EXPECT_EQ(m.confusion[2][0], 1u);
  EXPECT_DOUBLE_EQ(m.precision[0], 0.5);
  EXPECT_DOUBLE_EQ(m.precision[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.precision[2], 1.0);
  EXPECT_DOUBLE_EQ(m.recall[0], 0.5);
  EXPECT_DOUBLE_EQ(m.recall[1], 1.0);
  EXPECT_DOUBLE_EQ(m.recall[2], 0.5);
}

TEST(Metrics, ConstantPredictor) {
  std::vector<std::size_t> gold, pred;
  for (std::size_t i = 0; i < 300; ++i) {
    gold.push_back(i % 3);
    pred.push_back(1);
  }
  const auto m = metrics_from_predictions(pred, gold);
  EXPECT_NEAR(m.accuracy, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(m.precision[0], 0.0);
  EXPECT_EQ(m.recall[0], 0.0);
  EXPECT_THROW(metrics_from_predictions({0}, {0, 1}), ContractError);
  EXPECT_THROW(metrics_from_predictions({3}, {0}), ContractError);
}

// --------------------------------------------------------------- Adam

TEST(Adam, BiasCorrectedSteps) {
  ParamStore store;
  store.create("w", {2}, Init::kZeros);
  store.assign("w", Tensor({2}, {1.0, 2.0}));
  const Var c = constant(Tensor({2}, {3.0, -4.0}));
  Adam adam(0.1, 0.9, 0.999, 1e-8);
  for (int step = 1; step <= 2; ++step) {
    store.zero_grad();
    backward(ops::sum(ops::mul(store.get("w"), c)));
    adam.step(store);
    // Constant gradient: bias-corrected m/sqrt(v) is sign(g) each step.
    EXPECT_NEAR(store.get("w").value()[0], 1.0 - 0.1 * step, 1e-8);
    EXPECT_NEAR(store.get("w").value()[1], 2.0 + 0.1 * step, 1e-8);
  }
  EXPECT_EQ(adam.steps(), 2u);
}

// ---------------------------------------------------- train / evaluate

model::EncoderConfig plain_model(std::size_t vocab) {
  model::EncoderConfig cfg = default_experiment_config().model;
  cfg.m1_enabled = cfg.m2_enabled = cfg.m3_enabled = false;
  cfg.vocab_size = vocab;
  return cfg;
}

// Label decided by the hypothesis colour word; premises vary.
std::vector<NliExample> colour_examples() {
  const std::vector<std::string> subjects = {"cat", "dog", "bird", "fish", "cow", "pig",
                                             "ant", "bee", "owl", "fox"};
  const std::vector<std::string> colours = {"red", "blue", "green"};
  std::vector<NliExample> out;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      out.push_back({"the " + subjects[i], "it is " + colours[c], static_cast<Label>(c), "", ""});
    }
  }
  return out;
}

TEST(Training, SeparableToyIsLearned) {
  const auto examples = colour_examples();
  const auto vocab = Vocabulary::from_examples(examples);
  const auto data = encode_examples(examples, vocab, {}, 12);
  model::Encoder enc(plain_model(vocab.size()), 3);
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 6;
  tc.learning_rate = 3e-3;
  const auto fit = train(enc, data, tc);
  ASSERT_EQ(fit.loss_curve.size(), 50u);
  EXPECT_LT(fit.loss_curve.back(), fit.loss_curve.front());
  EXPECT_GT(evaluate(enc, data).accuracy, 0.95);
}

TEST(Training, SameSeedSameLossCurve) {
  const auto examples = colour_examples();
  const auto vocab = Vocabulary::from_examples(examples);
  const auto data = encode_examples(examples, vocab, {}, 12);
  TrainConfig tc;
  tc.epochs = 3;
  tc.word_dropout = 0.3;
  model::Encoder a(plain_model(vocab.size()), 5), b(plain_model(vocab.size()), 5);
  const auto ma = train(a, data, tc);
  const auto mb = train(b, data, tc);
  EXPECT_EQ(ma.loss_curve, mb.loss_curve);
  for (const auto& [name, var] : a.params()) {
    EXPECT_EQ(var.value(), b.params().get(name).value()) << name;
  }
}

TEST(Training, EpochCallbackAndSmokeCheckpoint) {
  auto examples = colour_examples();
  examples.resize(10);
  const auto vocab = Vocabulary::from_examples(examples);
  const auto data = encode_examples(examples, vocab, {}, 12);
  model::Encoder enc(plain_model(vocab.size()), 1);
  TrainConfig tc;
  tc.epochs = 1;
  std::vector<EpochLog> logs;
  train(enc, data, tc, [&](const EpochLog& e) { logs.push_back(e); });
  ASSERT_EQ(logs.size(), 1u);
  EXPECT_EQ(logs[0].epoch, 1u);
  EXPECT_TRUE(std::isfinite(logs[0].mean_loss));

  std::stringstream ss;
  model::write_checkpoint(ss, enc, vocab.tokens());
  const auto back = model::read_checkpoint(ss);
  EXPECT_EQ(back.vocab, vocab.tokens());
  EXPECT_EQ(evaluate(*back.encoder, data).accuracy, evaluate(enc, data).accuracy);
  for (const auto& d : data) {
    EXPECT_EQ(back.encoder->forward(d.input).value(), enc.forward(d.input).value());
  }
}

TEST(Training, NonFiniteLossDiverges) {
  const auto examples = colour_examples();
  const auto vocab = Vocabulary::from_examples(examples);
  const auto data = encode_examples(examples, vocab, {}, 12);
  model::Encoder enc(plain_model(vocab.size()), 1);
  Tensor w = enc.params().get("cls.b").value();
  w[0] = std::numeric_limits<double>::quiet_NaN();
  enc.params().assign("cls.b", w);
  TrainConfig tc;
  tc.epochs = 1;
  EXPECT_THROW(train(enc, data, tc), DivergenceError);
}

TEST(Training, RejectsBadInput) {
  model::Encoder enc(plain_model(8), 1);
  TrainConfig tc;
  EXPECT_THROW(train(enc, {}, tc), ContractError);
  tc.epochs = 0;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.word_dropout = 1.0;
  EXPECT_THROW(tc.validate(), ConfigError);
}

TEST(Evaluate, WorkersAgreeAndLengthChecked) {
  const auto examples = colour_examples();
  const auto vocab = Vocabulary::from_examples(examples);
  const auto data = encode_examples(examples, vocab, {}, 12);
  model::Encoder enc(plain_model(vocab.size()), 2);
  const auto one = evaluate(enc, data, 1);
  const auto three = evaluate(enc, data, 3);
  EXPECT_EQ(one.confusion, three.confusion);
  const auto longer = encode_examples(examples, vocab, {}, 14);
  EXPECT_THROW(evaluate(enc, longer), ConfigError);
}

TEST(TrainConfigJson, RoundTripAndStrictKeys) {
  TrainConfig tc;
  tc.epochs = 7;
  tc.word_dropout = 0.25;
  tc.seed = 99;
  EXPECT_EQ(train_config_from_json(to_json(tc)), tc);
  EXPECT_THROW(train_config_from_json({{"epoch", 3}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"epochs", "many"}}), ConfigError);
}

// --------------------------------------------------------- experiments

TEST(Experiment, ConfigJson) {
  const auto cfg = default_experiment_config();
  EXPECT_EQ(experiment_config_from_json(to_json(cfg)), cfg);
  const auto patched = experiment_config_from_json({{"train", {{"epochs", 3}}}});
  EXPECT_EQ(patched.train.epochs, 3u);
  EXPECT_EQ(patched.model, cfg.model);
  EXPECT_THROW(experiment_config_from_json({{"optimizer", {}}}), ConfigError);
  EXPECT_THROW(load_experiment_config("/nonexistent/cfg.json"), IoError);
}

TEST(Experiment, DataFractionTrimsTrainingSet) {
  auto cfg = tiny_experiment();
  cfg.train.data_fraction = 0.5;
  cfg.train.epochs = 1;
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.train.count, 45u);
  EXPECT_EQ(r.test.count, cfg.task.test_examples);
  EXPECT_EQ(r.encoder->config().vocab_size, r.vocab.size());
}

TEST(Experiment, RunnerMemoizes) {
  ExperimentRunner runner(2);
  auto a = tiny_experiment();
  auto b = a;
  b.train.seed = 2;
  const auto first = runner.accuracies({a, b, a});
  EXPECT_EQ(runner.runs_performed(), 2u);
  EXPECT_EQ(first[0], first[2]);
  EXPECT_EQ(runner.accuracy(b), first[1]);
  EXPECT_EQ(runner.runs_performed(), 2u);
}

TEST(Experiment, KnowledgeToggles) {
  auto base = tiny_experiment();
  const auto off = without_knowledge(base);
  EXPECT_FALSE(off.model.any_knowledge());
  base.model.m1_enabled = base.model.m3_enabled = false;
  const auto kept = with_knowledge(base);
  EXPECT_FALSE(kept.model.m1_enabled);
  EXPECT_TRUE(kept.model.m2_enabled);
  const auto all = with_knowledge(off);
  EXPECT_TRUE(all.model.m1_enabled && all.model.m2_enabled && all.model.m3_enabled);
}

TEST(Sweep, RowShapes) {
  ExperimentRunner runner;
  auto cfg = tiny_experiment();
  cfg.train.epochs = 1;
  const auto data_rows = run_sweep(SweepKind::kDataFraction, {1.0}, cfg, 1, runner);
  ASSERT_EQ(data_rows.size(), 2u);
  EXPECT_EQ(data_rows[0].condition, "baseline");
  EXPECT_EQ(data_rows[1].condition, "knowledge");
  const auto k_rows = run_sweep(SweepKind::kKnowledgeFraction, {0.2, 0.4, 0.6, 0.8, 1.0}, cfg, 1,
                                runner);
  ASSERT_EQ(k_rows.size(), 5u);
  for (const auto& r : k_rows) {
    EXPECT_EQ(r.sweep, "knowledge_fraction");
    EXPECT_EQ(r.seed, cfg.train.seed);
  }
  EXPECT_THROW(run_sweep(SweepKind::kDataFraction, {0.5, 0.5}, cfg, 1, runner), ConfigError);
  EXPECT_THROW(run_sweep(SweepKind::kDataFraction, {}, cfg, 1, runner), ConfigError);
  EXPECT_THROW(run_sweep(SweepKind::kDataFraction, {1.0}, cfg, 0, runner), ConfigError);
}

TEST(Sweep, MeanOverSeeds) {
  ExperimentRunner runner;
  auto cfg = tiny_experiment();
  cfg.train.epochs = 1;
  const auto rows = run_sweep(SweepKind::kKnowledgeFraction, {1.0}, cfg, 2, runner);
  auto s2 = with_knowledge(cfg);
  s2.train.seed = cfg.train.seed + 1;
  const double expected = (runner.accuracy(with_knowledge(cfg)) + runner.accuracy(s2)) / 2.0;
  EXPECT_DOUBLE_EQ(rows[0].accuracy, expected);
  EXPECT_EQ(runner.runs_performed(), 2u);
}

TEST(Sweep, CsvIsDeterministic) {
  auto cfg = tiny_experiment();
  cfg.train.epochs = 1;
  ExperimentRunner r1(1), r2(3);
  const auto a = sweep_csv(run_sweep(SweepKind::kDataFraction, {0.5, 1.0}, cfg, 2, r1));
  const auto b = sweep_csv(run_sweep(SweepKind::kDataFraction, {0.5, 1.0}, cfg, 2, r2));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("sweep,point,condition,accuracy,seed\n", 0), 0u);
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 5);
}

}  // namespace
}  // namespace kanli::harness
