#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "nile/eval.hpp"
#include "nile/io.hpp"

using namespace nile;
using namespace nile::eval;

namespace {

corpus::Dataset balanced_dataset(int per_label) {
  corpus::Dataset d;
  d.split = corpus::Split::Test;
  int n = 0;
  for (Label l : all_labels()) {
    for (int i = 0; i < per_label; ++i) {
      corpus::Instance inst;
      inst.id = "i" + std::to_string(n++);
      inst.premise = "p";
      inst.hypothesis = "h";
      inst.label = l;
      d.instances.push_back(inst);
    }
  }
  return d;
}

std::vector<LabeledPrediction> predict_all(const corpus::Dataset& d,
                                           Label constant) {
  std::vector<LabeledPrediction> preds;
  for (const auto& inst : d.instances)
    preds.push_back({inst.id, constant, {}, "x"});
  return preds;
}

}  // namespace

TEST_CASE("label_accuracy basics") {
  auto d = balanced_dataset(10);
  std::vector<LabeledPrediction> gold;
  for (const auto& inst : d.instances)
    gold.push_back({inst.id, inst.label, {}, ""});
  CHECK(label_accuracy(gold, d) == 1.0);

  // balanced three-class constant predictor scores exactly one third
  CHECK(label_accuracy(predict_all(d, Label::Entail), d) == 10.0 / 30.0);

  // 7 of 10 correct
  corpus::Dataset ten;
  ten.split = corpus::Split::Test;
  std::vector<LabeledPrediction> preds;
  for (int i = 0; i < 10; ++i) {
    corpus::Instance inst;
    inst.id = "x" + std::to_string(i);
    inst.premise = "p";
    inst.hypothesis = "h";
    inst.label = Label::Neutral;
    ten.instances.push_back(inst);
    preds.push_back({inst.id, i < 7 ? Label::Neutral : Label::Entail, {}, ""});
  }
  CHECK(label_accuracy(preds, ten) == 0.7);

  preds.pop_back();
  preds[0].id = "unknown";
  CHECK_THROWS_AS(label_accuracy(preds, ten), DataError);
}

TEST_CASE("explanation_metrics: unanimous annotators") {
  auto d = balanced_dataset(4);  // 12 instances
  std::vector<LabeledPrediction> preds;
  for (const auto& inst : d.instances)
    preds.push_back({inst.id, inst.label, {}, "expl"});
  std::vector<AnnotationRecord> anns;
  for (std::size_t i = 0; i < 10; ++i)
    for (const char* who : {"ann1", "ann2"})
      anns.push_back({preds[i].id, who, true});

  auto m = explanation_metrics(preds, d, anns, 10);
  CHECK(m.a == 10);
  CHECK(m.b == 10.0);
  CHECK(m.c == 10);
  CHECK(*m.b_over_a_pct == doctest::Approx(100.0));
  CHECK(*m.c_over_a_pct == doctest::Approx(100.0));
}

TEST_CASE("explanation_metrics: disagreeing annotators") {
  auto d = balanced_dataset(4);
  std::vector<LabeledPrediction> preds;
  for (const auto& inst : d.instances)
    preds.push_back({inst.id, inst.label, {}, "expl"});
  std::vector<AnnotationRecord> anns;
  for (std::size_t i = 0; i < 10; ++i) {
    anns.push_back({preds[i].id, "yes", true});
    anns.push_back({preds[i].id, "no", false});
  }
  auto m = explanation_metrics(preds, d, anns, 10);
  CHECK(m.a == 10);
  CHECK(m.b == 5.0);
  CHECK(m.c == 0);
}

TEST_CASE("explanation_metrics reproduces the published ETPA arithmetic") {
  // 100 evaluated, 77 correct labels; five annotators with per-annotator
  // correct-explanation counts {71,71,71,71,72} -> B = 71.2
  auto d = balanced_dataset(34);  // 102 instances, enough ids
  std::vector<LabeledPrediction> preds;
  for (const auto& inst : d.instances)
    preds.push_back({inst.id, inst.label, {}, "expl"});
  for (int i = 77; i < 100; ++i)
    preds[i].label = preds[i].label == Label::Entail ? Label::Neutral
                                                     : Label::Entail;
  std::vector<AnnotationRecord> anns;
  const char* annotators[5] = {"a1", "a2", "a3", "a4", "a5"};
  for (int w = 0; w < 5; ++w) {
    int target = w == 4 ? 72 : 71;
    int marked = 0;
    for (int i = 0; i < 100; ++i) {
      bool correct_label = i < 77;
      bool mark = correct_label && marked < target;
      if (mark) ++marked;
      anns.push_back({preds[i].id, annotators[w], mark});
    }
    REQUIRE(marked == target);
  }
  auto m = explanation_metrics(preds, d, anns, 100);
  CHECK(m.a == 77);
  CHECK(m.b == doctest::Approx(71.2).epsilon(1e-12));
  CHECK(std::fabs(*m.b_over_a_pct - 92.47) < 0.01);

  std::string table = format_metrics_table(m);
  CHECK(table.find("92.47%") != std::string::npos);
}

TEST_CASE("explanation_metrics invariants on random fixtures") {
  auto d = balanced_dataset(10);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LabeledPrediction> preds;
    for (const auto& inst : d.instances) {
      Label l = rng.uniform() < 0.6
                    ? inst.label
                    : static_cast<Label>(rng.below(3));
      preds.push_back({inst.id, l, {}, "e"});
    }
    std::vector<AnnotationRecord> anns;
    std::array<std::size_t, 3> counts = {0, 0, 0};
    const char* annotators[3] = {"u", "v", "w"};
    for (int i = 0; i < 30; ++i)
      for (int w = 0; w < 3; ++w) {
        bool correct = rng.uniform() < 0.5;
        anns.push_back({preds[i].id, annotators[w], correct});
      }
    auto m = explanation_metrics(preds, d, anns, 30);
    (void)counts;
    CHECK(m.b <= 30.0);
    CHECK(m.c <= m.b + 1e-12);
    if (m.a == 0) {
      CHECK_FALSE(m.b_over_a_pct.has_value());
      CHECK_FALSE(m.c_over_a_pct.has_value());
    }

    // permutation invariance over evaluated instances
    auto shuffled_preds = preds;
    Rng perm(trial + 100);
    // permute only within the evaluated prefix
    for (std::size_t i = 30; i > 1; --i)
      std::swap(shuffled_preds[i - 1], shuffled_preds[perm.below(i)]);
    auto m2 = explanation_metrics(shuffled_preds, d, anns, 30);
    CHECK(m2.a == m.a);
    CHECK(m2.b == doctest::Approx(m.b).epsilon(1e-12));
    CHECK(m2.c == m.c);
  }
}

TEST_CASE("explanation_metrics error paths") {
  auto d = balanced_dataset(2);
  std::vector<LabeledPrediction> preds;
  for (const auto& inst : d.instances)
    preds.push_back({inst.id, inst.label, {}, "e"});
  std::vector<AnnotationRecord> anns = {{"i0", "a", true}, {"i0", "a", false}};
  CHECK_THROWS_AS(explanation_metrics(preds, d, anns, 2), DataError);
  anns = {{"i0", "a", true}};  // missing coverage for i1
  CHECK_THROWS_AS(explanation_metrics(preds, d, anns, 2), DataError);
}

TEST_CASE("annotation file round trip") {
  std::vector<AnnotationRecord> recs = {{"id1", "ann1", true},
                                        {"id2", "ann1", false},
                                        {"id1", "ann2", true}};
  auto path = (std::filesystem::temp_directory_path() / "nile_ann.tsv")
                  .string();
  save_annotations(recs, path);
  auto back = load_annotations(path);
  REQUIRE(back.size() == 3);
  CHECK(back[1].instance_id == "id2");
  CHECK(back[1].annotator_id == "ann1");
  CHECK_FALSE(back[1].correct);

  io::write_file(path, "id1\tann1\t2\n");
  CHECK_THROWS_AS(load_annotations(path), DataError);
}

TEST_CASE("prediction dump round trip") {
  std::vector<LabeledPrediction> preds = {
      {"a", Label::Entail, {1.5, -0.25, 0.125}, "because"},
      {"b", Label::Neutral, {0.1, 0.2, 0.30000000000000004}, ""}};
  auto path = (std::filesystem::temp_directory_path() / "nile_preds.jsonl")
                  .string();
  save_predictions(preds, path);
  auto back = load_predictions(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "a");
  CHECK(back[0].label == Label::Entail);
  CHECK(back[0].scores.entail == 1.5);
  CHECK(back[1].scores.neutral == 0.30000000000000004);
  CHECK(back[0].explanation == "because");
}

TEST_CASE("transfer_eval: no parameter mutation, matches in-domain control") {
  corpus::WorldConfig cfg;
  cfg.instances_per_label = 100;
  cfg.num_entities = 8;
  cfg.num_categories = 4;
  cfg.seed = 7;
  cfg.ood_vocabulary_shift = 0.0;
  auto c = corpus::generate_synthetic_corpus(cfg);
  std::vector<std::string> texts;
  for (const auto& inst : c.train.instances) {
    texts.push_back(inst.premise);
    texts.push_back(inst.hypothesis);
    texts.push_back(*inst.gold_explanation);
  }
  auto vocab = text::build_vocabulary(texts);

  gen::LmOptions lm;
  lm.epochs = 60;
  lm.seed = 21;
  gen::GeneratorSet gens{gen::train_generator(Label::Entail, c.train, vocab, lm),
                         gen::train_generator(Label::Contradict, c.train, vocab, lm),
                         gen::train_generator(Label::Neutral, c.train, vocab, lm)};
  auto pcfg = proc::make_config(proc::Architecture::Independent,
                                proc::Variant::NS, 22);
  pcfg.dim = 32;
  proc::TrainOptions topt;
  topt.epochs = 300;
  auto train_triples = gen::batch_generate_triples(gens, c.train,
                                                   ExecMode::Parallel);
  auto m = proc::train_processor(pcfg, c.train, train_triples, vocab, topt);

  std::string digest_before = io::hash_hex(text::scorer_to_json(m.params).dump());
  auto r = transfer_eval(m, gens, c.ood, ExecMode::Parallel);
  CHECK(io::hash_hex(text::scorer_to_json(m.params).dump()) == digest_before);

  // with zero vocabulary shift the ood split behaves like the test split
  auto test_triples = gen::batch_generate_triples(gens, c.test,
                                                  ExecMode::Parallel);
  auto preds = proc::batch_predict(m, c.test, test_triples,
                                   ExecMode::Parallel);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].label == c.test.instances[i].label) ++correct;
  double test_acc = static_cast<double>(correct) / preds.size();
  CHECK(std::fabs(r.accuracy - test_acc) <= 0.02);

  auto r2 = transfer_eval(m, gens, c.ood, ExecMode::Parallel);
  CHECK(r2.accuracy == r.accuracy);
}
