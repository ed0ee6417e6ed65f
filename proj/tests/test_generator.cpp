#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "nile/generator.hpp"
#include "nile/io.hpp"

using namespace nile;
using namespace nile::gen;

namespace {

corpus::SyntheticCorpus tiny_corpus(int per_label = 30) {
  corpus::WorldConfig cfg;
  cfg.instances_per_label = per_label;
  cfg.num_entities = 8;
  cfg.num_categories = 4;
  cfg.seed = 7;
  return corpus::generate_synthetic_corpus(cfg);
}

text::Vocabulary corpus_vocab(const corpus::Dataset& train) {
  std::vector<std::string> texts;
  for (const auto& inst : train.instances) {
    texts.push_back(inst.premise);
    texts.push_back(inst.hypothesis);
    texts.push_back(*inst.gold_explanation);
  }
  return text::build_vocabulary(texts);
}

}  // namespace

TEST_CASE("build_training_sequence: format and loss mask") {
  text::Vocabulary v = text::build_vocabulary({"a b", "c", "d e"});
  auto s = build_training_sequence(v, "a b", "c", "d e");
  // premise: a b hypothesis: c [EXP] d e [EOS]
  REQUIRE(s.tokens.size() == 9);
  REQUIRE(s.loss_mask.size() == s.tokens.size());
  CHECK(s.tokens.ids[0] == v.lookup("premise:").value());
  CHECK(s.tokens.ids[3] == v.lookup("hypothesis:").value());
  CHECK(s.tokens.ids[5] == text::Vocabulary::kExp);
  CHECK(s.tokens.ids[8] == text::Vocabulary::kEos);
  int masked = 0;
  for (bool b : s.loss_mask) masked += b ? 1 : 0;
  CHECK(masked == 3);
  CHECK(s.loss_mask[6]);
  CHECK(s.loss_mask[7]);
  CHECK(s.loss_mask[8]);
  CHECK_FALSE(s.loss_mask[0]);

  CHECK_THROWS_AS(build_training_sequence(v, "a", "c", ""), DataError);
}

TEST_CASE("masked loss ignores prompt positions outside masked contexts") {
  // premise long enough that early prompt tokens fall outside every
  // masked position's window
  text::Vocabulary v =
      text::build_vocabulary({"p1 p2 p3 p4 p5 p6 p7", "h1", "x y"});
  LmOptions opts;
  opts.seed = 3;
  opts.window = 8;
  GeneratorModel m = init_generator(Label::Entail, v, opts);

  auto s = build_training_sequence(v, "p1 p2 p3 p4 p5 p6 p7", "h1", "x y");
  double base = sequence_loss(m, s, 1.0, nullptr).loss_sum;

  auto s2 = s;
  s2.tokens.ids[1] = v.lookup("p7").value();  // perturb an early prompt token
  double perturbed = sequence_loss(m, s2, 1.0, nullptr).loss_sum;
  CHECK(base == perturbed);

  // and the analytic gradient for a token used only in the early prompt
  // is exactly zero
  GeneratorGrad g = make_grad(m);
  sequence_loss(m, s, 1.0, &g);
  int p1 = v.lookup("p1").value();
  for (int k = 0; k < m.dim; ++k) CHECK(g.embeddings.at(p1, k) == 0.0);
}

TEST_CASE("generator gradient passes finite differences") {
  text::Vocabulary v = text::build_vocabulary({"a b", "c", "d e"});
  LmOptions opts;
  opts.seed = 5;
  opts.dim = 6;
  opts.window = 4;
  GeneratorModel m = init_generator(Label::Entail, v, opts);
  auto s = build_training_sequence(v, "a b", "c", "d e");

  GeneratorGrad g = make_grad(m);
  sequence_loss(m, s, 1.0, &g);

  text::GradCheckProblem prob;
  prob.loss = [&] { return sequence_loss(m, s, 1.0, nullptr).loss_sum; };
  for (double& x : m.embeddings.v) prob.coords.push_back(&x);
  for (double& x : m.w_out.v) prob.coords.push_back(&x);
  for (double& x : m.b_out) prob.coords.push_back(&x);
  prob.analytic.insert(prob.analytic.end(), g.embeddings.v.begin(),
                       g.embeddings.v.end());
  prob.analytic.insert(prob.analytic.end(), g.w_out.v.begin(),
                       g.w_out.v.end());
  prob.analytic.insert(prob.analytic.end(), g.b_out.begin(), g.b_out.end());
  CHECK(text::grad_check(prob, 1e-5, 300, 9) < 1e-5);
}

TEST_CASE("train_generator: label filtering, loss decrease, determinism") {
  auto c = tiny_corpus();
  auto vocab = corpus_vocab(c.train);
  LmOptions opts;
  opts.epochs = 8;
  opts.seed = 11;

  std::set<std::string> seen;
  opts.touch_hook = [&](const corpus::Instance& inst) {
    seen.insert(inst.id);
    CHECK(inst.label == Label::Entail);
  };
  GeneratorModel m = train_generator(Label::Entail, c.train, vocab, opts);
  CHECK(seen.size() == 30);
  REQUIRE(m.epoch_token_loss.size() == 8);
  CHECK(m.epoch_token_loss.back() < m.epoch_token_loss.front());

  opts.touch_hook = nullptr;
  GeneratorModel m2 = train_generator(Label::Entail, c.train, vocab, opts);
  CHECK(m.embeddings.v == m2.embeddings.v);
  CHECK(m.w_out.v == m2.w_out.v);
  CHECK(m.b_out == m2.b_out);

  corpus::Dataset empty;
  empty.split = corpus::Split::Train;
  CHECK_THROWS_AS(train_generator(Label::Entail, empty, vocab, opts),
                  DataError);
}

TEST_CASE("greedy decode: tie to lowest id, EOS stop, no [EXP]") {
  text::Vocabulary v = text::build_vocabulary({"alpha beta", "gamma"});
  LmOptions opts;
  opts.dim = 4;
  opts.window = 3;
  opts.max_new_tokens = 5;
  GeneratorModel m = init_generator(Label::Entail, v, opts);
  m.embeddings.zero();
  m.w_out.zero();
  std::fill(m.b_out.begin(), m.b_out.end(), 0.0);

  int lo = v.lookup("alpha").value();
  int hi = v.lookup("gamma").value();
  REQUIRE(lo < hi);
  m.b_out[lo] = 1.0;
  m.b_out[hi] = 1.0;  // exact tie: the lower id must win
  auto g = generate(m, "alpha", "beta");
  CHECK(g.text == "alpha alpha alpha alpha alpha");
  CHECK_FALSE(g.empty_warning);

  // immediate EOS gives an empty generation with the warning flag
  m.b_out[text::Vocabulary::kEos] = 2.0;
  auto e = generate(m, "alpha", "beta");
  CHECK(e.text.empty());
  CHECK(e.empty_warning);

  // [EXP] never appears even when its logit is the largest
  std::fill(m.b_out.begin(), m.b_out.end(), 0.0);
  m.b_out[text::Vocabulary::kExp] = 5.0;
  m.b_out[lo] = 1.0;
  auto x = generate(m, "alpha", "beta");
  CHECK(x.text.find("[EXP]") == std::string::npos);
}

TEST_CASE("generate_triple: independence across generators") {
  auto c = tiny_corpus(10);
  auto vocab = corpus_vocab(c.train);
  LmOptions opts;
  opts.epochs = 4;
  opts.seed = 13;
  GeneratorSet gens{train_generator(Label::Entail, c.train, vocab, opts),
                    train_generator(Label::Contradict, c.train, vocab, opts),
                    train_generator(Label::Neutral, c.train, vocab, opts)};
  const auto& inst = c.test.instances[0];
  auto t1 = generate_triple(gens, inst.premise, inst.hypothesis);

  // mutating one generator leaves the other two outputs bit-identical
  GeneratorSet mutated = gens;
  for (double& x : mutated.neutral.w_out.v) x += 0.5;
  auto t2 = generate_triple(mutated, inst.premise, inst.hypothesis);
  CHECK(t1.entail == t2.entail);
  CHECK(t1.contradict == t2.contradict);

  // three identical generators give three identical texts
  GeneratorSet same{gens.entail, gens.entail, gens.entail};
  auto t3 = generate_triple(same, inst.premise, inst.hypothesis);
  CHECK(t3.entail == t3.contradict);
  CHECK(t3.entail == t3.neutral);
}

TEST_CASE("converged generator reproduces the gold template on held-out data") {
  auto c = tiny_corpus(40);
  auto vocab = corpus_vocab(c.train);
  LmOptions opts;
  opts.epochs = 40;
  opts.seed = 17;
  GeneratorModel m = train_generator(Label::Entail, c.train, vocab, opts);
  int exact = 0, n = 0;
  for (const auto& inst : c.test.instances) {
    if (inst.label != Label::Entail) continue;
    ++n;
    if (generate(m, inst.premise, inst.hypothesis).text ==
        *inst.gold_explanation)
      ++exact;
  }
  CHECK(n > 0);
  CHECK(exact == n);
}

TEST_CASE("template oracle: gold reproduction, families, determinism") {
  auto c = tiny_corpus();
  for (const auto& inst : c.train.instances) {
    CHECK(template_generate(c.world, inst.label, inst) ==
          *inst.gold_explanation);
    for (Label l : all_labels()) {
      std::string t = template_generate(c.world, l, inst);
      CHECK(corpus::classify_template_family(t) == l);
      CHECK(t == template_generate(c.world, l, inst));
    }
  }
  corpus::Instance alien;
  alien.id = "weird";
  alien.premise = "completely different text";
  alien.hypothesis = "more text";
  CHECK_THROWS_AS(template_generate(c.world, Label::Entail, alien), DataError);
}

TEST_CASE("generator checkpoint round-trips bit-exactly") {
  auto c = tiny_corpus(10);
  auto vocab = corpus_vocab(c.train);
  LmOptions opts;
  opts.epochs = 3;
  opts.seed = 19;
  GeneratorModel m = train_generator(Label::Contradict, c.train, vocab, opts);
  auto path = (std::filesystem::temp_directory_path() / "nile_gen_ckpt.json")
                  .string();
  save_generator(m, path, "deadbeef");
  GeneratorModel back = load_generator(path);
  CHECK(back.label == Label::Contradict);
  CHECK(back.embeddings.v == m.embeddings.v);
  CHECK(back.w_out.v == m.w_out.v);
  CHECK(back.b_out == m.b_out);
  CHECK(back.vocab.tokens() == m.vocab.tokens());

  const auto& inst = c.test.instances[0];
  CHECK(generate(back, inst.premise, inst.hypothesis).text ==
        generate(m, inst.premise, inst.hypothesis).text);
}

TEST_CASE("triple dump round-trips through the file format") {
  auto c = tiny_corpus(5);
  auto triples = batch_oracle_triples(c.world, c.test, ExecMode::Serial);
  std::vector<std::string> ids;
  for (const auto& inst : c.test.instances) ids.push_back(inst.id);
  auto path = (std::filesystem::temp_directory_path() / "nile_triples.jsonl")
                  .string();
  save_triples(ids, triples, path);
  auto back = load_triples_for(c.test, path);
  REQUIRE(back.size() == triples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].entail == triples[i].entail);
    CHECK(back[i].contradict == triples[i].contradict);
    CHECK(back[i].neutral == triples[i].neutral);
  }
}
