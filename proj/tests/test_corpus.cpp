#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "nile/corpus.hpp"
#include "nile/io.hpp"
#include "nile/textmodel.hpp"

using namespace nile;
using namespace nile::corpus;

namespace {

WorldConfig small_config(std::uint64_t seed = 7) {
  WorldConfig cfg;
  cfg.instances_per_label = 20;
  cfg.seed = seed;
  return cfg;
}

std::string dataset_bytes(const Dataset& d) {
  std::string path = (std::filesystem::temp_directory_path() /
                      "nile_corpus_roundtrip.jsonl")
                         .string();
  save_jsonl(d, path);
  return io::read_file(path);
}

// Independent rule-checker: re-derives the label from the world facts.
Label derive_label(const SyntheticWorld& w, const Instance& inst) {
  auto p = text::split_tokens(inst.premise);
  auto h = text::split_tokens(inst.hypothesis);
  REQUIRE(p.size() == 3);
  REQUIRE(p[0] == "a");
  auto find = [](const std::vector<std::string>& list, const std::string& x) {
    for (std::size_t i = 0; i < list.size(); ++i)
      if (list[i] == x) return static_cast<std::ptrdiff_t>(i);
    return std::ptrdiff_t{-1};
  };
  auto e = find(w.entities, p[1]);
  REQUIRE(e >= 0);
  REQUIRE(find(w.verbs, p[2]) >= 0);
  if (h.size() == 3 && find(w.categories, h[1]) ==
                           static_cast<std::ptrdiff_t>(w.entity_category[e]) &&
      h[2] == p[2])
    return Label::Entail;
  if (h.size() == 3 && h[1] == p[1] && h[2] != p[2] &&
      find(w.verbs, h[2]) >= 0)
    return Label::Contradict;
  REQUIRE(h.size() == 4);
  REQUIRE(h[1] == p[1]);
  REQUIRE(h[2] == p[2]);
  REQUIRE(find(w.modifiers, h[3]) >= 0);
  return Label::Neutral;
}

}  // namespace

TEST_CASE("synthetic corpus is balanced and sized per split") {
  WorldConfig cfg;
  cfg.instances_per_label = 100;
  cfg.seed = 7;
  auto c = generate_synthetic_corpus(cfg);
  CHECK(c.train.size() == 300);
  std::array<int, 3> counts = {0, 0, 0};
  for (const auto& inst : c.train.instances)
    ++counts[static_cast<int>(inst.label)];
  CHECK(counts[0] == 100);
  CHECK(counts[1] == 100);
  CHECK(counts[2] == 100);
  CHECK(c.test.size() == 150);
  CHECK(c.ood.size() == 150);
}

TEST_CASE("generation is byte-identical for a fixed seed") {
  auto a = generate_synthetic_corpus(small_config());
  auto b = generate_synthetic_corpus(small_config());
  CHECK(dataset_bytes(a.train) == dataset_bytes(b.train));
  CHECK(dataset_bytes(a.ood) == dataset_bytes(b.ood));
  auto c = generate_synthetic_corpus(small_config(8));
  CHECK(dataset_bytes(a.train) != dataset_bytes(c.train));
}

TEST_CASE("ood_vocabulary_shift=0 gives full vocabulary overlap") {
  auto c = generate_synthetic_corpus(small_config());
  CHECK(c.ood_world.entities == c.world.entities);
  CHECK(c.ood_world.categories == c.world.categories);
  CHECK(c.ood_world.verbs == c.world.verbs);
  CHECK(c.ood_world.modifiers == c.world.modifiers);
  // every ood surface token comes from the in-domain vocabulary
  std::set<std::string> world_vocab = {"a"};
  for (const auto& w : c.world.entities) world_vocab.insert(w);
  for (const auto& w : c.world.categories) world_vocab.insert(w);
  for (const auto& w : c.world.verbs) world_vocab.insert(w);
  for (const auto& w : c.world.modifiers) world_vocab.insert(w);
  for (const auto& inst : c.ood.instances)
    for (auto& t : text::split_tokens(inst.premise + " " + inst.hypothesis))
      CHECK(world_vocab.count(t) == 1);
}

TEST_CASE("ood_vocabulary_shift=1 replaces the surface vocabulary") {
  WorldConfig cfg = small_config();
  cfg.ood_vocabulary_shift = 1.0;
  auto c = generate_synthetic_corpus(cfg);
  std::set<std::string> in_domain;
  for (const auto& e : c.world.entities) in_domain.insert(e);
  for (const auto& v : c.world.verbs) in_domain.insert(v);
  for (const auto& e : c.ood_world.entities) CHECK(in_domain.count(e) == 0);
  for (const auto& v : c.ood_world.verbs) CHECK(in_domain.count(v) == 0);
}

TEST_CASE("world logic oracle re-derives every gold label") {
  auto c = generate_synthetic_corpus(small_config());
  for (const auto& inst : c.train.instances)
    CHECK(derive_label(c.world, inst) == inst.label);
  for (const auto& inst : c.test.instances)
    CHECK(derive_label(c.world, inst) == inst.label);
  for (const auto& inst : c.ood.instances)
    CHECK(derive_label(c.ood_world, inst) == inst.label);
}

TEST_CASE("invalid world configs are rejected") {
  WorldConfig cfg = small_config();
  cfg.templates_per_label = 0;
  CHECK_THROWS_AS(generate_synthetic_corpus(cfg), ConfigError);
  cfg = small_config();
  cfg.instances_per_label = 0;
  CHECK_THROWS_AS(generate_synthetic_corpus(cfg), ConfigError);
  cfg = small_config();
  cfg.ood_vocabulary_shift = 1.5;
  CHECK_THROWS_AS(generate_synthetic_corpus(cfg), ConfigError);
}

TEST_CASE("template variants cycle and stay in-family") {
  WorldConfig cfg = small_config();
  cfg.templates_per_label = 3;
  auto c = generate_synthetic_corpus(cfg);
  std::set<std::string> entail_texts;
  for (const auto& inst : c.train.instances) {
    auto fam = classify_template_family(*inst.gold_explanation);
    REQUIRE(fam.has_value());
    CHECK(*fam == inst.label);
    if (inst.label == Label::Entail)
      entail_texts.insert(*inst.gold_explanation);
  }
  bool saw_every = false, saw_each = false, saw_a = false;
  for (const auto& t : entail_texts) {
    if (t.rfind("every ", 0) == 0) saw_every = true;
    else if (t.rfind("each ", 0) == 0) saw_each = true;
    else saw_a = true;
  }
  CHECK(saw_every);
  CHECK(saw_each);
  CHECK(saw_a);
}

TEST_CASE("e-SNLI reader: well-formed fixture") {
  std::istringstream in(
      "pairID,gold_label,Sentence1,Sentence2,Explanation_1\n"
      "a1,entailment,A dog runs.,An animal runs.,a dog is an animal\n"
      "a2,neutral,A dog runs.,A dog runs fast.,running is not always fast\n"
      "a3,contradiction,A dog runs.,A dog sleeps.,cannot run and sleep\n"
      "a4,entailment,A cat naps.,An animal naps.,a cat is an animal\n");
  auto r = load_esnli_stream(in, Split::Train);
  CHECK(r.dataset.size() == 4);
  CHECK(r.skipped_unlabeled == 0);
  CHECK(r.dataset.instances[0].id == "a1");
  CHECK(r.dataset.instances[1].label == Label::Neutral);
  CHECK(*r.dataset.instances[2].gold_explanation == "cannot run and sleep");
}

TEST_CASE("e-SNLI reader: '-' rows are skipped and counted") {
  std::istringstream in(
      "gold_label,Sentence1,Sentence2,Explanation_1\n"
      "entailment,p1,h1,e1\n"
      "-,p2,h2,e2\n"
      "neutral,p3,h3,e3\n"
      "contradiction,p4,h4,e4\n");
  auto r = load_esnli_stream(in, Split::Dev);
  CHECK(r.dataset.size() == 3);
  CHECK(r.skipped_unlabeled == 1);
}

TEST_CASE("e-SNLI reader: quoted field with comma and newline round-trips") {
  std::string tricky = "a dog, the \"best\" one,\nruns far";
  std::string quoted = "\"a dog, the \"\"best\"\" one,\nruns far\"";
  std::istringstream in("gold_label,Sentence1,Sentence2,Explanation_1\n"
                        "entailment," + quoted + ",h,e\n");
  auto r = load_esnli_stream(in, Split::Train);
  REQUIRE(r.dataset.size() == 1);
  CHECK(r.dataset.instances[0].premise == tricky);
}

TEST_CASE("e-SNLI reader error paths") {
  {
    std::istringstream in("gold_label,Sentence1,Sentence2,Explanation_1\n"
                          "entailment,p,h\n");
    CHECK_THROWS_WITH_AS(load_esnli_stream(in, Split::Train),
                         doctest::Contains("line 2"), DataError);
  }
  {
    std::istringstream in("gold_label,Sentence1,Sentence2\n"
                          "entailment,p,h\n");
    CHECK_THROWS_AS(load_esnli_stream(in, Split::Train), ConfigError);
  }
  {
    std::istringstream in("gold_label,Sentence1,Sentence2,Explanation_1\n"
                          "entailment,\"p,h,e\n");
    CHECK_THROWS_AS(load_esnli_stream(in, Split::Train), DataError);
  }
}

TEST_CASE("filter_noninformative applies the substring rule") {
  Dataset d;
  d.split = Split::Train;
  auto add = [&](const char* id, const char* p, const char* h,
                 const char* expl) {
    Instance i;
    i.id = id;
    i.premise = p;
    i.hypothesis = h;
    i.label = Label::Entail;
    i.gold_explanation = expl;
    d.instances.push_back(i);
  };
  add("1", "a dog runs", "an animal moves", "a dog runs fast outside");
  add("2", "a dog runs", "an animal moves", "dogs can run");
  add("3", "a cat sits", "The Cat Sleeps", "clearly the cat sleeps here");

  auto r = filter_noninformative(d);
  CHECK(r.dropped == 2);
  REQUIRE(r.kept.size() == 1);
  CHECK(r.kept.instances[0].id == "2");

  auto r2 = filter_noninformative(r.kept);
  CHECK(r2.dropped == 0);
  CHECK(r2.kept.size() == r.kept.size());

  for (const auto& inst : r.kept.instances) {
    std::string e = to_lower_ascii(*inst.gold_explanation);
    CHECK_FALSE(contains_substring(e, to_lower_ascii(inst.premise)));
    CHECK_FALSE(contains_substring(e, to_lower_ascii(inst.hypothesis)));
  }
}

TEST_CASE("filter requires explanations") {
  Dataset d;
  d.split = Split::Train;
  Instance i;
  i.id = "x";
  i.premise = "p";
  i.hypothesis = "h";
  d.instances.push_back(i);
  CHECK_THROWS_AS(filter_noninformative(d), DataError);
}

TEST_CASE("synthetic corpus passes its own filter untouched") {
  auto c = generate_synthetic_corpus(small_config());
  auto r = filter_noninformative(c.train);
  CHECK(r.dropped == 0);
  CHECK(r.kept.size() == c.train.size());
}

TEST_CASE("jsonl round trip preserves instances") {
  auto c = generate_synthetic_corpus(small_config());
  std::string path = (std::filesystem::temp_directory_path() /
                      "nile_corpus_rt2.jsonl")
                         .string();
  save_jsonl(c.train, path);
  auto back = load_jsonl(path, Split::Train);
  REQUIRE(back.size() == c.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.instances[i].id == c.train.instances[i].id);
    CHECK(back.instances[i].premise == c.train.instances[i].premise);
    CHECK(back.instances[i].hypothesis == c.train.instances[i].hypothesis);
    CHECK(back.instances[i].label == c.train.instances[i].label);
    CHECK(back.instances[i].gold_explanation ==
          c.train.instances[i].gold_explanation);
  }
}

TEST_CASE("dataset validation rejects duplicate ids and empty text") {
  Dataset d;
  Instance i;
  i.id = "dup";
  i.premise = "p";
  i.hypothesis = "h";
  d.instances.push_back(i);
  d.instances.push_back(i);
  CHECK_THROWS_AS(d.validate(), DataError);

  Dataset e;
  Instance j;
  j.id = "x";
  j.premise = "   ";
  j.hypothesis = "h";
  e.instances.push_back(j);
  CHECK_THROWS_AS(e.validate(), DataError);
}

TEST_CASE("classify_template_family recognizes the three families") {
  CHECK(classify_template_family("a bodu is a vakelu") == Label::Entail);
  CHECK(classify_template_family("every bodu is a vakelu") == Label::Entail);
  CHECK(classify_template_family("cannot runs and sleeps at the same time") ==
        Label::Contradict);
  CHECK(classify_template_family("nothing can hop and dig at the same time") ==
        Label::Contradict);
  CHECK(classify_template_family("runs does not imply runs quickly") ==
        Label::Neutral);
  CHECK(classify_template_family("runs does not mean runs quickly") ==
        Label::Neutral);
  CHECK_FALSE(classify_template_family("completely unrelated").has_value());
}

TEST_CASE("parse_variant_from_id") {
  CHECK(parse_variant_from_id("train-e-0001-v2") == 2);
  CHECK_THROWS_AS(parse_variant_from_id("pair1234"), DataError);
  CHECK_THROWS_AS(parse_variant_from_id("train-e-0001-vx"), DataError);
}
