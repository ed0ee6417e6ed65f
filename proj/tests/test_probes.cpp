#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "nile/io.hpp"
#include "nile/probes.hpp"

using namespace nile;
using namespace nile::probes;
using gen::ExplanationTriple;

namespace {

struct Fixture {
  corpus::SyntheticCorpus c;
  text::Vocabulary vocab;
  std::vector<ExplanationTriple> train_triples;
  std::vector<ExplanationTriple> test_triples;
};

Fixture make_fixture(int per_label = 30) {
  Fixture f;
  corpus::WorldConfig cfg;
  cfg.instances_per_label = per_label;
  cfg.num_entities = 8;
  cfg.num_categories = 4;
  cfg.seed = 7;
  f.c = corpus::generate_synthetic_corpus(cfg);
  std::vector<std::string> texts;
  for (const auto& inst : f.c.train.instances) {
    texts.push_back(inst.premise);
    texts.push_back(inst.hypothesis);
    texts.push_back(*inst.gold_explanation);
  }
  f.vocab = text::build_vocabulary(texts);
  f.train_triples =
      gen::batch_oracle_triples(f.c.world, f.c.train, ExecMode::Serial);
  f.test_triples =
      gen::batch_oracle_triples(f.c.world, f.c.test, ExecMode::Serial);
  return f;
}

proc::ProcessorModel quick_model(const Fixture& f, proc::Architecture arch,
                                 proc::Variant variant, int epochs = 10) {
  auto cfg = proc::make_config(arch, variant, 31);
  cfg.dim = 16;
  proc::TrainOptions opts;
  opts.epochs = epochs;
  return proc::train_processor(cfg, f.c.train, f.train_triples, f.vocab,
                               opts);
}

std::string params_digest(const proc::ProcessorModel& m) {
  auto j = text::scorer_to_json(m.params);
  return io::hash_hex(j.dump());
}

}  // namespace

TEST_CASE("full condition reproduces standard accuracy bit-exactly") {
  auto f = make_fixture();
  auto m = quick_model(f, proc::Architecture::Independent, proc::Variant::NS);
  auto preds = proc::batch_predict(m, f.c.test, f.test_triples,
                                   ExecMode::Serial);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].label == f.c.test.instances[i].label) ++correct;
  double direct = static_cast<double>(correct) / preds.size();

  auto report = erasure_probe(m, f.c.test, f.test_triples, Condition::Full);
  CHECK(report.accuracy == direct);
  CHECK(report.n == f.c.test.size());
  CHECK(report.model == "ns-independent");
}

TEST_CASE("instance-only erasure: independent scores identical, tie-break rules") {
  auto f = make_fixture();
  auto m = quick_model(f, proc::Architecture::Independent, proc::Variant::NS);

  proc::ScoreOptions probe;
  probe.probe_mode = true;
  for (const auto& inst : f.c.test.instances) {
    auto ctx = proc::build_concat_ph(inst.premise, inst.hypothesis);
    auto s = proc::score(m, ctx, ExplanationTriple{}, probe);
    CHECK(std::fabs(s.entail - s.contradict) < 1e-12);
    CHECK(std::fabs(s.entail - s.neutral) < 1e-12);
  }

  auto report = erasure_probe(m, f.c.test, f.test_triples,
                              Condition::InstanceOnly);
  // every prediction collapses to the tie-break label
  std::size_t entail_count = 0;
  for (const auto& inst : f.c.test.instances)
    if (inst.label == Label::Entail) ++entail_count;
  CHECK(report.accuracy ==
        static_cast<double>(entail_count) / f.c.test.size());
  CHECK(report.per_label_accuracy[0] == 1.0);
  CHECK(report.per_label_accuracy[1] == 0.0);
  CHECK(report.per_label_accuracy[2] == 0.0);
}

TEST_CASE("instance-only erasure: aggregate entail and contradict tie exactly") {
  auto f = make_fixture();
  auto m = quick_model(f, proc::Architecture::Aggregate, proc::Variant::NS);
  proc::ScoreOptions probe;
  probe.probe_mode = true;
  for (const auto& inst : f.c.test.instances) {
    auto ctx = proc::build_concat_ph(inst.premise, inst.hypothesis);
    auto s = proc::score(m, ctx, ExplanationTriple{}, probe);
    CHECK(s.entail == s.contradict);
    // logsumexp of the two evidence heads always exceeds the bare neutral head
    CHECK(s.entail > s.neutral);
  }
}

TEST_CASE("erasure probes reject incompatible models") {
  auto f = make_fixture(6);
  auto ph = quick_model(f, proc::Architecture::Independent, proc::Variant::PH,
                        2);
  CHECK_THROWS_AS(
      erasure_probe(ph, f.c.test, f.test_triples, Condition::InstanceOnly),
      ConfigError);
  CHECK_THROWS_AS(
      erasure_probe(ph, f.c.test, f.test_triples, Condition::ExplanationOnly),
      ConfigError);
  // Full works for any processor
  auto r = erasure_probe(ph, f.c.test, f.test_triples, Condition::Full);
  CHECK(r.n == f.c.test.size());
  // shuffled goes through shuffle_probe
  CHECK_THROWS_AS(
      erasure_probe(ph, f.c.test, f.test_triples, Condition::Shuffled),
      ConfigError);
}

TEST_CASE("shuffle probe: determinism, donor structure, form preservation") {
  auto f = make_fixture();
  auto m = quick_model(f, proc::Architecture::Independent, proc::Variant::NS);

  auto r1 = shuffle_probe(m, f.c.test, f.test_triples, 13);
  auto r2 = shuffle_probe(m, f.c.test, f.test_triples, 13);
  CHECK(r1 == r2);
  auto r3 = shuffle_probe(m, f.c.test, f.test_triples, 14);
  CHECK(r3.seed == 14);

  auto donors = shuffled_triples(f.c.test, f.test_triples, 13);
  REQUIRE(donors.size() == f.c.test.size());
  std::size_t differing = 0;
  for (std::size_t i = 0; i < donors.size(); ++i) {
    // form is preserved per slot; content usually changes (texts can
    // coincide when two instances share their content words)
    if (donors[i].entail != f.test_triples[i].entail) ++differing;
    CHECK(corpus::classify_template_family(donors[i].entail) ==
          Label::Entail);
    CHECK(corpus::classify_template_family(donors[i].contradict) ==
          Label::Contradict);
    CHECK(corpus::classify_template_family(donors[i].neutral) ==
          Label::Neutral);
  }
  CHECK(differing > donors.size() / 2);

  // per-slot mode draws independent donors but keeps slot forms
  auto per_slot = shuffled_triples(f.c.test, f.test_triples, 13, true);
  for (std::size_t i = 0; i < per_slot.size(); ++i) {
    CHECK(corpus::classify_template_family(per_slot[i].entail) ==
          Label::Entail);
    CHECK(corpus::classify_template_family(per_slot[i].neutral) ==
          Label::Neutral);
  }
}

TEST_CASE("shuffle probe: pool exhaustion is an error") {
  auto f = make_fixture(1);  // one instance per label: no donors
  auto m = quick_model(f, proc::Architecture::Independent, proc::Variant::NS,
                       1);
  CHECK_THROWS_AS(shuffle_probe(m, f.c.test, f.test_triples, 13), DataError);
}

TEST_CASE("probes never mutate the model") {
  auto f = make_fixture();
  auto m = quick_model(f, proc::Architecture::Independent, proc::Variant::NS);
  std::string before = params_digest(m);
  auto full_before = erasure_probe(m, f.c.test, f.test_triples,
                                   Condition::Full);
  erasure_probe(m, f.c.test, f.test_triples, Condition::InstanceOnly);
  erasure_probe(m, f.c.test, f.test_triples, Condition::ExplanationOnly);
  shuffle_probe(m, f.c.test, f.test_triples, 13);
  auto full_after = erasure_probe(m, f.c.test, f.test_triples,
                                  Condition::Full);
  CHECK(params_digest(m) == before);
  CHECK(full_before == full_after);
}

TEST_CASE("report files: round trip, table formatting, empty list") {
  ProbeReport a;
  a.model = "nile-independent";
  a.condition = Condition::Shuffled;
  a.accuracy = 0.4;
  a.per_label_accuracy = {0.25, 0.5, 0.45};
  a.n = 225;
  a.seed = 13;
  ProbeReport b;
  b.model = "ns-aggregate";
  b.condition = Condition::InstanceOnly;
  b.accuracy = 1.0 / 3.0;
  b.per_label_accuracy = {1.0, 0.0, 0.0};
  b.n = 225;

  auto dir = std::filesystem::temp_directory_path();
  auto path = (dir / "nile_probe_report.jsonl").string();
  write_report({a, b}, path);
  auto back = read_reports(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);

  std::string table = io::read_file(path + ".txt");
  CHECK(table.find("0.4000") != std::string::npos);
  CHECK(table.find("nile-independent") != std::string::npos);
  CHECK(table.find("instance_only") != std::string::npos);

  write_report({}, path);
  CHECK(read_reports(path).empty());
  std::string empty_table = io::read_file(path + ".txt");
  CHECK(empty_table.find("condition") != std::string::npos);
}

TEST_CASE("condition names parse both spellings") {
  CHECK(parse_condition("instance-only") == Condition::InstanceOnly);
  CHECK(parse_condition("instance_only") == Condition::InstanceOnly);
  CHECK(parse_condition("shuffled") == Condition::Shuffled);
  CHECK_THROWS_AS(parse_condition("bogus"), ConfigError);
}
