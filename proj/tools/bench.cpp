// Compares the serial reference paths against the OpenMP kernels on the
// batch scoring, triple generation and probe loops.

#include <chrono>
#include <cstdio>

#include "nile/corpus.hpp"
#include "nile/generator.hpp"
#include "nile/probes.hpp"
#include "nile/processor.hpp"

using namespace nile;
using Clock = std::chrono::steady_clock;

namespace {

double seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

template <class Fn>
double time_run(Fn&& fn) {
  auto t0 = Clock::now();
  fn();
  return seconds(t0, Clock::now());
}

void row(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-28s %10.4fs %10.4fs %8.2fx   %s\n", name, serial, parallel,
              serial / parallel, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int per_label = 2000;
  if (argc > 1) per_label = std::atoi(argv[1]);

  corpus::WorldConfig wc;
  wc.instances_per_label = per_label;
  wc.seed = 99;
  auto c = corpus::generate_synthetic_corpus(wc);
  std::printf("corpus: %zu instances per run\n", c.train.size());

  std::vector<std::string> texts;
  for (const auto& inst : c.train.instances) {
    texts.push_back(inst.premise);
    texts.push_back(inst.hypothesis);
    texts.push_back(*inst.gold_explanation);
  }
  auto vocab = text::build_vocabulary(texts);

  // untrained models are fine here; the kernels cost the same either way
  auto model = proc::init_processor(
      proc::make_config(proc::Architecture::Independent, proc::Variant::NS, 5),
      vocab);
  gen::LmOptions lm;
  lm.seed = 5;
  gen::GeneratorSet gens{gen::init_generator(Label::Entail, vocab, lm),
                         gen::init_generator(Label::Contradict, vocab, lm),
                         gen::init_generator(Label::Neutral, vocab, lm)};

  std::vector<gen::ExplanationTriple> triples_s, triples_p;
  double t_s = time_run([&] {
    triples_s = gen::batch_oracle_triples(c.world, c.train, ExecMode::Serial);
  });
  double t_p = time_run([&] {
    triples_p = gen::batch_oracle_triples(c.world, c.train, ExecMode::Parallel);
  });
  bool same = triples_s.size() == triples_p.size();
  for (std::size_t i = 0; same && i < triples_s.size(); ++i)
    same = triples_s[i].entail == triples_p[i].entail &&
           triples_s[i].contradict == triples_p[i].contradict &&
           triples_s[i].neutral == triples_p[i].neutral;
  std::printf("%-28s %11s %11s %9s\n", "kernel", "serial", "openmp",
              "speedup");
  row("oracle triples", t_s, t_p, same);

  std::vector<gen::ExplanationTriple> gt_s, gt_p;
  t_s = time_run([&] {
    gt_s = gen::batch_generate_triples(gens, c.train, ExecMode::Serial);
  });
  t_p = time_run([&] {
    gt_p = gen::batch_generate_triples(gens, c.train, ExecMode::Parallel);
  });
  same = true;
  for (std::size_t i = 0; same && i < gt_s.size(); ++i)
    same = gt_s[i].entail == gt_p[i].entail &&
           gt_s[i].contradict == gt_p[i].contradict &&
           gt_s[i].neutral == gt_p[i].neutral;
  row("greedy triple generation", t_s, t_p, same);

  std::vector<proc::Prediction> pr_s, pr_p;
  t_s = time_run([&] {
    pr_s = proc::batch_predict(model, c.train, triples_s, ExecMode::Serial);
  });
  t_p = time_run([&] {
    pr_p = proc::batch_predict(model, c.train, triples_s, ExecMode::Parallel);
  });
  same = true;
  for (std::size_t i = 0; same && i < pr_s.size(); ++i)
    same = pr_s[i].label == pr_p[i].label &&
           pr_s[i].scores.entail == pr_p[i].scores.entail &&
           pr_s[i].scores.contradict == pr_p[i].scores.contradict &&
           pr_s[i].scores.neutral == pr_p[i].scores.neutral;
  row("batch scoring", t_s, t_p, same);

  probes::ProbeReport rep_s, rep_p;
  t_s = time_run([&] {
    rep_s = probes::shuffle_probe(model, c.train, triples_s, 13, false,
                                  ExecMode::Serial);
  });
  t_p = time_run([&] {
    rep_p = probes::shuffle_probe(model, c.train, triples_s, 13, false,
                                  ExecMode::Parallel);
  });
  row("shuffle probe", t_s, t_p, rep_s == rep_p);
  return 0;
}
