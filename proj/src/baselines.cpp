#include "nile/baselines.hpp"

#include <algorithm>

#include "nile/io.hpp"

namespace nile::base {

using text::EncodeTrace;
using text::ScorerGrad;
using text::ScorerParams;
using text::Vocabulary;

namespace {

std::string head_name(const std::string& prefix, Label l) {
  return prefix + nile::to_string(l);
}

LabelScores classify_text(const ScorerParams& params, const Vocabulary& vocab,
                          const std::string& prefix, const std::string& input) {
  text::TokenSeq seq = vocab.encode(input);
  LabelScores s;
  if (seq.empty()) return s;  // zero encoding: tanh(W.0) = 0, all heads 0
  EncodeTrace t = text::f_encode(params, seq);
  for (Label l : all_labels())
    s[l] = text::head_score(params, head_name(prefix, l), t);
  return s;
}

}  // namespace

double classifier_loss(const ScorerParams& params, const Vocabulary& vocab,
                       const std::string& head_prefix,
                       const std::string& input, Label gold,
                       ScorerGrad* grad) {
  text::TokenSeq seq = vocab.encode(input);
  if (seq.empty()) throw DataError("empty classifier input");
  EncodeTrace t = text::f_encode(params, seq);
  LabelScores s;
  for (Label l : all_labels())
    s[l] = text::head_score(params, head_name(head_prefix, l), t);
  auto ce = text::softmax_cross_entropy(s, gold);
  if (grad)
    for (Label l : all_labels())
      text::head_backward(params, head_name(head_prefix, l), t,
                          ce.grad[static_cast<int>(l)], *grad);
  return ce.loss;
}

text::ScorerParams train_text_classifier(
    const std::vector<std::pair<std::string, Label>>& items,
    const Vocabulary& vocab, const std::string& head_prefix, int dim,
    const ClfOptions& opts, proc::TrainTrace* trace) {
  if (items.empty()) throw DataError("empty classifier training set");
  Rng rng(derive_seed(opts.seed, "classifier-init:" + head_prefix));
  std::vector<std::string> heads;
  for (Label l : all_labels()) heads.push_back(head_name(head_prefix, l));
  ScorerParams params =
      text::init_scorer(vocab.size(), dim, heads, rng, opts.embed_init_scale);
  ScorerGrad grad = text::make_grad(params);
  text::SgdConfig sgd{opts.learning_rate, opts.clip_norm};

  std::vector<text::TokenSeq> seqs;
  seqs.reserve(items.size());
  for (const auto& [input, label] : items) {
    seqs.push_back(vocab.encode(input));
    if (seqs.back().empty())
      throw DataError("empty classifier input: \"" + input + "\"");
  }

  auto item_loss = [&](std::size_t i, ScorerGrad* g) {
    return classifier_loss(params, vocab, head_prefix, items[i].first,
                           items[i].second, g);
  };

  if (trace) {
    double sum = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i) sum += item_loss(i, nullptr);
    trace->initial_loss = sum / static_cast<double>(items.size());
  }

  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng order_rng(derive_seed(opts.seed, "classifier-order:" + head_prefix,
                              static_cast<std::uint64_t>(epoch)));
    order_rng.shuffle(order);
    double epoch_sum = 0.0;
    for (std::size_t i : order) {
      if (opts.feed_hook) opts.feed_hook(items[i].first);
      grad.zero();
      epoch_sum += item_loss(i, &grad);
      text::optimizer_step(text::bind(params, grad), sgd);
    }
    if (trace)
      trace->epoch_loss.push_back(epoch_sum /
                                  static_cast<double>(items.size()));
  }
  return params;
}

PosthocModel train_posthoc(const corpus::Dataset& train,
                           const Vocabulary& vocab, int dim,
                           const ClfOptions& opts, proc::TrainTrace* trace) {
  std::vector<std::pair<std::string, Label>> items;
  items.reserve(train.size());
  for (const auto& inst : train.instances)
    items.emplace_back(proc::build_concat_ph(inst.premise, inst.hypothesis),
                       inst.label);
  PosthocModel m;
  m.vocab = vocab;
  m.params = train_text_classifier(items, vocab, "w_pre_", dim, opts, trace);
  return m;
}

LabelScores posthoc_scores(const PosthocModel& m,
                           const corpus::Instance& inst) {
  return classify_text(m.params, m.vocab, "w_pre_",
                       proc::build_concat_ph(inst.premise, inst.hypothesis));
}

PipelineResult posthoc_pipeline(const PosthocModel& m,
                                const corpus::Instance& inst,
                                const gen::ExplanationTriple& triple) {
  PipelineResult r;
  r.scores = posthoc_scores(m, inst);
  if (!r.scores.finite()) throw NumericError("non-finite label score");
  r.label = proc::argmax_label(r.scores);
  r.explanation = triple.get(r.label);
  r.empty_warning = r.explanation.empty();
  return r;
}

EtpaModel train_etpa(const corpus::Dataset& train, const Vocabulary& vocab,
                     const EtpaOptions& opts, proc::TrainTrace* clf_trace) {
  EtpaModel m;
  m.vocab = vocab;
  // stage 1: one generator over all labels' gold explanations
  m.generator = gen::train_generator(std::nullopt, train, vocab,
                                     opts.generator);

  // stage 2: classifier on explanation text alone
  std::vector<std::pair<std::string, Label>> items;
  items.reserve(train.size());
  for (const auto& inst : train.instances) {
    if (!inst.gold_explanation)
      throw DataError("instance " + inst.id + " has no gold explanation");
    std::string input = *inst.gold_explanation;
    if (opts.train_on_generated)
      input = gen::generate(m.generator, inst.premise, inst.hypothesis).text;
    if (input.empty()) input = *inst.gold_explanation;  // degenerate fallback
    items.emplace_back(std::move(input), inst.label);
  }
  m.clf = train_text_classifier(items, vocab, "w_post_", opts.clf_dim,
                                opts.classifier, clf_trace);
  return m;
}

LabelScores etpa_classify(const EtpaModel& m, const std::string& explanation) {
  return classify_text(m.clf, m.vocab, "w_post_", explanation);
}

PipelineResult etpa_pipeline(const EtpaModel& m, const std::string& premise,
                             const std::string& hypothesis) {
  gen::Generated g = gen::generate(m.generator, premise, hypothesis);
  PipelineResult r;
  r.scores = etpa_classify(m, g.text);
  if (!r.scores.finite()) throw NumericError("non-finite label score");
  r.label = proc::argmax_label(r.scores);
  r.explanation = g.text;
  r.empty_warning = g.empty_warning;
  return r;
}

std::vector<PipelineResult> batch_posthoc(const PosthocModel& m,
                                          const corpus::Dataset& data,
                                          const std::vector<gen::ExplanationTriple>& triples,
                                          ExecMode mode) {
  if (triples.size() != data.size())
    throw ConfigError("one triple per instance required");
  std::vector<PipelineResult> out(data.size());
  for_each_index(data.size(), mode, [&](std::size_t i) {
    out[i] = posthoc_pipeline(m, data.instances[i], triples[i]);
  });
  return out;
}

std::vector<PipelineResult> batch_etpa(const EtpaModel& m,
                                       const corpus::Dataset& data,
                                       ExecMode mode) {
  std::vector<PipelineResult> out(data.size());
  for_each_index(data.size(), mode, [&](std::size_t i) {
    out[i] = etpa_pipeline(m, data.instances[i].premise,
                           data.instances[i].hypothesis);
  });
  return out;
}

void save_posthoc(const PosthocModel& m, const std::string& path,
                  const std::string& config_hash) {
  io::json j;
  j["format_version"] = 1;
  j["kind"] = "posthoc";
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["vocab"] = text::vocab_to_json(m.vocab);
  j["params"] = text::scorer_to_json(m.params);
  io::write_file(path, j.dump(2) + "\n");
}

PosthocModel load_posthoc(const std::string& path) {
  io::json j;
  try {
    j = io::json::parse(io::read_file(path));
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (j.value("format_version", 0) != 1 || j.value("kind", "") != "posthoc")
    throw DataError(path + ": not a posthoc checkpoint");
  PosthocModel m;
  m.vocab = text::vocab_from_json(j.at("vocab"));
  m.params = text::scorer_from_json(j.at("params"));
  return m;
}

void save_etpa(const EtpaModel& m, const std::string& path,
               const std::string& config_hash) {
  io::json j;
  j["format_version"] = 1;
  j["kind"] = "etpa";
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["vocab"] = text::vocab_to_json(m.vocab);
  j["generator"] = gen::generator_to_json(m.generator);
  j["clf"] = text::scorer_to_json(m.clf);
  io::write_file(path, j.dump(2) + "\n");
}

EtpaModel load_etpa(const std::string& path) {
  io::json j;
  try {
    j = io::json::parse(io::read_file(path));
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (j.value("format_version", 0) != 1 || j.value("kind", "") != "etpa")
    throw DataError(path + ": not an etpa checkpoint");
  EtpaModel m;
  m.vocab = text::vocab_from_json(j.at("vocab"));
  m.generator = gen::generator_from_json(j.at("generator"));
  m.clf = text::scorer_from_json(j.at("clf"));
  return m;
}

}  // namespace nile::base
