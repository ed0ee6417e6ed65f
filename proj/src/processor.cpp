#include "nile/processor.hpp"

#include <algorithm>
#include <cmath>

#include "nile/io.hpp"

namespace nile::proc {

using gen::ExplanationTriple;
using text::EncodeTrace;
using text::ScorerGrad;
using text::ScorerParams;
using text::TokenSeq;
using text::Vocabulary;

const char* to_string(Architecture a) {
  switch (a) {
    case Architecture::Independent: return "independent";
    case Architecture::Aggregate: return "aggregate";
    case Architecture::Append: return "append";
  }
  return "?";
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::PH: return "ph";
    case Variant::NS: return "ns";
    case Variant::NILE: return "nile";
  }
  return "?";
}

Architecture parse_architecture(std::string_view s) {
  if (s == "independent") return Architecture::Independent;
  if (s == "aggregate") return Architecture::Aggregate;
  if (s == "append") return Architecture::Append;
  throw ConfigError("unknown architecture: " + std::string(s));
}

Variant parse_variant(std::string_view s) {
  if (s == "ph") return Variant::PH;
  if (s == "ns") return Variant::NS;
  if (s == "nile") return Variant::NILE;
  throw ConfigError("unknown variant: " + std::string(s));
}

void ProcessorConfig::validate() const {
  if (dim < 1) throw ConfigError("processor dim must be >= 1");
  if (variant == Variant::NILE) {
    if (architecture == Architecture::Append)
      throw ConfigError(
          "the negative-sampling variant excludes the append architecture");
    if (negatives_per_instance < 1)
      throw ConfigError("nile variant needs negatives_per_instance >= 1");
  } else if (negatives_per_instance != 0) {
    throw ConfigError("only the nile variant takes negative samples");
  }
}

ProcessorConfig make_config(Architecture arch, Variant variant,
                            std::uint64_t seed) {
  ProcessorConfig c;
  c.architecture = arch;
  c.variant = variant;
  c.negatives_per_instance = (variant == Variant::NILE) ? 2 : 0;
  c.seed = seed;
  c.validate();
  return c;
}

std::string build_concat_ph(const std::string& premise,
                            const std::string& hypothesis) {
  std::string out = "premise:";
  if (!premise.empty()) {
    out.push_back(' ');
    out += premise;
  }
  out += " hypothesis:";
  if (!hypothesis.empty()) {
    out.push_back(' ');
    out += hypothesis;
  }
  return out;
}

std::string build_concat_ecn(const ExplanationTriple& t) {
  std::string out = "entailment:";
  if (!t.entail.empty()) out += " " + t.entail;
  out += " contradiction:";
  if (!t.contradict.empty()) out += " " + t.contradict;
  out += " neutral:";
  if (!t.neutral.empty()) out += " " + t.neutral;
  return out;
}

namespace {

const std::string kHeadInd = "w_ind";
const std::string kHeadAgg1 = "w_agg_1";
const std::string kHeadAgg2 = "w_agg_2";

std::string append_head(Label l) {
  switch (l) {
    case Label::Entail: return "w_apn_entail";
    case Label::Contradict: return "w_apn_contradict";
    default: return "w_apn_neutral";
  }
}

std::vector<std::string> head_names(Architecture a) {
  switch (a) {
    case Architecture::Independent: return {kHeadInd};
    case Architecture::Aggregate: return {kHeadAgg1, kHeadAgg2};
    case Architecture::Append:
      return {append_head(Label::Entail), append_head(Label::Contradict),
              append_head(Label::Neutral)};
  }
  return {};
}

void check_inputs(const ProcessorModel& m,
                  const std::optional<std::string>& ctx,
                  const ExplanationTriple& triple, const ScoreOptions& opts) {
  const bool ph = m.config.variant == Variant::PH;
  if (ph && ctx)
    throw ConfigError("ph variant takes no instance text");
  if (!ph && !ctx)
    throw ConfigError("full-input variant needs the instance text");
  if (!opts.probe_mode) {
    for (Label l : all_labels())
      if (m.vocab.encode(triple.get(l)).empty())
        throw DataError(std::string("missing explanation for slot ") +
                        nile::to_string(l));
  }
}

// Encodes (ctx?, text) per variant.
EncodeTrace encode_input(const ProcessorModel& m,
                         const std::optional<std::string>& ctx,
                         const std::string& explanation_text) {
  TokenSeq t = m.vocab.encode(explanation_text);
  if (!ctx) return text::f_encode(m.params, t);
  TokenSeq c = m.vocab.encode(*ctx);
  return text::f_encode(m.params, c, t);
}

}  // namespace

LabelScores score_independent(const ProcessorModel& m,
                              const std::optional<std::string>& ctx,
                              const ExplanationTriple& triple,
                              const ScoreOptions& opts) {
  check_inputs(m, ctx, triple, opts);
  LabelScores s;
  for (Label l : all_labels()) {
    EncodeTrace t = encode_input(m, ctx, triple.get(l));
    s[l] = text::head_score(m.params, kHeadInd, t);
  }
  return s;
}

LabelScores score_aggregate(const ProcessorModel& m,
                            const std::optional<std::string>& ctx,
                            const ExplanationTriple& triple,
                            const ScoreOptions& opts) {
  check_inputs(m, ctx, triple, opts);
  EncodeTrace te = encode_input(m, ctx, triple.entail);
  EncodeTrace tc = encode_input(m, ctx, triple.contradict);
  EncodeTrace tn = encode_input(m, ctx, triple.neutral);
  double v1_e = text::head_score(m.params, kHeadAgg1, te);
  double v1_c = text::head_score(m.params, kHeadAgg1, tc);
  double v1_n = text::head_score(m.params, kHeadAgg1, tn);
  double v2_e = text::head_score(m.params, kHeadAgg2, te);
  double v2_c = text::head_score(m.params, kHeadAgg2, tc);
  LabelScores s;
  s.entail = text::logsumexp(v1_e, v2_c);
  s.contradict = text::logsumexp(v1_c, v2_e);
  s.neutral = v1_n;
  return s;
}

LabelScores score_append(const ProcessorModel& m,
                         const std::optional<std::string>& ctx,
                         const ExplanationTriple& triple,
                         const ScoreOptions& opts) {
  if (m.config.variant == Variant::NILE)
    throw ConfigError("append is not available under the nile variant");
  check_inputs(m, ctx, triple, opts);
  EncodeTrace t = encode_input(m, ctx, build_concat_ecn(triple));
  LabelScores s;
  for (Label l : all_labels())
    s[l] = text::head_score(m.params, append_head(l), t);
  return s;
}

LabelScores score(const ProcessorModel& m,
                  const std::optional<std::string>& ctx,
                  const ExplanationTriple& triple, const ScoreOptions& opts) {
  switch (m.config.architecture) {
    case Architecture::Independent: return score_independent(m, ctx, triple, opts);
    case Architecture::Aggregate: return score_aggregate(m, ctx, triple, opts);
    case Architecture::Append: return score_append(m, ctx, triple, opts);
  }
  throw ConfigError("unknown architecture");
}

std::vector<std::string> sample_negative_explanations(
    const corpus::Dataset& train, const corpus::Instance& inst, Label label,
    int k, std::uint64_t seed) {
  if (inst.label != label)
    throw ConfigError("negatives are sampled for the instance's own label");
  std::vector<const std::string*> pool;
  for (const auto& other : train.instances) {
    if (other.id == inst.id || other.label != label) continue;
    if (!other.gold_explanation)
      throw DataError("instance " + other.id + " has no gold explanation");
    pool.push_back(&*other.gold_explanation);
  }
  if (static_cast<int>(pool.size()) < k)
    throw DataError("negative-sample pool too small for label " +
                    std::string(nile::to_string(label)));
  Rng rng(seed);
  // partial Fisher-Yates: the first k slots end up uniform w/o replacement
  for (int i = 0; i < k; ++i) {
    std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  std::vector<std::string> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back(*pool[i]);
  return out;
}

namespace {

struct AggScores {
  EncodeTrace te, tc, tn;
  double v1_e, v1_c, v1_n, v2_e, v2_c;
  LabelScores s;
};

AggScores aggregate_forward(const ProcessorModel& m,
                            const std::optional<std::string>& ctx,
                            const ExplanationTriple& triple) {
  AggScores a;
  a.te = encode_input(m, ctx, triple.entail);
  a.tc = encode_input(m, ctx, triple.contradict);
  a.tn = encode_input(m, ctx, triple.neutral);
  a.v1_e = text::head_score(m.params, kHeadAgg1, a.te);
  a.v1_c = text::head_score(m.params, kHeadAgg1, a.tc);
  a.v1_n = text::head_score(m.params, kHeadAgg1, a.tn);
  a.v2_e = text::head_score(m.params, kHeadAgg2, a.te);
  a.v2_c = text::head_score(m.params, kHeadAgg2, a.tc);
  a.s.entail = text::logsumexp(a.v1_e, a.v2_c);
  a.s.contradict = text::logsumexp(a.v1_c, a.v2_e);
  a.s.neutral = a.v1_n;
  return a;
}

}  // namespace

LossBreakdown processor_loss(const ProcessorModel& m,
                             const std::optional<std::string>& ctx,
                             const ExplanationTriple& triple, Label gold,
                             const std::vector<std::string>& negatives,
                             double aux_weight, ScorerGrad* grad) {
  // degenerate empty slots from a trained generator score as empty segments
  ScoreOptions opts;
  opts.probe_mode = true;
  LossBreakdown out;

  switch (m.config.architecture) {
    case Architecture::Independent: {
      check_inputs(m, ctx, triple, opts);
      std::array<EncodeTrace, 3> traces = {
          encode_input(m, ctx, triple.entail),
          encode_input(m, ctx, triple.contradict),
          encode_input(m, ctx, triple.neutral)};
      LabelScores s;
      for (Label l : all_labels())
        s[l] = text::head_score(m.params, kHeadInd,
                                traces[static_cast<int>(l)]);
      out.scores = s;
      auto ce = text::softmax_cross_entropy(s, gold);
      out.main_loss = ce.loss;
      if (grad)
        for (int i = 0; i < 3; ++i)
          text::head_backward(m.params, kHeadInd, traces[i], ce.grad[i],
                              *grad);

      if (!negatives.empty()) {
        std::vector<EncodeTrace> neg_traces;
        std::vector<double> cand;
        cand.push_back(s[gold]);
        for (const auto& neg : negatives) {
          neg_traces.push_back(encode_input(m, ctx, neg));
          cand.push_back(
              text::head_score(m.params, kHeadInd, neg_traces.back()));
        }
        auto aux = text::softmax_cross_entropy(
            std::span<const double>(cand), 0);
        out.aux_loss = aux.loss;
        if (grad) {
          text::head_backward(m.params, kHeadInd,
                              traces[static_cast<int>(gold)],
                              aux_weight * aux.grad[0], *grad);
          for (std::size_t j = 0; j < neg_traces.size(); ++j)
            text::head_backward(m.params, kHeadInd, neg_traces[j],
                                aux_weight * aux.grad[j + 1], *grad);
        }
      }
      break;
    }

    case Architecture::Aggregate: {
      check_inputs(m, ctx, triple, opts);
      AggScores a = aggregate_forward(m, ctx, triple);
      out.scores = a.s;
      auto ce = text::softmax_cross_entropy(a.s, gold);
      out.main_loss = ce.loss;

      // d(main)/dV through the logsumexp combinations
      double dv1_e = 0, dv1_c = 0, dv1_n = 0, dv2_e = 0, dv2_c = 0;
      double ge = ce.grad[0], gc = ce.grad[1], gn = ce.grad[2];
      dv1_e += ge * std::exp(a.v1_e - a.s.entail);
      dv2_c += ge * std::exp(a.v2_c - a.s.entail);
      dv1_c += gc * std::exp(a.v1_c - a.s.contradict);
      dv2_e += gc * std::exp(a.v2_e - a.s.contradict);
      dv1_n += gn;

      if (!negatives.empty()) {
        std::vector<EncodeTrace> neg_traces;
        std::vector<double> v1_neg, v2_neg;
        for (const auto& neg : negatives) {
          neg_traces.push_back(encode_input(m, ctx, neg));
          v1_neg.push_back(
              text::head_score(m.params, kHeadAgg1, neg_traces.back()));
          v2_neg.push_back(
              text::head_score(m.params, kHeadAgg2, neg_traces.back()));
        }
        // candidate scores: gold-label score with the gold slot swapped
        std::vector<double> cand;
        cand.push_back(a.s[gold]);
        for (std::size_t j = 0; j < neg_traces.size(); ++j) {
          double sj = 0.0;
          switch (gold) {
            case Label::Entail:
              sj = text::logsumexp(v1_neg[j], a.v2_c);
              break;
            case Label::Contradict:
              sj = text::logsumexp(v1_neg[j], a.v2_e);
              break;
            case Label::Neutral:
              sj = v1_neg[j];
              break;
          }
          cand.push_back(sj);
        }
        auto aux = text::softmax_cross_entropy(
            std::span<const double>(cand), 0);
        out.aux_loss = aux.loss;

        if (grad) {
          std::vector<double> dv1_negs(neg_traces.size(), 0.0);
          auto route = [&](double ds, double v1_j, double sj,
                           std::size_t j_neg, bool is_gold_candidate) {
            switch (gold) {
              case Label::Entail: {
                double d1 = ds * std::exp(v1_j - sj);
                double d2 = ds * std::exp(a.v2_c - sj);
                if (is_gold_candidate) dv1_e += aux_weight * d1;
                else dv1_negs[j_neg] += aux_weight * d1;
                dv2_c += aux_weight * d2;
                break;
              }
              case Label::Contradict: {
                double d1 = ds * std::exp(v1_j - sj);
                double d2 = ds * std::exp(a.v2_e - sj);
                if (is_gold_candidate) dv1_c += aux_weight * d1;
                else dv1_negs[j_neg] += aux_weight * d1;
                dv2_e += aux_weight * d2;
                break;
              }
              case Label::Neutral: {
                if (is_gold_candidate) dv1_n += aux_weight * ds;
                else dv1_negs[j_neg] += aux_weight * ds;
                break;
              }
            }
          };
          double v1_gold = (gold == Label::Entail)   ? a.v1_e
                           : (gold == Label::Contradict) ? a.v1_c
                                                         : a.v1_n;
          route(aux.grad[0], v1_gold, cand[0], 0, true);
          for (std::size_t j = 0; j < neg_traces.size(); ++j)
            route(aux.grad[j + 1], v1_neg[j], cand[j + 1], j, false);

          for (std::size_t j = 0; j < neg_traces.size(); ++j)
            if (dv1_negs[j] != 0.0)
              text::head_backward(m.params, kHeadAgg1, neg_traces[j],
                                  dv1_negs[j], *grad);
        }
      }

      if (grad) {
        text::head_backward(m.params, kHeadAgg1, a.te, dv1_e, *grad);
        text::head_backward(m.params, kHeadAgg1, a.tc, dv1_c, *grad);
        text::head_backward(m.params, kHeadAgg1, a.tn, dv1_n, *grad);
        text::head_backward(m.params, kHeadAgg2, a.te, dv2_e, *grad);
        text::head_backward(m.params, kHeadAgg2, a.tc, dv2_c, *grad);
      }
      break;
    }

    case Architecture::Append: {
      if (!negatives.empty())
        throw ConfigError("append takes no negative samples");
      check_inputs(m, ctx, triple, opts);
      EncodeTrace t = encode_input(m, ctx, build_concat_ecn(triple));
      LabelScores s;
      for (Label l : all_labels())
        s[l] = text::head_score(m.params, append_head(l), t);
      out.scores = s;
      auto ce = text::softmax_cross_entropy(s, gold);
      out.main_loss = ce.loss;
      if (grad)
        for (Label l : all_labels())
          text::head_backward(m.params, append_head(l), t,
                              ce.grad[static_cast<int>(l)], *grad);
      break;
    }
  }

  out.total = out.main_loss + aux_weight * out.aux_loss;
  return out;
}

ProcessorModel init_processor(const ProcessorConfig& config,
                              const Vocabulary& vocab,
                              double embed_init_scale) {
  config.validate();
  ProcessorModel m;
  m.config = config;
  m.vocab = vocab;
  Rng rng(derive_seed(config.seed, "processor-init"));
  m.params = text::init_scorer(vocab.size(), config.dim,
                         head_names(config.architecture), rng,
                         embed_init_scale);
  return m;
}

ProcessorModel train_processor(const ProcessorConfig& config,
                               const corpus::Dataset& train,
                               const std::vector<ExplanationTriple>& triples,
                               const Vocabulary& vocab,
                               const TrainOptions& opts, TrainTrace* trace) {
  config.validate();
  if (triples.size() != train.size())
    throw ConfigError("one triple per training instance required");
  if (train.instances.empty()) throw DataError("empty training set");

  ProcessorModel m = init_processor(config, vocab, opts.embed_init_scale);
  ScorerGrad grad = text::make_grad(m.params);
  text::SgdConfig sgd{opts.learning_rate, opts.clip_norm};
  const bool use_negatives = config.variant == Variant::NILE;
  const int k = config.negatives_per_instance;

  std::vector<std::optional<std::string>> ctxs(train.size());
  if (config.variant != Variant::PH)
    for (std::size_t i = 0; i < train.size(); ++i)
      ctxs[i] = build_concat_ph(train.instances[i].premise,
                                train.instances[i].hypothesis);

  auto mean_loss = [&]() {
    double sum = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      std::vector<std::string> negs;
      if (use_negatives)
        negs = sample_negative_explanations(
            train, train.instances[i], train.instances[i].label, k,
            derive_seed(config.seed, "negatives-eval", i));
      sum += processor_loss(m, ctxs[i], triples[i], train.instances[i].label,
                            negs, opts.aux_weight, nullptr)
                 .total;
    }
    return sum / static_cast<double>(train.size());
  };
  if (trace) trace->initial_loss = mean_loss();

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "processor-order",
                        static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (std::size_t i : order) {
      const auto& inst = train.instances[i];
      std::vector<std::string> negs;
      if (use_negatives)
        negs = sample_negative_explanations(
            train, inst, inst.label, k,
            derive_seed(config.seed, "negatives",
                        (static_cast<std::uint64_t>(epoch) << 32) | i));
      grad.zero();
      processor_loss(m, ctxs[i], triples[i], inst.label, negs,
                     opts.aux_weight, &grad);
      text::optimizer_step(text::bind(m.params, grad), sgd);
    }
    // post-epoch evaluation on the full set, same negatives as initial_loss
    if (trace) trace->epoch_loss.push_back(mean_loss());
  }
  return m;
}

Label argmax_label(const LabelScores& s) {
  Label best = Label::Entail;
  if (s.contradict > s[best]) best = Label::Contradict;
  if (s.neutral > s[best]) best = Label::Neutral;
  return best;
}

Prediction predict(const ProcessorModel& m, const corpus::Instance& inst,
                   const ExplanationTriple& triple, const ScoreOptions& opts) {
  std::optional<std::string> ctx;
  if (m.config.variant != Variant::PH)
    ctx = build_concat_ph(inst.premise, inst.hypothesis);
  Prediction p;
  p.scores = score(m, ctx, triple, opts);
  if (!p.scores.finite()) throw NumericError("non-finite label score");
  p.label = argmax_label(p.scores);
  return p;
}

std::vector<Prediction> batch_predict(const ProcessorModel& m,
                                      const corpus::Dataset& data,
                                      const std::vector<ExplanationTriple>& triples,
                                      ExecMode mode, const ScoreOptions& opts) {
  if (triples.size() != data.size())
    throw ConfigError("one triple per instance required");
  std::vector<Prediction> out(data.size());
  for_each_index(data.size(), mode, [&](std::size_t i) {
    out[i] = predict(m, data.instances[i], triples[i], opts);
  });
  return out;
}

void save_processor(const ProcessorModel& m, const std::string& path,
                    const std::string& config_hash) {
  io::json j;
  j["format_version"] = 1;
  j["kind"] = "processor";
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["config"]["architecture"] = to_string(m.config.architecture);
  j["config"]["variant"] = to_string(m.config.variant);
  j["config"]["negatives_per_instance"] = m.config.negatives_per_instance;
  j["config"]["dim"] = m.config.dim;
  j["config"]["seed"] = m.config.seed;
  j["vocab"] = text::vocab_to_json(m.vocab);
  j["params"] = text::scorer_to_json(m.params);
  io::write_file(path, j.dump(2) + "\n");
}

ProcessorModel load_processor(const std::string& path) {
  io::json j;
  try {
    j = io::json::parse(io::read_file(path));
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (j.value("format_version", 0) != 1 || j.value("kind", "") != "processor")
    throw DataError(path + ": not a processor checkpoint");
  ProcessorModel m;
  m.config.architecture =
      parse_architecture(j.at("config").at("architecture").get<std::string>());
  m.config.variant = parse_variant(j.at("config").at("variant").get<std::string>());
  m.config.negatives_per_instance =
      j.at("config").at("negatives_per_instance").get<int>();
  m.config.dim = j.at("config").at("dim").get<int>();
  m.config.seed = j.at("config").at("seed").get<std::uint64_t>();
  m.vocab = text::vocab_from_json(j.at("vocab"));
  m.params = text::scorer_from_json(j.at("params"));
  return m;
}

}  // namespace nile::proc
