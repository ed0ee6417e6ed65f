#include "nile/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "nile/io.hpp"

namespace nile::gen {

using text::TokenSeq;
using text::Vocabulary;

void GeneratorGrad::zero() {
  embeddings.zero();
  w_out.zero();
  std::fill(b_out.begin(), b_out.end(), 0.0);
}

GeneratorGrad make_grad(const GeneratorModel& m) {
  GeneratorGrad g;
  g.embeddings = Matrix(m.embeddings.rows, m.embeddings.cols);
  g.w_out = Matrix(m.w_out.rows, m.w_out.cols);
  g.b_out.assign(m.b_out.size(), 0.0);
  return g;
}

std::vector<text::ParamBinding> bind(GeneratorModel& m,
                                     const GeneratorGrad& g) {
  return {
      {m.embeddings.v.data(), g.embeddings.v.data(), m.embeddings.v.size()},
      {m.w_out.v.data(), g.w_out.v.data(), m.w_out.v.size()},
      {m.b_out.data(), g.b_out.data(), m.b_out.size()},
  };
}

TrainingSequence build_training_sequence(const Vocabulary& vocab,
                                         const std::string& premise,
                                         const std::string& hypothesis,
                                         const std::string& gold_explanation) {
  TokenSeq expl = vocab.encode(gold_explanation);
  if (expl.empty()) throw DataError("empty explanation in training sequence");

  TrainingSequence s;
  auto push = [&](int id, bool masked) {
    s.tokens.ids.push_back(id);
    s.loss_mask.push_back(masked);
  };
  push(vocab.lookup("premise:").value(), false);
  for (int id : vocab.encode(premise).ids) push(id, false);
  push(vocab.lookup("hypothesis:").value(), false);
  for (int id : vocab.encode(hypothesis).ids) push(id, false);
  push(Vocabulary::kExp, false);
  for (int id : expl.ids) push(id, true);
  push(Vocabulary::kEos, true);
  return s;
}

namespace {

// logits for the token following `pos-1`, i.e. predicting tokens[pos]
void context_window(const GeneratorModel& m, const std::vector<int>& ids,
                    std::size_t pos, std::vector<int>& ctx) {
  ctx.assign(static_cast<std::size_t>(m.window), Vocabulary::kPad);
  for (int k = 0; k < m.window; ++k) {
    std::ptrdiff_t src = static_cast<std::ptrdiff_t>(pos) - m.window + k;
    if (src >= 0) ctx[static_cast<std::size_t>(k)] = ids[static_cast<std::size_t>(src)];
  }
}

void forward_logits(const GeneratorModel& m, const std::vector<int>& ctx,
                    std::vector<double>& ctx_embed,
                    std::vector<double>& logits) {
  const std::size_t d = static_cast<std::size_t>(m.dim);
  const std::size_t w = static_cast<std::size_t>(m.window);
  ctx_embed.assign(w * d, 0.0);
  for (std::size_t slot = 0; slot < w; ++slot) {
    const double* e = m.embeddings.row(static_cast<std::size_t>(ctx[slot]));
    std::copy(e, e + d, ctx_embed.begin() + slot * d);
  }
  const std::size_t vsize = m.w_out.rows;
  logits.assign(vsize, 0.0);
  for (std::size_t t = 0; t < vsize; ++t) {
    const double* wt = m.w_out.row(t);
    double z = m.b_out[t];
    for (std::size_t k = 0; k < w * d; ++k) z += wt[k] * ctx_embed[k];
    logits[t] = z;
  }
}

}  // namespace

SequenceLoss sequence_loss(const GeneratorModel& m, const TrainingSequence& s,
                           double scale, GeneratorGrad* grad) {
  SequenceLoss out;
  const auto& ids = s.tokens.ids;
  std::vector<int> ctx;
  std::vector<double> ctx_embed, logits;
  const std::size_t d = static_cast<std::size_t>(m.dim);
  const std::size_t w = static_cast<std::size_t>(m.window);

  for (std::size_t pos = 0; pos < ids.size(); ++pos) {
    if (!s.loss_mask[pos]) continue;
    context_window(m, ids, pos, ctx);
    forward_logits(m, ctx, ctx_embed, logits);
    auto ce = text::softmax_cross_entropy(
        std::span<const double>(logits), static_cast<std::size_t>(ids[pos]));
    out.loss_sum += ce.loss;
    ++out.masked;
    if (!grad) continue;

    std::vector<double> dctx(w * d, 0.0);
    for (std::size_t t = 0; t < logits.size(); ++t) {
      double dl = ce.grad[t] * scale;
      if (dl == 0.0) continue;
      grad->b_out[t] += dl;
      double* gw = grad->w_out.row(t);
      const double* wt = m.w_out.row(t);
      for (std::size_t k = 0; k < w * d; ++k) {
        gw[k] += dl * ctx_embed[k];
        dctx[k] += dl * wt[k];
      }
    }
    for (std::size_t slot = 0; slot < w; ++slot) {
      double* ge = grad->embeddings.row(static_cast<std::size_t>(ctx[slot]));
      for (std::size_t k = 0; k < d; ++k) ge[k] += dctx[slot * d + k];
    }
  }
  return out;
}

GeneratorModel init_generator(std::optional<Label> label,
                              const Vocabulary& vocab, const LmOptions& opts) {
  if (opts.window < 1 || opts.dim < 1)
    throw ConfigError("generator window and dim must be >= 1");
  GeneratorModel m;
  m.label = label;
  m.vocab = vocab;
  m.dim = opts.dim;
  m.window = opts.window;
  m.max_new_tokens = opts.max_new_tokens;
  std::string tag = label ? to_string(*label) : "all";
  Rng rng(derive_seed(opts.seed, "generator-init:" + tag));
  const int vsize = vocab.size();
  m.embeddings = Matrix(vsize, opts.dim);
  double scale = 1.0 / std::sqrt(static_cast<double>(opts.dim));
  for (double& x : m.embeddings.v) x = rng.normal(0.0, scale);
  m.w_out = Matrix(vsize, static_cast<std::size_t>(opts.window) * opts.dim);
  double wscale = 1.0 / std::sqrt(static_cast<double>(opts.window * opts.dim));
  for (double& x : m.w_out.v) x = rng.normal(0.0, wscale);
  m.b_out.assign(vsize, 0.0);
  return m;
}

GeneratorModel train_generator(std::optional<Label> label,
                               const corpus::Dataset& train,
                               const Vocabulary& vocab,
                               const LmOptions& opts) {
  std::vector<const corpus::Instance*> pool;
  for (const auto& inst : train.instances)
    if (!label || inst.label == *label) pool.push_back(&inst);
  if (pool.empty())
    throw DataError(std::string("no training instances for generator ") +
                    (label ? to_string(*label) : "all"));
  for (const auto* inst : pool)
    if (!inst->gold_explanation)
      throw DataError("instance " + inst->id + " has no gold explanation");

  GeneratorModel m = init_generator(label, vocab, opts);
  GeneratorGrad grad = make_grad(m);
  text::SgdConfig sgd{opts.learning_rate, opts.clip_norm};
  std::string tag = m.label ? to_string(*m.label) : "all";

  std::vector<TrainingSequence> seqs;
  seqs.reserve(pool.size());
  for (const auto* inst : pool)
    seqs.push_back(build_training_sequence(vocab, inst->premise,
                                           inst->hypothesis,
                                           *inst->gold_explanation));

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng rng(derive_seed(opts.seed, "generator-order:" + tag,
                        static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t token_count = 0;
    for (std::size_t i : order) {
      if (opts.touch_hook) opts.touch_hook(*pool[i]);
      std::size_t masked = 0;
      for (bool b : seqs[i].loss_mask) masked += b ? 1 : 0;
      grad.zero();
      auto l = sequence_loss(m, seqs[i], 1.0 / static_cast<double>(masked),
                             &grad);
      loss_sum += l.loss_sum;
      token_count += l.masked;
      text::optimizer_step(bind(m, grad), sgd);
    }
    m.epoch_token_loss.push_back(loss_sum /
                                 static_cast<double>(token_count));
  }
  return m;
}

Generated generate(const GeneratorModel& m, const std::string& premise,
                   const std::string& hypothesis) {
  std::vector<int> ids;
  ids.push_back(m.vocab.lookup("premise:").value());
  for (int id : m.vocab.encode(premise).ids) ids.push_back(id);
  ids.push_back(m.vocab.lookup("hypothesis:").value());
  for (int id : m.vocab.encode(hypothesis).ids) ids.push_back(id);
  ids.push_back(Vocabulary::kExp);

  std::vector<int> ctx;
  std::vector<double> ctx_embed, logits;
  TokenSeq out;
  for (int step = 0; step < m.max_new_tokens; ++step) {
    context_window(m, ids, ids.size(), ctx);
    forward_logits(m, ctx, ctx_embed, logits);
    // PAD and [EXP] are prompt-side tokens, never decoded
    logits[Vocabulary::kPad] = -std::numeric_limits<double>::infinity();
    logits[Vocabulary::kExp] = -std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (std::size_t t = 1; t < logits.size(); ++t)
      if (logits[t] > logits[best]) best = t;  // ties keep the lowest id
    if (best == static_cast<std::size_t>(Vocabulary::kEos)) break;
    ids.push_back(static_cast<int>(best));
    out.ids.push_back(static_cast<int>(best));
  }
  Generated g;
  g.text = m.vocab.decode(out);
  g.empty_warning = g.text.empty();
  return g;
}

ExplanationTriple generate_triple(const GeneratorSet& gens,
                                  const std::string& premise,
                                  const std::string& hypothesis) {
  ExplanationTriple t;
  for (Label l : all_labels())
    t.set(l, generate(gens.get(l), premise, hypothesis).text);
  return t;
}

std::string template_generate(const corpus::SyntheticWorld& world,
                              Label label, const corpus::Instance& inst) {
  auto p = text::split_tokens(inst.premise);
  auto h = text::split_tokens(inst.hypothesis);
  if (p.size() < 3 || h.size() < 3 || p[0] != "a" || h[0] != "a")
    throw DataError("not a synthetic instance: " + inst.id);
  int variant = corpus::parse_variant_from_id(inst.id);

  const std::string& subject = p[1];
  const std::string& premise_verb = p[2];
  const std::string& hyp_verb = h.size() > 2 ? h[2] : p[2];

  auto index_of = [](const std::vector<std::string>& list,
                     const std::string& word) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < list.size(); ++i)
      if (list[i] == word) return static_cast<std::ptrdiff_t>(i);
    return -1;
  };
  auto e_idx = index_of(world.entities, subject);
  auto v_idx = index_of(world.verbs, premise_verb);
  if (e_idx < 0 || v_idx < 0)
    throw DataError("not a synthetic instance: " + inst.id);

  switch (label) {
    case Label::Entail: {
      // always the entity's true category; equals the gold text on
      // entailment instances
      const std::string& cat = world.categories[world.entity_category[e_idx]];
      return corpus::fill_template(label, variant, subject, cat);
    }
    case Label::Contradict: {
      // second verb: the hypothesis verb when it differs, else the next
      // verb in the world's list
      std::string v2 = hyp_verb != premise_verb
                           ? hyp_verb
                           : world.verbs[(v_idx + 1) % world.verbs.size()];
      return corpus::fill_template(label, variant, premise_verb, v2);
    }
    case Label::Neutral: {
      // the instance's modifier when present, else one derived from the verb
      std::string mod =
          h.size() > 3 ? h[3]
                       : world.modifiers[v_idx % world.modifiers.size()];
      return corpus::fill_template(label, variant, premise_verb,
                                   premise_verb + " " + mod);
    }
  }
  throw ConfigError("unknown label");
}

ExplanationTriple oracle_triple(const corpus::SyntheticWorld& world,
                                const corpus::Instance& inst) {
  ExplanationTriple t;
  for (Label l : all_labels()) t.set(l, template_generate(world, l, inst));
  return t;
}

std::vector<ExplanationTriple> batch_generate_triples(
    const GeneratorSet& gens, const corpus::Dataset& data, ExecMode mode) {
  std::vector<ExplanationTriple> out(data.size());
  for_each_index(data.size(), mode, [&](std::size_t i) {
    const auto& inst = data.instances[i];
    out[i] = generate_triple(gens, inst.premise, inst.hypothesis);
  });
  return out;
}

std::vector<ExplanationTriple> batch_oracle_triples(
    const corpus::SyntheticWorld& world, const corpus::Dataset& data,
    ExecMode mode) {
  std::vector<ExplanationTriple> out(data.size());
  for_each_index(data.size(), mode, [&](std::size_t i) {
    out[i] = oracle_triple(world, data.instances[i]);
  });
  return out;
}

nlohmann::ordered_json generator_to_json(const GeneratorModel& m) {
  io::json j;
  j["format_version"] = 1;
  j["kind"] = "generator";
  j["label"] = m.label ? io::json(to_string(*m.label)) : io::json(nullptr);
  j["dim"] = m.dim;
  j["window"] = m.window;
  j["max_new_tokens"] = m.max_new_tokens;
  j["vocab"] = text::vocab_to_json(m.vocab);
  j["params"]["embeddings"] = io::matrix_to_json(m.embeddings);
  j["params"]["w_out"] = io::matrix_to_json(m.w_out);
  j["params"]["b_out"] = m.b_out;
  j["epoch_token_loss"] = m.epoch_token_loss;
  return j;
}

GeneratorModel generator_from_json(const nlohmann::ordered_json& j) {
  if (j.value("format_version", 0) != 1 || j.value("kind", "") != "generator")
    throw DataError("not a generator checkpoint");
  GeneratorModel m;
  if (!j.at("label").is_null()) {
    Label l;
    if (!parse_label(j.at("label").get<std::string>(), l))
      throw DataError("bad generator label tag");
    m.label = l;
  }
  m.dim = j.at("dim").get<int>();
  m.window = j.at("window").get<int>();
  m.max_new_tokens = j.at("max_new_tokens").get<int>();
  m.vocab = text::vocab_from_json(j.at("vocab"));
  m.embeddings = io::matrix_from_json(j.at("params").at("embeddings"));
  m.w_out = io::matrix_from_json(j.at("params").at("w_out"));
  m.b_out = j.at("params").at("b_out").get<std::vector<double>>();
  if (j.contains("epoch_token_loss"))
    m.epoch_token_loss = j.at("epoch_token_loss").get<std::vector<double>>();
  return m;
}

void save_generator(const GeneratorModel& m, const std::string& path,
                    const std::string& config_hash) {
  io::json j = generator_to_json(m);
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  io::write_file(path, j.dump(2) + "\n");
}

GeneratorModel load_generator(const std::string& path) {
  io::json j;
  try {
    j = io::json::parse(io::read_file(path));
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return generator_from_json(j);
}

void save_triples(const std::vector<std::string>& ids,
                  const std::vector<ExplanationTriple>& triples,
                  const std::string& path) {
  if (ids.size() != triples.size())
    throw ConfigError("save_triples: ids/triples size mismatch");
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    io::json rec;
    rec["id"] = ids[i];
    rec["t_entail"] = triples[i].entail;
    rec["t_contradict"] = triples[i].contradict;
    rec["t_neutral"] = triples[i].neutral;
    out += rec.dump();
    out += '\n';
  }
  io::write_file(path, out);
}

std::vector<ExplanationTriple> load_triples_for(const corpus::Dataset& data,
                                                const std::string& path) {
  std::map<std::string, ExplanationTriple> by_id;
  std::istringstream in(io::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    io::json rec = io::json::parse(line);
    ExplanationTriple t;
    t.entail = rec.at("t_entail").get<std::string>();
    t.contradict = rec.at("t_contradict").get<std::string>();
    t.neutral = rec.at("t_neutral").get<std::string>();
    by_id.emplace(rec.at("id").get<std::string>(), std::move(t));
  }
  std::vector<ExplanationTriple> out;
  out.reserve(data.size());
  for (const auto& inst : data.instances) {
    auto it = by_id.find(inst.id);
    if (it == by_id.end())
      throw DataError("no triple for instance " + inst.id + " in " + path);
    out.push_back(it->second);
  }
  return out;
}

}  // namespace nile::gen
