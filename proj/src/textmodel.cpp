#include "nile/textmodel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace nile::text {

namespace {

const std::set<std::string>& field_markers() {
  static const std::set<std::string> m = {"premise:", "hypothesis:",
                                          "entailment:", "contradiction:",
                                          "neutral:"};
  return m;
}

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

}  // namespace

bool is_field_marker(std::string_view token) {
  return field_markers().count(std::string(token)) > 0;
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (char raw : text) {
    char c = raw;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (is_word_char(c)) {
      word.push_back(c);
    } else if (c == ':' && !word.empty() && field_markers().count(word + ":")) {
      word.push_back(':');
      out.push_back(word);
      word.clear();
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      flush();
    } else {
      flush();
      out.emplace_back(1, c);
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() {
  // Reserved ids must line up with the k* constants.
  for (const char* t : {"[PAD]", "[UNK]", "[EXP]", "[EOS]", "[SEP]",
                        "premise:", "hypothesis:", "entailment:",
                        "contradiction:", "neutral:"}) {
    add(t);
  }
}

int Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  int id = static_cast<int>(id_to_token_.size());
  id_to_token_.push_back(token);
  token_to_id_.emplace(token, id);
  return id;
}

std::optional<int> Vocabulary::lookup(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

TokenSeq Vocabulary::encode_tokens(const std::vector<std::string>& toks) const {
  TokenSeq seq;
  seq.ids.reserve(toks.size());
  for (const auto& t : toks) {
    auto id = lookup(t);
    seq.ids.push_back(id ? *id : kUnk);
  }
  return seq;
}

TokenSeq Vocabulary::encode(std::string_view raw_text) const {
  return encode_tokens(split_tokens(raw_text));
}

std::string Vocabulary::decode(const TokenSeq& seq) const {
  std::string out;
  for (int id : seq.ids) {
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

Vocabulary build_vocabulary(const std::vector<std::string>& texts) {
  std::set<std::string> seen;
  for (const auto& t : texts)
    for (auto& tok : split_tokens(t)) seen.insert(tok);
  Vocabulary v;
  for (const auto& tok : seen) v.add(tok);
  return v;
}

bool ScorerParams::finite() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return std::isfinite(x); });
  };
  if (!ok(embeddings.v) || !ok(w_proj.v)) return false;
  for (const auto& [name, h] : heads)
    if (!ok(h)) return false;
  return true;
}

ScorerParams init_scorer(int vocab_size, int dim,
                         const std::vector<std::string>& head_names, Rng& rng,
                         double embed_scale) {
  ScorerParams p;
  p.dim = dim;
  p.embeddings = Matrix(vocab_size, dim);
  for (double& x : p.embeddings.v) x = rng.normal(0.0, embed_scale);
  double proj_scale = 1.0 / std::sqrt(static_cast<double>(dim));
  p.w_proj = Matrix(dim, dim);
  for (double& x : p.w_proj.v) x = rng.normal(0.0, proj_scale);
  for (const auto& name : head_names) {
    std::vector<double> h(dim);
    for (double& x : h) x = rng.normal(0.0, proj_scale);
    p.heads.emplace(name, std::move(h));
  }
  return p;
}

void ScorerGrad::zero() {
  embeddings.zero();
  w_proj.zero();
  for (auto& [name, h] : heads) std::fill(h.begin(), h.end(), 0.0);
}

ScorerGrad make_grad(const ScorerParams& p) {
  ScorerGrad g;
  g.embeddings = Matrix(p.embeddings.rows, p.embeddings.cols);
  g.w_proj = Matrix(p.w_proj.rows, p.w_proj.cols);
  for (const auto& [name, h] : p.heads)
    g.heads.emplace(name, std::vector<double>(h.size(), 0.0));
  return g;
}

namespace {

EncodeTrace encode_ids(const ScorerParams& p, const std::vector<int>& joined) {
  EncodeTrace t;
  t.ids.reserve(joined.size());
  for (int id : joined)
    if (id != Vocabulary::kPad) t.ids.push_back(id);
  if (t.ids.empty()) throw DataError("f_encode: empty sequence");

  const std::size_t d = static_cast<std::size_t>(p.dim);
  t.pool.assign(d, 0.0);
  for (int id : t.ids) {
    const double* e = p.embeddings.row(static_cast<std::size_t>(id));
    for (std::size_t k = 0; k < d; ++k) t.pool[k] += e[k];
  }
  const double inv_m = 1.0 / static_cast<double>(t.ids.size());
  for (double& x : t.pool) x *= inv_m;

  t.enc.assign(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    const double* w = p.w_proj.row(r);
    double z = 0.0;
    for (std::size_t k = 0; k < d; ++k) z += w[k] * t.pool[k];
    t.enc[r] = std::tanh(z);
  }
  return t;
}

}  // namespace

EncodeTrace f_encode(const ScorerParams& p, const TokenSeq& a) {
  return encode_ids(p, a.ids);
}

EncodeTrace f_encode(const ScorerParams& p, const TokenSeq& a,
                     const TokenSeq& b) {
  std::vector<int> joined;
  joined.reserve(a.size() + b.size() + 1);
  joined.insert(joined.end(), a.ids.begin(), a.ids.end());
  joined.push_back(Vocabulary::kSep);
  joined.insert(joined.end(), b.ids.begin(), b.ids.end());
  return encode_ids(p, joined);
}

void f_encode_backward(const ScorerParams& p, const EncodeTrace& t,
                       const std::vector<double>& denc, ScorerGrad& g) {
  const std::size_t d = static_cast<std::size_t>(p.dim);
  // dz = denc * (1 - enc^2)
  std::vector<double> dz(d);
  for (std::size_t r = 0; r < d; ++r)
    dz[r] = denc[r] * (1.0 - t.enc[r] * t.enc[r]);

  // w_proj grad: outer(dz, pool); pool grad: w_proj^T dz
  std::vector<double> dpool(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    double* gw = g.w_proj.row(r);
    const double* w = p.w_proj.row(r);
    const double dzr = dz[r];
    for (std::size_t k = 0; k < d; ++k) {
      gw[k] += dzr * t.pool[k];
      dpool[k] += w[k] * dzr;
    }
  }

  const double inv_m = 1.0 / static_cast<double>(t.ids.size());
  for (int id : t.ids) {
    double* ge = g.embeddings.row(static_cast<std::size_t>(id));
    for (std::size_t k = 0; k < d; ++k) ge[k] += dpool[k] * inv_m;
  }
}

double head_score(const ScorerParams& p, const std::string& head,
                  const EncodeTrace& t) {
  return dot(p.heads.at(head), t.enc);
}

void head_backward(const ScorerParams& p, const std::string& head,
                   const EncodeTrace& t, double dscore, ScorerGrad& g) {
  const auto& w = p.heads.at(head);
  auto& gw = g.heads.at(head);
  const std::size_t d = w.size();
  std::vector<double> denc(d);
  for (std::size_t k = 0; k < d; ++k) {
    gw[k] += dscore * t.enc[k];
    denc[k] = dscore * w[k];
  }
  f_encode_backward(p, t, denc, g);
}

double logsumexp(double a, double b) {
  if (std::isinf(a) && a < 0.0) return b;
  if (std::isinf(b) && b < 0.0) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

CeResult softmax_cross_entropy(const LabelScores& scores, Label gold) {
  std::array<double, 3> s = {scores.entail, scores.contradict, scores.neutral};
  double m = std::max({s[0], s[1], s[2]});
  std::array<double, 3> e;
  double z = 0.0;
  for (int i = 0; i < 3; ++i) {
    e[i] = std::exp(s[i] - m);
    z += e[i];
  }
  CeResult r;
  int g = static_cast<int>(gold);
  r.loss = -(s[g] - m - std::log(z));
  for (int i = 0; i < 3; ++i) r.grad[i] = e[i] / z - (i == g ? 1.0 : 0.0);
  return r;
}

CeVecResult softmax_cross_entropy(std::span<const double> scores,
                                  std::size_t gold) {
  double m = scores[0];
  for (double s : scores) m = std::max(m, s);
  double z = 0.0;
  CeVecResult r;
  r.grad.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    r.grad[i] = std::exp(scores[i] - m);
    z += r.grad[i];
  }
  r.loss = -(scores[gold] - m - std::log(z));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    r.grad[i] = r.grad[i] / z - (i == gold ? 1.0 : 0.0);
  }
  return r;
}

void optimizer_step(const std::vector<ParamBinding>& bindings,
                    const SgdConfig& cfg) {
  double sq = 0.0;
  for (const auto& b : bindings) {
    for (std::size_t i = 0; i < b.size; ++i) {
      double g = b.grads[i];
      if (!std::isfinite(g)) throw NumericError("optimizer_step: non-finite gradient");
      sq += g * g;
    }
  }
  double scale = 1.0;
  if (cfg.clip_norm > 0.0) {
    double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
  }
  const double step = cfg.learning_rate * scale;
  for (const auto& b : bindings)
    for (std::size_t i = 0; i < b.size; ++i) b.params[i] -= step * b.grads[i];
}

std::vector<ParamBinding> bind(ScorerParams& p, const ScorerGrad& g) {
  std::vector<ParamBinding> out;
  out.push_back({p.embeddings.v.data(), g.embeddings.v.data(),
                 p.embeddings.v.size()});
  out.push_back({p.w_proj.v.data(), g.w_proj.v.data(), p.w_proj.v.size()});
  auto it = g.heads.begin();
  for (auto& [name, h] : p.heads) {
    out.push_back({h.data(), it->second.data(), h.size()});
    ++it;
  }
  return out;
}

double grad_check(const GradCheckProblem& prob, double epsilon,
                  std::size_t max_coords, std::uint64_t seed) {
  if (epsilon <= 0.0) throw ConfigError("grad_check: epsilon must be > 0");
  if (prob.coords.size() != prob.analytic.size())
    throw ConfigError("grad_check: coords/analytic size mismatch");
  {
    double l0 = prob.loss();
    if (!std::isfinite(l0)) throw NumericError("grad_check: non-finite loss");
  }

  std::vector<std::size_t> idx(prob.coords.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (max_coords > 0 && max_coords < idx.size()) {
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(max_coords);
  }

  double worst = 0.0;
  for (std::size_t i : idx) {
    double* c = prob.coords[i];
    const double orig = *c;
    const double h = epsilon * std::max(1.0, std::fabs(orig));
    *c = orig + h;
    double lp = prob.loss();
    *c = orig - h;
    double lm = prob.loss();
    *c = orig;
    if (!std::isfinite(lp) || !std::isfinite(lm))
      throw NumericError("grad_check: non-finite loss");
    double numeric = (lp - lm) / (2.0 * h);
    double a = prob.analytic[i];
    double rel = std::fabs(a - numeric) /
                 (std::fabs(a) + std::fabs(numeric) + 1e-3);
    worst = std::max(worst, rel);
  }
  return worst;
}

std::vector<double*> coord_pointers(ScorerParams& p) {
  std::vector<double*> out;
  out.reserve(p.embeddings.size() + p.w_proj.size());
  for (double& x : p.embeddings.v) out.push_back(&x);
  for (double& x : p.w_proj.v) out.push_back(&x);
  for (auto& [name, h] : p.heads)
    for (double& x : h) out.push_back(&x);
  return out;
}

std::vector<double> flatten(const ScorerGrad& g) {
  std::vector<double> out;
  out.reserve(g.embeddings.size() + g.w_proj.size());
  out.insert(out.end(), g.embeddings.v.begin(), g.embeddings.v.end());
  out.insert(out.end(), g.w_proj.v.begin(), g.w_proj.v.end());
  for (const auto& [name, h] : g.heads)
    out.insert(out.end(), h.begin(), h.end());
  return out;
}

nlohmann::ordered_json vocab_to_json(const Vocabulary& v) {
  return nlohmann::ordered_json(v.tokens());
}

Vocabulary vocab_from_json(const nlohmann::ordered_json& j) {
  Vocabulary v;
  auto toks = j.get<std::vector<std::string>>();
  for (std::size_t i = 0; i < toks.size(); ++i) {
    int id = v.add(toks[i]);
    if (id != static_cast<int>(i))
      throw DataError("vocabulary order corrupt in checkpoint");
  }
  return v;
}

nlohmann::ordered_json scorer_to_json(const ScorerParams& p) {
  nlohmann::ordered_json j;
  j["dim"] = p.dim;
  j["embeddings"]["rows"] = p.embeddings.rows;
  j["embeddings"]["cols"] = p.embeddings.cols;
  j["embeddings"]["data"] = p.embeddings.v;
  j["w_proj"]["rows"] = p.w_proj.rows;
  j["w_proj"]["cols"] = p.w_proj.cols;
  j["w_proj"]["data"] = p.w_proj.v;
  for (const auto& [name, h] : p.heads) j["heads"][name] = h;
  return j;
}

ScorerParams scorer_from_json(const nlohmann::ordered_json& j) {
  ScorerParams p;
  p.dim = j.at("dim").get<int>();
  auto load_matrix = [&](const nlohmann::ordered_json& mj) {
    Matrix m(mj.at("rows").get<std::size_t>(),
             mj.at("cols").get<std::size_t>());
    m.v = mj.at("data").get<std::vector<double>>();
    if (m.v.size() != m.rows * m.cols)
      throw DataError("matrix data size mismatch in checkpoint");
    return m;
  };
  p.embeddings = load_matrix(j.at("embeddings"));
  p.w_proj = load_matrix(j.at("w_proj"));
  if (j.contains("heads"))
    for (const auto& [name, arr] : j.at("heads").items())
      p.heads[name] = arr.get<std::vector<double>>();
  return p;
}

}  // namespace nile::text
