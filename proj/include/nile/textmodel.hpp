#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nile/common.hpp"

namespace nile::text {

// Whitespace/punctuation tokenizer; lowercases; keeps the field markers
// ("premise:" etc.) as single tokens.
std::vector<std::string> split_tokens(std::string_view text);

bool is_field_marker(std::string_view token);

struct TokenSeq {
  std::vector<int> ids;

  bool empty() const { return ids.empty(); }
  std::size_t size() const { return ids.size(); }
};

class Vocabulary {
 public:
  // Reserved ids; fixed across every checkpoint.
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kExp = 2;
  static constexpr int kEos = 3;
  static constexpr int kSep = 4;

  Vocabulary();

  // Adds a token if absent, returns its id.
  int add(const std::string& token);
  std::optional<int> lookup(std::string_view token) const;
  const std::string& token(int id) const { return id_to_token_.at(id); }
  int size() const { return static_cast<int>(id_to_token_.size()); }

  TokenSeq encode_tokens(const std::vector<std::string>& tokens) const;
  TokenSeq encode(std::string_view raw_text) const;
  std::string decode(const TokenSeq& seq) const;

  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::map<std::string, int> token_to_id_;
};

// Collects corpus tokens in sorted order after the reserved ids.
Vocabulary build_vocabulary(const std::vector<std::string>& texts);

// Embedding table + projection + named scoring heads. One type serves the
// processor architectures and both baselines; each model instantiates just
// the heads it needs.
struct ScorerParams {
  int dim = 0;
  Matrix embeddings;  // [vocab x dim]
  Matrix w_proj;      // [dim x dim]
  std::map<std::string, std::vector<double>> heads;  // name -> [dim]

  bool finite() const;
};

ScorerParams init_scorer(int vocab_size, int dim,
                         const std::vector<std::string>& head_names, Rng& rng,
                         double embed_scale = 1.0);

// Gradient buffer with the same shape as ScorerParams.
struct ScorerGrad {
  Matrix embeddings;
  Matrix w_proj;
  std::map<std::string, std::vector<double>> heads;

  void zero();
};

ScorerGrad make_grad(const ScorerParams& p);

// Forward trace of F(inp) = tanh(w_proj . mean_embed(inp)); kept around for
// the backward pass.
struct EncodeTrace {
  std::vector<int> ids;  // joined, PAD dropped
  std::vector<double> pool;
  std::vector<double> enc;  // tanh(w_proj . pool)
};

// Single-sequence form (NILE-PH, baselines).
EncodeTrace f_encode(const ScorerParams& p, const TokenSeq& a);
// Pair form (full-input NILE); joined with the [SEP] marker.
EncodeTrace f_encode(const ScorerParams& p, const TokenSeq& a,
                     const TokenSeq& b);

void f_encode_backward(const ScorerParams& p, const EncodeTrace& t,
                       const std::vector<double>& denc, ScorerGrad& g);

double head_score(const ScorerParams& p, const std::string& head,
                  const EncodeTrace& t);
// Accumulates d(score)/d(params) scaled by dscore.
void head_backward(const ScorerParams& p, const std::string& head,
                   const EncodeTrace& t, double dscore, ScorerGrad& g);

// log(exp(a) + exp(b)), stable; (-inf,-inf) -> -inf.
double logsumexp(double a, double b);

struct CeResult {
  double loss = 0.0;
  std::array<double, 3> grad = {0.0, 0.0, 0.0};  // softmax - onehot
};
CeResult softmax_cross_entropy(const LabelScores& scores, Label gold);

struct CeVecResult {
  double loss = 0.0;
  std::vector<double> grad;
};
CeVecResult softmax_cross_entropy(std::span<const double> scores,
                                  std::size_t gold);

// --- SGD with optional global-norm clipping ---
struct SgdConfig {
  double learning_rate = 0.1;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

struct ParamBinding {
  double* params = nullptr;
  const double* grads = nullptr;
  std::size_t size = 0;
};

void optimizer_step(const std::vector<ParamBinding>& bindings,
                    const SgdConfig& cfg);

std::vector<ParamBinding> bind(ScorerParams& p, const ScorerGrad& g);

// --- Finite-difference gradient validation ---
struct GradCheckProblem {
  std::function<double()> loss;   // loss at current parameter values
  std::vector<double*> coords;    // flattened parameter coordinates
  std::vector<double> analytic;   // analytic gradient, same order
};

// Central differences on a random coordinate subsample (all coords when
// max_coords == 0); returns the worst relative error.
double grad_check(const GradCheckProblem& prob, double epsilon,
                  std::size_t max_coords = 0, std::uint64_t seed = 1);

std::vector<double*> coord_pointers(ScorerParams& p);
std::vector<double> flatten(const ScorerGrad& g);

// Checkpoint fragments shared by every model kind.
nlohmann::ordered_json vocab_to_json(const Vocabulary& v);
Vocabulary vocab_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json scorer_to_json(const ScorerParams& p);
ScorerParams scorer_from_json(const nlohmann::ordered_json& j);

}  // namespace nile::text
