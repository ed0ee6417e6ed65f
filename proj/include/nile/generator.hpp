#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nile/common.hpp"
#include "nile/corpus.hpp"
#include "nile/textmodel.hpp"

namespace nile::gen {

// The three label-specific candidate explanations for one instance.
struct ExplanationTriple {
  std::string entail;
  std::string contradict;
  std::string neutral;

  const std::string& get(Label l) const {
    switch (l) {
      case Label::Entail: return entail;
      case Label::Contradict: return contradict;
      default: return neutral;
    }
  }
  void set(Label l, std::string text) {
    switch (l) {
      case Label::Entail: entail = std::move(text); return;
      case Label::Contradict: contradict = std::move(text); return;
      default: neutral = std::move(text);
    }
  }
};

struct LmOptions {
  int dim = 16;
  int window = 8;
  int max_new_tokens = 32;
  int epochs = 30;
  double learning_rate = 0.1;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
  // test hook; sees every instance fed to the trainer
  std::function<void(const corpus::Instance&)> touch_hook;
};

// Fixed-context next-token model: logits = w_out . concat(window embeddings)
// + b_out. label is empty for the ETPA stage-1 generator, which trains on
// all labels.
struct GeneratorModel {
  std::optional<Label> label;
  text::Vocabulary vocab;
  int dim = 0;
  int window = 0;
  int max_new_tokens = 32;
  Matrix embeddings;          // [vocab x dim]
  Matrix w_out;               // [vocab x window*dim]
  std::vector<double> b_out;  // [vocab]
  std::vector<double> epoch_token_loss;  // mean masked-token loss per epoch
};

struct GeneratorGrad {
  Matrix embeddings;
  Matrix w_out;
  std::vector<double> b_out;

  void zero();
};

GeneratorGrad make_grad(const GeneratorModel& m);
std::vector<text::ParamBinding> bind(GeneratorModel& m,
                                     const GeneratorGrad& g);

// "premise: p hypothesis: h [EXP] t_g [EOS]"; the mask is true exactly on
// the explanation tokens and [EOS].
struct TrainingSequence {
  text::TokenSeq tokens;
  std::vector<bool> loss_mask;
};

TrainingSequence build_training_sequence(const text::Vocabulary& vocab,
                                         const std::string& premise,
                                         const std::string& hypothesis,
                                         const std::string& gold_explanation);

// Summed cross-entropy over masked positions; grad scaled by `scale` when
// non-null. Returns {loss_sum, masked_count}.
struct SequenceLoss {
  double loss_sum = 0.0;
  std::size_t masked = 0;
};
SequenceLoss sequence_loss(const GeneratorModel& m, const TrainingSequence& s,
                           double scale, GeneratorGrad* grad);

GeneratorModel init_generator(std::optional<Label> label,
                              const text::Vocabulary& vocab,
                              const LmOptions& opts);

// Trains on the instances whose gold label matches (all instances for the
// label-agnostic model). Requires gold explanations.
GeneratorModel train_generator(std::optional<Label> label,
                               const corpus::Dataset& train,
                               const text::Vocabulary& vocab,
                               const LmOptions& opts);

struct Generated {
  std::string text;
  bool empty_warning = false;
};

// Greedy completion of "premise: p hypothesis: h [EXP]"; ties go to the
// lowest token id; stops at [EOS] or max_new_tokens.
Generated generate(const GeneratorModel& m, const std::string& premise,
                   const std::string& hypothesis);

struct GeneratorSet {
  GeneratorModel entail;
  GeneratorModel contradict;
  GeneratorModel neutral;

  const GeneratorModel& get(Label l) const {
    switch (l) {
      case Label::Entail: return entail;
      case Label::Contradict: return contradict;
      default: return neutral;
    }
  }
};

ExplanationTriple generate_triple(const GeneratorSet& gens,
                                  const std::string& premise,
                                  const std::string& hypothesis);

// Rule-based oracle over the synthetic world; reproduces the gold
// explanation when label matches the instance's gold label, and fills the
// other families with well-formed text built from the instance's content
// words plus the world's facts.
std::string template_generate(const corpus::SyntheticWorld& world,
                              Label label, const corpus::Instance& inst);

ExplanationTriple oracle_triple(const corpus::SyntheticWorld& world,
                                const corpus::Instance& inst);

// Batch kernel; parallel and serial paths produce identical triples.
std::vector<ExplanationTriple> batch_generate_triples(
    const GeneratorSet& gens, const corpus::Dataset& data, ExecMode mode);

std::vector<ExplanationTriple> batch_oracle_triples(
    const corpus::SyntheticWorld& world, const corpus::Dataset& data,
    ExecMode mode);

// Checkpoint io (textmodel format with a label tag).
nlohmann::ordered_json generator_to_json(const GeneratorModel& m);
GeneratorModel generator_from_json(const nlohmann::ordered_json& j);
void save_generator(const GeneratorModel& m, const std::string& path,
                    const std::string& config_hash = "");
GeneratorModel load_generator(const std::string& path);

// Triple dump records: id, t_entail, t_contradict, t_neutral.
void save_triples(const std::vector<std::string>& ids,
                  const std::vector<ExplanationTriple>& triples,
                  const std::string& path);
std::vector<ExplanationTriple> load_triples_for(const corpus::Dataset& data,
                                                const std::string& path);

}  // namespace nile::gen
