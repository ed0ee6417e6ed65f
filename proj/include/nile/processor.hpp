#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nile/common.hpp"
#include "nile/corpus.hpp"
#include "nile/generator.hpp"
#include "nile/textmodel.hpp"

namespace nile::proc {

enum class Architecture { Independent, Aggregate, Append };
// PH scores explanations alone; NS adds the instance text; NILE adds the
// instance text and the negative-sampling objective.
enum class Variant { PH, NS, NILE };

const char* to_string(Architecture a);
const char* to_string(Variant v);
Architecture parse_architecture(std::string_view s);
Variant parse_variant(std::string_view s);

struct ProcessorConfig {
  Architecture architecture = Architecture::Independent;
  Variant variant = Variant::NS;
  int negatives_per_instance = 0;  // only meaningful under NILE
  int dim = 32;
  std::uint64_t seed = 1;

  // NILE excludes Append and needs k >= 1; NS/PH take no negatives.
  void validate() const;
};

ProcessorConfig make_config(Architecture arch, Variant variant,
                            std::uint64_t seed = 1);

struct ProcessorModel {
  ProcessorConfig config;
  text::Vocabulary vocab;
  text::ScorerParams params;
};

// "premise: p hypothesis: h"; markers survive even when a side is erased.
std::string build_concat_ph(const std::string& premise,
                            const std::string& hypothesis);
// "entailment: t_e contradiction: t_c neutral: t_n", fixed order.
std::string build_concat_ecn(const gen::ExplanationTriple& t);

struct ScoreOptions {
  bool probe_mode = false;  // permits empty explanation slots / erased ctx
};

LabelScores score_independent(const ProcessorModel& m,
                              const std::optional<std::string>& ctx,
                              const gen::ExplanationTriple& triple,
                              const ScoreOptions& opts = {});
LabelScores score_aggregate(const ProcessorModel& m,
                            const std::optional<std::string>& ctx,
                            const gen::ExplanationTriple& triple,
                            const ScoreOptions& opts = {});
LabelScores score_append(const ProcessorModel& m,
                         const std::optional<std::string>& ctx,
                         const gen::ExplanationTriple& triple,
                         const ScoreOptions& opts = {});
// Dispatch on m.config.architecture.
LabelScores score(const ProcessorModel& m,
                  const std::optional<std::string>& ctx,
                  const gen::ExplanationTriple& triple,
                  const ScoreOptions& opts = {});

// k gold explanations of other same-label training instances, uniform
// without replacement; never the instance's own.
std::vector<std::string> sample_negative_explanations(
    const corpus::Dataset& train, const corpus::Instance& inst, Label label,
    int k, std::uint64_t seed);

// Main cross-entropy plus, when `negatives` is non-empty, the (k+1)-way
// cross-entropy over the gold-label score with the gold slot swapped for
// each negative. Accumulates into grad when non-null.
struct LossBreakdown {
  double main_loss = 0.0;
  double aux_loss = 0.0;
  double total = 0.0;
  LabelScores scores;
};

LossBreakdown processor_loss(const ProcessorModel& m,
                             const std::optional<std::string>& ctx,
                             const gen::ExplanationTriple& triple, Label gold,
                             const std::vector<std::string>& negatives,
                             double aux_weight, text::ScorerGrad* grad);

struct TrainOptions {
  int epochs = 60;
  double learning_rate = 0.1;
  double clip_norm = 1.0;
  double embed_init_scale = 1.0;
  double aux_weight = 1.0;
};

struct TrainTrace {
  double initial_loss = 0.0;          // mean loss before any update
  std::vector<double> epoch_loss;     // full-set mean loss after each epoch
};

// triples[i] belongs to train.instances[i]. Deterministic given
// config.seed.
ProcessorModel train_processor(const ProcessorConfig& config,
                               const corpus::Dataset& train,
                               const std::vector<gen::ExplanationTriple>& triples,
                               const text::Vocabulary& vocab,
                               const TrainOptions& opts = {},
                               TrainTrace* trace = nullptr);

ProcessorModel init_processor(const ProcessorConfig& config,
                              const text::Vocabulary& vocab,
                              double embed_init_scale = 1.0);

struct Prediction {
  Label label = Label::Entail;
  LabelScores scores;
};

// Argmax with exact ties broken entail -> contradict -> neutral.
Label argmax_label(const LabelScores& s);

Prediction predict(const ProcessorModel& m, const corpus::Instance& inst,
                   const gen::ExplanationTriple& triple,
                   const ScoreOptions& opts = {});

// Batch kernel; serial and parallel paths agree bit-for-bit.
std::vector<Prediction> batch_predict(const ProcessorModel& m,
                                      const corpus::Dataset& data,
                                      const std::vector<gen::ExplanationTriple>& triples,
                                      ExecMode mode,
                                      const ScoreOptions& opts = {});

void save_processor(const ProcessorModel& m, const std::string& path,
                    const std::string& config_hash = "");
ProcessorModel load_processor(const std::string& path);

}  // namespace nile::proc
