#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nile/common.hpp"
#include "nile/corpus.hpp"
#include "nile/generator.hpp"
#include "nile/processor.hpp"
#include "nile/textmodel.hpp"

namespace nile::base {

struct ClfOptions {
  int epochs = 60;
  double learning_rate = 0.1;
  double clip_norm = 1.0;
  double embed_init_scale = 1.0;
  std::uint64_t seed = 1;
  // test hook; sees every classifier input text
  std::function<void(const std::string&)> feed_hook;
};

// Single-item loss of the three-head classifier; accumulates gradients
// when grad is non-null.
double classifier_loss(const text::ScorerParams& params,
                       const text::Vocabulary& vocab,
                       const std::string& head_prefix,
                       const std::string& input, Label gold,
                       text::ScorerGrad* grad);

// Shared trainer: three label heads over F(one sequence).
text::ScorerParams train_text_classifier(
    const std::vector<std::pair<std::string, Label>>& items,
    const text::Vocabulary& vocab, const std::string& head_prefix, int dim,
    const ClfOptions& opts, proc::TrainTrace* trace = nullptr);

// Full-access baseline: l_x = W_x . F_pre(concat_ph); never reads
// explanations for prediction.
struct PosthocModel {
  text::Vocabulary vocab;
  text::ScorerParams params;
};

PosthocModel train_posthoc(const corpus::Dataset& train,
                           const text::Vocabulary& vocab, int dim,
                           const ClfOptions& opts,
                           proc::TrainTrace* trace = nullptr);

LabelScores posthoc_scores(const PosthocModel& m, const corpus::Instance& inst);

struct PipelineResult {
  Label label = Label::Entail;
  LabelScores scores;
  std::string explanation;
  bool empty_warning = false;
};

// Label from (p,h) alone; the explanation is the triple's slot for that
// label.
PipelineResult posthoc_pipeline(const PosthocModel& m,
                                const corpus::Instance& inst,
                                const gen::ExplanationTriple& triple);

// ExplainThenPredict: one generator over all labels, then a classifier
// that sees the generated explanation only.
struct EtpaModel {
  gen::GeneratorModel generator;
  text::Vocabulary vocab;
  text::ScorerParams clf;
};

struct EtpaOptions {
  gen::LmOptions generator;
  ClfOptions classifier;
  int clf_dim = 32;
  bool train_on_generated = false;  // default: teacher-forced gold text
};

EtpaModel train_etpa(const corpus::Dataset& train,
                     const text::Vocabulary& vocab, const EtpaOptions& opts,
                     proc::TrainTrace* clf_trace = nullptr);

// Scores from the explanation text alone; empty text scores to the zero
// encoding.
LabelScores etpa_classify(const EtpaModel& m, const std::string& explanation);

PipelineResult etpa_pipeline(const EtpaModel& m, const std::string& premise,
                             const std::string& hypothesis);

// Batch kernels.
std::vector<PipelineResult> batch_posthoc(const PosthocModel& m,
                                          const corpus::Dataset& data,
                                          const std::vector<gen::ExplanationTriple>& triples,
                                          ExecMode mode);
std::vector<PipelineResult> batch_etpa(const EtpaModel& m,
                                       const corpus::Dataset& data,
                                       ExecMode mode);

void save_posthoc(const PosthocModel& m, const std::string& path,
                  const std::string& config_hash = "");
PosthocModel load_posthoc(const std::string& path);
void save_etpa(const EtpaModel& m, const std::string& path,
               const std::string& config_hash = "");
EtpaModel load_etpa(const std::string& path);

}  // namespace nile::base
