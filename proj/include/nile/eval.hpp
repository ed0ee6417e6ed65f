#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nile/common.hpp"
#include "nile/corpus.hpp"
#include "nile/generator.hpp"
#include "nile/processor.hpp"

namespace nile::eval {

struct LabeledPrediction {
  std::string id;
  Label label = Label::Entail;
  LabelScores scores;
  std::string explanation;
};

// Exact fraction correct; every instance must be covered.
double label_accuracy(const std::vector<LabeledPrediction>& predictions,
                      const corpus::Dataset& data);

struct AnnotationRecord {
  std::string instance_id;
  std::string annotator_id;
  bool correct = false;
};

// A: correct labels among the first n_eval; B: per-annotator counts of
// correct explanations over that subset, averaged; C: count where all
// annotators agree. Ratios use A as denominator and are undefined at A=0.
struct ExplanationMetrics {
  std::size_t n_eval = 0;
  std::size_t a = 0;
  double b = 0.0;
  std::size_t c = 0;
  std::optional<double> b_over_a_pct;
  std::optional<double> c_over_a_pct;
};

ExplanationMetrics explanation_metrics(
    const std::vector<LabeledPrediction>& predictions,
    const corpus::Dataset& data,
    const std::vector<AnnotationRecord>& annotations, std::size_t n_eval);

std::string format_metrics_table(const ExplanationMetrics& m);

// Annotation files: one record per line, instance_id<TAB>annotator_id<TAB>0|1.
std::vector<AnnotationRecord> load_annotations(const std::string& path);
void save_annotations(const std::vector<AnnotationRecord>& records,
                      const std::string& path);

// Prediction dump: id, label, three scores, chosen explanation.
void save_predictions(const std::vector<LabeledPrediction>& predictions,
                      const std::string& path);
std::vector<LabeledPrediction> load_predictions(const std::string& path);

struct TransferResult {
  double accuracy = 0.0;
  std::vector<LabeledPrediction> predictions;
};

// Full pipeline on the out-of-domain split with zero parameter updates.
TransferResult transfer_eval(const proc::ProcessorModel& model,
                             const gen::GeneratorSet& generators,
                             const corpus::Dataset& ood,
                             ExecMode mode = ExecMode::Serial);

}  // namespace nile::eval
