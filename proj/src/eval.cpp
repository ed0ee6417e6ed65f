#include "nile/eval.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "nile/io.hpp"

namespace nile::eval {

double label_accuracy(const std::vector<LabeledPrediction>& predictions,
                      const corpus::Dataset& data) {
  if (data.instances.empty()) throw DataError("empty dataset");
  std::map<std::string, Label> by_id;
  for (const auto& p : predictions) by_id.emplace(p.id, p.label);
  std::size_t correct = 0;
  for (const auto& inst : data.instances) {
    auto it = by_id.find(inst.id);
    if (it == by_id.end())
      throw DataError("missing prediction for instance " + inst.id);
    if (it->second == inst.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ExplanationMetrics explanation_metrics(
    const std::vector<LabeledPrediction>& predictions,
    const corpus::Dataset& data,
    const std::vector<AnnotationRecord>& annotations, std::size_t n_eval) {
  if (n_eval > predictions.size())
    throw DataError("n_eval exceeds available predictions");
  std::map<std::string, Label> gold;
  for (const auto& inst : data.instances) gold.emplace(inst.id, inst.label);

  // (instance, annotator) -> correct; pairs must be unique
  std::map<std::pair<std::string, std::string>, bool> marks;
  std::set<std::string> annotators;
  for (const auto& rec : annotations) {
    annotators.insert(rec.annotator_id);
    if (!marks.emplace(std::make_pair(rec.instance_id, rec.annotator_id),
                       rec.correct)
             .second)
      throw DataError("duplicate annotation for instance " + rec.instance_id +
                      ", annotator " + rec.annotator_id);
  }
  if (annotators.empty()) throw DataError("no annotators");

  ExplanationMetrics m;
  m.n_eval = n_eval;
  std::vector<const LabeledPrediction*> correct_subset;
  for (std::size_t i = 0; i < n_eval; ++i) {
    const auto& p = predictions[i];
    auto it = gold.find(p.id);
    if (it == gold.end())
      throw DataError("prediction for unknown instance " + p.id);
    if (p.label == it->second) correct_subset.push_back(&p);
  }
  m.a = correct_subset.size();

  double count_sum = 0.0;
  std::map<std::string, std::size_t> per_annotator;
  for (const auto& ann : annotators) per_annotator[ann] = 0;
  std::size_t all_agree = 0;
  for (const auto* p : correct_subset) {
    bool everyone = true;
    for (const auto& ann : annotators) {
      auto it = marks.find(std::make_pair(p->id, ann));
      if (it == marks.end())
        throw DataError("missing annotation for instance " + p->id +
                        ", annotator " + ann);
      if (it->second)
        ++per_annotator[ann];
      else
        everyone = false;
    }
    if (everyone) ++all_agree;
  }
  for (const auto& [ann, count] : per_annotator)
    count_sum += static_cast<double>(count);
  m.b = count_sum / static_cast<double>(annotators.size());
  m.c = all_agree;
  if (m.a > 0) {
    m.b_over_a_pct = 100.0 * m.b / static_cast<double>(m.a);
    m.c_over_a_pct = 100.0 * static_cast<double>(m.c) /
                     static_cast<double>(m.a);
  }
  return m;
}

std::string format_metrics_table(const ExplanationMetrics& m) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%8s %4s %8s %8s %4s %8s\n", "n_eval", "A",
                "B", "B/A", "C", "C/A");
  out += buf;
  out += std::string(46, '-') + "\n";
  std::string ba = m.b_over_a_pct
                       ? (std::snprintf(buf, sizeof(buf), "%.2f%%",
                                        *m.b_over_a_pct),
                          std::string(buf))
                       : std::string("-");
  std::string ca = m.c_over_a_pct
                       ? (std::snprintf(buf, sizeof(buf), "%.2f%%",
                                        *m.c_over_a_pct),
                          std::string(buf))
                       : std::string("-");
  std::snprintf(buf, sizeof(buf), "%8zu %4zu %8.1f %8s %4zu %8s\n", m.n_eval,
                m.a, m.b, ba.c_str(), m.c, ca.c_str());
  out += buf;
  return out;
}

std::vector<AnnotationRecord> load_annotations(const std::string& path) {
  std::vector<AnnotationRecord> out;
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    AnnotationRecord rec;
    std::string flag;
    if (!std::getline(ls, rec.instance_id, '\t') ||
        !std::getline(ls, rec.annotator_id, '\t') || !std::getline(ls, flag))
      throw DataError(path + " line " + std::to_string(line_no) +
                      ": expected instance_id<TAB>annotator_id<TAB>0|1");
    if (flag == "1")
      rec.correct = true;
    else if (flag == "0")
      rec.correct = false;
    else
      throw DataError(path + " line " + std::to_string(line_no) +
                      ": correctness must be 0 or 1");
    out.push_back(std::move(rec));
  }
  return out;
}

void save_annotations(const std::vector<AnnotationRecord>& records,
                      const std::string& path) {
  std::string out;
  for (const auto& r : records) {
    out += r.instance_id;
    out += '\t';
    out += r.annotator_id;
    out += '\t';
    out += r.correct ? '1' : '0';
    out += '\n';
  }
  io::write_file(path, out);
}

void save_predictions(const std::vector<LabeledPrediction>& predictions,
                      const std::string& path) {
  std::string out;
  for (const auto& p : predictions) {
    io::json rec;
    rec["id"] = p.id;
    rec["label"] = to_string(p.label);
    rec["l_entail"] = p.scores.entail;
    rec["l_contradict"] = p.scores.contradict;
    rec["l_neutral"] = p.scores.neutral;
    rec["explanation"] = p.explanation;
    out += rec.dump();
    out += '\n';
  }
  io::write_file(path, out);
}

std::vector<LabeledPrediction> load_predictions(const std::string& path) {
  std::vector<LabeledPrediction> out;
  std::istringstream in(io::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    io::json rec = io::json::parse(line);
    LabeledPrediction p;
    p.id = rec.at("id").get<std::string>();
    if (!parse_label(rec.at("label").get<std::string>(), p.label))
      throw DataError(path + ": bad label in prediction dump");
    p.scores.entail = rec.at("l_entail").get<double>();
    p.scores.contradict = rec.at("l_contradict").get<double>();
    p.scores.neutral = rec.at("l_neutral").get<double>();
    p.explanation = rec.at("explanation").get<std::string>();
    out.push_back(std::move(p));
  }
  return out;
}

TransferResult transfer_eval(const proc::ProcessorModel& model,
                             const gen::GeneratorSet& generators,
                             const corpus::Dataset& ood, ExecMode mode) {
  auto triples = gen::batch_generate_triples(generators, ood, mode);
  proc::ScoreOptions opts;
  opts.probe_mode = true;  // generated triples may carry degenerate slots
  auto preds = proc::batch_predict(model, ood, triples, mode, opts);
  TransferResult r;
  r.predictions.resize(ood.size());
  for (std::size_t i = 0; i < ood.size(); ++i) {
    r.predictions[i].id = ood.instances[i].id;
    r.predictions[i].label = preds[i].label;
    r.predictions[i].scores = preds[i].scores;
    r.predictions[i].explanation = triples[i].get(preds[i].label);
  }
  r.accuracy = label_accuracy(r.predictions, ood);
  return r;
}

}  // namespace nile::eval
