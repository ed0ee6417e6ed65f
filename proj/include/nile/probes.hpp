#pragma once

#include <array>
#include <string>
#include <vector>

#include "nile/common.hpp"
#include "nile/corpus.hpp"
#include "nile/generator.hpp"
#include "nile/processor.hpp"

namespace nile::probes {

enum class Condition { Full, InstanceOnly, ExplanationOnly, Shuffled };

const char* to_string(Condition c);
Condition parse_condition(std::string_view s);

struct ProbeReport {
  std::string model;
  Condition condition = Condition::Full;
  double accuracy = 0.0;
  std::array<double, 3> per_label_accuracy = {0.0, 0.0, 0.0};
  std::size_t n = 0;
  std::uint64_t seed = 0;

  bool operator==(const ProbeReport&) const = default;
};

std::string model_descriptor(const proc::ProcessorModel& m);

// InstanceOnly erases every explanation; ExplanationOnly erases the
// instance text (field markers stay). Erasure needs a full-input NS/NILE
// model; Full is the unmodified control.
ProbeReport erasure_probe(const proc::ProcessorModel& m,
                          const corpus::Dataset& data,
                          const std::vector<gen::ExplanationTriple>& triples,
                          Condition condition,
                          ExecMode mode = ExecMode::Serial);

// Replaces each instance's triple with the triple of a uniformly sampled
// different instance of the same gold label (form kept, content broken).
// per_slot draws an independent donor for each slot instead.
ProbeReport shuffle_probe(const proc::ProcessorModel& m,
                          const corpus::Dataset& data,
                          const std::vector<gen::ExplanationTriple>& triples,
                          std::uint64_t seed, bool per_slot = false,
                          ExecMode mode = ExecMode::Serial);

// The shuffled triples themselves, for form/content inspection.
std::vector<gen::ExplanationTriple> shuffled_triples(
    const corpus::Dataset& data,
    const std::vector<gen::ExplanationTriple>& triples, std::uint64_t seed,
    bool per_slot = false);

// One record per line, stable field order, plus a readable table at
// <path>.txt with accuracies at 4 decimal places.
void write_report(const std::vector<ProbeReport>& reports,
                  const std::string& path);
std::vector<ProbeReport> read_reports(const std::string& path);
std::string format_report_table(const std::vector<ProbeReport>& reports);

}  // namespace nile::probes
