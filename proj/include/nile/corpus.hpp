#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nile/common.hpp"

namespace nile::corpus {

enum class Split : int { Train = 0, Dev = 1, Test = 2, OodDev = 3 };

const char* to_string(Split s);

// One NLI example.
struct Instance {
  std::string id;
  std::string premise;
  std::string hypothesis;
  Label label = Label::Entail;
  std::optional<std::string> gold_explanation;
};

struct Dataset {
  std::vector<Instance> instances;
  Split split = Split::Train;

  std::size_t size() const { return instances.size(); }
  // Throws DataError on duplicate ids or empty premise/hypothesis.
  void validate() const;
};

struct WorldConfig {
  int num_entities = 12;
  int num_categories = 4;
  int templates_per_label = 1;
  int instances_per_label = 100;  // train split, per label
  double ood_vocabulary_shift = 0.0;
  std::uint64_t seed = 7;
};

// Entity/category world behind the synthetic corpus. Entities and category
// names are generated from the seed; verbs and modifiers come from fixed
// lists. cat(entity) is single-valued and categories are mutually exclusive.
struct SyntheticWorld {
  std::vector<std::string> entities;
  std::vector<std::string> categories;
  std::vector<std::string> verbs;
  std::vector<std::string> modifiers;
  std::vector<int> entity_category;  // entity index -> category index
  int templates_per_label = 1;
};

SyntheticWorld build_world(const WorldConfig& cfg);
// Same logic with the first ceil(shift * n) names of each word class
// replaced by fresh out-of-domain aliases.
SyntheticWorld shift_world(const SyntheticWorld& w, double shift,
                           std::uint64_t seed);

struct SyntheticCorpus {
  SyntheticWorld world;
  SyntheticWorld ood_world;
  Dataset train;
  Dataset dev;
  Dataset test;
  Dataset ood;
};

// Deterministic given cfg.seed. Train gets instances_per_label per label;
// dev gets max(1, ipl/5), test and ood max(1, ipl/2).
SyntheticCorpus generate_synthetic_corpus(const WorldConfig& cfg);

// e-SNLI-format delimited text (quoted fields, embedded separators and
// newlines). Required columns: gold_label, Sentence1, Sentence2,
// Explanation_1; a pairID column is used for ids when present.
struct LoadResult {
  Dataset dataset;
  std::size_t skipped_unlabeled = 0;  // rows with gold_label outside the 3 classes
};

LoadResult load_esnli(const std::string& path, Split split, char delim = ',');
LoadResult load_esnli_stream(std::istream& in, Split split, char delim = ',');

// Drops instances whose uncased premise or hypothesis appears entirely in
// the uncased explanation.
struct FilterResult {
  Dataset kept;
  std::size_t dropped = 0;
};

FilterResult filter_noninformative(const Dataset& d);

// Line-delimited corpus records; field order: id, premise, hypothesis,
// label, explanation.
void save_jsonl(const Dataset& d, const std::string& path);
Dataset load_jsonl(const std::string& path, Split split);

// --- Explanation template families of the synthetic world ---
// Entailment texts relate the premise subject to the hypothesis subject;
// contradiction and neutral texts relate the two verb phrases.
inline constexpr int kTemplateVariants = 3;

std::string fill_template(Label family, int variant, const std::string& x,
                          const std::string& y);

// Synthetic ids end in "-v<variant>"; error for anything else.
int parse_variant_from_id(const std::string& id);

// Form-family classifier over explanation text; nullopt when the text
// matches no family signature.
std::optional<Label> classify_template_family(std::string_view text);

}  // namespace nile::corpus
