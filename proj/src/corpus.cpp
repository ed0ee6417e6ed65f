#include "nile/corpus.hpp"

#include <algorithm>
#include <istream>
#include <set>
#include <sstream>

#include "nile/io.hpp"
#include "nile/textmodel.hpp"

namespace nile::corpus {

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
    case Split::OodDev: return "ood";
  }
  return "?";
}

void Dataset::validate() const {
  std::set<std::string> ids;
  for (const auto& inst : instances) {
    if (!ids.insert(inst.id).second)
      throw DataError("duplicate instance id: " + inst.id);
    if (text::split_tokens(inst.premise).empty())
      throw DataError("empty premise in instance " + inst.id);
    if (text::split_tokens(inst.hypothesis).empty())
      throw DataError("empty hypothesis in instance " + inst.id);
  }
}

// --- Synthetic world ---

namespace {

const std::vector<std::string>& base_verbs() {
  static const std::vector<std::string> v = {
      "runs", "sleeps", "jumps", "swims",  "sings", "dances", "climbs",
      "digs", "flies",  "hides", "barks",  "hops",  "spins",  "rests",
      "marches", "crawls"};
  return v;
}

const std::vector<std::string>& base_modifiers() {
  static const std::vector<std::string> m = {"quickly", "slowly", "outside",
                                             "inside",  "today",  "quietly",
                                             "loudly",  "daily"};
  return m;
}

// Words the templates and instance patterns already use; generated names
// must not collide with them.
const std::set<std::string>& reserved_words() {
  static const std::set<std::string> r = {
      "a",    "is",   "cannot", "and",  "at",    "the",  "same",
      "time", "does", "not",    "imply", "mean", "every", "each",
      "one",  "nothing", "can", "just"};
  return r;
}

std::string make_name(Rng& rng, int syllables) {
  static const char* cons = "bdfgklmnprstvz";
  static const char* vow = "aeiou";
  std::string name;
  for (int s = 0; s < syllables; ++s) {
    name.push_back(cons[rng.below(14)]);
    name.push_back(vow[rng.below(5)]);
  }
  return name;
}

std::vector<std::string> make_names(Rng& rng, int count, int syllables,
                                    std::set<std::string>& taken) {
  std::vector<std::string> out;
  out.reserve(count);
  while (static_cast<int>(out.size()) < count) {
    std::string n = make_name(rng, syllables);
    if (reserved_words().count(n) || taken.count(n)) continue;
    taken.insert(n);
    out.push_back(n);
  }
  return out;
}

void check_config(const WorldConfig& cfg) {
  if (cfg.templates_per_label <= 0)
    throw ConfigError("templates_per_label must be >= 1");
  if (cfg.instances_per_label < 1)
    throw ConfigError("instances_per_label must be >= 1");
  if (cfg.num_entities < 1 || cfg.num_categories < 1)
    throw ConfigError("world needs at least one entity and category");
  if (cfg.ood_vocabulary_shift < 0.0 || cfg.ood_vocabulary_shift > 1.0)
    throw ConfigError("ood_vocabulary_shift must be in [0,1]");
}

}  // namespace

SyntheticWorld build_world(const WorldConfig& cfg) {
  check_config(cfg);
  Rng rng(derive_seed(cfg.seed, "world-names"));
  std::set<std::string> taken;
  for (const auto& v : base_verbs()) taken.insert(v);
  for (const auto& m : base_modifiers()) taken.insert(m);

  SyntheticWorld w;
  w.entities = make_names(rng, cfg.num_entities, 2, taken);
  w.categories = make_names(rng, cfg.num_categories, 3, taken);
  w.verbs = base_verbs();
  w.modifiers = base_modifiers();
  w.entity_category.resize(w.entities.size());
  for (std::size_t i = 0; i < w.entities.size(); ++i)
    w.entity_category[i] = static_cast<int>(i % w.categories.size());
  w.templates_per_label = std::min(cfg.templates_per_label, kTemplateVariants);
  return w;
}

SyntheticWorld shift_world(const SyntheticWorld& w, double shift,
                           std::uint64_t seed) {
  SyntheticWorld out = w;
  if (shift <= 0.0) return out;
  Rng rng(seed);
  std::set<std::string> taken;
  auto all = {&out.entities, &out.categories, &out.verbs, &out.modifiers};
  for (auto* list : all)
    for (const auto& n : *list) taken.insert(n);

  auto shift_list = [&](std::vector<std::string>& list, int syllables) {
    auto n_shift = static_cast<std::size_t>(
        std::ceil(shift * static_cast<double>(list.size())));
    auto aliases = make_names(rng, static_cast<int>(n_shift), syllables, taken);
    for (std::size_t i = 0; i < n_shift && i < list.size(); ++i)
      list[i] = aliases[i];
  };
  shift_list(out.entities, 2);
  shift_list(out.categories, 3);
  shift_list(out.verbs, 2);
  shift_list(out.modifiers, 3);
  return out;
}

std::string fill_template(Label family, int variant, const std::string& x,
                          const std::string& y) {
  int v = variant % kTemplateVariants;
  switch (family) {
    case Label::Entail:
      if (v == 1) return "every " + x + " is a " + y;
      if (v == 2) return "each " + x + " is a " + y;
      return "a " + x + " is a " + y;
    case Label::Contradict:
      if (v == 1) return "one cannot " + x + " and " + y + " at the same time";
      if (v == 2)
        return "nothing can " + x + " and " + y + " at the same time";
      return "cannot " + x + " and " + y + " at the same time";
    case Label::Neutral:
      if (v == 1) return x + " does not mean " + y;
      if (v == 2) return "just " + x + " does not imply " + y;
      return x + " does not imply " + y;
  }
  throw ConfigError("unknown template family");
}

int parse_variant_from_id(const std::string& id) {
  auto pos = id.rfind("-v");
  if (pos == std::string::npos || pos + 2 >= id.size())
    throw DataError("not a synthetic instance id: " + id);
  int v = 0;
  for (std::size_t i = pos + 2; i < id.size(); ++i) {
    char c = id[i];
    if (c < '0' || c > '9')
      throw DataError("not a synthetic instance id: " + id);
    v = v * 10 + (c - '0');
  }
  return v;
}

std::optional<Label> classify_template_family(std::string_view text) {
  std::string t = to_lower_ascii(text);
  if (contains_substring(t, "at the same time")) return Label::Contradict;
  if (contains_substring(t, "does not imply") ||
      contains_substring(t, "does not mean"))
    return Label::Neutral;
  if (contains_substring(t, " is a ")) return Label::Entail;
  return std::nullopt;
}

namespace {

char label_tag(Label l) {
  switch (l) {
    case Label::Entail: return 'e';
    case Label::Contradict: return 'c';
    default: return 'n';
  }
}

Instance make_instance(const SyntheticWorld& w, Split split, Label label,
                       int index, Rng& rng) {
  std::size_t e_idx = rng.below(w.entities.size());
  std::size_t v_idx = rng.below(w.verbs.size());
  const auto& e = w.entities[e_idx];
  const auto& v = w.verbs[v_idx];
  int variant = index % w.templates_per_label;

  Instance inst;
  inst.premise = "a " + e + " " + v;
  inst.label = label;
  std::string x, y;
  switch (label) {
    case Label::Entail: {
      const auto& c = w.categories[w.entity_category[e_idx]];
      inst.hypothesis = "a " + c + " " + v;
      x = e;
      y = c;
      break;
    }
    case Label::Contradict: {
      // second verb always distinct; verbs are mutually exclusive acts
      std::size_t v2_idx =
          (v_idx + 1 + rng.below(w.verbs.size() - 1)) % w.verbs.size();
      const auto& v2 = w.verbs[v2_idx];
      inst.hypothesis = "a " + e + " " + v2;
      x = v;
      y = v2;
      break;
    }
    case Label::Neutral: {
      const auto& m = w.modifiers[rng.below(w.modifiers.size())];
      inst.hypothesis = "a " + e + " " + v + " " + m;
      x = v;
      y = v + " " + m;
      break;
    }
  }
  inst.gold_explanation = fill_template(label, variant, x, y);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s-%c-%04d-v%d", to_string(split),
                label_tag(label), index, variant);
  inst.id = buf;
  return inst;
}

Dataset make_split(const SyntheticWorld& w, Split split, int per_label,
                   std::uint64_t seed) {
  Dataset d;
  d.split = split;
  for (Label label : all_labels()) {
    Rng rng(derive_seed(seed, std::string("corpus:") + to_string(split) +
                                  ":" + to_string(label)));
    for (int i = 0; i < per_label; ++i)
      d.instances.push_back(make_instance(w, split, label, i, rng));
  }
  d.validate();
  return d;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const WorldConfig& cfg) {
  check_config(cfg);
  SyntheticCorpus c;
  c.world = build_world(cfg);
  c.ood_world = shift_world(c.world, cfg.ood_vocabulary_shift,
                            derive_seed(cfg.seed, "ood-alias"));
  int ipl = cfg.instances_per_label;
  c.train = make_split(c.world, Split::Train, ipl, cfg.seed);
  c.dev = make_split(c.world, Split::Dev, std::max(1, ipl / 5), cfg.seed);
  c.test = make_split(c.world, Split::Test, std::max(1, ipl / 2), cfg.seed);
  c.ood = make_split(c.ood_world, Split::OodDev, std::max(1, ipl / 2),
                     cfg.seed);
  return c;
}

// --- e-SNLI-format reader ---

namespace {

// One delimited record; quoted fields may contain the delimiter, doubled
// quotes and raw newlines. Returns false at end of input.
bool read_record(std::istream& in, char delim, std::size_t& line_no,
                 std::vector<std::string>& fields) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;

  std::string field;
  bool in_quotes = false;
  bool saw_any = false;
  std::size_t record_line = line_no;

  auto end_field = [&] {
    fields.push_back(field);
    field.clear();
  };

  while (true) {
    if (c == EOF) {
      if (in_quotes)
        throw DataError("line " + std::to_string(record_line) +
                        ": unterminated quoted field");
      end_field();
      return true;
    }
    char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        int peek = in.peek();
        if (peek == '"') {
          in.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_no;
        field.push_back(ch);
      }
    } else {
      if (ch == '"' && field.empty() && !saw_any) {
        in_quotes = true;
        saw_any = true;
      } else if (ch == delim) {
        end_field();
        saw_any = false;
      } else if (ch == '\n') {
        ++line_no;
        end_field();
        return true;
      } else if (ch == '\r') {
        if (in.peek() == '\n') {
          in.get();
          ++line_no;
        }
        end_field();
        return true;
      } else {
        field.push_back(ch);
        saw_any = true;
      }
    }
    c = in.get();
  }
}

std::size_t require_column(const std::vector<std::string>& header,
                           const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError("missing required column: " + name);
}

}  // namespace

LoadResult load_esnli_stream(std::istream& in, Split split, char delim) {
  std::size_t line_no = 1;
  std::vector<std::string> header;
  if (!read_record(in, delim, line_no, header))
    throw DataError("empty input: no header row");

  std::size_t col_label = require_column(header, "gold_label");
  std::size_t col_s1 = require_column(header, "Sentence1");
  std::size_t col_s2 = require_column(header, "Sentence2");
  std::size_t col_expl = require_column(header, "Explanation_1");
  std::optional<std::size_t> col_id;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == "pairID") col_id = i;

  LoadResult result;
  result.dataset.split = split;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (true) {
    std::size_t record_line = line_no;
    if (!read_record(in, delim, line_no, fields)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    ++row;
    if (fields.size() != header.size())
      throw DataError("line " + std::to_string(record_line) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    Label label;
    if (!parse_label(fields[col_label], label)) {
      ++result.skipped_unlabeled;
      continue;
    }
    Instance inst;
    inst.id = col_id ? fields[*col_id] : "row" + std::to_string(row);
    inst.premise = fields[col_s1];
    inst.hypothesis = fields[col_s2];
    inst.label = label;
    if (!fields[col_expl].empty()) inst.gold_explanation = fields[col_expl];
    result.dataset.instances.push_back(std::move(inst));
  }
  result.dataset.validate();
  return result;
}

LoadResult load_esnli(const std::string& path, Split split, char delim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  return load_esnli_stream(in, split, delim);
}

FilterResult filter_noninformative(const Dataset& d) {
  FilterResult r;
  r.kept.split = d.split;
  for (const auto& inst : d.instances) {
    if (!inst.gold_explanation)
      throw DataError("instance " + inst.id +
                      " has no gold explanation; filter is defined on explanations");
    std::string expl = to_lower_ascii(*inst.gold_explanation);
    bool drop = contains_substring(expl, to_lower_ascii(inst.premise)) ||
                contains_substring(expl, to_lower_ascii(inst.hypothesis));
    if (drop)
      ++r.dropped;
    else
      r.kept.instances.push_back(inst);
  }
  return r;
}

void save_jsonl(const Dataset& d, const std::string& path) {
  std::string out;
  for (const auto& inst : d.instances) {
    io::json rec;
    rec["id"] = inst.id;
    rec["premise"] = inst.premise;
    rec["hypothesis"] = inst.hypothesis;
    rec["label"] = to_string(inst.label);
    if (inst.gold_explanation)
      rec["explanation"] = *inst.gold_explanation;
    else
      rec["explanation"] = nullptr;
    out += rec.dump();
    out += '\n';
  }
  io::write_file(path, out);
}

Dataset load_jsonl(const std::string& path, Split split) {
  Dataset d;
  d.split = split;
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    io::json rec;
    try {
      rec = io::json::parse(line);
    } catch (const std::exception& e) {
      throw DataError(path + " line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    Instance inst;
    inst.id = rec.at("id").get<std::string>();
    inst.premise = rec.at("premise").get<std::string>();
    inst.hypothesis = rec.at("hypothesis").get<std::string>();
    if (!parse_label(rec.at("label").get<std::string>(), inst.label))
      throw DataError(path + " line " + std::to_string(line_no) +
                      ": bad label");
    if (rec.contains("explanation") && !rec.at("explanation").is_null())
      inst.gold_explanation = rec.at("explanation").get<std::string>();
    d.instances.push_back(std::move(inst));
  }
  d.validate();
  return d;
}

}  // namespace nile::corpus
