#include "nile/probes.hpp"

#include <sstream>

#include "nile/io.hpp"

namespace nile::probes {

using gen::ExplanationTriple;

const char* to_string(Condition c) {
  switch (c) {
    case Condition::Full: return "full";
    case Condition::InstanceOnly: return "instance_only";
    case Condition::ExplanationOnly: return "explanation_only";
    case Condition::Shuffled: return "shuffled";
  }
  return "?";
}

Condition parse_condition(std::string_view s) {
  std::string t(s);
  for (char& c : t)
    if (c == '-') c = '_';
  if (t == "full") return Condition::Full;
  if (t == "instance_only") return Condition::InstanceOnly;
  if (t == "explanation_only") return Condition::ExplanationOnly;
  if (t == "shuffled") return Condition::Shuffled;
  throw ConfigError("unknown probe condition: " + std::string(s));
}

std::string model_descriptor(const proc::ProcessorModel& m) {
  return std::string(proc::to_string(m.config.variant)) + "-" +
         proc::to_string(m.config.architecture);
}

namespace {

ProbeReport tally(const proc::ProcessorModel& m, const corpus::Dataset& data,
                  const std::vector<Label>& predicted, Condition condition,
                  std::uint64_t seed) {
  ProbeReport r;
  r.model = model_descriptor(m);
  r.condition = condition;
  r.n = data.size();
  r.seed = seed;
  std::array<std::size_t, 3> correct = {0, 0, 0};
  std::array<std::size_t, 3> total = {0, 0, 0};
  std::size_t all_correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    int g = static_cast<int>(data.instances[i].label);
    ++total[g];
    if (predicted[i] == data.instances[i].label) {
      ++correct[g];
      ++all_correct;
    }
  }
  r.accuracy = static_cast<double>(all_correct) / static_cast<double>(r.n);
  for (int g = 0; g < 3; ++g)
    r.per_label_accuracy[g] =
        total[g] ? static_cast<double>(correct[g]) / static_cast<double>(total[g])
                 : 0.0;
  return r;
}

}  // namespace

ProbeReport erasure_probe(const proc::ProcessorModel& m,
                          const corpus::Dataset& data,
                          const std::vector<ExplanationTriple>& triples,
                          Condition condition, ExecMode mode) {
  if (condition == Condition::Shuffled)
    throw ConfigError("use shuffle_probe for the shuffled condition");
  if (triples.size() != data.size())
    throw ConfigError("one triple per instance required");
  if (data.instances.empty()) throw DataError("empty probe dataset");
  const bool full_input = m.config.variant == proc::Variant::NS ||
                          m.config.variant == proc::Variant::NILE;
  if (condition != Condition::Full && !full_input)
    throw ConfigError(
        "erasure probes need a full-input (ns/nile) processor; nothing to "
        "erase otherwise");

  proc::ScoreOptions opts;
  opts.probe_mode = true;
  const bool ph = m.config.variant == proc::Variant::PH;
  std::vector<Label> predicted(data.size());
  for_each_index(data.size(), mode, [&](std::size_t i) {
    const auto& inst = data.instances[i];
    std::optional<std::string> ctx;
    if (!ph) ctx = proc::build_concat_ph(inst.premise, inst.hypothesis);
    ExplanationTriple triple = triples[i];
    if (condition == Condition::InstanceOnly)
      triple = ExplanationTriple{};  // every explanation erased
    else if (condition == Condition::ExplanationOnly)
      ctx = proc::build_concat_ph("", "");
    LabelScores s = proc::score(m, ctx, triple, opts);
    if (!s.finite()) throw NumericError("non-finite probe score");
    predicted[i] = proc::argmax_label(s);
  });
  return tally(m, data, predicted, condition, 0);
}

std::vector<ExplanationTriple> shuffled_triples(
    const corpus::Dataset& data, const std::vector<ExplanationTriple>& triples,
    std::uint64_t seed, bool per_slot) {
  if (triples.size() != data.size())
    throw ConfigError("one triple per instance required");
  // donor pools by gold label
  std::array<std::vector<std::size_t>, 3> by_label;
  for (std::size_t i = 0; i < data.size(); ++i)
    by_label[static_cast<int>(data.instances[i].label)].push_back(i);

  std::vector<ExplanationTriple> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& pool = by_label[static_cast<int>(data.instances[i].label)];
    if (pool.size() < 2)
      throw DataError("shuffle pool exhausted for label " +
                      std::string(nile::to_string(data.instances[i].label)));
    auto pick_donor = [&](std::string_view stream) {
      // draw from the pool minus this instance
      Rng rng(derive_seed(seed, stream, i));
      std::size_t self_pos = pool.size();
      for (std::size_t p = 0; p < pool.size(); ++p)
        if (pool[p] == i) self_pos = p;
      std::size_t idx = rng.below(pool.size() - 1);
      if (idx >= self_pos) ++idx;
      return pool[idx];
    };
    if (per_slot) {
      out[i].entail = triples[pick_donor("shuffle-entail")].entail;
      out[i].contradict = triples[pick_donor("shuffle-contradict")].contradict;
      out[i].neutral = triples[pick_donor("shuffle-neutral")].neutral;
    } else {
      out[i] = triples[pick_donor("shuffle")];
    }
  }
  return out;
}

ProbeReport shuffle_probe(const proc::ProcessorModel& m,
                          const corpus::Dataset& data,
                          const std::vector<ExplanationTriple>& triples,
                          std::uint64_t seed, bool per_slot, ExecMode mode) {
  auto donors = shuffled_triples(data, triples, seed, per_slot);
  proc::ScoreOptions opts;
  opts.probe_mode = true;  // tolerant of degenerate empty generations
  std::vector<Label> predicted(data.size());
  for_each_index(data.size(), mode, [&](std::size_t i) {
    predicted[i] = proc::predict(m, data.instances[i], donors[i], opts).label;
  });
  ProbeReport r = tally(m, data, predicted, Condition::Shuffled, seed);
  return r;
}

void write_report(const std::vector<ProbeReport>& reports,
                  const std::string& path) {
  std::string out;
  for (const auto& r : reports) {
    io::json rec;
    rec["model"] = r.model;
    rec["condition"] = to_string(r.condition);
    rec["accuracy"] = r.accuracy;
    rec["per_label_accuracy"] = r.per_label_accuracy;
    rec["n"] = r.n;
    rec["seed"] = r.seed;
    out += rec.dump();
    out += '\n';
  }
  io::write_file(path, out);
  io::write_file(path + ".txt", format_report_table(reports));
}

std::vector<ProbeReport> read_reports(const std::string& path) {
  std::vector<ProbeReport> out;
  std::istringstream in(io::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    io::json rec = io::json::parse(line);
    ProbeReport r;
    r.model = rec.at("model").get<std::string>();
    r.condition = parse_condition(rec.at("condition").get<std::string>());
    r.accuracy = rec.at("accuracy").get<double>();
    auto pl = rec.at("per_label_accuracy").get<std::vector<double>>();
    if (pl.size() != 3) throw DataError(path + ": bad per-label accuracy");
    for (int i = 0; i < 3; ++i) r.per_label_accuracy[i] = pl[i];
    r.n = rec.at("n").get<std::size_t>();
    r.seed = rec.at("seed").get<std::uint64_t>();
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_report_table(const std::vector<ProbeReport>& reports) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-24s %-18s %6s %10s %10s %10s %10s\n",
                "model", "condition", "n", "accuracy", "acc(ent)",
                "acc(con)", "acc(neu)");
  out += buf;
  out += std::string(92, '-') + "\n";
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf),
                  "%-24s %-18s %6zu %10.4f %10.4f %10.4f %10.4f\n",
                  r.model.c_str(), to_string(r.condition), r.n, r.accuracy,
                  r.per_label_accuracy[0], r.per_label_accuracy[1],
                  r.per_label_accuracy[2]);
    out += buf;
  }
  return out;
}

}  // namespace nile::probes
