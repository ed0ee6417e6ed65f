#include "nile/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "nile/baselines.hpp"
#include "nile/eval.hpp"
#include "nile/io.hpp"
#include "nile/probes.hpp"

namespace nile::cli {

namespace fs = std::filesystem;
using io::json;

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["world"]["num_entities"] = c.world.num_entities;
  j["world"]["num_categories"] = c.world.num_categories;
  j["world"]["templates_per_label"] = c.world.templates_per_label;
  j["world"]["instances_per_label"] = c.world.instances_per_label;
  j["world"]["ood_vocabulary_shift"] = c.world.ood_vocabulary_shift;
  j["generator"]["dim"] = c.generator.dim;
  j["generator"]["window"] = c.generator.window;
  j["generator"]["max_new_tokens"] = c.generator.max_new_tokens;
  j["generator"]["epochs"] = c.generator.epochs;
  j["generator"]["learning_rate"] = c.generator.learning_rate;
  j["generator"]["clip_norm"] = c.generator.clip_norm;
  j["processor"]["architecture"] = c.processor.architecture;
  j["processor"]["variant"] = c.processor.variant;
  j["processor"]["negatives_per_instance"] = c.processor.negatives_per_instance;
  j["processor"]["dim"] = c.processor.dim;
  j["processor"]["epochs"] = c.processor.epochs;
  j["processor"]["learning_rate"] = c.processor.learning_rate;
  j["processor"]["clip_norm"] = c.processor.clip_norm;
  j["processor"]["embed_init_scale"] = c.processor.embed_init_scale;
  j["processor"]["aux_weight"] = c.processor.aux_weight;
  j["baseline"]["dim"] = c.baseline.dim;
  j["baseline"]["epochs"] = c.baseline.epochs;
  j["baseline"]["learning_rate"] = c.baseline.learning_rate;
  j["baseline"]["clip_norm"] = c.baseline.clip_norm;
  j["paths"]["out_root"] = c.paths.out_root;
  j["paths"]["corpus_dir"] = c.paths.corpus_dir;
  j["paths"]["checkpoint_dir"] = c.paths.checkpoint_dir;
  j["paths"]["report_dir"] = c.paths.report_dir;
  j["triples_source"] = c.triples_source;
  j["filter_all_splits"] = c.filter_all_splits;
  return j;
}

namespace {

template <class T>
void read_into(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  read_into(j, "seed", c.seed);
  if (j.contains("world")) {
    const auto& w = j.at("world");
    read_into(w, "num_entities", c.world.num_entities);
    read_into(w, "num_categories", c.world.num_categories);
    read_into(w, "templates_per_label", c.world.templates_per_label);
    read_into(w, "instances_per_label", c.world.instances_per_label);
    read_into(w, "ood_vocabulary_shift", c.world.ood_vocabulary_shift);
  }
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    read_into(g, "dim", c.generator.dim);
    read_into(g, "window", c.generator.window);
    read_into(g, "max_new_tokens", c.generator.max_new_tokens);
    read_into(g, "epochs", c.generator.epochs);
    read_into(g, "learning_rate", c.generator.learning_rate);
    read_into(g, "clip_norm", c.generator.clip_norm);
  }
  if (j.contains("processor")) {
    const auto& p = j.at("processor");
    read_into(p, "architecture", c.processor.architecture);
    read_into(p, "variant", c.processor.variant);
    read_into(p, "negatives_per_instance", c.processor.negatives_per_instance);
    read_into(p, "dim", c.processor.dim);
    read_into(p, "epochs", c.processor.epochs);
    read_into(p, "learning_rate", c.processor.learning_rate);
    read_into(p, "clip_norm", c.processor.clip_norm);
    read_into(p, "embed_init_scale", c.processor.embed_init_scale);
    read_into(p, "aux_weight", c.processor.aux_weight);
  }
  if (j.contains("baseline")) {
    const auto& b = j.at("baseline");
    read_into(b, "dim", c.baseline.dim);
    read_into(b, "epochs", c.baseline.epochs);
    read_into(b, "learning_rate", c.baseline.learning_rate);
    read_into(b, "clip_norm", c.baseline.clip_norm);
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    read_into(p, "out_root", c.paths.out_root);
    read_into(p, "corpus_dir", c.paths.corpus_dir);
    read_into(p, "checkpoint_dir", c.paths.checkpoint_dir);
    read_into(p, "report_dir", c.paths.report_dir);
  }
  read_into(j, "triples_source", c.triples_source);
  read_into(j, "filter_all_splits", c.filter_all_splits);
  if (c.triples_source != "generator" && c.triples_source != "oracle" &&
      c.triples_source != "file")
    throw ConfigError("triples_source must be 'generator', 'oracle' or 'file'");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  // identifies the experiment; output locations don't affect results
  json j = config_to_json(cfg);
  j.erase("paths");
  return io::hash_hex(j.dump());
}

OutputLayout resolve_layout(const ExperimentConfig& cfg) {
  std::string root = cfg.paths.out_root;
  if (const char* env = std::getenv("NILE_OUTPUT_ROOT"); env && *env)
    root = env;
  OutputLayout l;
  l.corpus_dir = (fs::path(root) / cfg.paths.corpus_dir).string();
  l.checkpoint_dir = (fs::path(root) / cfg.paths.checkpoint_dir).string();
  l.report_dir = (fs::path(root) / cfg.paths.report_dir).string();
  return l;
}

namespace {

std::string path_join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Manifest next to every command's outputs: config hash, seed, and the
// hash of each artifact written or consumed.
void write_manifest(const std::string& dir, const std::string& command,
                    const ExperimentConfig& cfg,
                    const std::vector<std::string>& outputs,
                    const std::vector<std::string>& inputs = {}) {
  json j;
  j["format_version"] = 1;
  j["command"] = command;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  for (const auto& p : inputs)
    j["inputs"][fs::path(p).filename().string()] = io::file_hash_hex(p);
  for (const auto& p : outputs)
    j["outputs"][fs::path(p).filename().string()] = io::file_hash_hex(p);
  io::write_file(path_join(dir, command + ".manifest.json"),
                 j.dump(2) + "\n");
}

corpus::WorldConfig effective_world(const ExperimentConfig& cfg) {
  corpus::WorldConfig w = cfg.world;
  w.seed = derive_seed(cfg.seed, "world");
  return w;
}

corpus::Dataset load_split(const OutputLayout& l, const std::string& name) {
  corpus::Split split;
  if (name == "train") split = corpus::Split::Train;
  else if (name == "dev") split = corpus::Split::Dev;
  else if (name == "test") split = corpus::Split::Test;
  else if (name == "ood") split = corpus::Split::OodDev;
  else throw ConfigError("unknown split: " + name);
  return corpus::load_jsonl(path_join(l.corpus_dir, name + ".jsonl"), split);
}

text::Vocabulary corpus_vocabulary(const corpus::Dataset& train) {
  std::vector<std::string> texts;
  texts.reserve(train.size() * 3);
  for (const auto& inst : train.instances) {
    texts.push_back(inst.premise);
    texts.push_back(inst.hypothesis);
    if (inst.gold_explanation) texts.push_back(*inst.gold_explanation);
  }
  return text::build_vocabulary(texts);
}

gen::LmOptions lm_options(const ExperimentConfig& cfg) {
  gen::LmOptions o;
  o.dim = cfg.generator.dim;
  o.window = cfg.generator.window;
  o.max_new_tokens = cfg.generator.max_new_tokens;
  o.epochs = cfg.generator.epochs;
  o.learning_rate = cfg.generator.learning_rate;
  o.clip_norm = cfg.generator.clip_norm;
  o.seed = derive_seed(cfg.seed, "generators");
  return o;
}

std::string generator_path(const OutputLayout& l, Label label) {
  return path_join(l.checkpoint_dir,
                   std::string("generator_") + to_string(label) + ".json");
}

gen::GeneratorSet load_generators(const OutputLayout& l) {
  gen::GeneratorSet s;
  s.entail = gen::load_generator(generator_path(l, Label::Entail));
  s.contradict = gen::load_generator(generator_path(l, Label::Contradict));
  s.neutral = gen::load_generator(generator_path(l, Label::Neutral));
  return s;
}

std::vector<gen::ExplanationTriple> triples_for(const ExperimentConfig& cfg,
                                                const OutputLayout& l,
                                                const corpus::Dataset& data) {
  if (cfg.triples_source == "oracle") {
    corpus::WorldConfig wc = effective_world(cfg);
    corpus::SyntheticWorld w = corpus::build_world(wc);
    if (data.split == corpus::Split::OodDev)
      w = corpus::shift_world(w, wc.ood_vocabulary_shift,
                              derive_seed(wc.seed, "ood-alias"));
    return gen::batch_oracle_triples(w, data, ExecMode::Parallel);
  }
  if (cfg.triples_source == "file") {
    std::string p = path_join(l.corpus_dir,
                              std::string("triples_") +
                                  corpus::to_string(data.split) + ".jsonl");
    return gen::load_triples_for(data, p);
  }
  gen::GeneratorSet gens = load_generators(l);
  return gen::batch_generate_triples(gens, data, ExecMode::Parallel);
}

proc::ProcessorConfig processor_config(const ExperimentConfig& cfg) {
  proc::ProcessorConfig pc;
  pc.architecture = proc::parse_architecture(cfg.processor.architecture);
  pc.variant = proc::parse_variant(cfg.processor.variant);
  pc.negatives_per_instance =
      pc.variant == proc::Variant::NILE ? cfg.processor.negatives_per_instance
                                        : 0;
  pc.dim = cfg.processor.dim;
  pc.seed = derive_seed(cfg.seed, "processor");
  pc.validate();
  return pc;
}

std::string processor_path(const ExperimentConfig& cfg,
                           const OutputLayout& l) {
  return path_join(l.checkpoint_dir, "processor_" + cfg.processor.variant +
                                         "_" + cfg.processor.architecture +
                                         ".json");
}

// --- command handlers ---

int run_gen_corpus(const ExperimentConfig& cfg, const std::string& esnli_train,
                   const std::string& esnli_dev,
                   const std::string& esnli_test) {
  OutputLayout l = resolve_layout(cfg);
  fs::create_directories(l.corpus_dir);
  std::vector<std::string> outputs;

  auto filter_split = [&](corpus::Dataset& d, bool is_train) {
    if (!is_train && !cfg.filter_all_splits) return std::size_t{0};
    auto r = corpus::filter_noninformative(d);
    d = std::move(r.kept);
    return r.dropped;
  };

  auto emit = [&](corpus::Dataset& d, const std::string& name,
                  bool is_train) {
    std::size_t dropped = filter_split(d, is_train);
    std::string p = path_join(l.corpus_dir, name + ".jsonl");
    corpus::save_jsonl(d, p);
    outputs.push_back(p);
    std::cout << name << ": " << d.size() << " instances"
              << (dropped ? " (" + std::to_string(dropped) +
                                " dropped by filter)"
                          : "")
              << "\n";
  };

  if (!esnli_train.empty()) {
    auto tr = corpus::load_esnli(esnli_train, corpus::Split::Train);
    std::cout << "skipped unlabeled rows: " << tr.skipped_unlabeled << "\n";
    emit(tr.dataset, "train", true);
    if (!esnli_dev.empty()) {
      auto dv = corpus::load_esnli(esnli_dev, corpus::Split::Dev);
      emit(dv.dataset, "dev", false);
    }
    if (!esnli_test.empty()) {
      auto te = corpus::load_esnli(esnli_test, corpus::Split::Test);
      emit(te.dataset, "test", false);
    }
  } else {
    auto c = corpus::generate_synthetic_corpus(effective_world(cfg));
    emit(c.train, "train", true);
    emit(c.dev, "dev", false);
    emit(c.test, "test", false);
    emit(c.ood, "ood", false);
  }
  write_manifest(l.corpus_dir, "gen-corpus", cfg, outputs);
  return 0;
}

int run_train_generators(const ExperimentConfig& cfg, bool dump_triples) {
  OutputLayout l = resolve_layout(cfg);
  fs::create_directories(l.checkpoint_dir);
  corpus::Dataset train = load_split(l, "train");
  text::Vocabulary vocab = corpus_vocabulary(train);
  gen::LmOptions opts = lm_options(cfg);
  std::string hash = config_hash(cfg);

  std::vector<std::string> outputs;
  gen::GeneratorSet gens;
  for (Label label : all_labels()) {
    gen::GeneratorModel m = gen::train_generator(label, train, vocab, opts);
    std::string p = generator_path(l, label);
    gen::save_generator(m, p, hash);
    outputs.push_back(p);
    std::cout << "generator " << to_string(label)
              << ": final token loss " << m.epoch_token_loss.back() << "\n";
    if (label == Label::Entail) gens.entail = std::move(m);
    else if (label == Label::Contradict) gens.contradict = std::move(m);
    else gens.neutral = std::move(m);
  }

  if (dump_triples) {
    fs::create_directories(l.corpus_dir);
    for (const char* name : {"train", "dev", "test", "ood"}) {
      std::string split_path = path_join(l.corpus_dir,
                                         std::string(name) + ".jsonl");
      if (!fs::exists(split_path)) continue;
      corpus::Dataset d = load_split(l, name);
      auto triples = gen::batch_generate_triples(gens, d, ExecMode::Parallel);
      std::vector<std::string> ids;
      ids.reserve(d.size());
      for (const auto& inst : d.instances) ids.push_back(inst.id);
      std::string p = path_join(l.corpus_dir,
                                std::string("triples_") + name + ".jsonl");
      gen::save_triples(ids, triples, p);
      outputs.push_back(p);
    }
  }
  write_manifest(l.checkpoint_dir, "train-generators", cfg, outputs);
  return 0;
}

int run_train_processor(const ExperimentConfig& cfg) {
  OutputLayout l = resolve_layout(cfg);
  fs::create_directories(l.checkpoint_dir);
  corpus::Dataset train = load_split(l, "train");
  text::Vocabulary vocab = corpus_vocabulary(train);
  auto triples = triples_for(cfg, l, train);

  proc::TrainOptions opts;
  opts.epochs = cfg.processor.epochs;
  opts.learning_rate = cfg.processor.learning_rate;
  opts.clip_norm = cfg.processor.clip_norm;
  opts.embed_init_scale = cfg.processor.embed_init_scale;
  opts.aux_weight = cfg.processor.aux_weight;

  proc::TrainTrace trace;
  proc::ProcessorModel m = proc::train_processor(
      processor_config(cfg), train, triples, vocab, opts, &trace);
  std::string p = processor_path(cfg, l);
  proc::save_processor(m, p, config_hash(cfg));
  std::cout << "processor " << probes::model_descriptor(m) << ": loss "
            << trace.initial_loss << " -> " << trace.epoch_loss.back()
            << "\n";
  write_manifest(l.checkpoint_dir, "train-processor", cfg, {p});
  return 0;
}

int run_train_baseline(const ExperimentConfig& cfg, const std::string& which) {
  OutputLayout l = resolve_layout(cfg);
  fs::create_directories(l.checkpoint_dir);
  corpus::Dataset train = load_split(l, "train");
  text::Vocabulary vocab = corpus_vocabulary(train);

  base::ClfOptions clf;
  clf.epochs = cfg.baseline.epochs;
  clf.learning_rate = cfg.baseline.learning_rate;
  clf.clip_norm = cfg.baseline.clip_norm;
  clf.seed = derive_seed(cfg.seed, "baseline:" + which);

  std::string p;
  if (which == "posthoc") {
    base::PosthocModel m =
        base::train_posthoc(train, vocab, cfg.baseline.dim, clf);
    p = path_join(l.checkpoint_dir, "posthoc.json");
    base::save_posthoc(m, p, config_hash(cfg));
  } else if (which == "etpa") {
    base::EtpaOptions opts;
    opts.generator = lm_options(cfg);
    opts.generator.seed = derive_seed(cfg.seed, "baseline:etpa-generator");
    opts.classifier = clf;
    opts.clf_dim = cfg.baseline.dim;
    base::EtpaModel m = base::train_etpa(train, vocab, opts);
    p = path_join(l.checkpoint_dir, "etpa.json");
    base::save_etpa(m, p, config_hash(cfg));
  } else {
    throw ConfigError("--which must be posthoc or etpa");
  }
  write_manifest(l.checkpoint_dir, "train-baseline-" + which, cfg, {p});
  return 0;
}

std::string detect_kind(const std::string& model_path) {
  json j = json::parse(io::read_file(model_path));
  return j.value("kind", "");
}

int run_evaluate(const ExperimentConfig& cfg, std::string model_path,
                 const std::string& split, const std::string& annotations,
                 std::size_t n_eval) {
  OutputLayout l = resolve_layout(cfg);
  fs::create_directories(l.report_dir);
  if (model_path.empty()) model_path = processor_path(cfg, l);
  if (!fs::exists(model_path))
    throw DataError("no trained checkpoint at " + model_path);
  corpus::Dataset data = load_split(l, split);
  std::string kind = detect_kind(model_path);

  std::vector<eval::LabeledPrediction> preds(data.size());
  std::string tag;
  if (kind == "processor") {
    proc::ProcessorModel m = proc::load_processor(model_path);
    tag = probes::model_descriptor(m);
    auto triples = triples_for(cfg, l, data);
    proc::ScoreOptions opts;
    opts.probe_mode = true;  // tolerate degenerate generated slots
    auto raw = proc::batch_predict(m, data, triples, ExecMode::Parallel, opts);
    for (std::size_t i = 0; i < data.size(); ++i)
      preds[i] = {data.instances[i].id, raw[i].label, raw[i].scores,
                  triples[i].get(raw[i].label)};
  } else if (kind == "posthoc") {
    base::PosthocModel m = base::load_posthoc(model_path);
    tag = "posthoc";
    auto triples = triples_for(cfg, l, data);
    auto raw = base::batch_posthoc(m, data, triples, ExecMode::Parallel);
    for (std::size_t i = 0; i < data.size(); ++i)
      preds[i] = {data.instances[i].id, raw[i].label, raw[i].scores,
                  raw[i].explanation};
  } else if (kind == "etpa") {
    base::EtpaModel m = base::load_etpa(model_path);
    tag = "etpa";
    auto raw = base::batch_etpa(m, data, ExecMode::Parallel);
    for (std::size_t i = 0; i < data.size(); ++i)
      preds[i] = {data.instances[i].id, raw[i].label, raw[i].scores,
                  raw[i].explanation};
  } else {
    throw DataError(model_path + ": unrecognized checkpoint kind");
  }

  double acc = eval::label_accuracy(preds, data);
  std::string pred_path =
      path_join(l.report_dir, "predictions_" + tag + "_" + split + ".jsonl");
  eval::save_predictions(preds, pred_path);

  json metrics;
  metrics["model"] = tag;
  metrics["split"] = split;
  metrics["n"] = data.size();
  metrics["label_accuracy"] = acc;
  std::cout << tag << " " << split << " label accuracy: " << acc << "\n";

  if (!annotations.empty()) {
    auto anns = eval::load_annotations(annotations);
    std::size_t n = n_eval ? n_eval : data.size();
    auto em = eval::explanation_metrics(preds, data, anns, n);
    metrics["explanation"]["n_eval"] = em.n_eval;
    metrics["explanation"]["A"] = em.a;
    metrics["explanation"]["B"] = em.b;
    metrics["explanation"]["C"] = em.c;
    metrics["explanation"]["B_over_A_pct"] =
        em.b_over_a_pct ? json(*em.b_over_a_pct) : json(nullptr);
    metrics["explanation"]["C_over_A_pct"] =
        em.c_over_a_pct ? json(*em.c_over_a_pct) : json(nullptr);
    std::cout << eval::format_metrics_table(em);
  }
  std::string metrics_path =
      path_join(l.report_dir, "metrics_" + tag + "_" + split + ".json");
  io::write_file(metrics_path, metrics.dump(2) + "\n");
  write_manifest(l.report_dir, "evaluate-" + tag + "-" + split, cfg,
                 {pred_path, metrics_path}, {model_path});
  return 0;
}

int run_probe(const ExperimentConfig& cfg, std::string model_path,
              const std::string& split, const std::string& condition_str,
              std::uint64_t seed, bool per_slot) {
  OutputLayout l = resolve_layout(cfg);
  fs::create_directories(l.report_dir);
  if (model_path.empty()) model_path = processor_path(cfg, l);
  if (!fs::exists(model_path))
    throw DataError("no trained checkpoint at " + model_path);
  proc::ProcessorModel m = proc::load_processor(model_path);
  corpus::Dataset data = load_split(l, split);
  auto triples = triples_for(cfg, l, data);

  probes::Condition cond = probes::parse_condition(condition_str);
  probes::ProbeReport report;
  if (cond == probes::Condition::Shuffled)
    report = probes::shuffle_probe(m, data, triples, seed, per_slot,
                                   ExecMode::Parallel);
  else
    report = probes::erasure_probe(m, data, triples, cond,
                                   ExecMode::Parallel);

  std::string p = path_join(
      l.report_dir, "probe_" + probes::model_descriptor(m) + "_" +
                        probes::to_string(cond) + "_" + split + ".jsonl");
  probes::write_report({report}, p);
  std::cout << probes::format_report_table({report});
  write_manifest(l.report_dir,
                 "probe-" + std::string(probes::to_string(cond)), cfg,
                 {p, p + ".txt"}, {model_path});
  return 0;
}

int run_transfer(const ExperimentConfig& cfg, std::string model_path) {
  OutputLayout l = resolve_layout(cfg);
  fs::create_directories(l.report_dir);
  if (model_path.empty()) model_path = processor_path(cfg, l);
  if (!fs::exists(model_path))
    throw DataError("no trained checkpoint at " + model_path);
  proc::ProcessorModel m = proc::load_processor(model_path);
  corpus::Dataset ood = load_split(l, "ood");
  gen::GeneratorSet gens = load_generators(l);
  auto r = eval::transfer_eval(m, gens, ood, ExecMode::Parallel);
  std::string p = path_join(l.report_dir,
                            "predictions_" + probes::model_descriptor(m) +
                                "_transfer.jsonl");
  eval::save_predictions(r.predictions, p);
  std::cout << "transfer (" << probes::model_descriptor(m)
            << ") ood label accuracy: " << r.accuracy << "\n";
  write_manifest(l.report_dir, "transfer", cfg, {p}, {model_path});
  return 0;
}

int run_report(const std::string& in_path) {
  auto reports = probes::read_reports(in_path);
  std::cout << probes::format_report_table(reports);
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"NLI with label-specific explanations: experiment harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  std::string out_override;
  app.add_option("--config", config_path, "experiment config file (JSON)");
  app.add_option("--seed", seed_override, "override the global seed")
      ->each([&](const std::string&) { has_seed_override = true; });
  app.add_option("--out", out_override, "override the output root");

  auto* sc_gen = app.add_subcommand("gen-corpus",
                                    "generate or ingest the corpus splits");
  std::string esnli_train, esnli_dev, esnli_test;
  sc_gen->add_option("--esnli-train", esnli_train,
                     "ingest an e-SNLI-format delimited file as train");
  sc_gen->add_option("--esnli-dev", esnli_dev, "e-SNLI-format dev file");
  sc_gen->add_option("--esnli-test", esnli_test, "e-SNLI-format test file");

  auto* sc_gens = app.add_subcommand("train-generators",
                                     "train the three label-specific generators");
  bool dump_triples = false;
  sc_gens->add_flag("--dump-triples", dump_triples,
                    "dump generated triples for every split");

  auto* sc_proc = app.add_subcommand("train-processor",
                                     "train the explanation processor");
  std::string arch_override, variant_override;
  int negatives_override = -1;
  sc_proc->add_option("--arch", arch_override,
                      "independent | aggregate | append");
  sc_proc->add_option("--variant", variant_override, "ph | ns | nile");
  sc_proc->add_option("--negatives", negatives_override,
                      "negatives per instance (nile)");

  auto* sc_base = app.add_subcommand("train-baseline",
                                     "train a comparison system");
  std::string which = "posthoc";
  sc_base->add_option("--which", which, "posthoc | etpa")->required();

  auto* sc_eval = app.add_subcommand("evaluate", "label accuracy + dumps");
  std::string model_path, split = "test", annotations;
  std::size_t n_eval = 0;
  sc_eval->add_option("--model", model_path, "checkpoint path");
  sc_eval->add_option("--split", split, "train | dev | test | ood");
  sc_eval->add_option("--annotations", annotations,
                      "annotation records (instance_id\\tannotator\\t0|1)");
  sc_eval->add_option("--n-eval", n_eval,
                      "explanation evaluation prefix size");

  auto* sc_probe = app.add_subcommand("probe", "faithfulness probes");
  std::string condition = "full";
  std::uint64_t probe_seed = 13;
  bool per_slot = false;
  std::string probe_model, probe_split = "test";
  sc_probe->add_option("--condition", condition,
                       "full | instance-only | explanation-only | shuffled");
  sc_probe->add_option("--seed", probe_seed, "shuffle seed");
  sc_probe->add_flag("--per-slot", per_slot,
                     "draw an independent donor per slot");
  sc_probe->add_option("--model", probe_model, "checkpoint path");
  sc_probe->add_option("--split", probe_split, "dataset split");

  auto* sc_transfer = app.add_subcommand("transfer",
                                         "out-of-domain evaluation");
  std::string transfer_model;
  sc_transfer->add_option("--model", transfer_model, "checkpoint path");

  auto* sc_report = app.add_subcommand("report", "print a report table");
  std::string report_in;
  sc_report->add_option("--in", report_in, "report file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (has_seed_override) cfg.seed = seed_override;
    if (!out_override.empty()) cfg.paths.out_root = out_override;

    if (sc_gen->parsed())
      return run_gen_corpus(cfg, esnli_train, esnli_dev, esnli_test);
    if (sc_gens->parsed()) return run_train_generators(cfg, dump_triples);
    if (sc_proc->parsed()) {
      if (!arch_override.empty()) cfg.processor.architecture = arch_override;
      if (!variant_override.empty()) cfg.processor.variant = variant_override;
      if (negatives_override >= 0)
        cfg.processor.negatives_per_instance = negatives_override;
      return run_train_processor(cfg);
    }
    if (sc_base->parsed()) return run_train_baseline(cfg, which);
    if (sc_eval->parsed())
      return run_evaluate(cfg, model_path, split, annotations, n_eval);
    if (sc_probe->parsed())
      return run_probe(cfg, probe_model, probe_split, condition, probe_seed,
                       per_slot);
    if (sc_transfer->parsed()) return run_transfer(cfg, transfer_model);
    if (sc_report->parsed()) return run_report(report_in);
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("nile");
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace nile::cli
