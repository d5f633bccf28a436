#include "otn/app.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "otn/evaluation.hpp"

namespace otn {

using nlohmann::json;
namespace fs = std::filesystem;

// -- configuration ------------------------------------------------------------

void RunConfig::validate() const {
  model.validate();
  train.validate();
  auto require = [](const fs::path& path, const char* key) {
    if (path.empty()) throw ConfigError(std::string(key) + " is not set");
    if (!fs::exists(path)) throw ConfigError(std::string(key) + ": no such file " + path.string());
  };
  if (model.enable_alsc_task) {
    require(alsc_train, "data.alsc_train");
    require(alsc_test, "data.alsc_test");
    if (!alsc_valid.empty()) require(alsc_valid, "data.alsc_valid");
  }
  if (model.enable_aowe_task) {
    require(aowe_train, "data.aowe_train");
    require(aowe_test, "data.aowe_test");
    if (!aowe_valid.empty()) require(aowe_valid, "data.aowe_valid");
  }
  require(embeddings, "data.embeddings");
}

namespace {

const char* schedule_name(Schedule s) {
  return s == Schedule::alternate_batches ? "alternate" : "blocks";
}

}  // namespace

RunConfig run_config_from_json(const json& flat, const fs::path& base_dir) {
  if (!flat.is_object()) throw ConfigError("configuration must be a JSON object");
  RunConfig c;
  json model_keys = json::object();
  for (const auto& [key, value] : flat.items()) {
    if (key.starts_with("model.")) model_keys[key] = value;
  }
  c.model = model_config_from_json(model_keys);

  auto path = [&](const json& v) {
    fs::path p = v.get<std::string>();
    return p.is_relative() ? base_dir / p : p;
  };
  try {
    for (const auto& [key, value] : flat.items()) {
      if (key.starts_with("model.")) continue;
      TrainConfig& t = c.train;
      if (key == "train.learning_rate") t.adam.learning_rate = value.get<double>();
      else if (key == "train.beta1") t.adam.beta1 = value.get<double>();
      else if (key == "train.beta2") t.adam.beta2 = value.get<double>();
      else if (key == "train.epsilon") t.adam.epsilon = value.get<double>();
      else if (key == "train.batch_size") t.batch_size = value.get<std::size_t>();
      else if (key == "train.validation_fraction") t.validation_fraction = value.get<double>();
      else if (key == "train.patience") t.patience = value.get<std::size_t>();
      else if (key == "train.max_epochs") t.max_epochs = value.get<std::size_t>();
      else if (key == "train.seed") t.seed = value.get<std::uint64_t>();
      else if (key == "train.num_runs") t.num_runs = value.get<std::size_t>();
      else if (key == "train.clip_norm") t.clip_norm = value.get<double>();
      else if (key == "train.target_monitor") {
        if (value.is_null()) t.target_monitor.reset();
        else t.target_monitor = value.get<double>();
      }
      else if (key == "train.schedule") {
        const auto name = value.get<std::string>();
        if (name == "alternate") t.schedule = Schedule::alternate_batches;
        else if (name == "blocks") t.schedule = Schedule::task_blocks;
        else throw ConfigError("train.schedule must be \"alternate\" or \"blocks\"");
      }
      else if (key == "data.alsc_train") c.alsc_train = path(value);
      else if (key == "data.alsc_test") c.alsc_test = path(value);
      else if (key == "data.aowe_train") c.aowe_train = path(value);
      else if (key == "data.aowe_test") c.aowe_test = path(value);
      else if (key == "data.alsc_valid") c.alsc_valid = path(value);
      else if (key == "data.aowe_valid") c.aowe_valid = path(value);
      else if (key == "data.embeddings") c.embeddings = path(value);
      else if (key == "output.dir") c.out_dir = path(value);
      else throw ConfigError("unknown configuration key \"" + key + "\"");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration value has the wrong type: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration " + path.string());
  json flat;
  try {
    flat = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(flat, path.parent_path());
}

json to_json(const RunConfig& c) {
  json j = to_json(c.model);
  const TrainConfig& t = c.train;
  j["train.learning_rate"] = t.adam.learning_rate;
  j["train.beta1"] = t.adam.beta1;
  j["train.beta2"] = t.adam.beta2;
  j["train.epsilon"] = t.adam.epsilon;
  j["train.batch_size"] = t.batch_size;
  j["train.validation_fraction"] = t.validation_fraction;
  j["train.patience"] = t.patience;
  j["train.max_epochs"] = t.max_epochs;
  j["train.seed"] = t.seed;
  j["train.num_runs"] = t.num_runs;
  j["train.clip_norm"] = t.clip_norm;
  j["train.schedule"] = schedule_name(t.schedule);
  j["train.target_monitor"] = t.target_monitor ? json(*t.target_monitor) : json(nullptr);
  j["data.alsc_train"] = c.alsc_train.string();
  j["data.alsc_test"] = c.alsc_test.string();
  j["data.aowe_train"] = c.aowe_train.string();
  j["data.aowe_test"] = c.aowe_test.string();
  if (!c.alsc_valid.empty()) j["data.alsc_valid"] = c.alsc_valid.string();
  if (!c.aowe_valid.empty()) j["data.aowe_valid"] = c.aowe_valid.string();
  j["data.embeddings"] = c.embeddings.string();
  j["output.dir"] = c.out_dir.string();
  return j;
}

// -- data and runs --------------------------------------------------------------

PreparedData prepare_data(Datasets sets, const EmbeddingSpec& spec,
                          const std::optional<fs::path>& embeddings, std::uint64_t seed) {
  PreparedData d;
  d.sets = std::move(sets);
  d.vocab = build_vocab({&d.sets.alsc_train, &d.sets.alsc_valid, &d.sets.alsc_test},
                        {&d.sets.aowe_train, &d.sets.aowe_valid, &d.sets.aowe_test});
  Rng rng(seed);
  if (embeddings) {
    EmbeddingCoverage coverage;
    d.word_table = load_pretrained_embeddings(*embeddings, d.vocab, spec, rng, &coverage).word;
  } else {
    d.word_table = random_embeddings(d.vocab, spec, rng).word;
  }
  return d;
}

PreparedData load_run_data(const RunConfig& config) {
  Datasets sets;
  if (config.model.enable_alsc_task) {
    sets.alsc_train = load_alsc_dataset(config.alsc_train);
    sets.alsc_test = load_alsc_dataset(config.alsc_test);
    if (!config.alsc_valid.empty()) sets.alsc_valid = load_alsc_dataset(config.alsc_valid);
  }
  if (config.model.enable_aowe_task) {
    std::size_t warnings = 0;
    sets.aowe_train = load_aowe_dataset(config.aowe_train, &warnings);
    sets.aowe_test = load_aowe_dataset(config.aowe_test, &warnings);
    if (!config.aowe_valid.empty()) sets.aowe_valid = load_aowe_dataset(config.aowe_valid, &warnings);
    if (warnings > 0) std::clog << "warning: " << warnings << " I tags without an opening B\n";
  }
  return prepare_data(std::move(sets), config.model.dims.embedding, config.embeddings,
                      config.train.seed);
}

RunOutcome train_single_run(const PreparedData& data, const ModelConfig& model,
                            const TrainConfig& train,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  const RunSeeds seeds(train.seed);
  JointData joint;
  // One split stream per task, so a task's split does not depend on
  // whether the other task is enabled.
  Rng alsc_split(seeds.split);
  Rng aowe_split(seeds.split ^ 0x9e3779b97f4a7c15ULL);
  if (model.enable_alsc_task) {
    if (data.sets.alsc_valid.empty()) {
      std::tie(joint.alsc_train, joint.alsc_valid) =
          split_validation(data.sets.alsc_train, train.validation_fraction, alsc_split);
    } else {
      joint.alsc_train = data.sets.alsc_train;
      joint.alsc_valid = data.sets.alsc_valid;
    }
  }
  if (model.enable_aowe_task) {
    if (data.sets.aowe_valid.empty()) {
      std::tie(joint.aowe_train, joint.aowe_valid) =
          split_validation(data.sets.aowe_train, train.validation_fraction, aowe_split);
    } else {
      joint.aowe_train = data.sets.aowe_train;
      joint.aowe_valid = data.sets.aowe_valid;
    }
  }

  Rng init_rng(seeds.init);
  EmbeddingTable table{data.word_table, random_position_table(model.dims.embedding, init_rng)};
  RunOutcome outcome;
  outcome.seed = train.seed;
  outcome.params = init_params(model, std::move(table), init_rng);
  outcome.train = train_joint(joint, outcome.params, model, train, data.vocab, on_epoch);
  outcome.test = evaluate_model(outcome.params, model, data.vocab, data.sets.alsc_test,
                                data.sets.aowe_test);
  return outcome;
}

bool ExperimentResult::diverged() const {
  return std::any_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.train.diverged; });
}

ExperimentResult run_experiment(
    const PreparedData& data, const ModelConfig& model, const TrainConfig& train,
    const std::function<void(std::size_t run, const EpochLog&)>& on_epoch) {
  ExperimentResult result;
  result.summary = run_repeated(
      [&](std::uint64_t seed) {
        TrainConfig t = train;
        t.seed = seed;
        const std::size_t run = result.runs.size();
        std::function<void(const EpochLog&)> hook;
        if (on_epoch) hook = [&](const EpochLog& log) { on_epoch(run, log); };
        result.runs.push_back(train_single_run(data, model, t, hook));
        return flatten(result.runs.back().test);
      },
      train.num_runs, train.seed);
  return result;
}

std::vector<AblationVariant> ablation_variants(const ModelConfig& full) {
  std::vector<AblationVariant> v;
  ModelConfig otn = full;
  otn.enable_alsc_task = otn.enable_aowe_task = true;
  otn.enable_aowe2alsc = otn.enable_alsc2aowe = true;
  v.push_back({"OTN", otn});
  v.push_back({"-ALSC task", otn});
  v.back().model.enable_alsc_task = false;
  v.push_back({"-AOWE task", otn});
  v.back().model.enable_aowe_task = false;
  v.push_back({"-AOWE2ALSC", otn});
  v.back().model.enable_aowe2alsc = false;
  v.push_back({"-ALSC2AOWE", otn});
  v.back().model.enable_alsc2aowe = false;
  return v;
}

namespace {

std::string cell(const std::map<std::string, MetricSummary>& summary, const std::string& key) {
  const auto it = summary.find(key);
  if (it == summary.end()) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << 100.0 * it->second.mean;
  if (it->second.count > 1) out << " ± " << 100.0 * it->second.stddev;
  return out.str();
}

json summary_json(const std::map<std::string, MetricSummary>& summary) {
  json j = json::object();
  for (const auto& [name, s] : summary) {
    j[name] = {{"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}};
  }
  return j;
}

const std::vector<std::pair<std::string, std::string>> kColumns = {
    {"alsc.accuracy", "ALSC Acc"}, {"alsc.macro_f1", "ALSC F1"},   {"aowe.precision", "AOWE P"},
    {"aowe.recall", "AOWE R"},     {"aowe.f1", "AOWE F1"}};

}  // namespace

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Configuration"});
  for (const auto& [key, title] : kColumns) grid.back().push_back(title);
  for (const auto& row : rows) {
    grid.push_back({row.name});
    for (const auto& [key, title] : kColumns) grid.back().push_back(cell(row.summary, key));
  }
  // "±" is two bytes but one column wide.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(grid.front().size(), 0);
  for (const auto& line : grid) {
    for (std::size_t k = 0; k < line.size(); ++k) widths[k] = std::max(widths[k], width(line[k]));
  }
  std::ostringstream out;
  for (const auto& line : grid) {
    for (std::size_t k = 0; k < line.size(); ++k) {
      out << line[k];
      if (k + 1 < line.size()) out << std::string(widths[k] - width(line[k]) + 2, ' ');
    }
    out << '\n';
  }
  return out.str();
}

json to_json(const std::vector<AblationRow>& rows) {
  json j = json::array();
  for (const auto& row : rows) j.push_back({{"configuration", row.name}, {"metrics", summary_json(row.summary)}});
  return j;
}

// -- commands -------------------------------------------------------------------

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
}

std::string summary_table(const std::map<std::string, MetricSummary>& summary) {
  std::ostringstream out;
  for (const auto& [key, title] : kColumns) {
    if (summary.contains(key)) out << std::left << std::setw(10) << title << cell(summary, key) << '\n';
  }
  return out.str();
}

void log_epoch(std::ostream& err, const std::string& prefix, const EpochLog& log) {
  err << prefix << "epoch " << log.epoch;
  auto field = [&](const char* name, const std::optional<double>& v) {
    if (v) err << "  " << name << ' ' << std::fixed << std::setprecision(4) << *v;
  };
  field("alsc_loss", log.alsc_loss);
  field("aowe_loss", log.aowe_loss);
  field("val_acc", log.val_alsc_acc);
  field("val_f1", log.val_alsc_f1);
  field("val_aowe_f1", log.val_aowe_f1);
  err << std::defaultfloat << '\n';
}

// Writes checkpoint, epoch log and test report of every run plus the summary.
void write_experiment(const fs::path& dir, const RunConfig& config, const PreparedData& data,
                      const ModelConfig& model, const ExperimentResult& result) {
  fs::create_directories(dir);
  const bool nested = result.runs.size() > 1;
  json runs = json::array();
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const RunOutcome& run = result.runs[i];
    const fs::path run_dir = nested ? dir / ("run_" + std::to_string(i + 1)) : dir;
    fs::create_directories(run_dir);
    json report = {{"seed", run.seed},
                   {"best_epoch", run.train.best_epoch},
                   {"epochs", run.train.log.size()},
                   {"diverged", run.train.diverged},
                   {"test", to_json(run.test)}};
    if (run.train.diverged) report["divergence"] = run.train.divergence;
    Checkpoint ck{model, data.vocab, run.params, {{"seed", run.seed}, {"best_epoch", run.train.best_epoch}}};
    save_checkpoint(run_dir / "checkpoint.otn", ck);
    std::ostringstream lines;
    for (const auto& log : run.train.log) lines << log.to_json().dump() << '\n';
    write_text(run_dir / "train_log.jsonl", lines.str());
    write_text(run_dir / "report.json", report.dump(2) + '\n');
    write_text(run_dir / "report.txt", format_table(run.test));
    runs.push_back(report);
  }
  if (nested) {
    json summary = {{"config", to_json(config)}, {"runs", runs}, {"summary", summary_json(result.summary)}};
    write_text(dir / "report.json", summary.dump(2) + '\n');
    write_text(dir / "report.txt", "mean ± stddev over " + std::to_string(result.runs.size()) +
                                       " runs\n" + summary_table(result.summary));
  }
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  config.validate();
  const PreparedData data = load_run_data(config);
  const std::size_t runs = config.train.num_runs;
  auto hook = [&](std::size_t run, const EpochLog& log) {
    log_epoch(err, runs > 1 ? "run " + std::to_string(run + 1) + "  " : "", log);
  };
  const ExperimentResult result = run_experiment(data, config.model, config.train, hook);
  write_experiment(config.out_dir, config, data, config.model, result);
  if (runs == 1) {
    out << format_table(result.runs.front().test);
  } else {
    out << "mean ± stddev over " << runs << " runs\n" << summary_table(result.summary);
  }
  if (result.diverged()) {
    for (const auto& r : result.runs) {
      if (r.train.diverged) err << "error: seed " << r.seed << " diverged: " << r.train.divergence << '\n';
    }
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_ablate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  // The sweep needs the data of both tasks whatever the configured flags.
  RunConfig both = config;
  both.model.enable_alsc_task = both.model.enable_aowe_task = true;
  both.validate();
  const PreparedData data = load_run_data(both);

  std::vector<AblationRow> rows;
  bool diverged = false;
  for (const auto& variant : ablation_variants(config.model)) {
    err << "== " << variant.name << '\n';
    auto hook = [&](std::size_t run, const EpochLog& log) {
      log_epoch(err, "run " + std::to_string(run + 1) + "  ", log);
    };
    const ExperimentResult result = run_experiment(data, variant.model, config.train, hook);
    std::string slug;
    for (char c : variant.name) {
      if (std::isalnum(static_cast<unsigned char>(c))) slug += static_cast<char>(std::tolower(c));
      else if (c == ' ') slug += '_';
    }
    RunConfig variant_config = config;
    variant_config.model = variant.model;
    write_experiment(config.out_dir / slug, variant_config, data, variant.model, result);
    rows.push_back({variant.name, result.summary});
    diverged = diverged || result.diverged();
  }
  const std::string table = format_ablation_table(rows);
  write_text(config.out_dir / "ablation.txt", table);
  write_text(config.out_dir / "ablation.json", to_json(rows).dump(2) + '\n');
  out << table;
  return diverged ? kExitNumeric : kExitOk;
}

int cmd_eval(const fs::path& checkpoint_path, const std::optional<fs::path>& alsc_path,
             const std::optional<fs::path>& aowe_path, const std::optional<fs::path>& out_dir,
             std::ostream& out) {
  if (!alsc_path && !aowe_path) throw UsageError("eval needs --alsc-test and/or --aowe-test");
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  std::vector<AlscInstance> alsc;
  std::vector<AoweInstance> aowe;
  if (alsc_path) alsc = load_alsc_dataset(*alsc_path);
  if (aowe_path) aowe = load_aowe_dataset(*aowe_path);
  const EvalReport report = evaluate_model(ck.params, ck.config, ck.vocab, alsc, aowe);
  const std::string text = format_table(report);
  const std::string js = to_json(report).dump(2) + '\n';
  if (out_dir) {
    fs::create_directories(*out_dir);
    write_text(*out_dir / "eval_report.json", js);
    write_text(*out_dir / "eval_report.txt", text);
  }
  out << text << js;
  return kExitOk;
}

AspectSpan parse_aspect(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      const std::size_t i = std::stoul(text);
      return {i, i + 1};
    }
    return {std::stoul(text.substr(0, colon)), std::stoul(text.substr(colon + 1))};
  } catch (const std::logic_error&) {
    throw UsageError("--aspect must be START:END (token indices, end exclusive) or a single index");
  }
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  return tokens;
}

int cmd_predict(const fs::path& checkpoint_path, const std::string& sentence,
                const std::string& aspect_text, bool as_json, std::ostream& out) {
  const auto tokens = split_tokens(sentence);
  if (tokens.empty()) throw UsageError("--tokens is empty");
  const AspectSpan aspect = parse_aspect(aspect_text);
  try {
    validate_span(aspect, tokens.size());
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("aspect span out of bounds: ") + e.what());
  }
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const Prediction p = predict(make_input(ck.vocab, tokens, aspect), ck.params, ck.config,
                               {.alsc = ck.config.enable_alsc_task, .aowe = ck.config.enable_aowe_task});

  json j;
  j["tokens"] = tokens;
  j["aspect"] = {aspect.start, aspect.end};
  if (p.sentiment) {
    j["sentiment"] = to_string(*p.sentiment);
    j["sentiment_probs"] = p.sentiment_probs;
    j["alpha"] = p.alpha;
  }
  if (!p.p.empty()) j["p"] = p.p;
  json spans = json::array();
  if (!p.tags.empty()) {
    std::string tags;
    for (Tag t : p.tags) tags += to_char(t);
    j["tags"] = tags;
    for (const Span& s : decode_bio_spans(p.tags)) {
      std::string surface;
      for (std::size_t i = s.start; i < s.end; ++i) surface += (i > s.start ? " " : "") + tokens[i];
      spans.push_back({{"start", s.start}, {"end", s.end}, {"text", surface}});
    }
    j["opinions"] = spans;
  }
  if (as_json) {
    out << j.dump() << '\n';
    return kExitOk;
  }

  std::string aspect_words;
  for (std::size_t i = aspect.start; i < aspect.end; ++i) aspect_words += (i > aspect.start ? " " : "") + tokens[i];
  out << "aspect     " << aspect_words << " [" << aspect.start << ", " << aspect.end << ")\n";
  if (p.sentiment) out << "sentiment  " << to_string(*p.sentiment) << '\n';
  if (!p.tags.empty()) {
    out << "opinions  ";
    if (spans.empty()) out << " (none)";
    for (const auto& s : spans) {
      out << " \"" << s["text"].get<std::string>() << "\" [" << s["start"] << ", " << s["end"] << ")";
    }
    out << '\n';
  }
  out << std::fixed << std::setprecision(3);
  const bool has_p = !p.p.empty();
  if (p.sentiment || has_p) {
    out << "\n" << std::left << std::setw(16) << "token" << std::right << std::setw(8) << "alpha";
    if (has_p) out << std::setw(8) << "p";
    out << '\n';
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      out << std::left << std::setw(16) << tokens[i] << std::right << std::setw(8);
      if (p.alpha.empty()) out << "-"; else out << p.alpha[i];
      if (has_p) out << std::setw(8) << p.p[i];
      out << '\n';
    }
  }
  return kExitOk;
}

struct TrainFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> max_epochs;
  std::optional<std::string> out;
  std::optional<std::string> alsc_train, alsc_test, aowe_train, aowe_test, embeddings;
  bool no_aowe2alsc = false;
  bool no_alsc2aowe = false;
  bool alsc_only = false;
  bool aowe_only = false;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config, "JSON configuration with flat dotted keys")->required();
    cmd.add_option("--seed", seed, "base random seed");
    cmd.add_option("--runs", runs, "number of repeated runs");
    cmd.add_option("--max-epochs", max_epochs, "epoch limit");
    cmd.add_option("--out", out, "output directory");
    cmd.add_option("--alsc-train", alsc_train, "ALSC training set (JSON lines)");
    cmd.add_option("--alsc-test", alsc_test, "ALSC test set");
    cmd.add_option("--aowe-train", aowe_train, "AOWE training set");
    cmd.add_option("--aowe-test", aowe_test, "AOWE test set");
    cmd.add_option("--embeddings", embeddings, "word vectors, text format");
    cmd.add_flag("--no-aowe2alsc", no_aowe2alsc, "disable the AOWE to ALSC transmission");
    cmd.add_flag("--no-alsc2aowe", no_alsc2aowe, "disable the ALSC to AOWE transmission");
    auto* a = cmd.add_flag("--alsc-only", alsc_only, "train only the sentiment task");
    auto* o = cmd.add_flag("--aowe-only", aowe_only, "train only the opinion tagging task");
    a->excludes(o);
  }

  RunConfig resolve() const {
    RunConfig c = load_run_config(config);
    if (seed) c.train.seed = *seed;
    if (runs) c.train.num_runs = *runs;
    if (max_epochs) c.train.max_epochs = *max_epochs;
    if (out) c.out_dir = *out;
    if (alsc_train) c.alsc_train = *alsc_train;
    if (alsc_test) c.alsc_test = *alsc_test;
    if (aowe_train) c.aowe_train = *aowe_train;
    if (aowe_test) c.aowe_test = *aowe_test;
    if (embeddings) c.embeddings = *embeddings;
    if (no_aowe2alsc) c.model.enable_aowe2alsc = false;
    if (no_alsc2aowe) c.model.enable_alsc2aowe = false;
    if (alsc_only) c.model.enable_aowe_task = false;
    if (aowe_only) c.model.enable_alsc_task = false;
    return c;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Opinion Transmission Network: aspect sentiment and opinion word extraction"};
  app.name("otn");
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train, then report test metrics");
  train_flags.attach(*train);

  TrainFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate", "train the five ablation configurations");
  ablate_flags.attach(*ablate);

  std::string checkpoint;
  std::optional<std::string> eval_alsc, eval_aowe, eval_out;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--alsc-test", eval_alsc, "ALSC dataset");
  eval->add_option("--aowe-test", eval_aowe, "AOWE dataset");
  eval->add_option("--out", eval_out, "directory for eval_report.json/.txt");

  std::string sentence, aspect;
  bool as_json = false;
  auto* pred = app.add_subcommand("predict", "tag one sentence");
  pred->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  pred->add_option("--tokens", sentence, "whitespace-separated tokens")->required();
  pred->add_option("--aspect", aspect, "aspect tokens as START:END (end exclusive)")->required();
  pred->add_flag("--json", as_json, "print JSON");

  std::vector<std::string> argv_storage{"otn"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << "error: " << e.what() << "\n\n" << sub->help();
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(train_flags.resolve(), out, err);
    if (ablate->parsed()) return cmd_ablate(ablate_flags.resolve(), out, err);
    const auto opt_path = [](const std::optional<std::string>& s) -> std::optional<fs::path> {
      if (!s) return std::nullopt;
      return fs::path(*s);
    };
    if (eval->parsed()) return cmd_eval(checkpoint, opt_path(eval_alsc), opt_path(eval_aowe), opt_path(eval_out), out);
    if (pred->parsed()) return cmd_predict(checkpoint, sentence, aspect, as_json, out);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    // Configuration, parse, checkpoint and file errors.
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace otn
