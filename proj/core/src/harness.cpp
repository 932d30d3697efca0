#include "fsrec/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <thread>

#include "fsrec/corpus.hpp"
#include "fsrec/directrec.hpp"
#include "fsrec/embed.hpp"
#include "fsrec/interact.hpp"
#include "fsrec/thread_pool.hpp"
#include "jsonl_util.hpp"

namespace fsrec::harness {

using detail::ordered_json;

namespace {

nn::OptimizerConfig merge_optimizer(nn::OptimizerConfig base, const ordered_json& in) {
  if (in.contains("kind")) base.kind = in["kind"].get<std::string>();
  if (in.contains("learning_rate")) base.learning_rate = in["learning_rate"].get<double>();
  if (in.contains("momentum")) base.momentum = in["momentum"].get<double>();
  if (in.contains("weight_decay")) base.weight_decay = in["weight_decay"].get<double>();
  if (in.contains("batch_size")) base.batch_size = in["batch_size"].get<std::size_t>();
  if (in.contains("epochs")) base.epochs = in["epochs"].get<std::size_t>();
  if (in.contains("seed")) base.seed = in["seed"].get<std::uint64_t>();
  base.validate();
  return base;
}

ordered_json optimizer_to_json(const nn::OptimizerConfig& config) {
  return ordered_json::parse(config.to_json());
}

}  // namespace

nn::OptimizerConfig ExperimentConfig::optimizer_for(const std::string& model) const {
  auto it = optimizer_overrides.find(model);
  return it == optimizer_overrides.end() ? optimizer : it->second;
}

void ExperimentConfig::validate() const {
  if (task != "interact" && task != "rank") {
    throw std::invalid_argument("task must be 'interact' or 'rank'");
  }
  if (repetitions == 0) throw std::invalid_argument("repetitions must be >= 1");
  if (models.empty()) throw std::invalid_argument("at least one model required");
  if (splits_dir.empty()) throw std::invalid_argument("splits path required");
  optimizer.validate();
  for (const auto& [_, override_config] : optimizer_overrides) override_config.validate();

  if (task == "interact") {
    if (variants.empty()) {
      throw std::invalid_argument("interact task needs at least one embedding variant");
    }
    for (const auto& model : models) interact::classifier_kind_from_string(model);
  } else {
    if (modes.empty()) throw std::invalid_argument("rank task needs at least one mode");
    for (const auto& model : models) directrec::model_kind_from_string(model);
    bool needs_variants = false;
    for (const auto& mode : modes) {
      auto parsed = directrec::injection_mode_from_string(mode);
      if (parsed.source == directrec::InjectionMode::Source::kInjected) {
        needs_variants = true;
      }
    }
    if (needs_variants && variants.empty()) {
      throw std::invalid_argument("injected modes need at least one embedding variant");
    }
    if (k_list.empty()) throw std::invalid_argument("rank task needs a k list");
    directrec::CandidatePolicy::parse(candidate_policy);
  }
}

std::string ExperimentConfig::to_json() const {
  ordered_json out;
  out["task"] = task;
  out["store"] = store_path;
  out["splits"] = splits_dir;
  out["variants"] = variants;
  out["models"] = models;
  out["modes"] = modes;
  out["repetitions"] = repetitions;
  out["base_seed"] = base_seed;
  out["k"] = k_list;
  out["candidate_policy"] = candidate_policy;
  out["optimizer"] = optimizer_to_json(optimizer);
  ordered_json overrides = ordered_json::object();
  for (const auto& [model, override_config] : optimizer_overrides) {
    overrides[model] = optimizer_to_json(override_config);
  }
  out["optimizer_overrides"] = std::move(overrides);
  out["random_dim"] = random_dim;
  out["neg_per_pos"] = neg_per_pos;
  out["resample_negatives"] = resample_negatives;
  out["mlp_hidden"] = mlp_hidden;
  out["bpr_lambda"] = bpr_lambda;
  out["bpr_item_bias"] = bpr_item_bias;
  out["workers"] = workers;
  out["include_timing"] = include_timing;
  return out.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  ordered_json in = ordered_json::parse(text);
  ExperimentConfig config;
  if (in.contains("task")) config.task = in["task"].get<std::string>();
  if (in.contains("store")) config.store_path = in["store"].get<std::string>();
  if (in.contains("splits")) config.splits_dir = in["splits"].get<std::string>();
  if (in.contains("variants")) {
    config.variants = in["variants"].get<std::map<std::string, std::string>>();
  }
  if (in.contains("models")) config.models = in["models"].get<std::vector<std::string>>();
  if (in.contains("modes")) config.modes = in["modes"].get<std::vector<std::string>>();
  if (in.contains("repetitions")) config.repetitions = in["repetitions"].get<std::size_t>();
  if (in.contains("base_seed")) config.base_seed = in["base_seed"].get<std::uint64_t>();
  if (in.contains("k")) config.k_list = in["k"].get<std::vector<std::size_t>>();
  if (in.contains("candidate_policy")) {
    config.candidate_policy = in["candidate_policy"].get<std::string>();
  }
  if (in.contains("optimizer")) {
    config.optimizer = merge_optimizer(nn::OptimizerConfig{}, in["optimizer"]);
  }
  if (in.contains("optimizer_overrides")) {
    for (const auto& [model, override_json] : in["optimizer_overrides"].items()) {
      config.optimizer_overrides[model] = merge_optimizer(config.optimizer, override_json);
    }
  }
  if (in.contains("random_dim")) config.random_dim = in["random_dim"].get<std::size_t>();
  if (in.contains("neg_per_pos")) config.neg_per_pos = in["neg_per_pos"].get<std::size_t>();
  if (in.contains("resample_negatives")) {
    config.resample_negatives = in["resample_negatives"].get<bool>();
  }
  if (in.contains("mlp_hidden")) {
    config.mlp_hidden = in["mlp_hidden"].get<std::vector<std::size_t>>();
  }
  if (in.contains("bpr_lambda")) config.bpr_lambda = in["bpr_lambda"].get<double>();
  if (in.contains("bpr_item_bias")) config.bpr_item_bias = in["bpr_item_bias"].get<bool>();
  if (in.contains("workers")) config.workers = in["workers"].get<std::size_t>();
  if (in.contains("include_timing")) config.include_timing = in["include_timing"].get<bool>();
  config.validate();
  return config;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  auto stream = detail::open_input(path);
  std::string text((std::istreambuf_iterator<char>(stream)),
                   std::istreambuf_iterator<char>());
  return from_json(text);
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  auto stream = detail::open_output(path);
  stream << to_json() << "\n";
}

double improvement_pct(double cell_value, double baseline_value) {
  return 100.0 * cell_value / baseline_value;
}

namespace {

// Interactions reconstructed from the splits when no store file is given;
// review text is irrelevant for negative vetting.
InteractionStore union_store(const corpus::SplitBundle& splits) {
  InteractionStore store;
  for (const auto& [user_id, train] : splits.user_train) {
    for (const auto& interaction : train) store.add(interaction);
  }
  auto add_heldout = [&](const std::map<std::string, corpus::HeldOutEntry>& held) {
    for (const auto& [user_id, entry] : held) {
      store.add({user_id, entry.item_id, "", std::nullopt, entry.timestamp});
    }
  };
  add_heldout(splits.validation);
  add_heldout(splits.test);
  for (const auto& [item_id, train] : splits.item_train) {
    for (const auto& interaction : train) store.add(interaction);
  }
  return store;
}

struct ExperimentInputs {
  corpus::SplitBundle splits;
  InteractionStore store;
  std::map<std::string, std::pair<embed::EmbeddingSet, embed::EmbeddingSet>> variant_sets;
};

ExperimentInputs load_inputs(const ExperimentConfig& config) {
  ExperimentInputs inputs;
  inputs.splits = corpus::load_splits(config.splits_dir);
  if (!config.store_path.empty()) {
    inputs.store = corpus::load_store(config.store_path);
  } else if (config.task == "interact") {
    inputs.store = union_store(inputs.splits);
  }
  for (const auto& [name, dir] : config.variants) {
    embed::variant_from_string(name);
    inputs.variant_sets[name] = embed::load_variant(dir);
  }
  return inputs;
}

RepetitionRecord run_interact_rep(const ExperimentConfig& config,
                                  const ExperimentInputs& inputs,
                                  const std::string& model, const std::string& variant,
                                  const interact::PairSet* shared_pairs,
                                  std::uint64_t rep_seed) {
  RepetitionRecord record;
  record.seed = rep_seed;

  interact::PairSet local_pairs;
  const interact::PairSet* pairs = shared_pairs;
  if (pairs == nullptr) {
    const auto& [users, items] = inputs.variant_sets.at(variant);
    local_pairs = interact::build_pairs(inputs.splits, inputs.store, users, items, rep_seed);
    pairs = &local_pairs;
  }

  nn::OptimizerConfig optimizer = config.optimizer_for(model);
  optimizer.seed = rep_seed;
  interact::ClassifierOptions options;
  options.mlp_hidden = config.mlp_hidden;

  auto run = interact::train_eval_classifier(
      interact::classifier_kind_from_string(model), *pairs, optimizer, options);
  record.metrics["accuracy"] = run.metrics.accuracy;
  record.metrics["precision"] = run.metrics.precision;
  record.metrics["f1"] = run.metrics.f1;
  record.diverged = run.training.diverged;
  record.divergence_reason = run.training.divergence_reason;
  record.epochs_run = run.training.epochs_run;
  return record;
}

RepetitionRecord run_rank_rep(const ExperimentConfig& config,
                              const ExperimentInputs& inputs, const std::string& model,
                              const std::string& variant, const std::string& mode,
                              std::uint64_t rep_seed) {
  RepetitionRecord record;
  record.seed = rep_seed;

  auto kind = directrec::model_kind_from_string(model);
  auto injection = directrec::injection_mode_from_string(mode);
  directrec::ModelOptions options;
  options.random_dim = config.random_dim;
  options.mlp_hidden = config.mlp_hidden;
  options.bpr_lambda = config.bpr_lambda;
  options.bpr_item_bias = config.bpr_item_bias;

  const embed::EmbeddingSet* users = nullptr;
  const embed::EmbeddingSet* items = nullptr;
  if (injection.source == directrec::InjectionMode::Source::kInjected) {
    const auto& sets = inputs.variant_sets.at(variant);
    users = &sets.first;
    items = &sets.second;
  }
  auto ranking_model =
      directrec::init_model(kind, inputs.splits, users, items, injection, rep_seed, options);

  nn::OptimizerConfig optimizer = config.optimizer_for(model);
  optimizer.seed = rep_seed;
  nn::TrainResult training =
      kind == directrec::ModelKind::kBprMf
          ? directrec::bpr_train(ranking_model, optimizer)
          : directrec::ncf_train(ranking_model, optimizer, config.neg_per_pos);
  record.diverged = training.diverged;
  record.divergence_reason = training.divergence_reason;
  record.epochs_run = training.epochs_run;

  auto evaluation = directrec::evaluate(ranking_model, inputs.splits, config.k_list,
                                        directrec::CandidatePolicy::parse(config.candidate_policy),
                                        rep_seed);
  for (std::size_t k : config.k_list) {
    record.metrics["hr@" + std::to_string(k)] = evaluation.metrics.hr.at(k);
    record.metrics["mrr@" + std::to_string(k)] = evaluation.metrics.mrr.at(k);
  }
  return record;
}

void aggregate_cell(CellReport& cell) {
  std::map<std::string, double> sums;
  std::map<std::string, std::size_t> counts;
  for (const auto& record : cell.repetitions) {
    if (!record.error.empty()) {
      ++cell.error_count;
      continue;
    }
    if (record.diverged) {
      ++cell.diverged_count;
      continue;
    }
    ++cell.completed;
    for (const auto& [name, value] : record.metrics) {
      sums[name] += value;
      counts[name] += 1;
    }
  }
  for (const auto& [name, sum] : sums) {
    cell.mean_metrics[name] = sum / static_cast<double>(counts.at(name));
  }
}

struct CellPlan {
  std::string model;
  std::string variant;
  std::string mode;
  bool baseline = false;
};

std::vector<CellPlan> plan_cells(const ExperimentConfig& config) {
  std::vector<CellPlan> plan;
  if (config.task == "interact") {
    for (const auto& model : config.models) {
      for (const auto& [variant, _] : config.variants) {
        plan.push_back({model, variant, "-", false});
      }
    }
    return plan;
  }
  const bool has_random =
      std::find(config.modes.begin(), config.modes.end(), "random") != config.modes.end();
  for (const auto& model : config.models) {
    if (has_random) plan.push_back({model, "-", "random", true});
    for (const auto& [variant, _] : config.variants) {
      for (const auto& mode : config.modes) {
        if (mode == "random") continue;
        plan.push_back({model, variant, mode, false});
      }
    }
  }
  return plan;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentInputs inputs = load_inputs(config);

  RunReport report;
  report.config = config;

  std::size_t worker_count = config.workers > 0
                                 ? config.workers
                                 : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  ThreadPool pool(worker_count);

  // Interact negatives are fixed per experiment unless resampling is on;
  // the pair sets depend only on the variant, so share them across cells.
  std::map<std::string, interact::PairSet> shared_pairs;
  if (config.task == "interact" && !config.resample_negatives) {
    for (const auto& [variant, sets] : inputs.variant_sets) {
      shared_pairs[variant] = interact::build_pairs(inputs.splits, inputs.store,
                                                    sets.first, sets.second,
                                                    config.base_seed);
    }
  }

  for (const auto& plan : plan_cells(config)) {
    CellReport cell;
    cell.task = config.task;
    cell.model = plan.model;
    cell.variant = plan.variant;
    cell.mode = plan.mode;
    cell.baseline = plan.baseline;
    cell.repetitions.resize(config.repetitions);

    auto started = std::chrono::steady_clock::now();
    for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
      RepetitionRecord* slot = &cell.repetitions[rep];
      std::uint64_t rep_seed = config.base_seed + rep;
      pool.submit([&, slot, rep_seed]() {
        try {
          if (config.task == "interact") {
            const interact::PairSet* pairs = nullptr;
            auto it = shared_pairs.find(plan.variant);
            if (it != shared_pairs.end()) pairs = &it->second;
            *slot = run_interact_rep(config, inputs, plan.model, plan.variant, pairs,
                                     rep_seed);
          } else {
            *slot = run_rank_rep(config, inputs, plan.model, plan.variant, plan.mode,
                                 rep_seed);
          }
        } catch (const std::exception& e) {
          slot->seed = rep_seed;
          slot->error = e.what();
        }
      });
    }
    pool.wait_idle();
    cell.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    aggregate_cell(cell);
    if (cell.error_count > 0) report.all_cells_completed = false;
    report.cells.push_back(std::move(cell));
  }

  // Improvement ratios against the same model's random-embedding cell.
  if (config.task == "rank") {
    std::map<std::string, const CellReport*> baselines;
    for (const auto& cell : report.cells) {
      if (cell.baseline) baselines[cell.model] = &cell;
    }
    for (auto& cell : report.cells) {
      auto it = baselines.find(cell.model);
      if (it == baselines.end()) continue;
      for (const auto& [metric, mean] : cell.mean_metrics) {
        auto base = it->second->mean_metrics.find(metric);
        if (base == it->second->mean_metrics.end()) continue;
        cell.improvement_pct[metric] = improvement_pct(mean, base->second);
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Emission

namespace {

std::string full_precision(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string rounded(double value, int decimals) {
  if (!std::isfinite(value)) return "n/a";
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
  return buffer;
}

ordered_json report_to_json(const RunReport& report) {
  ordered_json out;
  out["task"] = report.config.task;
  out["config"] = ordered_json::parse(report.config.to_json());
  out["all_cells_completed"] = report.all_cells_completed;
  ordered_json cells = ordered_json::array();
  for (const auto& cell : report.cells) {
    ordered_json row;
    row["task"] = cell.task;
    row["model"] = cell.model;
    row["variant"] = cell.variant;
    row["mode"] = cell.mode;
    row["baseline"] = cell.baseline;
    ordered_json reps = ordered_json::array();
    for (const auto& record : cell.repetitions) {
      ordered_json rep;
      rep["seed"] = record.seed;
      rep["diverged"] = record.diverged;
      if (!record.divergence_reason.empty()) {
        rep["divergence_reason"] = record.divergence_reason;
      }
      if (!record.error.empty()) rep["error"] = record.error;
      rep["epochs_run"] = record.epochs_run;
      rep["metrics"] = record.metrics;
      reps.push_back(std::move(rep));
    }
    row["repetitions"] = std::move(reps);
    row["completed"] = cell.completed;
    row["diverged_count"] = cell.diverged_count;
    row["error_count"] = cell.error_count;
    row["mean"] = cell.mean_metrics;
    if (!cell.improvement_pct.empty()) row["improvement_pct"] = cell.improvement_pct;
    if (report.config.include_timing) {
      row["wall_clock_seconds"] = cell.wall_clock_seconds;
    }
    cells.push_back(std::move(row));
  }
  out["cells"] = std::move(cells);
  return out;
}

std::string render_csv(const RunReport& report) {
  std::string out =
      "task,model,variant,mode,baseline,metric,mean,improvement_pct,completed,"
      "diverged_count,error_count\n";
  for (const auto& cell : report.cells) {
    auto emit_row = [&](const std::string& metric, const std::string& mean,
                        const std::string& pct) {
      out += cell.task + "," + cell.model + "," + cell.variant + "," + cell.mode + "," +
             (cell.baseline ? "true" : "false") + "," + metric + "," + mean + "," + pct +
             "," + std::to_string(cell.completed) + "," +
             std::to_string(cell.diverged_count) + "," +
             std::to_string(cell.error_count) + "\n";
    };
    if (cell.mean_metrics.empty()) {
      emit_row("-", "", "");
      continue;
    }
    for (const auto& [metric, mean] : cell.mean_metrics) {
      auto pct_it = cell.improvement_pct.find(metric);
      std::string pct = pct_it != cell.improvement_pct.end() && std::isfinite(pct_it->second)
                            ? full_precision(pct_it->second)
                            : "";
      emit_row(metric, full_precision(mean), pct);
    }
  }
  return out;
}

std::string render_markdown(const RunReport& report) {
  const bool rank = report.config.task == "rank";
  std::set<std::string> metric_names;
  for (const auto& cell : report.cells) {
    for (const auto& [name, _] : cell.mean_metrics) metric_names.insert(name);
    for (const auto& record : cell.repetitions) {
      for (const auto& [name, _] : record.metrics) metric_names.insert(name);
    }
  }

  std::string out = "# Experiment report: " + report.config.task + "\n\n";
  out += "Repetitions: " + std::to_string(report.config.repetitions) +
         ", base seed: " + std::to_string(report.config.base_seed);
  if (rank) out += ", candidates: " + report.config.candidate_policy;
  out += "\n\n";

  out += "| Model | Variant | Mode |";
  for (const auto& name : metric_names) {
    out += " " + name + " |";
    if (rank) out += " " + name + " %baseline |";
  }
  out += " Completed | Diverged |\n";
  out += "|---|---|---|";
  for (std::size_t i = 0; i < metric_names.size() * (rank ? 2 : 1); ++i) out += "---|";
  out += "---|---|\n";

  for (const auto& cell : report.cells) {
    out += "| " + cell.model + " | " + cell.variant + " | " + cell.mode + " |";
    for (const auto& name : metric_names) {
      auto it = cell.mean_metrics.find(name);
      out += " " + (it == cell.mean_metrics.end() ? std::string("n/a")
                                                  : rounded(it->second, 3)) + " |";
      if (rank) {
        auto pct_it = cell.improvement_pct.find(name);
        if (pct_it == cell.improvement_pct.end() || !std::isfinite(pct_it->second)) {
          out += " n/a |";
        } else {
          long pct = std::lround(pct_it->second);
          std::string text = std::to_string(pct) + "%";
          // Emphasis mirrors the source tables' >= 200% highlighting.
          if (pct_it->second >= kImprovementFlagThreshold) text = "**" + text + "**";
          out += " " + text + " |";
        }
      }
    }
    out += " " + std::to_string(cell.completed) + " | " +
           std::to_string(cell.diverged_count) + " |\n";
  }

  std::string notes;
  for (const auto& cell : report.cells) {
    for (std::size_t rep = 0; rep < cell.repetitions.size(); ++rep) {
      const auto& record = cell.repetitions[rep];
      if (record.diverged) {
        notes += "- " + cell.model + "/" + cell.variant + "/" + cell.mode +
                 " repetition " + std::to_string(rep + 1) + ": " +
                 record.divergence_reason + "\n";
      }
      if (!record.error.empty()) {
        notes += "- " + cell.model + "/" + cell.variant + "/" + cell.mode +
                 " repetition " + std::to_string(rep + 1) + " failed: " + record.error +
                 "\n";
      }
    }
  }
  if (!notes.empty()) out += "\nNon-convergence notes:\n\n" + notes;
  if (report.config.include_timing) {
    out += "\nWall clock per cell (seconds):\n\n";
    for (const auto& cell : report.cells) {
      out += "- " + cell.model + "/" + cell.variant + "/" + cell.mode + ": " +
             rounded(cell.wall_clock_seconds, 3) + "\n";
    }
  }
  return out;
}

}  // namespace

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  throw std::invalid_argument("unknown report format '" + name + "'");
}

ReportFormat report_format_for_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext == ".json") return ReportFormat::kJson;
  if (ext == ".csv") return ReportFormat::kCsv;
  return ReportFormat::kMarkdown;
}

std::string render_report(const RunReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return report_to_json(report).dump(2) + "\n";
    case ReportFormat::kCsv: return render_csv(report);
    case ReportFormat::kMarkdown: return render_markdown(report);
  }
  throw std::logic_error("unreachable report format");
}

void emit_report(const RunReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
  auto stream = detail::open_output(path);
  stream << render_report(report, format);
}

}  // namespace fsrec::harness
