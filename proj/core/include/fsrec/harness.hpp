#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fsrec/trainer.hpp"

namespace fsrec::harness {

struct ExperimentConfig {
  std::string task = "rank";  // "interact" or "rank"
  std::string store_path;     // optional for rank; interact falls back to split union
  std::string splits_dir;
  std::map<std::string, std::string> variants;  // variant name -> embedding dir
  std::vector<std::string> models;
  std::vector<std::string> modes;  // rank only: random|fixed|fine-tuned
  std::size_t repetitions = 10;
  std::uint64_t base_seed = 42;
  std::vector<std::size_t> k_list = {10, 100};
  std::string candidate_policy = "full";
  nn::OptimizerConfig optimizer;
  // Per-model full configs, resolved against the base optimizer at load.
  std::map<std::string, nn::OptimizerConfig> optimizer_overrides;
  std::size_t random_dim = 64;
  std::size_t neg_per_pos = 4;
  bool resample_negatives = false;
  std::vector<std::size_t> mlp_hidden = {256, 64};
  double bpr_lambda = 0.01;
  bool bpr_item_bias = false;
  std::size_t workers = 0;  // 0 = hardware concurrency
  // Wall-clock is always measured but only serialized when asked, keeping
  // default reports byte-reproducible.
  bool include_timing = false;

  nn::OptimizerConfig optimizer_for(const std::string& model) const;
  void validate() const;

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct RepetitionRecord {
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
  bool diverged = false;
  std::string divergence_reason;
  // Nonempty when the repetition crashed outright (distinct from training
  // divergence, which still counts as completed).
  std::string error;
  std::size_t epochs_run = 0;
};

struct CellReport {
  std::string task;
  std::string model;
  std::string variant;  // "-" when the cell uses no embeddings (random mode)
  std::string mode;     // "-" for interact cells
  bool baseline = false;
  std::vector<RepetitionRecord> repetitions;
  std::size_t completed = 0;       // repetitions that converged
  std::size_t diverged_count = 0;
  std::size_t error_count = 0;
  // Means over completed repetitions only; empty when none completed.
  std::map<std::string, double> mean_metrics;
  // 100 * cell_mean / baseline_mean against the same model's random cell.
  std::map<std::string, double> improvement_pct;
  double wall_clock_seconds = 0.0;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<CellReport> cells;
  bool all_cells_completed = true;  // every cell produced a record
};

// Ratio percentage, the baseline row reading 100.
double improvement_pct(double cell_value, double baseline_value);
// Cells at or above this ratio get emphasis in the markdown table.
inline constexpr double kImprovementFlagThreshold = 200.0;

// Runs every cell x repetition with repetition seeds = base seed + index.
// A diverged repetition is recorded, never fatal; missing inputs are fatal
// before any training starts.
RunReport run_experiment(const ExperimentConfig& config);

enum class ReportFormat { kJson, kCsv, kMarkdown };
ReportFormat report_format_from_string(const std::string& name);
// Infers from the extension: .json, .csv, anything else -> markdown.
ReportFormat report_format_for_path(const std::filesystem::path& path);

// JSON and CSV carry unrounded doubles; markdown rounds to 3 decimals and
// integer percentages.
void emit_report(const RunReport& report, ReportFormat format,
                 const std::filesystem::path& path);
std::string render_report(const RunReport& report, ReportFormat format);

}  // namespace fsrec::harness
