// Command-line pipeline driver: ingest -> split -> gen-prompts -> gen-reps
// -> embed -> distances / train-interact / train-rank / report.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsrec/corpus.hpp"
#include "fsrec/directrec.hpp"
#include "fsrec/embed.hpp"
#include "fsrec/harness.hpp"
#include "fsrec/interact.hpp"
#include "fsrec/prompt.hpp"
#include "fsrec/repgen.hpp"
#include "fsrec/semdist.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fsrec;

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream stream(text);
  std::string part;
  while (std::getline(stream, part, ',')) {
    if (part.empty()) continue;
    out.push_back(static_cast<std::size_t>(std::stoull(part)));
  }
  if (out.empty()) throw CLI::ValidationError("--k", "expected e.g. 10,100");
  return out;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string part;
  while (std::getline(stream, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

// emb/rep+bert -> "rep+bert"; validates the name.
std::string variant_name_from_dir(const std::string& dir) {
  fs::path path(dir);
  std::string name = path.filename().string();
  if (name.empty()) name = path.parent_path().filename().string();
  embed::variant_from_string(name);
  return name;
}

struct OptimizerFlags {
  nn::OptimizerConfig config;
  void attach(CLI::App* cmd) {
    cmd->add_option("--optimizer", config.kind, "sgd or momentum");
    cmd->add_option("--lr", config.learning_rate, "learning rate");
    cmd->add_option("--momentum", config.momentum, "momentum coefficient");
    cmd->add_option("--weight-decay", config.weight_decay, "L2 weight decay");
    cmd->add_option("--batch-size", config.batch_size, "minibatch size");
    cmd->add_option("--epochs", config.epochs, "training epochs");
  }
};

int emit_and_exit_code(const harness::RunReport& report, const std::string& out,
                       const std::string& format_override) {
  harness::ReportFormat format = format_override.empty()
                                     ? harness::report_format_for_path(out)
                                     : harness::report_format_from_string(format_override);
  harness::emit_report(report, format, out);
  std::cout << "wrote " << out << "\n";
  for (const auto& cell : report.cells) {
    std::cout << cell.model << "/" << cell.variant << "/" << cell.mode << ": completed "
              << cell.completed << "/" << cell.repetitions.size();
    if (cell.diverged_count > 0) std::cout << ", diverged " << cell.diverged_count;
    if (cell.error_count > 0) std::cout << ", errors " << cell.error_count;
    std::cout << "\n";
  }
  return report.all_cells_completed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot review-based recommendation pipeline"};
  app.require_subcommand(1);

  // ingest ------------------------------------------------------------------
  std::string in_path, in_format = "csv", store_out;
  auto* ingest = app.add_subcommand("ingest", "Parse a review log into a binary store");
  ingest->add_option("--in", in_path, "input csv/jsonl file")->required();
  ingest->add_option("--format", in_format, "csv or jsonl");
  ingest->add_option("--out", store_out, "store file to write")->required();

  // split -------------------------------------------------------------------
  std::string split_store, split_out, split_order = "newest-to-test";
  std::size_t cohort_n = 1000, cap = 5, item_cap = 10;
  std::uint64_t split_seed = 42;
  auto* split = app.add_subcommand("split", "Build leave-two-out few-shot splits");
  split->add_option("--store", split_store, "store file")->required();
  split->add_option("--cohort", cohort_n, "cohort size")->required();
  split->add_option("--cap", cap, "max train samples per user")->required();
  split->add_option("--item-cap", item_cap, "max samples per item");
  split->add_option("--seed", split_seed, "sampling seed");
  split->add_option("--order", split_order,
                    "newest-to-test (default) or newest-to-valid");
  split->add_option("--out", split_out, "output directory")->required();

  // gen-prompts --------------------------------------------------------------
  std::string gp_splits, gp_config, gp_out;
  auto* gen_prompts = app.add_subcommand("gen-prompts", "Assemble chat prompts");
  gen_prompts->add_option("--splits", gp_splits, "splits directory")->required();
  gen_prompts->add_option("--config", gp_config, "prompt config json (optional)");
  gen_prompts->add_option("--out", gp_out, "prompts jsonl")->required();

  // gen-reps -----------------------------------------------------------------
  std::string gr_prompts, gr_backend = "offline", gr_out, gr_cache;
  repgen::GenerationConfig gen_config;
  auto* gen_reps = app.add_subcommand("gen-reps", "Generate textual representations");
  gen_reps->add_option("--prompts", gr_prompts, "prompts jsonl")->required();
  gen_reps->add_option("--backend", gr_backend, "remote or offline");
  gen_reps->add_option("--out", gr_out, "representations jsonl")->required();
  gen_reps->add_option("--endpoint", gen_config.endpoint, "chat-completion endpoint");
  gen_reps->add_option("--model", gen_config.model_name, "model name");
  gen_reps->add_option("--temperature", gen_config.temperature, "sampling temperature");
  gen_reps->add_option("--max-in-flight", gen_config.max_in_flight,
                       "concurrent requests");
  gen_reps->add_option("--max-attempts", gen_config.max_attempts, "retry attempts");
  gen_reps->add_option("--timeout", gen_config.timeout_seconds, "request timeout (s)");
  gen_reps->add_option("--cache-dir", gr_cache, "response cache directory");
  gen_reps->add_flag("--strict", gen_config.strict,
                     "one reformat retry on nonconforming output");

  // embed ----------------------------------------------------------------
  std::string em_reps, em_splits, em_variant, em_backend = "fallback", em_out;
  std::string em_merge = "mean", em_normalize = "auto";
  embed::EmbedServiceConfig embed_service;
  std::size_t em_chunk = 500;
  auto* embed_cmd = app.add_subcommand("embed", "Embed representations or raw reviews");
  embed_cmd->add_option("--reps", em_reps, "representations jsonl (rep+* variants)");
  embed_cmd->add_option("--splits", em_splits, "splits directory")->required();
  embed_cmd->add_option("--variant", em_variant,
                        "rep+bert | raw+bert | rep+w2v | raw+w2v")->required();
  embed_cmd->add_option("--backend", em_backend, "remote or fallback");
  embed_cmd->add_option("--out", em_out, "embedding output directory")->required();
  embed_cmd->add_option("--endpoint", embed_service.endpoint, "embedding endpoint");
  embed_cmd->add_option("--model", embed_service.model_name, "embedding model name");
  embed_cmd->add_option("--batch-size", embed_service.batch_size, "texts per request");
  embed_cmd->add_option("--chunk-limit", em_chunk, "units per raw-review chunk");
  embed_cmd->add_option("--merge", em_merge, "chunk merge: mean, sum, or max");
  embed_cmd->add_option("--normalize", em_normalize, "auto, always, or never");

  // distances ------------------------------------------------------------
  std::string da_dir, db_dir, dist_out;
  bool dist_breakdown = false;
  auto* distances = app.add_subcommand("distances", "Compare two embedding variants");
  distances->add_option("--a", da_dir, "first variant directory")->required();
  distances->add_option("--b", db_dir, "second variant directory")->required();
  distances->add_option("--out", dist_out, "report json")->required();
  distances->add_flag("--per-subject", dist_breakdown, "keep per-subject rows");

  // train-interact ---------------------------------------------------------
  std::string ti_emb, ti_splits, ti_model = "mlp", ti_out, ti_store, ti_format;
  std::size_t ti_reps = 10;
  std::uint64_t ti_seed = 7;
  bool ti_resample = false, ti_timing = false;
  OptimizerFlags ti_optimizer;
  auto* train_interact =
      app.add_subcommand("train-interact", "Interaction-prediction experiment");
  train_interact->add_option("--emb", ti_emb, "embedding variant directory")->required();
  train_interact->add_option("--splits", ti_splits, "splits directory")->required();
  train_interact->add_option("--model", ti_model, "linear, mlp, or cnn");
  train_interact->add_option("--reps", ti_reps, "repetitions");
  train_interact->add_option("--seed", ti_seed, "base seed");
  train_interact->add_option("--out", ti_out, "report path")->required();
  train_interact->add_option("--store", ti_store,
                             "full store for negative vetting (default: split union)");
  train_interact->add_flag("--resample-negatives", ti_resample,
                           "fresh negatives per repetition");
  train_interact->add_flag("--timing", ti_timing, "serialize wall-clock numbers");
  train_interact->add_option("--format", ti_format, "json, csv, or markdown");
  ti_optimizer.attach(train_interact);

  // train-rank -------------------------------------------------------------
  std::string tr_model = "ncf-mlp", tr_mode = "fixed", tr_emb, tr_splits, tr_out;
  std::string tr_k = "10,100", tr_candidates = "full", tr_format;
  std::size_t tr_reps = 10, tr_random_dim = 64, tr_neg = 4;
  std::uint64_t tr_seed = 42;
  double tr_lambda = 0.01;
  bool tr_bias = false, tr_timing = false;
  OptimizerFlags tr_optimizer;
  auto* train_rank = app.add_subcommand("train-rank", "Direct-recommendation experiment");
  train_rank->add_option("--model", tr_model,
                         "bpr-mf, ncf-linear, ncf-mlp, or ncf-cnn");
  train_rank->add_option("--mode", tr_mode,
                         "comma list of random, fixed, fine-tuned");
  train_rank->add_option("--emb", tr_emb, "embedding variant directory");
  train_rank->add_option("--splits", tr_splits, "splits directory")->required();
  train_rank->add_option("--k", tr_k, "metric cutoffs, e.g. 10,100");
  train_rank->add_option("--reps", tr_reps, "repetitions");
  train_rank->add_option("--seed", tr_seed, "base seed");
  train_rank->add_option("--out", tr_out, "report path")->required();
  train_rank->add_option("--candidates", tr_candidates, "full or sampled:N");
  train_rank->add_option("--random-dim", tr_random_dim, "random-table width");
  train_rank->add_option("--neg-per-pos", tr_neg, "NCF negatives per positive");
  train_rank->add_option("--bpr-lambda", tr_lambda, "BPR L2 strength");
  train_rank->add_flag("--bpr-item-bias", tr_bias, "trainable per-item bias for BPR");
  train_rank->add_flag("--timing", tr_timing, "serialize wall-clock numbers");
  train_rank->add_option("--format", tr_format, "json, csv, or markdown");
  tr_optimizer.attach(train_rank);

  // report -----------------------------------------------------------------
  std::string rp_config, rp_out, rp_format;
  auto* report_cmd = app.add_subcommand("report", "Run a full experiment grid");
  report_cmd->add_option("--config", rp_config, "experiment config json")->required();
  report_cmd->add_option("--out", rp_out, "report path")->required();
  report_cmd->add_option("--format", rp_format, "json, csv, or markdown");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      auto result = corpus::ingest(in_path, corpus::parse_ingest_format(in_format));
      corpus::save_store(result.store, store_out);
      std::cout << "ingested " << result.store.size() << " interactions ("
                << result.store.user_count() << " users, " << result.store.item_count()
                << " items); skipped " << result.malformed_rows << " malformed, "
                << result.duplicate_rows << " duplicate rows\n";
      return 0;
    }

    if (*split) {
      if (split_order != "newest-to-test" && split_order != "newest-to-valid") {
        throw std::invalid_argument("--order must be newest-to-test or newest-to-valid");
      }
      auto store = corpus::load_store(split_store);
      auto cohort = corpus::select_cohort(store, cohort_n, split_seed);
      auto bundle = corpus::leave_two_out(store, cohort,
                                          split_order == "newest-to-test");
      bundle.user_train = corpus::fewshot_downsample(bundle.user_train, cap, split_seed);
      auto item_result =
          corpus::build_item_train(store, cohort, bundle, item_cap, split_seed);
      bundle.item_train = std::move(item_result.item_train);
      bundle.fallback_items = item_result.fallback_items;
      corpus::save_splits(bundle, split_out);
      auto violations = corpus::check_split_invariants(
          store, bundle, cap, item_cap, split_order == "newest-to-test");
      for (const auto& violation : violations) {
        std::cerr << "invariant violation: " << violation << "\n";
      }
      std::cout << "split " << bundle.user_train.size() << " users, "
                << bundle.item_train.size() << " items ("
                << bundle.dropped_users.size() << " users dropped, "
                << bundle.fallback_items << " fallback items)\n";
      return violations.empty() ? 0 : 1;
    }

    if (*gen_prompts) {
      auto splits = corpus::load_splits(gp_splits);
      prompt::PromptConfig config;
      if (!gp_config.empty()) config = prompt::load_prompt_config(gp_config);
      auto prompts = prompt::build_all_prompts(splits, config);
      prompt::save_prompts(prompts, gp_out);
      std::cout << "wrote " << prompts.size() << " prompts\n";
      return 0;
    }

    if (*gen_reps) {
      gen_config.cache_dir = gr_cache;
      auto prompts = prompt::load_prompts(gr_prompts);
      auto result = repgen::generate_all(prompts, gen_config,
                                         repgen::parse_backend(gr_backend));
      repgen::save_representations(result.representations, gr_out);
      std::cout << "wrote " << result.representations.size() << " representations ("
                << result.cache_hits << " cache hits, " << result.backend_calls
                << " backend calls)\n";
      for (const auto& deferred : result.deferred) {
        std::cerr << "deferred " << to_string(deferred.kind) << ":"
                  << deferred.subject_id << ": " << deferred.error << "\n";
      }
      return 0;
    }

    if (*embed_cmd) {
      auto splits = corpus::load_splits(em_splits);
      auto variant = embed::variant_from_string(em_variant);
      std::vector<repgen::TextualRepresentation> reps;
      if (embed::uses_representations(variant)) {
        if (em_reps.empty()) {
          throw std::invalid_argument("--reps is required for rep+* variants");
        }
        reps = repgen::load_representations(em_reps);
      }
      embed::EmbedOptions options;
      options.chunk_limit = em_chunk;
      options.merge = embed::merge_policy_from_string(em_merge);
      if (em_normalize == "always") options.normalize_override = true;
      else if (em_normalize == "never") options.normalize_override = false;
      else if (em_normalize != "auto") {
        throw std::invalid_argument("--normalize must be auto, always, or never");
      }

      embed::VariantResult result;
      if (em_backend == "fallback") {
        embed::HashEmbedder embedder;
        result = embed::build_variant(splits, reps, embedder, variant, options);
      } else if (em_backend == "remote") {
        embed::RemoteEmbedder embedder(embed_service);
        result = embed::build_variant(splits, reps, embedder, variant, options);
      } else {
        throw std::invalid_argument("--backend must be remote or fallback");
      }
      embed::save_variant(result, em_out);
      std::cout << "wrote " << result.users.size() << " user and " << result.items.size()
                << " item vectors under " << em_out << "/" << em_variant << "\n";
      for (const auto& missing : result.missing_subjects) {
        std::cerr << "missing " << missing << "\n";
      }
      return 0;
    }

    if (*distances) {
      auto [a_users, a_items] = embed::load_variant(da_dir);
      auto [b_users, b_items] = embed::load_variant(db_dir);
      auto users = semdist::compare_sets(a_users, b_users, dist_breakdown);
      auto items = semdist::compare_sets(a_items, b_items, dist_breakdown);
      semdist::save_report_pair(users, items, dist_out);
      std::cout << "users: n=" << users.n << " manhattan=" << users.mean_manhattan
                << " euclidean=" << users.mean_euclidean
                << " cosine=" << users.mean_cosine << "\n";
      std::cout << "items: n=" << items.n << " manhattan=" << items.mean_manhattan
                << " euclidean=" << items.mean_euclidean
                << " cosine=" << items.mean_cosine << "\n";
      return 0;
    }

    if (*train_interact) {
      harness::ExperimentConfig config;
      config.task = "interact";
      config.store_path = ti_store;
      config.splits_dir = ti_splits;
      std::string variant = variant_name_from_dir(ti_emb);
      config.variants[variant] = ti_emb;
      config.models = split_commas(ti_model);
      config.repetitions = ti_reps;
      config.base_seed = ti_seed;
      config.optimizer = ti_optimizer.config;
      config.resample_negatives = ti_resample;
      config.include_timing = ti_timing;
      auto report = harness::run_experiment(config);
      return emit_and_exit_code(report, ti_out, ti_format);
    }

    if (*train_rank) {
      harness::ExperimentConfig config;
      config.task = "rank";
      config.splits_dir = tr_splits;
      config.models = split_commas(tr_model);
      config.modes = split_commas(tr_mode);
      if (!tr_emb.empty()) {
        config.variants[variant_name_from_dir(tr_emb)] = tr_emb;
      }
      config.repetitions = tr_reps;
      config.base_seed = tr_seed;
      config.k_list = parse_k_list(tr_k);
      config.candidate_policy = tr_candidates;
      config.optimizer = tr_optimizer.config;
      config.random_dim = tr_random_dim;
      config.neg_per_pos = tr_neg;
      config.bpr_lambda = tr_lambda;
      config.bpr_item_bias = tr_bias;
      config.include_timing = tr_timing;
      auto report = harness::run_experiment(config);
      return emit_and_exit_code(report, tr_out, tr_format);
    }

    if (*report_cmd) {
      auto config = harness::ExperimentConfig::load(rp_config);
      auto report = harness::run_experiment(config);
      return emit_and_exit_code(report, rp_out, rp_format);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
