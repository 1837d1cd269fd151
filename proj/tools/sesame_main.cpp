#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sesame/checks.hpp"
#include "sesame/config.hpp"
#include "sesame/data.hpp"
#include "sesame/errors.hpp"
#include "sesame/rng.hpp"
#include "sesame/se_fusion.hpp"
#include "sesame/serialize.hpp"
#include "sesame/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sesame;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << content;
  out.flush();
  if (!out) throw FormatError("write failed: " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sigma_dir_name(double sigma) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "sigma_%g", sigma);
  return buf;
}

std::size_t sweep_threads() {
  const char* env = std::getenv("SESAME_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (end == env || *end != '\0' || v == 0) {
    std::cerr << "note: ignoring invalid SESAME_THREADS value '" << env
              << "', using 1\n";
    return 1;
  }
  return static_cast<std::size_t>(v);
}

json class_counts(const std::vector<DiagnosticCase>& cases) {
  std::size_t positive = 0;
  for (const DiagnosticCase& c : cases) {
    if (c.label == kLabelEntailment) ++positive;
  }
  json j;
  j["total"] = cases.size();
  j["label_1"] = positive;
  j["label_0"] = cases.size() - positive;
  return j;
}

json cell_counts(const std::vector<DiagnosticCase>& cases) {
  std::map<std::string, std::size_t> counts;
  for (const DiagnosticCase& c : cases) {
    if (c.heuristic == Heuristic::none) continue;
    counts[to_string(c.heuristic) + "/" + to_string(c.subset)]++;
  }
  json j;
  for (const auto& [cell, count] : counts) j[cell] = count;
  return j;
}

int cmd_gen_data(const std::string& task, std::uint64_t seed,
                 const fs::path& out, std::size_t train_count,
                 std::size_t dev_count, std::size_t per_cell) {
  fs::create_directories(out);
  json manifest;
  manifest["task"] = task;
  manifest["seed"] = seed;
  if (task == "local") {
    Rng base(seed);
    const auto train =
        gen_local_pattern_task(base.fork(10).seed(), train_count);
    const auto dev = gen_local_pattern_task(base.fork(11).seed(), dev_count);
    save_corpus(out / "train.tsv", train);
    save_corpus(out / "dev.tsv", dev);
    manifest["counts"]["train"] = class_counts(train);
    manifest["counts"]["dev"] = class_counts(dev);
  } else if (task == "hans-style") {
    const HansStyleCorpus corpus = gen_hans_style(seed, per_cell);
    save_corpus(out / "train.tsv", corpus.train);
    save_corpus(out / "dev.tsv", corpus.dev);
    save_corpus(out / "diagnostic.tsv", corpus.diagnostic);
    manifest["counts"]["train"] = class_counts(corpus.train);
    manifest["counts"]["dev"] = class_counts(corpus.dev);
    manifest["counts"]["diagnostic"] = class_counts(corpus.diagnostic);
    manifest["counts"]["diagnostic_cells"] = cell_counts(corpus.diagnostic);
  } else {
    throw ConfigError("unknown task '" + task +
                      "' (expected local or hans-style)");
  }
  write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "gen-data: wrote " << (out / "manifest.json").string() << "\n";
  return kExitOk;
}

Tensor weights_tensor(const std::vector<double>& weights) {
  return Tensor({weights.size()}, weights);
}

void write_run_outputs(const fs::path& dir, const RunConfig& cfg,
                       const TrainResult& result) {
  fs::create_directories(dir);
  write_text_file(dir / "metrics.json",
                  result.metrics.to_json().dump(2) + "\n");
  save_checkpoint(dir / "checkpoint.bin", result.params.named, cfg.to_json());
  if (!result.metrics.layer_weights.empty()) {
    write_layer_weight_csv(dir / "layer_weights.csv",
                           weights_tensor(result.metrics.layer_weights));
  }
}

int cmd_train(const fs::path& config_path) {
  RunConfig cfg = RunConfig::load(config_path, std::cerr);
  cfg.validate();
  if (cfg.train_data.empty()) {
    throw ConfigError("config: train_data is required for training");
  }
  const auto train_cases = load_corpus(cfg.train_data);
  std::vector<DiagnosticCase> dev_cases;
  if (!cfg.dev_data.empty()) dev_cases = load_corpus(cfg.dev_data);

  TrainResult result =
      train(cfg.train, train_cases, dev_cases.empty() ? nullptr : &dev_cases);
  write_run_outputs(cfg.out_dir, cfg, result);

  std::cout << "train: steps=" << result.metrics.per_step_loss.size();
  for (const auto& [split, acc] : result.metrics.split_accuracies) {
    std::cout << " " << split << "_accuracy=" << format_double(acc);
  }
  std::cout << "\n";
  return kExitOk;
}

ModelParams load_model(const RunConfig& cfg, const fs::path& checkpoint) {
  ModelParams params = ModelParams::init(cfg.train.model, cfg.train.seed);
  Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.tensors.size() != params.named.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(ck.tensors.size()) +
                      " tensors, model needs " +
                      std::to_string(params.named.size()));
  }
  for (auto& [name, tensor] : ck.tensors) {
    if (!params.has(name)) {
      throw ConfigError("checkpoint tensor '" + name +
                        "' has no matching model parameter");
    }
    Tensor& target = params.get(name);
    if (!target.same_shape(tensor)) {
      throw ConfigError("checkpoint tensor '" + name + "' has shape " +
                        tensor.shape_str() + " but the configured model needs " +
                        target.shape_str());
    }
    target = std::move(tensor);
  }
  return params;
}

int cmd_eval(const fs::path& config_path, const fs::path& checkpoint) {
  RunConfig cfg = RunConfig::load(config_path, std::cerr);
  cfg.validate();
  if (cfg.eval_data.empty()) {
    throw ConfigError("config: eval_data is required for evaluation");
  }
  const auto cases = load_corpus(cfg.eval_data);
  const ModelParams params = load_model(cfg, checkpoint);
  const EvalResult result = evaluate(params, cases);

  Metrics metrics;
  metrics.config = cfg.to_json();
  metrics.split_accuracies.emplace_back("eval", result.accuracy);
  metrics.heuristic_table = result.heuristic_table;
  metrics.layer_weights = result.mean_excitation;
  fs::create_directories(cfg.out_dir);
  write_text_file(fs::path(cfg.out_dir) / "eval_metrics.json",
                  metrics.to_json().dump(2) + "\n");
  if (result.heuristic_table) {
    write_text_file(fs::path(cfg.out_dir) / "heuristic_table.csv",
                    heuristic_table_csv(*result.heuristic_table));
  }
  if (!result.mean_excitation.empty()) {
    write_layer_weight_csv(fs::path(cfg.out_dir) / "layer_weights.csv",
                           weights_tensor(result.mean_excitation));
  }
  std::cout << "eval: accuracy=" << format_double(result.accuracy) << "\n";
  return kExitOk;
}

int cmd_sweep(const fs::path& config_path) {
  RunConfig cfg = RunConfig::load(config_path, std::cerr);
  cfg.validate();
  if (cfg.train_data.empty() || cfg.dev_data.empty()) {
    throw ConfigError("config: sweep needs train_data and dev_data");
  }
  const auto train_cases = load_corpus(cfg.train_data);
  const auto dev_cases = load_corpus(cfg.dev_data);

  const SweepResult result = sigma_sweep(cfg.train, train_cases, dev_cases,
                                         kPaperSigmaGrid, sweep_threads());

  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  for (const SweepCell& cell : result.cells) {
    const fs::path cell_dir = out / sigma_dir_name(cell.sigma);
    fs::create_directories(cell_dir);
    if (cell.failed) {
      write_text_file(cell_dir / "error.txt", cell.error + "\n");
      continue;
    }
    RunConfig cell_cfg = cfg;
    cell_cfg.train.model.sigma = cell.sigma;
    cell_cfg.train.seed = cfg.train.seed +
                          (&cell - result.cells.data());
    write_run_outputs(cell_dir, cell_cfg, *cell.result);
  }
  write_text_file(out / "sweep_summary.csv", result.summary_csv());

  if (result.best_index < 0) {
    std::cout << "sweep: every cell failed\n";
  } else {
    const SweepCell& best =
        result.cells[static_cast<std::size_t>(result.best_index)];
    std::cout << "sweep: best sigma=" << format_double(best.sigma)
              << " dev_accuracy=" << format_double(best.dev_accuracy) << "\n";
  }
  return kExitOk;
}

int cmd_gradcheck(const std::string& scope, double h, double inject_fault) {
  const GradCheckReport report = run_scope_check(scope, h, inject_fault);
  std::cout << "scope=" << scope
            << " max_relative_error=" << format_double(report.max_relative_error)
            << " worst=" << report.worst_parameter << "["
            << report.worst_index << "]"
            << " analytic=" << format_double(report.analytic)
            << " numeric=" << format_double(report.numeric)
            << " evaluations=" << report.evaluations << "\n";
  if (report.max_relative_error < 1e-4) return kExitOk;
  std::cerr << "gradcheck failed: parameter " << report.worst_parameter << "["
            << report.worst_index << "] relative error "
            << format_double(report.max_relative_error) << " >= 1e-4\n";
  return kExitCheckFailure;
}

int cmd_report(const fs::path& metrics_dir, fs::path out_dir) {
  if (!fs::is_directory(metrics_dir)) {
    throw ConfigError("not a directory: " + metrics_dir.string());
  }
  if (out_dir.empty()) out_dir = metrics_dir;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(metrics_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "metrics.json" || name == "eval_metrics.json") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw ConfigError("no metrics files under " + metrics_dir.string());
  }
  std::sort(files.begin(), files.end());

  std::string loss_csv = "run,step,loss\n";
  std::string bars_csv = "run,heuristic,subset,accuracy,count\n";
  std::string weights_csv = "run,layer,weight\n";
  for (const fs::path& file : files) {
    std::ifstream in(file);
    json metrics;
    try {
      in >> metrics;
    } catch (const json::exception& e) {
      throw FormatError("bad metrics file " + file.string() + ": " + e.what());
    }
    const std::string run =
        fs::relative(file, metrics_dir).generic_string();
    if (metrics.contains("per_step_loss")) {
      std::size_t step = 0;
      for (const auto& loss : metrics["per_step_loss"]) {
        loss_csv += run + "," + std::to_string(step++) + "," +
                    format_double(loss.get<double>()) + "\n";
      }
    }
    if (metrics.contains("heuristic_table") &&
        metrics["heuristic_table"].is_object()) {
      for (const auto& [heuristic, row] : metrics["heuristic_table"].items()) {
        for (const auto& [subset, cell] : row.items()) {
          bars_csv += run + "," + heuristic + "," + subset + "," +
                      format_double(cell["accuracy"].get<double>()) + "," +
                      std::to_string(cell["count"].get<std::size_t>()) + "\n";
        }
      }
    }
    if (metrics.contains("layer_weights")) {
      std::size_t layer = 1;
      for (const auto& w : metrics["layer_weights"]) {
        weights_csv += run + "," + std::to_string(layer++) + "," +
                       format_double(w.get<double>()) + "\n";
      }
    }
  }
  fs::create_directories(out_dir);
  write_text_file(out_dir / "loss_curves.csv", loss_csv);
  write_text_file(out_dir / "heuristic_bars.csv", bars_csv);
  write_text_file(out_dir / "layer_weights.csv", weights_csv);
  std::cout << "report: " << files.size() << " runs -> 3 CSVs in "
            << out_dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toy transformer encoder with squeeze-excitation layer fusion "
               "and Gaussian-blur locality modeling"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  std::string gen_task;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  std::size_t gen_train_count = 400, gen_dev_count = 200, gen_per_cell = 32;
  gen->add_option("--task", gen_task, "local or hans-style")->required();
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--train-count", gen_train_count,
                  "Training sequences (local task)");
  gen->add_option("--dev-count", gen_dev_count, "Dev sequences (local task)");
  gen->add_option("--per-cell", gen_per_cell,
                  "Diagnostic cases per heuristic/subset cell (hans-style)");

  auto* train_cmd = app.add_subcommand("train", "Train one model");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "Run config file")
      ->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_config, eval_checkpoint;
  eval_cmd->add_option("--config", eval_config, "Run config file")->required();
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")
      ->required();

  auto* sweep_cmd =
      app.add_subcommand("sweep", "Train across the sigma grid");
  std::string sweep_config;
  sweep_cmd->add_option("--config", sweep_config, "Run config file")
      ->required();

  auto* grad_cmd =
      app.add_subcommand("gradcheck", "Compare tape gradients with central "
                         "differences");
  std::string grad_scope;
  double grad_h = 1e-5, grad_fault = 0.0;
  grad_cmd->add_option("--scope", grad_scope, "blur, attention, se, or full")
      ->required();
  grad_cmd->add_option("--fd-step", grad_h, "Finite-difference step");
  grad_cmd->add_option("--inject-fault", grad_fault,
                       "Offset added to analytic gradients (self-test hook)");

  auto* report_cmd =
      app.add_subcommand("report", "Collect metrics files into plot CSVs");
  std::string report_dir, report_out;
  report_cmd->add_option("--metrics", report_dir, "Directory of metrics files")
      ->required();
  report_cmd->add_option("--out", report_out,
                         "CSV output directory (default: --metrics)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_data(gen_task, gen_seed, gen_out, gen_train_count,
                          gen_dev_count, gen_per_cell);
    }
    if (train_cmd->parsed()) return cmd_train(train_config);
    if (eval_cmd->parsed()) return cmd_eval(eval_config, eval_checkpoint);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_config);
    if (grad_cmd->parsed()) {
      return cmd_gradcheck(grad_scope, grad_h, grad_fault);
    }
    if (report_cmd->parsed()) return cmd_report(report_dir, report_out);
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const EvaluationError& e) {
    std::cerr << "error: " << e.what() << " (parameter " << e.parameter()
              << ")\n";
    return kExitCheckFailure;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailure;
  }
}
