#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sesame/data.hpp"
#include "sesame/encoder.hpp"

namespace sesame {

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  ModelConfig model;

  nlohmann::json to_json() const;
};

struct Metrics {
  nlohmann::json config;
  std::vector<double> per_step_loss;
  std::vector<std::pair<std::string, double>> split_accuracies;
  std::optional<HeuristicTable> heuristic_table;
  // Mean excitation weight per layer over the last evaluated split; all ones
  // when SE is disabled.
  std::vector<double> layer_weights;

  nlohmann::json to_json() const;
};

nlohmann::json heuristic_table_json(const HeuristicTable& table);

// Adam with bias correction. Accepts learning_rate == 0, which is exactly
// the identity update.
class Adam {
 public:
  Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  void step(ModelParams& params, const std::vector<Tensor>& gradients);
  std::size_t steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct TrainResult {
  ModelParams params;
  Metrics metrics;
};

// Deterministic given (cfg, data): initializes from cfg.seed, shuffles per
// epoch from a fork of it, accumulates mean cross-entropy per batch, applies
// Adam. Throws DivergenceError with the step index if the loss goes
// non-finite.
TrainResult train(const TrainConfig& cfg,
                  const std::vector<DiagnosticCase>& train_data,
                  const std::vector<DiagnosticCase>* dev_data = nullptr);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::size_t> predictions;
  std::optional<HeuristicTable> heuristic_table;  // present when cases are tagged
  std::vector<double> mean_excitation;
};

EvalResult evaluate(const ModelParams& params,
                    const std::vector<DiagnosticCase>& split);

struct SweepCell {
  double sigma = 0.0;
  bool failed = false;
  std::string error;
  double dev_accuracy = 0.0;
  std::optional<TrainResult> result;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  int best_index = -1;  // -1 when every cell failed

  std::string summary_csv() const;  // header sigma,status,dev_accuracy,best
};

extern const std::vector<double> kPaperSigmaGrid;  // {1e-2, 1e-1, 3e-1, 5e-1}

// Trains one model per sigma; cell i runs with seed cfg.seed + i. Failures
// are isolated into their cells. Best cell = highest dev accuracy, ties
// broken by smaller sigma. `threads` caps concurrent cells.
SweepResult sigma_sweep(const TrainConfig& cfg,
                        const std::vector<DiagnosticCase>& train_data,
                        const std::vector<DiagnosticCase>& dev_data,
                        const std::vector<double>& grid = kPaperSigmaGrid,
                        std::size_t threads = 1);

}  // namespace sesame
