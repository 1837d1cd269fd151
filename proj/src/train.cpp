#include "sesame/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "sesame/errors.hpp"
#include "sesame/ops.hpp"
#include "sesame/rng.hpp"

namespace sesame {

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["vocab"] = model.vocab;
  j["l_max"] = model.l_max;
  j["d"] = model.d;
  j["heads"] = model.h;
  j["layers"] = model.n_layers;
  j["classes"] = model.classes;
  j["blur_mode"] = to_string(model.blur_mode);
  j["kernel_k"] = model.k;
  j["sigma"] = model.sigma;
  j["normalize_kernel"] = model.normalize_kernel;
  j["se_enabled"] = model.se_enabled;
  j["se_ratio"] = model.se_ratio;
  j["se_bias"] = model.se_bias;
  j["pooling"] = to_string(model.pooling);
  j["mean_pool"] = model.mean_pool;
  return j;
}

nlohmann::json heuristic_table_json(const HeuristicTable& table) {
  const Heuristic heuristics[] = {Heuristic::lexical_overlap,
                                  Heuristic::subsequence,
                                  Heuristic::constituent};
  const Subset subsets[] = {Subset::heuristic_entailed,
                            Subset::heuristic_nonentailed};
  nlohmann::json j;
  for (Heuristic h : heuristics) {
    nlohmann::json row;
    for (Subset s : subsets) {
      const std::size_t hi = static_cast<std::size_t>(h) - 1;
      const std::size_t si = static_cast<std::size_t>(s) - 1;
      nlohmann::json cell;
      cell["accuracy"] = table.accuracy[hi][si];
      cell["count"] = table.count[hi][si];
      row[to_string(s)] = std::move(cell);
    }
    j[to_string(h)] = std::move(row);
  }
  return j;
}

nlohmann::json Metrics::to_json() const {
  nlohmann::json j;
  j["config"] = config;
  j["per_step_loss"] = per_step_loss;
  nlohmann::json acc;
  for (const auto& [split, value] : split_accuracies) acc[split] = value;
  j["split_accuracies"] = std::move(acc);
  j["heuristic_table"] =
      heuristic_table ? heuristic_table_json(*heuristic_table)
                      : nlohmann::json();
  j["layer_weights"] = layer_weights;
  return j;
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  if (lr_ < 0.0) throw ConfigError("adam: learning rate must be >= 0");
}

void Adam::step(ModelParams& params, const std::vector<Tensor>& gradients) {
  if (gradients.size() != params.named.size()) {
    throw DimensionError("adam: " + std::to_string(gradients.size()) +
                         " gradients for " +
                         std::to_string(params.named.size()) + " parameters");
  }
  if (m_.empty()) {
    for (const auto& [name, tensor] : params.named) {
      m_.emplace_back(tensor.shape());
      v_.emplace_back(tensor.shape());
    }
  }
  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.named.size(); ++p) {
    Tensor& theta = params.named[p].second;
    const Tensor& g = gradients[p];
    if (!g.same_shape(theta)) {
      throw DimensionError("adam: gradient " + g.shape_str() +
                           " does not match parameter '" +
                           params.named[p].first + "' " + theta.shape_str());
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g[i];
      v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m_[p][i] / correction1;
      const double v_hat = v_[p][i] / correction2;
      theta[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

TrainResult train(const TrainConfig& cfg,
                  const std::vector<DiagnosticCase>& train_data,
                  const std::vector<DiagnosticCase>* dev_data) {
  if (train_data.empty()) throw InputError("train: empty training split");
  if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.epochs == 0) throw ConfigError("train: epochs must be >= 1");
  cfg.model.validate();

  TrainResult result{ModelParams::init(cfg.model, cfg.seed), Metrics{}};
  result.metrics.config = cfg.to_json();

  Adam optimizer(cfg.learning_rate);
  Rng shuffle_rng = Rng(cfg.seed).fork(0x5F);
  std::vector<std::size_t> order(train_data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Tape tape;
      TapeModel model = TapeModel::bind(tape, result.params, true);
      std::vector<Value> losses;
      for (std::size_t b = start; b < end; ++b) {
        const DiagnosticCase& c = train_data[order[b]];
        losses.push_back(example_loss(model, c.model_input(), c.label));
      }
      Value loss = losses.size() == 1 ? losses.front()
                                      : mean_all(stack_scalars(losses));
      const double loss_value = loss.tensor()[0];
      result.metrics.per_step_loss.push_back(loss_value);
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("train: non-finite loss at step " +
                                  std::to_string(step),
                              step);
      }
      tape.backward(loss);
      std::vector<Tensor> gradients;
      gradients.reserve(model.named.size());
      for (const auto& [name, value] : model.named) {
        gradients.push_back(tape.grad(value));
      }
      optimizer.step(result.params, gradients);
      ++step;
    }
  }

  EvalResult train_eval = evaluate(result.params, train_data);
  result.metrics.split_accuracies.emplace_back("train", train_eval.accuracy);
  result.metrics.layer_weights = train_eval.mean_excitation;
  if (dev_data && !dev_data->empty()) {
    EvalResult dev_eval = evaluate(result.params, *dev_data);
    result.metrics.split_accuracies.emplace_back("dev", dev_eval.accuracy);
    result.metrics.layer_weights = dev_eval.mean_excitation;
  }
  return result;
}

EvalResult evaluate(const ModelParams& params,
                    const std::vector<DiagnosticCase>& split) {
  if (split.empty()) throw InputError("evaluate: empty split");
  EvalResult result;
  std::vector<double> excitation_sum(params.cfg.n_layers, 0.0);
  bool tagged = false;
  for (const DiagnosticCase& c : split) {
    Tensor excitation;
    result.predictions.push_back(
        predict(params, c.model_input(), &excitation));
    for (std::size_t k = 0; k < excitation.size(); ++k) {
      excitation_sum[k] += excitation[k];
    }
    if (c.heuristic != Heuristic::none) tagged = true;
  }
  result.accuracy = accuracy(result.predictions, split);
  if (tagged) {
    result.heuristic_table = score_by_heuristic(result.predictions, split);
  }
  for (double sum : excitation_sum) {
    result.mean_excitation.push_back(sum /
                                     static_cast<double>(split.size()));
  }
  return result;
}

const std::vector<double> kPaperSigmaGrid = {1e-2, 1e-1, 3e-1, 5e-1};

std::string SweepResult::summary_csv() const {
  std::string text = "sigma,status,dev_accuracy,best\n";
  char buf[128];
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const SweepCell& cell = cells[i];
    std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%d\n", cell.sigma,
                  cell.failed ? "failed" : "ok", cell.dev_accuracy,
                  static_cast<int>(i) == best_index ? 1 : 0);
    text += buf;
  }
  return text;
}

SweepResult sigma_sweep(const TrainConfig& cfg,
                        const std::vector<DiagnosticCase>& train_data,
                        const std::vector<DiagnosticCase>& dev_data,
                        const std::vector<double>& grid, std::size_t threads) {
  if (grid.empty()) throw ConfigError("sweep: empty sigma grid");
  if (dev_data.empty()) throw InputError("sweep: empty dev split");
  if (threads == 0) threads = 1;

  SweepResult result;
  result.cells.resize(grid.size());
  auto run_cell = [&](std::size_t i) {
    SweepCell& cell = result.cells[i];
    cell.sigma = grid[i];
    try {
      TrainConfig cell_cfg = cfg;
      cell_cfg.model.sigma = grid[i];
      cell_cfg.seed = cfg.seed + i;
      cell.result = train(cell_cfg, train_data, &dev_data);
      for (const auto& [split, value] :
           cell.result->metrics.split_accuracies) {
        if (split == "dev") cell.dev_accuracy = value;
      }
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
      cell.result.reset();
    }
  };

  for (std::size_t start = 0; start < grid.size(); start += threads) {
    const std::size_t end = std::min(grid.size(), start + threads);
    std::vector<std::thread> workers;
    for (std::size_t i = start; i < end; ++i) {
      workers.emplace_back(run_cell, i);
    }
    for (std::thread& w : workers) w.join();
  }

  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const SweepCell& cell = result.cells[i];
    if (cell.failed) continue;
    if (result.best_index < 0) {
      result.best_index = static_cast<int>(i);
      continue;
    }
    const SweepCell& best =
        result.cells[static_cast<std::size_t>(result.best_index)];
    if (cell.dev_accuracy > best.dev_accuracy ||
        (cell.dev_accuracy == best.dev_accuracy && cell.sigma < best.sigma)) {
      result.best_index = static_cast<int>(i);
    }
  }
  return result;
}

}  // namespace sesame
