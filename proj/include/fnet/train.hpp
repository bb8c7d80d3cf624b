#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fnet/adam.hpp"
#include "fnet/dataset.hpp"
#include "fnet/model.hpp"

namespace fnet {

struct TrainConfig {
  ModelSpec spec;
  std::optional<FilterName> filter;
  std::size_t epochs = 15;
  double validation_fraction = 0.3;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  std::uint64_t seed = 42;
  std::string data_source;  // echoed into the report only

  void validate() const;
};

/// Every random stream of a run, derived from TrainConfig::seed by name.
struct RunSeeds {
  std::uint64_t init, split, shuffle, dropout;
  static RunSeeds from(std::uint64_t seed);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_accuracy = 0, train_loss = 0;
  double val_accuracy = 0, val_loss = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  TrainConfig config;
  std::vector<EpochRecord> history;
  double train_seconds = 0;
  std::optional<double> test_accuracy, test_loss;
  std::uint64_t optimizer_steps = 0;
};

struct EvalResult {
  double accuracy = 0;
  double loss = 0;
  std::vector<int> labels;
  std::vector<int> predictions;
};

/// Eval-mode pass over every example, in cache order.
EvalResult evaluate(const ModelSpec& spec, const Params& params, const ExampleCache& data,
                    std::size_t batch_size = 32);

/// Train / validation partition of the manifest's train split plus its test split.
struct TrainData {
  ExampleCache train;
  ExampleCache validation;
  std::optional<ExampleCache> test;

  static TrainData from_manifest(const Manifest& m, const TrainConfig& config);
};

/// Weights and optimizer moments of a run in progress; survives across
/// calls to train_epochs so a run can be resumed.
struct TrainState {
  Params params;
  AdamState adam;
  std::size_t epochs_done = 0;

  static TrainState fresh(const TrainConfig& config);
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Runs `epochs` more epochs of minibatch Adam, each followed by full-pass
/// eval-mode metrics on the train and validation partitions.
std::vector<EpochRecord> train_epochs(const TrainConfig& config, const TrainData& data,
                                      TrainState& state, std::size_t epochs,
                                      const EpochCallback& on_epoch = {});

struct TrainResult {
  TrainReport report;
  Params params;
};

TrainResult train(const TrainConfig& config, const TrainData& data,
                  const EpochCallback& on_epoch = {});
TrainResult train(const TrainConfig& config, const Manifest& manifest,
                  const EpochCallback& on_epoch = {});

/// `epoch,train_acc,train_loss,val_acc,val_loss`, fixed 6 decimals.
std::string history_csv(const std::vector<EpochRecord>& history);
std::vector<EpochRecord> parse_history_csv(const std::string& text);
/// JSON with keys epochs, history, train_seconds, test_accuracy, test_loss, config.
std::string report_json(const TrainReport& report);

}  // namespace fnet
