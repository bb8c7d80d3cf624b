#include "fnet/train.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fnet/rng.hpp"

namespace fnet {

void TrainConfig::validate() const {
  spec.validate();
  if (epochs == 0) throw UsageError("epochs must be at least 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw UsageError("validation fraction must lie strictly between 0 and 1");
  }
  if (batch_size == 0) throw UsageError("batch size must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw UsageError("learning rate must be positive");
  }
}

RunSeeds RunSeeds::from(std::uint64_t seed) {
  return {derive_seed(seed, "init"), derive_seed(seed, "split"), derive_seed(seed, "shuffle"),
          derive_seed(seed, "dropout")};
}

EvalResult evaluate(const ModelSpec& spec, const Params& params, const ExampleCache& data,
                    std::size_t batch_size) {
  if (data.size() == 0) throw DataError("evaluate: no examples");
  if (batch_size == 0) throw UsageError("batch size must be at least 1");
  EvalResult r;
  r.labels.reserve(data.size());
  r.predictions.reserve(data.size());
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    const Batch b = data.gather(idx);
    const auto tr = model_forward(spec, params, b.images, Mode::Eval, 0);
    loss_sum += sparse_ce_loss(tr.output, b.labels).loss * static_cast<double>(idx.size());
    const auto pred = argmax_last_axis(tr.output);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      r.labels.push_back(b.labels[i]);
      r.predictions.push_back(static_cast<int>(pred[i]));
      if (static_cast<int>(pred[i]) == b.labels[i]) ++correct;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  r.loss = loss_sum / static_cast<double>(data.size());
  return r;
}

TrainData TrainData::from_manifest(const Manifest& m, const TrainConfig& config) {
  const auto split = split_train_val(m.of_split(Split::Train),
                                     {config.validation_fraction, RunSeeds::from(config.seed).split});
  const std::size_t side = config.spec.input_side;
  TrainData d{ExampleCache(split.train, config.filter, side),
              ExampleCache(split.validation, config.filter, side), std::nullopt};
  auto test = m.of_split(Split::Test);
  if (!test.empty()) d.test.emplace(std::move(test), config.filter, side);
  return d;
}

TrainState TrainState::fresh(const TrainConfig& config) {
  TrainState s;
  s.params = init_params(config.spec, RunSeeds::from(config.seed).init);
  s.adam = AdamState::fresh(s.params, AdamConfig{config.learning_rate});
  return s;
}

std::vector<EpochRecord> train_epochs(const TrainConfig& config, const TrainData& data,
                                      TrainState& state, std::size_t epochs,
                                      const EpochCallback& on_epoch) {
  config.validate();
  const RunSeeds seeds = RunSeeds::from(config.seed);
  std::vector<EpochRecord> out;
  for (std::size_t e = 0; e < epochs; ++e) {
    const std::size_t epoch = state.epochs_done;  // 0-based
    BatchStream stream(data.train, config.batch_size, mix64(seeds.shuffle, epoch));
    for (std::size_t bi = 0; bi < stream.count(); ++bi) {
      const Batch batch = stream.batch(bi);
      const auto step = loss_and_gradients(config.spec, state.params, batch.images, batch.labels,
                                           Mode::Train, mix64(seeds.dropout, state.adam.step));
      if (!std::isfinite(step.loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                           ", batch " + std::to_string(bi + 1));
      }
      adam_step(state.params, step.grads, state.adam);
    }
    state.epochs_done += 1;

    const EvalResult tr = evaluate(config.spec, state.params, data.train, config.batch_size);
    const EvalResult va = evaluate(config.spec, state.params, data.validation, config.batch_size);
    EpochRecord rec{state.epochs_done, tr.accuracy, tr.loss, va.accuracy, va.loss};
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
      throw NumericError("non-finite evaluation loss after epoch " + std::to_string(rec.epoch));
    }
    out.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return out;
}

TrainResult train(const TrainConfig& config, const TrainData& data, const EpochCallback& on_epoch) {
  config.validate();
  TrainState state = TrainState::fresh(config);
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.config = config;
  report.history = train_epochs(config, data, state, config.epochs, on_epoch);
  report.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.optimizer_steps = state.adam.step;
  if (data.test) {
    const EvalResult te = evaluate(config.spec, state.params, *data.test, config.batch_size);
    report.test_accuracy = te.accuracy;
    report.test_loss = te.loss;
  }
  return {std::move(report), std::move(state.params)};
}

TrainResult train(const TrainConfig& config, const Manifest& manifest,
                  const EpochCallback& on_epoch) {
  config.validate();
  return train(config, TrainData::from_manifest(manifest, config), on_epoch);
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_acc,train_loss,val_acc,val_loss\n";
  char line[160];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_accuracy,
                  r.train_loss, r.val_accuracy, r.val_loss);
    out += line;
  }
  return out;
}

std::vector<EpochRecord> parse_history_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,train_acc,train_loss,val_acc,val_loss", 0) != 0) {
    throw DataError("history CSV: missing or unexpected header");
  }
  std::vector<EpochRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    EpochRecord r;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf", &r.epoch, &r.train_accuracy,
                    &r.train_loss, &r.val_accuracy, &r.val_loss) != 5) {
      throw DataError("history CSV: bad row at line " + std::to_string(line_no));
    }
    out.push_back(r);
  }
  return out;
}

std::string report_json(const TrainReport& report) {
  using nlohmann::json;
  json history = json::array();
  for (const auto& r : report.history) {
    history.push_back({{"epoch", r.epoch},
                       {"train_acc", r.train_accuracy},
                       {"train_loss", r.train_loss},
                       {"val_acc", r.val_accuracy},
                       {"val_loss", r.val_loss}});
  }
  const TrainConfig& c = report.config;
  json config = {
      {"filter", c.filter ? std::string(to_string(*c.filter)) : std::string("none")},
      {"dropout", c.spec.dropout_rate},
      {"epochs", c.epochs},
      {"val_split", c.validation_fraction},
      {"batch_size", c.batch_size},
      {"units", c.spec.dense_units},
      {"filters", c.spec.conv_filters},
      {"kernel", c.spec.kernel_size},
      {"lr", c.learning_rate},
      {"seed", c.seed},
      {"data", c.data_source},
      {"parameters", c.spec.parameter_count()},
  };
  json doc = {
      {"epochs", report.history.size()},
      {"history", history},
      {"train_seconds", report.train_seconds},
      {"test_accuracy", report.test_accuracy ? json(*report.test_accuracy) : json(nullptr)},
      {"test_loss", report.test_loss ? json(*report.test_loss) : json(nullptr)},
      {"config", config},
  };
  return doc.dump(2) + "\n";
}

}  // namespace fnet
