#include "fnet/tune.hpp"

#include <optional>

namespace fnet {
namespace {

class ModelSession : public TrialSession {
 public:
  ModelSession(TrainConfig config, std::shared_ptr<const TrainData> data,
               std::filesystem::path checkpoint)
      : config_(std::move(config)), data_(std::move(data)), checkpoint_(std::move(checkpoint)) {
    state_ = TrainState::fresh(config_);
  }

  ~ModelSession() override {
    std::error_code ec;
    std::filesystem::remove(checkpoint_, ec);
  }

  std::vector<double> train_more(std::size_t epochs) override {
    if (!state_) {
      Checkpoint ck = load_checkpoint(checkpoint_);
      state_ = TrainState{std::move(ck.params), std::move(ck.adam), epochs_done_};
    }
    const auto records = train_epochs(config_, *data_, *state_, epochs);
    epochs_done_ = state_->epochs_done;
    std::vector<double> accs;
    for (const auto& r : records) accs.push_back(r.val_accuracy);
    return accs;
  }

  void suspend() override {
    if (!state_) return;
    save_checkpoint(config_.spec, state_->params, state_->adam, checkpoint_);
    state_.reset();
  }

 private:
  TrainConfig config_;
  std::shared_ptr<const TrainData> data_;
  std::filesystem::path checkpoint_;
  std::optional<TrainState> state_;
  std::size_t epochs_done_ = 0;
};

}  // namespace

ModelTrainable::ModelTrainable(const Manifest& manifest, TrainConfig base,
                               std::filesystem::path workdir)
    : base_(std::move(base)), workdir_(std::move(workdir)) {
  base_.validate();
  std::filesystem::create_directories(workdir_);
  data_ = std::make_shared<const TrainData>(TrainData::from_manifest(manifest, base_));
}

TrainConfig ModelTrainable::config_for(const TrainConfig& base, const Assignment& a) {
  TrainConfig c = base;
  c.spec.dense_units = a.dense_units;
  c.spec.conv_filters = a.conv_filters;
  c.spec.kernel_size = a.kernel_size;
  c.learning_rate = a.learning_rate;
  return c;
}

std::unique_ptr<TrialSession> ModelTrainable::start(const Assignment& a, std::size_t trial_id) {
  TrainConfig c = config_for(base_, a);
  c.validate();
  return std::make_unique<ModelSession>(
      std::move(c), data_, workdir_ / ("trial_" + std::to_string(trial_id) + ".ckpt"));
}

}  // namespace fnet
