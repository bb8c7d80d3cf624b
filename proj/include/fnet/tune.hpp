#pragma once

#include <filesystem>
#include <memory>

#include "fnet/hyperband.hpp"
#include "fnet/train.hpp"

namespace fnet {

/// Hyperband trainable backed by the real training loop. All trials share the
/// base config's data partition; a trial's weights and optimizer state are
/// parked in `workdir` between rounds.
class ModelTrainable : public Trainable {
 public:
  ModelTrainable(const Manifest& manifest, TrainConfig base, std::filesystem::path workdir);

  std::unique_ptr<TrialSession> start(const Assignment& a, std::size_t trial_id) override;

  static TrainConfig config_for(const TrainConfig& base, const Assignment& a);

 private:
  TrainConfig base_;
  std::filesystem::path workdir_;
  std::shared_ptr<const TrainData> data_;
};

}  // namespace fnet
