#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace fnet {

struct Assignment {
  std::size_t dense_units = 160;
  std::size_t conv_filters = 64;
  std::size_t kernel_size = 5;
  double learning_rate = 1e-4;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct SearchSpace {
  std::vector<std::size_t> dense_units;
  std::vector<std::size_t> conv_filters;
  std::vector<std::size_t> kernel_sizes;
  std::vector<double> learning_rates;

  /// units 32..512 step 32, filters {16,32,48,64}, kernels {3,5},
  /// learning rates {1e-2,1e-3,1e-4}.
  static SearchSpace defaults();
  void validate() const;
  std::size_t size() const;
  /// Enumerates the full grid in a fixed nested order.
  std::vector<Assignment> all() const;
};

struct Round {
  std::size_t configs_in = 0;
  std::size_t epochs_per_config = 0;  // cumulative budget a config reaches this round
  std::size_t keep = 0;

  friend bool operator==(const Round&, const Round&) = default;
};

struct Bracket {
  std::size_t s = 0;
  std::vector<Round> rounds;

  friend bool operator==(const Bracket&, const Bracket&) = default;
};

struct BracketSchedule {
  std::size_t max_epochs = 0;
  std::size_t factor = 0;
  std::vector<Bracket> brackets;

  /// Epochs actually trained when survivors resume: sum over rounds of
  /// configs_in * (epochs this round - epochs last round).
  std::size_t epoch_budget() const;
};

/// s_max = floor(log_eta R). For s = s_max..0: n = ceil((s_max+1)/(s+1) * eta^s),
/// r = R * eta^-s; round i runs floor(n eta^-i) configs to floor(r eta^i) epochs
/// (at least 1 of each) and keeps floor(n eta^-(i+1)), the final round keeping 1.
BracketSchedule compute_schedule(std::size_t max_epochs, std::size_t factor);

/// One configuration's training run, resumable across rounds.
class TrialSession {
 public:
  virtual ~TrialSession() = default;
  /// Trains `epochs` more epochs and returns the validation accuracy after each.
  virtual std::vector<double> train_more(std::size_t epochs) = 0;
  /// Called when the search does not need the session for a while.
  virtual void suspend() {}
};

class Trainable {
 public:
  virtual ~Trainable() = default;
  virtual std::unique_ptr<TrialSession> start(const Assignment& a, std::size_t trial_id) = 0;
};

struct TrialResult {
  std::size_t bracket = 0;  // s of the bracket
  std::size_t round = 0;
  std::size_t trial_id = 0;
  Assignment assignment;
  std::size_t epochs = 0;     // cumulative epochs trained
  double val_accuracy = 0.0;  // best so far for this trial
  bool failed = false;
};

struct SearchResult {
  Assignment best;
  double best_accuracy = 0.0;
  std::size_t best_trial = 0;
  std::vector<TrialResult> trials;
  std::size_t epochs_consumed = 0;
};

/// Hyperband over `space`. Configs are drawn uniformly (with replacement) from
/// a generator seeded with `seed`. A trial that throws scores 0 and is dropped.
SearchResult search(const SearchSpace& space, const BracketSchedule& schedule,
                    Trainable& trainable, std::uint64_t seed);

std::string trial_log_csv(const std::vector<TrialResult>& trials);

}  // namespace fnet
