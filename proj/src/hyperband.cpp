#include "fnet/hyperband.hpp"

#include <algorithm>
#include <cstdio>

#include "fnet/error.hpp"
#include "fnet/rng.hpp"

namespace fnet {

SearchSpace SearchSpace::defaults() {
  SearchSpace s;
  for (std::size_t u = 32; u <= 512; u += 32) s.dense_units.push_back(u);
  s.conv_filters = {16, 32, 48, 64};
  s.kernel_sizes = {3, 5};
  s.learning_rates = {1e-2, 1e-3, 1e-4};
  return s;
}

void SearchSpace::validate() const {
  if (dense_units.empty() || conv_filters.empty() || kernel_sizes.empty() ||
      learning_rates.empty()) {
    throw UsageError("search space has an empty dimension");
  }
  for (std::size_t k : kernel_sizes) {
    if (k % 2 == 0) throw UsageError("search space kernel sizes must be odd");
  }
  for (std::size_t v : dense_units) {
    if (v == 0) throw UsageError("dense units must be positive");
  }
  for (std::size_t v : conv_filters) {
    if (v == 0) throw UsageError("conv filters must be positive");
  }
  for (double lr : learning_rates) {
    if (!(lr > 0.0)) throw UsageError("learning rates must be positive");
  }
}

std::size_t SearchSpace::size() const {
  return dense_units.size() * conv_filters.size() * kernel_sizes.size() * learning_rates.size();
}

std::vector<Assignment> SearchSpace::all() const {
  std::vector<Assignment> out;
  out.reserve(size());
  for (std::size_t u : dense_units)
    for (std::size_t f : conv_filters)
      for (std::size_t k : kernel_sizes)
        for (double lr : learning_rates) out.push_back({u, f, k, lr});
  return out;
}

std::size_t BracketSchedule::epoch_budget() const {
  std::size_t total = 0;
  for (const auto& b : brackets) {
    std::size_t prev = 0;
    for (const auto& r : b.rounds) {
      total += r.configs_in * (r.epochs_per_config - prev);
      prev = r.epochs_per_config;
    }
  }
  return total;
}

BracketSchedule compute_schedule(std::size_t max_epochs, std::size_t factor) {
  if (max_epochs < 1) throw UsageError("hyperband max epochs must be at least 1");
  if (factor < 2) throw UsageError("hyperband factor must be at least 2");

  // exact integer powers; no log() rounding
  std::size_t s_max = 0;
  while (true) {
    std::size_t p = 1;
    for (std::size_t i = 0; i <= s_max; ++i) p *= factor;
    if (p > max_epochs) break;
    ++s_max;
  }
  auto pow = [factor](std::size_t e) {
    std::size_t p = 1;
    for (std::size_t i = 0; i < e; ++i) p *= factor;
    return p;
  };

  BracketSchedule sched{max_epochs, factor, {}};
  for (std::size_t s = s_max + 1; s-- > 0;) {
    Bracket b{s, {}};
    const std::size_t eta_s = pow(s);
    const std::size_t n = ((s_max + 1) * eta_s + s) / (s + 1);  // ceil
    for (std::size_t i = 0; i <= s; ++i) {
      Round r;
      r.configs_in = std::max<std::size_t>(1, n / pow(i));
      // floor(R * eta^-s * eta^i) == floor(R * eta^i / eta^s)
      r.epochs_per_config = std::max<std::size_t>(1, max_epochs * pow(i) / eta_s);
      r.keep = i == s ? 1 : std::max<std::size_t>(1, n / pow(i + 1));
      b.rounds.push_back(r);
    }
    sched.brackets.push_back(std::move(b));
  }
  return sched;
}

namespace {

struct Live {
  std::size_t trial_id;
  Assignment assignment;
  std::unique_ptr<TrialSession> session;
  std::size_t epochs = 0;
  double best = 0.0;
  bool failed = false;
};

template <typename V>
const V& pick(const std::vector<V>& values, Rng& rng) {
  return values[static_cast<std::size_t>(rng.below(values.size()))];
}

}  // namespace

SearchResult search(const SearchSpace& space, const BracketSchedule& schedule,
                    Trainable& trainable, std::uint64_t seed) {
  space.validate();
  if (schedule.brackets.empty()) throw UsageError("empty hyperband schedule");

  Rng rng(seed);
  SearchResult result;
  bool have_best = false;
  std::size_t next_trial = 0;

  for (const Bracket& bracket : schedule.brackets) {
    std::vector<Live> cohort;
    const std::size_t n0 = bracket.rounds.front().configs_in;
    for (std::size_t i = 0; i < n0; ++i) {
      Assignment a;
      a.dense_units = pick(space.dense_units, rng);
      a.conv_filters = pick(space.conv_filters, rng);
      a.kernel_size = pick(space.kernel_sizes, rng);
      a.learning_rate = pick(space.learning_rates, rng);
      cohort.push_back({next_trial++, a, nullptr});
    }

    for (std::size_t ri = 0; ri < bracket.rounds.size(); ++ri) {
      const Round& round = bracket.rounds[ri];
      for (Live& t : cohort) {
        try {
          if (!t.session) t.session = trainable.start(t.assignment, t.trial_id);
          const std::size_t extra = round.epochs_per_config - t.epochs;
          const auto accs = t.session->train_more(extra);
          t.epochs += extra;
          result.epochs_consumed += extra;
          for (double acc : accs) t.best = std::max(t.best, acc);
          t.session->suspend();
        } catch (const std::exception&) {
          t.failed = true;
          t.best = 0.0;
          t.session.reset();
        }
        result.trials.push_back(
            {bracket.s, ri, t.trial_id, t.assignment, t.epochs, t.best, t.failed});
        const bool better = t.best > result.best_accuracy ||
                            (t.best == result.best_accuracy && t.trial_id < result.best_trial);
        if (!t.failed && (!have_best || better)) {
          have_best = true;
          result.best = t.assignment;
          result.best_accuracy = t.best;
          result.best_trial = t.trial_id;
        }
      }
      if (ri + 1 == bracket.rounds.size()) break;

      std::erase_if(cohort, [](const Live& t) { return t.failed; });
      std::stable_sort(cohort.begin(), cohort.end(),
                       [](const Live& a, const Live& b) { return a.best > b.best; });
      if (cohort.size() > round.keep) cohort.resize(round.keep);
    }
  }
  if (!have_best) throw NumericError("hyperband: every trial failed");
  return result;
}

std::string trial_log_csv(const std::vector<TrialResult>& trials) {
  std::string out =
      "bracket,round,trial_id,dense_units,conv_filters,kernel_size,learning_rate,epochs,"
      "val_accuracy\n";
  char line[256];
  for (const auto& t : trials) {
    std::snprintf(line, sizeof line, "%zu,%zu,%zu,%zu,%zu,%zu,%g,%zu,%.6f\n", t.bracket, t.round,
                  t.trial_id, t.assignment.dense_units, t.assignment.conv_filters,
                  t.assignment.kernel_size, t.assignment.learning_rate, t.epochs, t.val_accuracy);
    out += line;
  }
  return out;
}

}  // namespace fnet
