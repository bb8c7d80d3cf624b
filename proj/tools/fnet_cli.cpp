// fnet: dataset preparation, tuning, training, evaluation and plotting.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "fnet/charts.hpp"
#include "fnet/container.hpp"
#include "fnet/dataset.hpp"
#include "fnet/error.hpp"
#include "fnet/hyperband.hpp"
#include "fnet/model_io.hpp"
#include "fnet/parallel.hpp"
#include "fnet/report.hpp"
#include "fnet/rng.hpp"
#include "fnet/train.hpp"
#include "fnet/tune.hpp"

namespace fs = std::filesystem;
using namespace fnet;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out.flush()) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string filter_label(std::optional<FilterName> f) {
  return f ? std::string(to_string(*f)) : "none";
}

// The training filter travels with the model so eval/extract preprocess alike.
void save_trained_model(const fs::path& path, const ModelSpec& spec, const Params& params,
                        std::optional<FilterName> filter) {
  Container c = model_container(spec, params);
  c.set("filter", filter_label(filter));
  write_container(path, c);
}

struct LoadedModel {
  ModelSpec spec;
  Params params;
  std::optional<FilterName> filter;
};

LoadedModel load_trained_model(const fs::path& path) {
  const Container c = read_container(path);
  auto [spec, params] = model_from_container(c, path.string());
  LoadedModel m{spec, std::move(params), std::nullopt};
  if (c.has_field("filter")) {
    try {
      m.filter = parse_filter(c.field("filter"));
    } catch (const UsageError&) {
      throw FormatError(path.string() + ": unknown filter '" + c.field("filter") + "'");
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string input, output;
  bool balance = false;
};

void run_prepare(const PrepareArgs& a) {
  Manifest m = scan_dataset(a.input);
  if (a.balance) m = balance(m, AugmentationPlan::standard());
  write_manifest(m, a.output);
  for (Split s : {Split::Train, Split::Test}) {
    const auto n = m.class_counts(s);
    std::printf("%-5s", std::string(to_string(s)).c_str());
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      std::printf("  %s=%zu", std::string(kClassNames[c]).c_str(), n[c]);
    }
    std::printf("\n");
  }
}

struct TuneArgs {
  std::string manifest, trial_log;
  std::size_t max_epochs = 15, factor = 3;
  std::uint64_t seed = 42;
};

void run_tune(const TuneArgs& a) {
  const Manifest m = read_manifest(a.manifest);
  TrainConfig base;
  base.seed = a.seed;
  base.data_source = a.manifest;
  const BracketSchedule sched = compute_schedule(a.max_epochs, a.factor);

  const fs::path workdir = fs::temp_directory_path() /
                           ("fnet-tune-" + std::to_string(mix64(a.seed, static_cast<std::uint64_t>(
                               std::chrono::steady_clock::now().time_since_epoch().count()))));
  fs::create_directories(workdir);
  SearchResult r;
  try {
    ModelTrainable trainable(m, base, workdir);
    r = search(SearchSpace::defaults(), sched, trainable, derive_seed(a.seed, "tuner"));
  } catch (...) {
    std::error_code ec;
    fs::remove_all(workdir, ec);
    throw;
  }
  std::error_code ec;
  fs::remove_all(workdir, ec);

  if (!a.trial_log.empty()) write_text(a.trial_log, trial_log_csv(r.trials));
  const nlohmann::json out = {{"units", r.best.dense_units},
                              {"filters", r.best.conv_filters},
                              {"kernel", r.best.kernel_size},
                              {"lr", r.best.learning_rate},
                              {"val_accuracy", r.best_accuracy},
                              {"trial_id", r.best_trial},
                              {"epochs_consumed", r.epochs_consumed}};
  std::cout << out.dump(2) << "\n";
}

struct TrainArgs {
  std::string manifest, filter = "none", out, history, report;
  double dropout = 0.0, val_split = 0.3, lr = 1e-4;
  std::size_t epochs = 15, batch_size = 32, units = 160, filters = 64, kernel = 5;
  std::uint64_t seed = 42;
};

void run_train(const TrainArgs& a) {
  TrainConfig cfg;
  cfg.filter = parse_filter(a.filter);
  cfg.spec.dropout_rate = a.dropout;
  cfg.spec.dense_units = a.units;
  cfg.spec.conv_filters = a.filters;
  cfg.spec.kernel_size = a.kernel;
  cfg.epochs = a.epochs;
  cfg.validation_fraction = a.val_split;
  cfg.batch_size = a.batch_size;
  cfg.learning_rate = a.lr;
  cfg.seed = a.seed;
  cfg.data_source = a.manifest;
  cfg.validate();

  const Manifest m = read_manifest(a.manifest);
  const TrainResult r = train(cfg, m, [&](const EpochRecord& e) {
    std::fprintf(stderr, "epoch %2zu/%zu  acc %.4f  loss %.4f  val_acc %.4f  val_loss %.4f\n",
                 e.epoch, cfg.epochs, e.train_accuracy, e.train_loss, e.val_accuracy, e.val_loss);
  });
  save_trained_model(a.out, cfg.spec, r.params, cfg.filter);
  write_text(a.history, history_csv(r.report.history));
  write_text(a.report, report_json(r.report));
  if (r.report.test_accuracy) {
    std::printf("test accuracy %.4f  test loss %.4f  (%.1f s)\n", *r.report.test_accuracy,
                *r.report.test_loss, r.report.train_seconds);
  } else {
    std::printf("no test split; trained in %.1f s\n", r.report.train_seconds);
  }
}

struct EvalArgs {
  std::string model, manifest, split = "test", out_json, out_cm, out_heatmap;
};

void run_eval(const EvalArgs& a) {
  const LoadedModel lm = load_trained_model(a.model);
  const Manifest m = read_manifest(a.manifest);
  auto entries = m.of_split(parse_split(a.split));
  if (entries.empty()) throw DataError("manifest has no " + a.split + " entries");
  const ExampleCache cache(std::move(entries), lm.filter, lm.spec.input_side);
  const EvalResult ev = evaluate(lm.spec, lm.params, cache);
  const ConfusionMatrix cm = confusion_matrix(ev.labels, ev.predictions);
  const ClassReport rep = classification_report(cm);
  write_text(a.out_json, class_report_json(rep, cm));
  write_text(a.out_cm, confusion_csv(cm));
  if (!a.out_heatmap.empty()) render_heatmap(cm, a.out_heatmap);
  std::printf("%s accuracy %.4f  loss %.4f  (%zu images)\n", a.split.c_str(), ev.accuracy, ev.loss,
              cm.total());
}

struct ExtractArgs {
  std::string model, image, out_dir, filter;
};

void run_extract(const ExtractArgs& a) {
  const LoadedModel lm = load_trained_model(a.model);
  const std::optional<FilterName> filter = a.filter.empty() ? lm.filter : parse_filter(a.filter);
  const Raster src = load_raster(a.image);
  const Tensor x =
      to_tensor(preprocess_raster(src, Augmentation::None, filter, lm.spec.input_side));
  const FeatureMapSet maps = extract_feature_maps(lm.spec, lm.params, x);

  fs::create_directories(a.out_dir);
  nlohmann::json layers = nlohmann::json::array();
  std::size_t conv_index = 0;
  for (const auto& count : count_inactive_filters(maps)) {
    const LayerMaps& l = maps.layer(count.layer);
    const GrayImage g = feature_grid(l);
    write_png(fs::path(a.out_dir) / (l.name + ".png"), g.width, g.height, 1, g.pixels);
    layers.push_back({{"layer", count.layer},
                      {"inactive", count.inactive},
                      {"total", count.total},
                      {"height", l.height},
                      {"width", l.width}});
    if (count.layer.starts_with("conv")) {
      std::printf("%s\n", format_inactive_line(++conv_index, count).c_str());
    }
  }
  const nlohmann::json doc = {
      {"image", a.image}, {"filter", filter_label(filter)}, {"layers", layers}};
  write_text(fs::path(a.out_dir) / "inactive.json", doc.dump(2) + "\n");
}

struct PlotArgs {
  std::string history, out, metric = "acc";
};

void run_plot(const PlotArgs& a) {
  const auto h = parse_history_csv(read_text(a.history));
  const bool acc = a.metric == "acc";
  ChartSeries train{acc ? "train accuracy" : "train loss", {}};
  ChartSeries val{acc ? "validation accuracy" : "validation loss", {}};
  for (const auto& e : h) {
    const double x = static_cast<double>(e.epoch);
    train.points.emplace_back(x, acc ? e.train_accuracy : e.train_loss);
    val.points.emplace_back(x, acc ? e.val_accuracy : e.val_loss);
  }
  render_line_chart({train, val}, a.out, 800, 600, acc ? "accuracy" : "loss");
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage:
      return kUsage;
    case ErrorKind::Numeric:
      return kNumeric;
    default:
      return kData;
  }
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // activation buffers are large and reallocated every batch; keep them in the heap
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"fnet: CNN chest X-ray classifier pipeline"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all logical cores)");

  const std::vector<std::string> filters{"none", "contour", "edge-enhance-more", "find-edges",
                                         "sharpen"};

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Scan a dataset tree and write a manifest");
  prepare->add_option("--input", prep.input, "Dataset root")->required();
  prepare->add_option("--output", prep.output, "Manifest file")->required();
  prepare->add_flag("--balance", prep.balance, "Add rotated copies per the balancing plan");

  TuneArgs tn;
  auto* tune = app.add_subcommand("tune", "Hyperband search over the model hyperparameters");
  tune->add_option("--manifest", tn.manifest)->required();
  tune->add_option("--max-epochs", tn.max_epochs)->capture_default_str();
  tune->add_option("--factor", tn.factor)->capture_default_str();
  tune->add_option("--seed", tn.seed)->capture_default_str();
  tune->add_option("--trial-log", tn.trial_log, "CSV of every trial round");

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train a model and report test metrics");
  trn->add_option("--manifest", tr.manifest)->required();
  trn->add_option("--filter", tr.filter)->check(CLI::IsMember(filters))->capture_default_str();
  trn->add_option("--dropout", tr.dropout)->capture_default_str();
  trn->add_option("--epochs", tr.epochs)->capture_default_str();
  trn->add_option("--val-split", tr.val_split)->capture_default_str();
  trn->add_option("--batch-size", tr.batch_size)->capture_default_str();
  trn->add_option("--units", tr.units)->capture_default_str();
  trn->add_option("--filters", tr.filters)->capture_default_str();
  trn->add_option("--kernel", tr.kernel)->capture_default_str();
  trn->add_option("--lr", tr.lr)->capture_default_str();
  trn->add_option("--seed", tr.seed)->capture_default_str();
  trn->add_option("--out", tr.out, "Model file")->required();
  trn->add_option("--history", tr.history, "Per-epoch metrics CSV")->required();
  trn->add_option("--report", tr.report, "Run report JSON")->required();

  EvalArgs ev;
  auto* evl = app.add_subcommand("eval", "Confusion matrix and classification report");
  evl->add_option("--model", ev.model)->required();
  evl->add_option("--manifest", ev.manifest)->required();
  evl->add_option("--split", ev.split)
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  evl->add_option("--out-json", ev.out_json)->required();
  evl->add_option("--out-cm", ev.out_cm)->required();
  evl->add_option("--out-heatmap", ev.out_heatmap);

  ExtractArgs ex;
  auto* ext = app.add_subcommand("extract", "Feature-map grids and inactive-filter counts");
  ext->add_option("--model", ex.model)->required();
  ext->add_option("--image", ex.image)->required();
  ext->add_option("--out-dir", ex.out_dir)->required();
  ext->add_option("--filter", ex.filter, "Defaults to the filter the model was trained with")
      ->check(CLI::IsMember(filters));

  PlotArgs pl;
  auto* plot = app.add_subcommand("plot", "Render a training-history chart");
  plot->add_option("--history", pl.history)->required();
  plot->add_option("--out", pl.out)->required();
  plot->add_option("--metric", pl.metric)
      ->check(CLI::IsMember({"acc", "loss"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    set_thread_count(threads);
    if (*prepare) run_prepare(prep);
    if (*tune) run_tune(tn);
    if (*trn) run_train(tr);
    if (*evl) run_eval(ev);
    if (*ext) run_extract(ex);
    if (*plot) run_plot(pl);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kOk;
}
