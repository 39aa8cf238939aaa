#include "pyroclass/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>

#include "pyroclass/checkpoint.hpp"
#include "pyroclass/dataset.hpp"
#include "pyroclass/error.hpp"
#include "pyroclass/explain.hpp"
#include "pyroclass/fsutil.hpp"
#include "pyroclass/metrics.hpp"
#include "pyroclass/parallel.hpp"
#include "pyroclass/synthetic.hpp"
#include "pyroclass/trainer.hpp"
#include "pyroclass/tsne.hpp"

namespace pyroclass::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.3.0";

struct ModelFlags {
  std::string task;
  int depth = 1;
  std::size_t input_size = 224;
  std::size_t base_width = 64;
  std::size_t dense_width = 4096;
  double dropout = 0.5;
};

struct TrainFlags {
  std::size_t batch_size = 32;
  int max_epochs = 100;
  int patience = 5;
  double lr = 1e-4;
  double decay = 0.009;
  std::string decay_mode = "per-update";
  int folds = 9;
  bool balance = false;
};

struct Options {
  std::string manifest;
  std::string val_manifest;
  std::string out_dir = ".";
  std::string checkpoint;
  std::vector<std::string> images;
  std::uint64_t seed = 0;
  double test_fraction = 0.1;
  std::string cam_layer = "head1x1";
  int cam_class = -1;
  bool overlay = false;
  double perplexity = 30.0;
  int iterations = 1000;
  std::size_t per_class = 100;
  std::size_t image_size = 32;
  std::size_t frames_per_video = 5;
  ModelFlags model;
  TrainFlags train;
};

void add_model_flags(CLI::App* app, ModelFlags& m) {
  app->add_option("--task", m.task, "objects | poses | fire (default: from the manifest)");
  app->add_option("--depth", m.depth, "number of VGG sections, 1..5")->capture_default_str();
  app->add_option("--input-size", m.input_size, "square input side in pixels")->capture_default_str();
  app->add_option("--base-width", m.base_width, "channels of the first section")->capture_default_str();
  app->add_option("--dense-width", m.dense_width, "width of the hidden dense layers")->capture_default_str();
  app->add_option("--dropout", m.dropout, "dropout rate after each hidden dense layer")->capture_default_str();
}

void add_train_flags(CLI::App* app, TrainFlags& t) {
  app->add_option("--batch-size", t.batch_size)->capture_default_str();
  app->add_option("--max-epochs", t.max_epochs)->capture_default_str();
  app->add_option("--patience", t.patience, "epochs without validation improvement before stopping")
      ->capture_default_str();
  app->add_option("--lr", t.lr, "base learning rate")->capture_default_str();
  app->add_option("--decay", t.decay, "inverse-time decay constant")->capture_default_str();
  app->add_option("--decay-mode", t.decay_mode, "per-update | per-epoch")->capture_default_str();
  app->add_option("--folds", t.folds, "stratified folds")->capture_default_str();
  app->add_flag("--balance", t.balance, "pad minority classes with augmented copies");
}

ModelConfig model_config(const ModelFlags& m, Task task) {
  ModelConfig c = ModelConfig::make(task, m.depth);
  c.input_size = m.input_size;
  c.base_width = m.base_width;
  c.dense_width = m.dense_width;
  c.dropout_rate = m.dropout;
  c.validate();
  return c;
}

TrainConfig train_config(const TrainFlags& t, Task task, std::uint64_t seed) {
  TrainConfig c = TrainConfig::for_task(task);
  c.batch_size = t.batch_size;
  c.max_epochs = t.max_epochs;
  c.patience = t.patience;
  c.base_lr = t.lr;
  c.decay = t.decay;
  c.decay_mode = parse_decay_mode(t.decay_mode);
  c.seed = seed;
  c.validate(class_count(task));
  return c;
}

Task resolve_task(const std::string& flag, const Dataset& data) {
  const Task found = data.task();
  if (!flag.empty() && parse_task(flag) != found) {
    throw ConfigError("--task " + flag + " does not match the manifest's task set '" +
                      std::string(to_string(found)) + "'");
  }
  return found;
}

json model_json(const ModelConfig& c) { return json::parse(config_to_json(c)); }

json train_json(const TrainConfig& c) {
  json j;
  j["base_lr"] = c.base_lr;
  j["decay"] = c.decay;
  j["decay_mode"] = std::string(to_string(c.decay_mode));
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["min_delta"] = c.min_delta;
  j["loss"] = c.loss == LossKind::Binary ? "binary" : "categorical";
  return j;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

void write_provenance(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                      std::uint64_t seed, json config) {
  json j;
  j["command"] = command;
  j["args"] = args;
  j["seed"] = seed;
  j["config"] = std::move(config);
  j["version"] = kVersion;
  j["compiler"] = __VERSION__;
  write_json(dir / "provenance.json", j);
}

// Flag checks that need no data, so bad arguments fail before any loading.
void precheck(const Options& o) {
  head_channels(o.model.depth);
  parse_decay_mode(o.train.decay_mode);
  if (!o.model.task.empty()) parse_task(o.model.task);
}

Task task_of(const Model& model) { return model.config.task; }

int cmd_synth(const Options& o, const std::vector<std::string>& args) {
  SyntheticSpec spec;
  spec.task = parse_task(o.model.task.empty() ? "poses" : o.model.task);
  spec.per_class = o.per_class;
  spec.image_size = o.image_size;
  spec.frames_per_video = o.frames_per_video;
  spec.seed = o.seed;
  const auto ds = write_synthetic_corpus(o.out_dir, spec);
  json cfg;
  cfg["task"] = std::string(to_string(spec.task));
  cfg["per_class"] = spec.per_class;
  cfg["image_size"] = spec.image_size;
  cfg["frames_per_video"] = spec.frames_per_video;
  write_provenance(o.out_dir, "synth", args, o.seed, cfg);
  std::cout << "wrote " << ds.size() << " images to " << o.out_dir << "\n";
  return kOk;
}

int cmd_split(const Options& o, const std::vector<std::string>& args) {
  const auto data = load_manifest(o.manifest);
  if (!o.model.task.empty()) resolve_task(o.model.task, data);
  const auto split = split_test(data, o.test_fraction, o.seed);
  const fs::path dir = o.out_dir;
  write_manifest(dir / "train_val.csv", split.train_val);
  write_manifest(dir / "test.csv", split.test);
  write_file_atomic(dir / "split.json", split_sidecar_json(split));
  json cfg;
  cfg["manifest"] = o.manifest;
  cfg["test_fraction"] = o.test_fraction;
  write_provenance(dir, "split", args, o.seed, cfg);
  std::cout << "train_val " << split.train_val.size() << ", test " << split.test.size() << "\n";
  return kOk;
}

int cmd_train(const Options& o, const std::vector<std::string>& args) {
  precheck(o);
  const auto data = load_manifest(o.manifest);
  const Task task = resolve_task(o.model.task, data);
  const auto mc = model_config(o.model, task);
  const auto tc = train_config(o.train, task, o.seed);

  Dataset train_side, val_side;
  if (!o.val_manifest.empty()) {
    train_side = data;
    val_side = load_manifest(o.val_manifest);
    resolve_task(std::string(to_string(task)), val_side);
  } else {
    auto folds = stratified_folds(data, o.train.folds, o.seed);
    train_side = std::move(folds[0].train);
    val_side = std::move(folds[0].validation);
  }
  if (o.train.balance) train_side = balance_classes(train_side, mix_seed(o.seed, 0xba1));

  const auto loader = file_image_loader(mc.input_size);
  const auto train_data = materialize(train_side, loader);
  const auto val_data = materialize(val_side, loader);
  auto result = train(build_model(mc, o.seed), train_data, val_data, tc);

  const fs::path dir = o.out_dir;
  save_checkpoint(result.model, dir / "model.ckpt");
  write_file_atomic(dir / "train_report.json", result.report.to_json());
  json cfg;
  cfg["manifest"] = o.manifest;
  cfg["model"] = model_json(mc);
  cfg["train"] = train_json(tc);
  cfg["balance"] = o.train.balance;
  cfg["train_records"] = train_side.size();
  cfg["val_records"] = val_side.size();
  write_provenance(dir, "train", args, o.seed, cfg);
  std::cout << "best epoch " << result.report.best_epoch << " of " << result.report.stopped_epoch << "\n";
  return kOk;
}

int cmd_crossval(const Options& o, const std::vector<std::string>& args) {
  precheck(o);
  const auto data = load_manifest(o.manifest);
  const Task task = resolve_task(o.model.task, data);
  const auto mc = model_config(o.model, task);
  const auto tc = train_config(o.train, task, o.seed);
  CrossValOptions cv{o.train.folds, o.train.balance};
  const auto result = cross_validate(data, mc, tc, file_image_loader(mc.input_size), cv);
  const fs::path dir = o.out_dir;
  write_file_atomic(dir / "crossval.json", result.to_json());
  json cfg;
  cfg["manifest"] = o.manifest;
  cfg["model"] = model_json(mc);
  cfg["train"] = train_json(tc);
  cfg["folds"] = o.train.folds;
  cfg["balance"] = o.train.balance;
  write_provenance(dir, "crossval", args, o.seed, cfg);
  std::cout << "accuracy " << result.mean_accuracy << " +/- " << result.std_accuracy << ", macro F1 "
            << result.mean_f1 << " +/- " << result.std_f1 << "\n";
  return kOk;
}

int cmd_evaluate(const Options& o, const std::vector<std::string>& args) {
  const auto model = load_checkpoint(o.checkpoint);
  const auto data = load_manifest(o.manifest);
  const Task task = resolve_task(std::string(to_string(task_of(model))), data);
  const auto& names = class_names(task);
  const auto images = materialize(data, file_image_loader(model.config.input_size));
  const auto loss = class_count(task) == 2 ? LossKind::Binary : LossKind::Categorical;
  const auto ev = evaluate(model, images, loss, o.train.batch_size);

  const auto cm = confusion_matrix(ev.predictions, images.labels, names.size());
  const auto report = precision_recall_f1(cm);
  const auto roc = roc_sweep(ev.scores, images.labels, names);
  const fs::path dir = o.out_dir;
  write_file_atomic(dir / "confusion.csv", confusion_csv(cm, names));
  write_file_atomic(dir / "metrics.json", metrics_json(cm, report, roc, names));
  write_file_atomic(dir / "roc.csv", roc_csv(roc));
  json cfg;
  cfg["checkpoint"] = o.checkpoint;
  cfg["manifest"] = o.manifest;
  cfg["model"] = model_json(model.config);
  write_provenance(dir, "evaluate", args, model.seed, cfg);
  std::cout << "accuracy " << report.accuracy << ", macro F1 " << report.macro_f1 << ", micro AUC "
            << roc.micro.auc << "\n";
  return kOk;
}

int cmd_infer(const Options& o, const std::vector<std::string>&) {
  const auto model = load_checkpoint(o.checkpoint);
  const auto& names = class_names(task_of(model));
  for (const auto& path : o.images) {
    const auto cls = classify(model, decode_and_resize(path, model.config.input_size));
    json j;
    j["image"] = path;
    j["class"] = names[cls.index];
    j["index"] = cls.index;
    j["scores"] = cls.scores;
    std::cout << j.dump() << "\n";
  }
  return kOk;
}

int cmd_explain(const Options& o, const std::vector<std::string>& args) {
  const auto model = load_checkpoint(o.checkpoint);
  const auto layer = parse_cam_layer(o.cam_layer);
  const auto& names = class_names(task_of(model));
  const fs::path dir = o.out_dir;
  for (const auto& path : o.images) {
    const auto image = decode_and_resize(path, model.config.input_size);
    CamMap map;
    double score = 0.0;
    if (o.cam_class >= 0) {
      map = grad_cam(model, image, static_cast<std::size_t>(o.cam_class), layer);
      score = classify(model, image).scores.at(map.class_index);
    } else {
      auto top = cam_for_top_class(model, image, layer);
      map = std::move(top.map);
      score = top.score;
    }
    const std::string stem = fs::path(path).stem().string();
    const std::string cls = names[map.class_index];
    export_cam(map, dir / (stem + ".cam." + cls + ".pgm"));
    if (o.overlay) export_overlay(map, image, dir / (stem + ".cam." + cls + ".overlay.png"));
    std::cout << path << ": " << cls << " (" << score << ")\n";
  }
  json cfg;
  cfg["checkpoint"] = o.checkpoint;
  cfg["images"] = o.images;
  cfg["cam_layer"] = o.cam_layer;
  cfg["gradient_of"] = "logit";
  write_provenance(dir, "explain", args, model.seed, cfg);
  return kOk;
}

int cmd_embed(const Options& o, const std::vector<std::string>& args) {
  const auto model = load_checkpoint(o.checkpoint);
  const auto data = load_manifest(o.manifest);
  const Task task = resolve_task(std::string(to_string(task_of(model))), data);
  const auto images = materialize(data, file_image_loader(model.config.input_size));
  EmbedConfig ec;
  ec.perplexity = o.perplexity;
  ec.iterations = o.iterations;
  ec.seed = o.seed;
  const auto emb = tsne(collect_outputs(model, images), ec);
  const fs::path dir = o.out_dir;
  export_embedding(emb, images.labels, class_names(task), dir / "embedding.csv", dir / "embedding.json");
  json cfg;
  cfg["checkpoint"] = o.checkpoint;
  cfg["manifest"] = o.manifest;
  cfg["perplexity"] = o.perplexity;
  cfg["iterations"] = o.iterations;
  write_provenance(dir, "embed", args, o.seed, cfg);
  std::cout << "KL " << emb.initial_kl << " -> " << emb.kl << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  configure_threads_from_env();
  CLI::App app{"Thermal image classification with a VGG-depth family of CNNs", "pyroclass"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "generate a synthetic thermal-like corpus");
  synth->add_option("--task", o.model.task, "objects | poses | fire")->default_str("poses");
  synth->add_option("--per-class", o.per_class)->capture_default_str();
  synth->add_option("--image-size", o.image_size)->capture_default_str();
  synth->add_option("--frames-per-video", o.frames_per_video)->capture_default_str();

  auto* split = app.add_subcommand("split", "stratified, video-grouped test split");
  split->add_option("--test-fraction", o.test_fraction)->capture_default_str();
  split->add_option("--task", o.model.task);

  auto* train = app.add_subcommand("train", "train one model with early stopping");
  add_model_flags(train, o.model);
  add_train_flags(train, o.train);
  train->add_option("--val-manifest", o.val_manifest, "validation manifest (default: fold 0 of --folds)");

  auto* crossval = app.add_subcommand("crossval", "stratified k-fold cross-validation");
  add_model_flags(crossval, o.model);
  add_train_flags(crossval, o.train);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "confusion matrix, P/R/F1 and ROC on a manifest");
  evaluate_cmd->add_option("--batch-size", o.train.batch_size)->capture_default_str();

  auto* infer = app.add_subcommand("infer", "classify images, one JSON line each");
  auto* explain = app.add_subcommand("explain", "grad-CAM heatmaps");
  explain->add_option("--cam-layer", o.cam_layer, "head1x1 | last3x3")->capture_default_str();
  explain->add_option("--class", o.cam_class, "class index (default: top class)");
  explain->add_flag("--overlay", o.overlay, "also write a PNG overlay");

  auto* embed = app.add_subcommand("embed", "t-SNE of the network's output scores");
  embed->add_option("--perplexity", o.perplexity)->capture_default_str();
  embed->add_option("--iterations", o.iterations)->capture_default_str();

  for (auto* sub : {split, train, crossval, evaluate_cmd, embed}) {
    sub->add_option("--manifest", o.manifest, "CSV manifest path,label,task_set,video_id")->required();
  }
  for (auto* sub : {evaluate_cmd, infer, explain, embed}) {
    sub->add_option("--checkpoint", o.checkpoint)->required();
  }
  for (auto* sub : {infer, explain}) sub->add_option("--image", o.images, "image file (repeatable)")->required();
  for (auto* sub : {synth, split, train, crossval, embed}) sub->add_option("--seed", o.seed)->capture_default_str();
  for (auto* sub : {synth, split, train, crossval, evaluate_cmd, explain, embed}) {
    sub->add_option("--out-dir", o.out_dir)->capture_default_str();
  }

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadArguments;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const std::vector<std::string> tail(args.begin() + (args.empty() ? 0 : 1), args.end());
  try {
    if (name == "synth") return cmd_synth(o, tail);
    if (name == "split") return cmd_split(o, tail);
    if (name == "train") return cmd_train(o, tail);
    if (name == "crossval") return cmd_crossval(o, tail);
    if (name == "evaluate") return cmd_evaluate(o, tail);
    if (name == "infer") return cmd_infer(o, tail);
    if (name == "explain") return cmd_explain(o, tail);
    if (name == "embed") return cmd_embed(o, tail);
  } catch (const TrainingDivergedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadArguments;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadArguments;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

int run(int argc, const char* const* argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace pyroclass::cli
