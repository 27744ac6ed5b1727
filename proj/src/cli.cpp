#include "tce/cli.hpp"

#include <CLI11.hpp>
#include <iostream>

#include "tce/config.hpp"
#include "tce/curvature.hpp"
#include "tce/errors.hpp"
#include "tce/serialize.hpp"
#include "tce/text.hpp"

namespace tce {

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string split = "val";
  uint64_t seed = 0;
  int workers = 0;  // 0 = not given
  long video_id = -1;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "config file (key = value lines)");
  cmd->add_option("--seed", args.seed, "root seed; component seeds derive from it");
  cmd->add_option("--set", args.sets, "override a config key, e.g. --set train.lr=0.01")
      ->take_all();
  cmd->add_option("--workers", args.workers, "augmentation workers (default 1)");
}

RunConfig build_config(const CommonArgs& args, const nlohmann::json* eval_defaults) {
  RunConfig run;
  run.seed = args.seed;
  if (eval_defaults != nullptr) run.eval = eval_defaults->get<EvalConfig>();
  if (!args.config_path.empty()) apply_all(run, read_config_file(args.config_path));
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(args.sets.size());
  for (const auto& s : args.sets) pairs.push_back(split_kv(s));
  apply_all(run, pairs);
  if (args.workers > 0) run.train.workers = args.workers;
  run.finalize();
  return run;
}

int run_synth(const CommonArgs& args) {
  RunConfig run = build_config(args, nullptr);
  const DatasetIndex index = generate_synthetic(run.synth, args.out);
  std::cout << "wrote " << index.videos.size() << " videos x " << run.synth.frames_per_video
            << " frames (" << run.synth.image_size << "x" << run.synth.image_size << ") to "
            << args.out << "\n";
  return 0;
}

int run_pretrain(const CommonArgs& args) {
  RunConfig run = build_config(args, nullptr);
  run.encoder.in_channels = 3;
  const DatasetIndex index = load_dataset(args.data);
  const VideoStore store(index);
  const PretrainResult res = pretrain(index, store, run.encoder, run.train, run.aug, args.out);
  const auto& last = res.metrics.back();
  std::cout << "pretrained " << run.train.epochs << " epochs; final mean loss "
            << format_double(last.mean_loss) << ", heldout TAC " << format_double(last.mean_tac)
            << "\n";
  std::cout << "checkpoint: " << res.final_checkpoint.string() << "\n";
  std::cout << "metrics:    " << res.metrics_path.string() << "\n";
  return 0;
}

int run_finetune(const CommonArgs& args) {
  RunConfig run = build_config(args, nullptr);
  const DatasetIndex index = load_dataset(args.data);
  const VideoStore store(index);
  if (!index.has_labels()) throw DatasetError("finetune: dataset has no labels");
  const Checkpoint ckpt = load_checkpoint(args.checkpoint);
  auto classifier = build_classifier(ckpt, index.num_classes(), run.eval);
  const FinetuneResult res = finetune(classifier, index, store, run.eval);

  std::filesystem::create_directories(args.out);
  nlohmann::json meta;
  meta["eval"] = run.eval;
  meta["source_checkpoint"] = args.checkpoint;
  const auto cls_path = std::filesystem::path(args.out) / "classifier.tce";
  save_checkpoint(make_classifier_checkpoint(classifier, meta), cls_path);

  std::ofstream log(std::filesystem::path(args.out) / "finetune_log.tsv");
  log << "epoch\ttrain_loss\tval_top1\n";
  for (const auto& row : res.log) {
    log << row.epoch << '\t' << format_double(row.train_loss) << '\t'
        << format_double(row.val_top1) << '\n';
  }

  std::cout << "best top-1 " << format_double(res.best_top1) << " at epoch " << res.best_epoch
            << " (" << res.val_videos.size() << " validation videos)\n";
  std::cout << "classifier: " << cls_path.string() << "\n";
  return 0;
}

int run_evaluate(const CommonArgs& args) {
  const Checkpoint raw = load_checkpoint(args.checkpoint);
  const nlohmann::json* eval_defaults = raw.meta.contains("eval") ? &raw.meta.at("eval") : nullptr;
  RunConfig run = build_config(args, eval_defaults);
  const DatasetIndex index = load_dataset(args.data);
  const VideoStore store(index);
  const auto classifier = load_classifier_checkpoint(raw);

  auto [train_ids, val_ids] = stratified_split(index, run.eval.heldout_fraction,
                                               Rng::child(run.eval.seed, "split").next_u64());
  if (val_ids.empty()) val_ids = train_ids;
  std::vector<uint32_t> ids;
  if (args.split == "train") {
    ids = train_ids;
  } else if (args.split == "val") {
    ids = val_ids;
  } else if (args.split == "all") {
    for (const auto& v : index.videos) ids.push_back(v.id);
  } else {
    throw ConfigError("evaluate: --split must be train|val|all");
  }
  const double top1 = top1_accuracy(classifier, index, store, ids, run.eval);
  std::cout << "top-1 " << format_double(top1) << " over " << ids.size() << " videos (split "
            << args.split << ")\n";
  return 0;
}

int run_metrics(const CommonArgs& args) {
  RunConfig run = build_config(args, nullptr);
  const DatasetIndex index = load_dataset(args.data);
  const VideoStore store(index);
  LoadedEncoder loaded = load_encoder_checkpoint(args.checkpoint);

  std::vector<VideoSequence> seqs;
  std::vector<LabeledVideo> videos;
  seqs.reserve(index.videos.size());
  for (const auto& v : index.videos) {
    if (v.length < 3) continue;
    VideoSequence seq;
    seq.frames = store.video(v.id);
    seqs.push_back(std::move(seq));
  }
  size_t slot = 0;
  for (const auto& v : index.videos) {
    if (v.length < 3) continue;
    videos.push_back({v.id, v.label, &seqs[slot++]});
  }
  if (videos.empty()) throw DatasetError("metrics: no videos with >= 3 frames");

  const EmbedFn embed = [&](const Image& img) { return loaded.encoder.embed(img); };
  const int count = std::min<int>(run.metrics_sample_count, int(videos.size()));
  const CoherencyReport rep =
      coherency_report(embed, videos, count, Rng::child(run.seed, "metrics").next_u64());
  std::cout << "mean_TAC " << format_double(rep.mean_tac) << "\tmean_MAC "
            << format_double(rep.mean_mac) << "\t(" << rep.per_video.size() << " videos)\n";
  if (!args.out.empty()) {
    write_coherency_report(rep, args.out);
    std::cout << "report: " << args.out << "\n";
  }
  return 0;
}

int run_export(const CommonArgs& args) {
  build_config(args, nullptr);  // validates --set keys even though none apply here
  const DatasetIndex index = load_dataset(args.data);
  const VideoStore store(index);
  LoadedEncoder loaded = load_encoder_checkpoint(args.checkpoint);
  if (args.video_id < 0 || size_t(args.video_id) >= index.videos.size()) {
    throw ConfigError("export-embeddings: --video out of range");
  }
  export_embeddings(loaded.encoder, store.video(uint32_t(args.video_id)), args.out);
  std::filesystem::path bin = args.out;
  bin.replace_extension(".tceb");
  std::cout << "wrote " << args.out << " and " << bin.string() << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Self-supervised temporal-coherence representation learning on frame sequences"};
  app.require_subcommand(1);
  app.footer(config_help());

  CommonArgs synth_args, pre_args, fine_args, eval_args, metrics_args, export_args;

  auto* synth = app.add_subcommand("synth", "generate a synthetic frame-sequence dataset");
  add_common(synth, synth_args);
  synth->add_option("--out", synth_args.out, "output dataset directory")->required();

  auto* pre = app.add_subcommand("pretrain", "self-supervised pretraining");
  add_common(pre, pre_args);
  pre->add_option("--data", pre_args.data, "dataset directory")->required();
  pre->add_option("--out", pre_args.out, "run directory for checkpoints + metrics.tsv")->required();

  auto* fine = app.add_subcommand("finetune", "train the downstream classifier");
  add_common(fine, fine_args);
  fine->add_option("--data", fine_args.data, "labeled dataset directory")->required();
  fine->add_option("--checkpoint", fine_args.checkpoint, "pretraining checkpoint")->required();
  fine->add_option("--out", fine_args.out, "output directory")->required();

  auto* eval = app.add_subcommand("evaluate", "top-1 accuracy of a classifier over a split");
  add_common(eval, eval_args);
  eval->add_option("--data", eval_args.data, "labeled dataset directory")->required();
  eval->add_option("--checkpoint", eval_args.checkpoint, "classifier checkpoint")->required();
  eval->add_option("--split", eval_args.split, "train | val | all (default val)");

  auto* metrics = app.add_subcommand("metrics", "mean TAC/MAC of a checkpoint over a dataset");
  add_common(metrics, metrics_args);
  metrics->add_option("--data", metrics_args.data, "dataset directory")->required();
  metrics->add_option("--checkpoint", metrics_args.checkpoint, "pretraining checkpoint")
      ->required();
  metrics->add_option("--out", metrics_args.out, "optional per-video report file");

  auto* exp = app.add_subcommand("export-embeddings", "dump one video's embedding trajectory");
  add_common(exp, export_args);
  exp->add_option("--data", export_args.data, "dataset directory")->required();
  exp->add_option("--checkpoint", export_args.checkpoint, "pretraining checkpoint")->required();
  exp->add_option("--video", export_args.video_id, "video id")->required();
  exp->add_option("--out", export_args.out, "output text file (binary twin gets .tceb)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (pre->parsed()) return run_pretrain(pre_args);
    if (fine->parsed()) return run_finetune(fine_args);
    if (eval->parsed()) return run_evaluate(eval_args);
    if (metrics->parsed()) return run_metrics(metrics_args);
    if (exp->parsed()) return run_export(export_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace tce
