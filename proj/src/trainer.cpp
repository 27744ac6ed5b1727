#include "tce/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include "tce/curvature.hpp"
#include "tce/errors.hpp"
#include "tce/serialize.hpp"
#include "tce/text.hpp"

namespace tce {

void TrainConfig::validate() const {
  if (lr <= 0) throw ConfigError("train: lr must be > 0");
  if (momentum < 0 || momentum >= 1) throw ConfigError("train: momentum must be in [0, 1)");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (decay_epoch < 1 || decay_epoch >= epochs) {
    throw ConfigError("train: decay_epoch must be in [1, epochs)");
  }
  if (bank_update_rate <= 0 || bank_update_rate > 1) {
    throw ConfigError("train: bank_update_rate must be in (0, 1]");
  }
  if (heldout_fraction < 0 || heldout_fraction >= 1) {
    throw ConfigError("train: heldout_fraction must be in [0, 1)");
  }
  if (workers < 1) throw ConfigError("train: workers must be >= 1");
  loss.validate();
  schedule().validate();
}

namespace {

using nn::Encoder;

struct BatchItem {
  uint32_t video = 0;  // train-local id
  uint32_t frame = 0;
  int rot_target = 0;
  int third_slot = -1;  // index into the thirds batch, -1 = none
};

void check_finite_params(Encoder<float>& enc) {
  for (const auto& p : enc.params()) {
    for (float v : *p.value) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("pretrain: non-finite weight in " + p.name);
      }
    }
  }
}

Vec row_as_vec(const std::vector<float>& rows, size_t i, int dim) {
  Vec out(size_t(dim), 0.0);
  for (int d = 0; d < dim; ++d) out[size_t(d)] = double(rows[i * size_t(dim) + size_t(d)]);
  return out;
}

}  // namespace

Checkpoint make_encoder_checkpoint(Encoder<float>& encoder, const nn::Sgd<float>* optimizer,
                                   const MemoryBank* bank, nlohmann::json meta) {
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  for (const auto& p : encoder.params()) {
    ckpt.arrays[p.name] = NamedArray{p.shape, *p.value};
  }
  if (optimizer != nullptr) {
    for (const auto& [name, vel] : optimizer->velocity()) {
      ckpt.arrays["opt.velocity." + name] = NamedArray{{uint32_t(vel.size())}, vel};
    }
  }
  if (bank != nullptr) {
    ckpt.arrays["bank.rows"] =
        NamedArray{{uint32_t(bank->size()), uint32_t(bank->dim())}, bank->rows()};
  }
  return ckpt;
}

LoadedEncoder load_encoder_checkpoint(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  LoadedEncoder out;
  out.meta = ckpt.meta;

  const nn::EncoderConfig cfg = ckpt.meta.at("encoder").get<nn::EncoderConfig>();
  out.encoder = Encoder<float>(cfg, /*seed=*/0);
  for (auto& p : out.encoder.params()) {
    const auto it = ckpt.arrays.find(p.name);
    if (it == ckpt.arrays.end()) {
      throw CheckpointError("checkpoint missing array '" + p.name + "'");
    }
    if (it->second.shape != p.shape) {
      throw CheckpointError("checkpoint array '" + p.name + "' has unexpected shape");
    }
    *p.value = it->second.data;
  }
  for (const auto& [name, arr] : ckpt.arrays) {
    if (name.rfind("opt.velocity.", 0) == 0) {
      out.velocity[name.substr(13)] = arr.data;
    }
  }
  if (ckpt.arrays.count("bank.rows") != 0 && ckpt.meta.contains("video_lengths")) {
    const auto lengths = ckpt.meta.at("video_lengths").get<std::vector<int>>();
    const TrainConfig tc = ckpt.meta.at("train").get<TrainConfig>();
    out.bank = MemoryBank::restore(lengths, cfg.embedding_dim, tc.bank_mode, tc.bank_update_rate,
                                   ckpt.arrays.at("bank.rows").data);
  }
  return out;
}

void write_metrics_tsv(const std::vector<EpochMetrics>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metrics file " + path.string());
  out << "epoch\tmean_loss\tlr\tr_t\tmean_TAC\tmean_MAC\n";
  for (const auto& r : rows) {
    out << r.epoch << '\t' << format_double(r.mean_loss) << '\t' << format_double(r.lr) << '\t'
        << format_double(r.r_t) << '\t' << format_double(r.mean_tac) << '\t'
        << format_double(r.mean_mac) << '\n';
  }
}

PretrainResult pretrain(const DatasetIndex& index, const VideoStore& store,
                        const nn::EncoderConfig& encoder_config, const TrainConfig& train_config,
                        const AugmentationConfig& augmentation,
                        const std::filesystem::path& out_dir, const PretrainHooks* hooks) {
  const TrainConfig& cfg = train_config;
  cfg.validate();
  encoder_config.validate();
  augmentation.validate();
  index.validate();

  const bool aux_on = cfg.loss.aux_weight > 0.0;
  const bool second_on = cfg.loss.second_order_weight > 0.0;
  if (aux_on && !encoder_config.rotation_head) {
    throw ConfigError("pretrain: aux_weight > 0 needs the rotation head enabled");
  }
  if (second_on && cfg.bank_mode != BankMode::PerFrame) {
    throw ConfigError("pretrain: the second-order objective needs a per-frame bank");
  }
  if (second_on && cfg.loss.n2 < 1) {
    throw ConfigError("pretrain: second_order_weight > 0 with n2 < 1");
  }

  // Carve out the coherency-metric videos and remap the rest to a contiguous
  // training index (bank keys and anchors use train-local ids).
  const auto [kept, held] = stratified_split(index, cfg.heldout_fraction,
                                             Rng::child(cfg.seed, "split").next_u64());
  DatasetIndex train_index;
  train_index.root = index.root;
  std::vector<uint32_t> to_orig = kept;
  for (size_t i = 0; i < kept.size(); ++i) {
    VideoInfo v = index.videos[kept[i]];
    v.id = uint32_t(i);
    train_index.videos.push_back(v);
  }

  if (second_on) {
    for (const auto& v : train_index.videos) {
      if (v.length < 3) {
        throw ConfigError("pretrain: second-order objective needs every video length >= 3");
      }
    }
  }

  const int dim = encoder_config.embedding_dim;
  MemoryBank bank = MemoryBank::init(train_index, dim, cfg.bank_mode,
                                     Rng::child(cfg.seed, "bank").next_u64(),
                                     cfg.bank_update_rate);
  for (const auto& v : train_index.videos) {
    if (bank.eligible_count(v.id) < 1) {
      throw ConfigError("pretrain: no negatives available outside video " +
                        std::to_string(to_orig[v.id]) + "; dataset too small for n1 clipping");
    }
  }

  Encoder<float> enc(encoder_config, Rng::child(cfg.seed, "init").next_u64());
  nn::Sgd<float> opt(cfg.lr, cfg.momentum);
  MiningSchedule schedule = cfg.schedule();

  // Coherency metric videos: held-out when available, else a few training
  // videos; only trajectories with >= 3 frames are measurable.
  std::vector<VideoSequence> metric_seqs;
  std::vector<LabeledVideo> metric_videos;
  {
    std::vector<uint32_t> pool = held;
    if (pool.empty()) {
      for (size_t i = 0; i < kept.size() && i < 8; ++i) pool.push_back(kept[i]);
    }
    for (uint32_t v : pool) {
      if (index.videos[v].length < 3) continue;
      VideoSequence seq;
      seq.frames = store.video(v);
      metric_seqs.push_back(std::move(seq));
    }
    size_t slot = 0;
    for (uint32_t v : pool) {
      if (index.videos[v].length < 3) continue;
      metric_videos.push_back({v, index.videos[v].label, &metric_seqs[slot++]});
    }
  }
  const auto coherency_now = [&]() -> std::pair<double, double> {
    if (metric_videos.empty()) {
      return {std::nan(""), std::nan("")};
    }
    const EmbedFn embed = [&](const Image& img) { return enc.embed(img); };
    const CoherencyReport rep = coherency_report(embed, metric_videos, int(metric_videos.size()),
                                                 Rng::child(cfg.seed, "coherency").next_u64());
    return {rep.mean_tac, rep.mean_mac};
  };

  std::filesystem::create_directories(out_dir);
  PretrainResult result;
  result.metrics_path = out_dir / "metrics.tsv";

  double frozen_z = cfg.loss.z_estimate;
  bool z_ready = cfg.loss.nce_mode != NceMode::Nce || frozen_z > 0.0;

  const auto save_epoch_checkpoint = [&](int epoch) {
    nlohmann::json meta;
    meta["kind"] = "pretrain";
    meta["epoch"] = epoch;
    meta["root_seed"] = cfg.seed;
    meta["encoder"] = encoder_config;
    meta["train"] = cfg;
    meta["augmentation"] = augmentation;
    meta["frozen_z"] = frozen_z;
    std::vector<int> lengths;
    for (const auto& v : train_index.videos) lengths.push_back(v.length);
    meta["video_lengths"] = lengths;
    meta["train_to_orig"] = to_orig;
    meta["heldout"] = held;
    char name[40];
    std::snprintf(name, sizeof(name), "checkpoint_epoch_%03d.tce", epoch);
    const auto path = out_dir / name;
    save_checkpoint(make_encoder_checkpoint(enc, epoch > 0 ? &opt : nullptr, &bank, meta), path);
    result.epoch_checkpoints.push_back(path);
  };

  auto pairs_for_epoch = [&](int epoch) {
    auto pairs = enumerate_anchor_pairs(train_index, cfg.anchor_mode,
                                        Rng::child(cfg.seed, "anchors", uint64_t(epoch)).next_u64());
    Rng shuffler = Rng::child(cfg.seed, "shuffle", uint64_t(epoch));
    shuffler.shuffle(pairs);
    return pairs;
  };
  const size_t pairs_per_epoch = pairs_for_epoch(0).size();
  const int steps_per_epoch = int((pairs_per_epoch + size_t(cfg.batch_size) - 1) / cfg.batch_size);

  // One batch: forward the views, read negatives from the bank snapshot,
  // combine the losses, then (optionally) one SGD step followed by the bank
  // writes. Returns the mean combined loss over the batch.
  const auto run_batch = [&](int epoch, int step,
                             std::span<const std::pair<FrameRef, FrameRef>> batch,
                             bool update) -> double {
    const int bsz = int(batch.size());
    const double t = std::min(double(epoch) + double(step) / double(steps_per_epoch),
                              double(cfg.epochs));
    const double cap = radius(schedule, t);

    if (hooks != nullptr && hooks->on_step_begin) hooks->on_step_begin(epoch, step, bank);

    // ---- views ----
    std::vector<BatchItem> items{size_t(bsz)};
    std::vector<Image> anchor_views{size_t(bsz)}, positive_views{size_t(bsz)};
    std::vector<std::optional<Image>> third_opt{size_t(bsz)};
    for (int i = 0; i < bsz; ++i) store.video(to_orig[batch[size_t(i)].first.video]);  // warm cache

    std::exception_ptr view_error;
#pragma omp parallel for schedule(static) if (cfg.workers > 1)
    for (int i = 0; i < bsz; ++i) {
      try {
        const auto& [a, p] = batch[size_t(i)];
        const uint32_t orig = to_orig[a.video];
        BatchItem item;
        item.video = a.video;
        item.frame = a.frame;
        Rng ra = Rng::child(cfg.seed, "augment", uint64_t(epoch), orig, a.frame, 0);
        Image av = augment(store.frame({orig, a.frame}), augmentation, ra);
        if (aux_on) {
          Rng rk = Rng::child(cfg.seed, "rotation", uint64_t(epoch), orig, a.frame);
          item.rot_target = int(rk.uniform_int(4));
          av = rotate90(av, item.rot_target);
        }
        anchor_views[size_t(i)] = std::move(av);
        Rng rp = Rng::child(cfg.seed, "augment", uint64_t(epoch), orig, p.frame, 1);
        positive_views[size_t(i)] = augment(store.frame({orig, p.frame}), augmentation, rp);
        const int video_len = train_index.videos[a.video].length;
        if (second_on && int(a.frame) + 2 < video_len) {
          Rng rt = Rng::child(cfg.seed, "augment", uint64_t(epoch), orig, a.frame + 2, 2);
          third_opt[size_t(i)] = augment(store.frame({orig, a.frame + 2}), augmentation, rt);
        }
        items[size_t(i)] = item;
      } catch (...) {
#pragma omp critical
        if (!view_error) view_error = std::current_exception();
      }
    }
    if (view_error) std::rethrow_exception(view_error);

    std::vector<Image> third_views;
    for (int i = 0; i < bsz; ++i) {
      if (third_opt[size_t(i)]) {
        items[size_t(i)].third_slot = int(third_views.size());
        third_views.push_back(std::move(*third_opt[size_t(i)]));
      }
    }

    // ---- forward ----
    const int vh = anchor_views[0].height;
    const int vw = anchor_views[0].width;
    std::vector<float> in_a, in_p, in_t;
    for (const auto& im : anchor_views) nn::append_input(in_a, im);
    for (const auto& im : positive_views) nn::append_input(in_p, im);
    for (const auto& im : third_views) nn::append_input(in_t, im);
    Encoder<float>::Trace tr_a, tr_p, tr_t;
    enc.forward(in_a.data(), bsz, vh, vw, tr_a);
    enc.forward(in_p.data(), bsz, vh, vw, tr_p);
    if (!third_views.empty()) enc.forward(in_t.data(), int(third_views.size()), vh, vw, tr_t);

    // ---- negatives from the bank snapshot ----
    std::vector<std::vector<BankKey>> keys1{size_t(bsz)}, keys2{size_t(bsz)};
    std::vector<std::vector<Vec>> negs1{size_t(bsz)}, negs2{size_t(bsz)};
    std::exception_ptr neg_error;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < bsz; ++i) {
      try {
        const BatchItem& item = items[size_t(i)];
        const Vec anchor_vec = row_as_vec(tr_a.embeddings, size_t(i), dim);
        const size_t n1_eff = std::min<size_t>(size_t(cfg.loss.n1),
                                               bank.eligible_count(item.video));
        if (cfg.mining_enabled) {
          Rng mrng = Rng::child(cfg.seed, "mining", uint64_t(epoch), uint64_t(step), uint64_t(i));
          keys1[size_t(i)] = select_negatives(bank, anchor_vec, item.video, n1_eff, cap, mrng);
        } else {
          Rng urng =
              Rng::child(cfg.seed, "uniform-neg", uint64_t(epoch), uint64_t(step), uint64_t(i));
          keys1[size_t(i)] = bank.sample_uniform_negatives(item.video, n1_eff, urng);
        }
        for (const BankKey& k : keys1[size_t(i)]) negs1[size_t(i)].push_back(bank.entry_as_vec(k));

        if (item.third_slot >= 0) {
          // within-video candidates, excluding the triple's own frames
          const int video_len = train_index.videos[item.video].length;
          std::vector<uint32_t> candidates;
          for (uint32_t f = 0; f < uint32_t(video_len); ++f) {
            if (f == item.frame || f == item.frame + 1 || f == item.frame + 2) continue;
            candidates.push_back(f);
          }
          const size_t n2_eff = std::min<size_t>(size_t(cfg.loss.n2), candidates.size());
          if (n2_eff >= 1) {
            Rng srng =
                Rng::child(cfg.seed, "sec-neg", uint64_t(epoch), uint64_t(step), uint64_t(i));
            for (size_t pick : srng.sample_without_replacement(candidates.size(), n2_eff)) {
              const BankKey k{item.video, candidates[pick]};
              keys2[size_t(i)].push_back(k);
              negs2[size_t(i)].push_back(bank.entry_as_vec(k));
            }
          }
        }
      } catch (...) {
#pragma omp critical
        if (!neg_error) neg_error = std::current_exception();
      }
    }
    if (neg_error) std::rethrow_exception(neg_error);

    if (hooks != nullptr && hooks->on_negatives) {
      std::vector<BankKey> flat_keys;
      std::vector<Vec> flat_vecs;
      for (int i = 0; i < bsz; ++i) {
        flat_keys.insert(flat_keys.end(), keys1[size_t(i)].begin(), keys1[size_t(i)].end());
        flat_vecs.insert(flat_vecs.end(), negs1[size_t(i)].begin(), negs1[size_t(i)].end());
        flat_keys.insert(flat_keys.end(), keys2[size_t(i)].begin(), keys2[size_t(i)].end());
        flat_vecs.insert(flat_vecs.end(), negs2[size_t(i)].begin(), negs2[size_t(i)].end());
      }
      hooks->on_negatives(epoch, step, flat_keys, flat_vecs);
    }

    // ---- partition estimate for NCE (frozen after the first batch) ----
    if (!z_ready) {
      double sum = 0.0;
      size_t count = 0;
      for (int i = 0; i < bsz; ++i) {
        const Vec anchor_vec = row_as_vec(tr_a.embeddings, size_t(i), dim);
        for (const Vec& ng : negs1[size_t(i)]) {
          sum += std::exp(cosine_similarity(anchor_vec, ng) / cfg.loss.temperature);
          ++count;
        }
      }
      if (count == 0) throw ConfigError("pretrain: cannot estimate Z without negatives");
      frozen_z = double(bank.size()) * sum / double(count);
      z_ready = true;
    }

    // ---- per-item losses ----
    std::vector<CombinedLoss> combos{size_t(bsz)};
    std::exception_ptr loss_error;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < bsz; ++i) {
      try {
        const BatchItem& item = items[size_t(i)];
        const Vec anchor_vec = row_as_vec(tr_a.embeddings, size_t(i), dim);
        const Vec pos_vec = row_as_vec(tr_p.embeddings, size_t(i), dim);

        LossResult l1;
        if (cfg.loss.nce_mode == NceMode::Nce) {
          l1 = nce_loss(anchor_vec, pos_vec, negs1[size_t(i)], cfg.loss.temperature, bank.size(),
                        frozen_z, /*with_negative_grads=*/false);
        } else {
          l1 = first_order_loss(anchor_vec, pos_vec, negs1[size_t(i)], cfg.loss.temperature,
                                /*with_negative_grads=*/false);
        }

        std::optional<LossResult> l2;
        if (item.third_slot >= 0 && !negs2[size_t(i)].empty()) {
          const Vec third_vec = row_as_vec(tr_t.embeddings, size_t(item.third_slot), dim);
          try {
            l2 = second_order_loss(anchor_vec, pos_vec, third_vec, negs2[size_t(i)],
                                   cfg.loss.temperature, /*with_negative_grads=*/false);
          } catch (const DegenerateSegmentError&) {
            // collapsed difference vector: drop the term for this item rather
            // than aborting the run
            l2.reset();
          }
        }

        std::optional<LossResult> lrot;
        if (aux_on) {
          const Vec logits(tr_a.rot_logits.begin() + size_t(i) * 4,
                           tr_a.rot_logits.begin() + size_t(i) * 4 + 4);
          lrot = rotation_aux_loss(logits, item.rot_target);
        }

        combos[size_t(i)] = combined_loss(l1, l2 ? &*l2 : nullptr, lrot ? &*lrot : nullptr,
                                          cfg.loss);
      } catch (...) {
#pragma omp critical
        if (!loss_error) loss_error = std::current_exception();
      }
    }
    if (loss_error) std::rethrow_exception(loss_error);

    double batch_loss = 0.0;
    for (const auto& c : combos) batch_loss += c.value;
    batch_loss /= double(bsz);
    if (!std::isfinite(batch_loss)) throw std::runtime_error("pretrain: non-finite batch loss");
    if (!update) return batch_loss;

    // ---- backward + SGD ----
    const double inv_b = 1.0 / double(bsz);
    std::vector<float> d_emb_a(size_t(bsz) * dim, 0.0f), d_emb_p(size_t(bsz) * dim, 0.0f);
    std::vector<float> d_rot;
    if (aux_on) d_rot.assign(size_t(bsz) * 4, 0.0f);
    std::vector<float> d_emb_t(third_views.size() * size_t(dim), 0.0f);
    for (int i = 0; i < bsz; ++i) {
      const CombinedLoss& c = combos[size_t(i)];
      for (int d = 0; d < dim; ++d) {
        d_emb_a[size_t(i) * dim + size_t(d)] = float(c.d_anchor[size_t(d)] * inv_b);
        d_emb_p[size_t(i) * dim + size_t(d)] = float(c.d_positive[size_t(d)] * inv_b);
      }
      if (!c.d_third.empty()) {
        const size_t slot = size_t(items[size_t(i)].third_slot);
        for (int d = 0; d < dim; ++d) {
          d_emb_t[slot * size_t(dim) + size_t(d)] = float(c.d_third[size_t(d)] * inv_b);
        }
      }
      if (aux_on && !c.d_logits.empty()) {
        for (int k = 0; k < 4; ++k) d_rot[size_t(i) * 4 + size_t(k)] = float(c.d_logits[size_t(k)] * inv_b);
      }
    }

    enc.zero_grad();
    enc.backward(tr_a, d_emb_a, d_rot);
    enc.backward(tr_p, d_emb_p, {});
    if (!third_views.empty()) enc.backward(tr_t, d_emb_t, {});
    auto params = enc.params();
    opt.step(params);
    check_finite_params(enc);

    if (hooks != nullptr && hooks->before_bank_update) hooks->before_bank_update(epoch, step, bank);

    // bank writes happen strictly after the gradient update
    std::vector<BankKey> anchor_keys;
    anchor_keys.reserve(size_t(bsz));
    for (int i = 0; i < bsz; ++i) {
      const BatchItem& item = items[size_t(i)];
      const BankKey key = cfg.bank_mode == BankMode::PerFrame ? BankKey{item.video, item.frame}
                                                              : BankKey{item.video, 0};
      bank.update(key, std::span<const float>(tr_a.embeddings.data() + size_t(i) * dim,
                                              size_t(dim)));
      anchor_keys.push_back(key);
    }
    if (hooks != nullptr && hooks->on_step_end) hooks->on_step_end(epoch, step, bank, anchor_keys);
    return batch_loss;
  };

  const auto run_epoch = [&](int epoch, bool update) -> double {
    const auto pairs = pairs_for_epoch(epoch);
    double loss_sum = 0.0;
    int steps = 0;
    for (size_t begin = 0; begin < pairs.size(); begin += size_t(cfg.batch_size)) {
      const size_t end = std::min(begin + size_t(cfg.batch_size), pairs.size());
      loss_sum += run_batch(epoch, steps, {pairs.data() + begin, end - begin}, update);
      ++steps;
    }
    return loss_sum / double(steps);
  };

  // Epoch-0 row: frozen evaluation pass over the epoch-0 batches, plus the
  // coherency metrics at random initialization. No state changes.
  save_epoch_checkpoint(0);
  {
    const double loss0 = run_epoch(0, /*update=*/false);
    const auto [tac0, mac0] = coherency_now();
    result.metrics.push_back({0, loss0, cfg.lr, radius(schedule, 0.0), tac0, mac0});
    write_metrics_tsv(result.metrics, result.metrics_path);
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr_now = epoch >= cfg.decay_epoch ? cfg.lr / 10.0 : cfg.lr;
    opt.set_lr(lr_now);
    const double mean_loss = run_epoch(epoch, /*update=*/true);
    const auto [tac_e, mac_e] = coherency_now();
    result.metrics.push_back({epoch + 1, mean_loss, lr_now,
                              radius(schedule, std::min(double(epoch + 1), double(cfg.epochs))),
                              tac_e, mac_e});
    write_metrics_tsv(result.metrics, result.metrics_path);
    save_epoch_checkpoint(epoch + 1);
  }

  result.final_checkpoint = result.epoch_checkpoints.back();
  return result;
}

}  // namespace tce
