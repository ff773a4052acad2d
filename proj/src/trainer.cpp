#include "larp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <memory>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

#include "larp/errors.hpp"
#include "larp/eval.hpp"
#include "larp/losses.hpp"
#include "larp/optim.hpp"
#include "larp/recsys.hpp"

namespace larp {

void validate(const TrainConfig& c) {
  if (c.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (c.max_epochs <= 0) throw ConfigError("max_epochs must be positive");
  if (c.patience <= 0 || c.patience > c.max_epochs) throw ConfigError("patience must lie in [1, max_epochs]");
  if (!(c.lr > 0.0)) throw ConfigError("lr must be positive");
  if (c.warmup_steps && *c.warmup_steps < 0) throw ConfigError("warmup_steps must be non-negative");
  if (!(c.beta1 > 0.0 && c.beta1 < 1.0) || !(c.beta2 > 0.0 && c.beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in (0, 1)");
  }
  if (c.playlist_size <= 0) throw ConfigError("playlist_size (J) must be positive");
  if (!(c.loss_scale > 0.0)) throw ConfigError("loss_scale must be positive");
  if (c.validation_seeds <= 0) throw ConfigError("validation_seeds must be positive");
}

long warmup_for(long total_steps, const TrainConfig& config) {
  if (config.warmup_steps) return *config.warmup_steps;
  return std::max<long>(1, std::lround(0.05 * static_cast<double>(total_steps)));
}

double lr_at(long step, long total_steps, const TrainConfig& config) {
  const long warmup = warmup_for(total_steps, config);
  if (step < warmup) return config.lr * static_cast<double>(step) / static_cast<double>(warmup);
  const long span = std::max<long>(1, total_steps - warmup);
  const double progress = std::clamp(static_cast<double>(step - warmup) / static_cast<double>(span), 0.0, 1.0);
  return std::max(0.0, config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

void TrainLog::append(const TrainLog& other) {
  epochs.insert(epochs.end(), other.epochs.begin(), other.epochs.end());
  stages.insert(stages.end(), other.stages.begin(), other.stages.end());
}

std::string train_log_csv(const TrainLog& log, bool include_wall_time) {
  std::ostringstream os;
  os << "event,stage,epoch,steps,wtc,ttc,tpc,objective,val_recall10,val_ndcg10,lr,tpc_skipped,best_epoch,"
        "start_hash,end_hash";
  if (include_wall_time) os << ",wall_seconds";
  os << '\n';
  char buf[512];
  for (const auto& e : log.epochs) {
    std::snprintf(buf, sizeof(buf), "epoch,%d,%d,%ld,%.9g,%.9g,%.9g,%.9g,%.6f,%.6f,%.9g,%ld,,,", e.stage, e.epoch,
                  e.steps, e.wtc, e.ttc, e.tpc, e.objective, e.val_recall, e.val_ndcg, e.lr, e.tpc_skipped);
    os << buf;
    if (include_wall_time) {
      std::snprintf(buf, sizeof(buf), ",%.3f", e.wall_seconds);
      os << buf;
    }
    os << '\n';
  }
  for (const auto& m : log.stages) {
    os << "stage_end," << m.stage << ',' << m.epochs_run << ",,,,,,,,,," << m.best_epoch << ',' << m.start_hash << ','
       << m.end_hash;
    if (include_wall_time) os << ',';
    os << '\n';
  }
  return os.str();
}

Validator itemknn_validator(const TrackPool& pool, int q, std::uint64_t seed) {
  auto tasks = std::make_shared<std::vector<EvalTask>>(build_tasks(pool, q, seed).tasks);
  if (tasks->empty()) throw ConfigError("validation pool has no playlist longer than q = " + std::to_string(q));
  return [&pool, tasks](const EncoderState& encoder) {
    const EmbeddingTable table = embed_pool(encoder, pool);
    const MetricReport r = evaluate(ItemKnnRecommender(), *tasks, table, {10});
    return ValidationScore{r.recall[0], r.ndcg[0]};
  };
}

Checkpoint initial_checkpoint(const Corpus& corpus, EncoderConfig config) {
  config.audio_dim = corpus.audio_dim();
  config.text_dim = corpus.text_dim();
  std::vector<std::string> ids;
  for (const auto& t : corpus.train().tracks()) ids.push_back(t.id);
  Checkpoint ck;
  ck.encoder = make_encoder(config, ids);
  ck.stage = 0;
  return ck;
}

namespace {

// Sampling structure shared by all steps of a stage.
struct StageData {
  const TrackPool& pool;
  InteractionGraph graph;
  CooccurrenceGraph cooc;
};

Matrix gather_audio(const TrackPool& pool, const std::vector<std::size_t>& rows) { return pool.audio_matrix(rows); }
Matrix gather_text(const TrackPool& pool, const std::vector<std::size_t>& rows) { return pool.text_matrix(rows); }

struct StepLosses {
  double wtc = 0.0;
  std::optional<double> ttc;
  std::optional<double> tpc;
  long tpc_skipped = 0;
};

StepLosses train_step(int stage, EncoderState& enc, Fusion* fusion, const StageData& data,
                      const std::vector<std::size_t>& anchors, const TrainConfig& config, Rng& rng) {
  StepLosses out;
  const double w = config.loss_scale;
  const Matrix audio = gather_audio(data.pool, anchors);
  const Matrix text = gather_text(data.pool, anchors);

  EncodedLoss wl = wtc_loss(enc, audio, text, w);
  out.wtc = wl.loss;

  // Rows written to the tables after the step.
  std::vector<std::size_t> table_rows = anchors;
  Matrix table_audio = wl.audio, table_text = wl.text;

  if (stage >= 2) {
    std::vector<std::size_t> left, right;
    for (std::size_t a : anchors) {
      const auto& nb = data.cooc.neighbors(a);
      if (nb.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
      left.push_back(a);
      right.push_back(static_cast<std::size_t>(nb[pick(rng)]));
    }
    if (!left.empty()) {
      const PairTargets targets = ttc_targets(data.cooc, left, right);
      TtcLoss tl = ttc_loss(enc, gather_audio(data.pool, left), gather_text(data.pool, left),
                            gather_audio(data.pool, right), gather_text(data.pool, right), targets, w);
      out.ttc = tl.loss;
      const Eigen::Index n = table_audio.rows();
      table_audio.conservativeResize(n + tl.audio_j.rows(), Eigen::NoChange);
      table_text.conservativeResize(n + tl.text_j.rows(), Eigen::NoChange);
      table_audio.bottomRows(tl.audio_j.rows()) = tl.audio_j;
      table_text.bottomRows(tl.text_j.rows()) = tl.text_j;
      table_rows.insert(table_rows.end(), right.begin(), right.end());
    } else {
      out.ttc = 0.0;
    }
  }

  if (stage >= 3) {
    std::vector<std::size_t> tracks, playlists;
    std::vector<MemberSet> sets;
    for (std::size_t a : anchors) {
      const auto& parents = data.graph.parents(a);
      if (parents.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, parents.size() - 1);
      const auto p = static_cast<std::size_t>(parents[pick(rng)]);
      std::vector<std::size_t> warm;
      for (int m : data.graph.members(p)) {
        const auto s = static_cast<std::size_t>(m);
        if (s != a && !enc.table.is_cold(s)) warm.push_back(s);
      }
      if (warm.empty()) {
        ++out.tpc_skipped;
        continue;
      }
      std::shuffle(warm.begin(), warm.end(), rng);
      if (warm.size() > static_cast<std::size_t>(config.playlist_size)) warm.resize(static_cast<std::size_t>(config.playlist_size));
      const TableRows rows = enc.table.lookup_rows(warm);
      tracks.push_back(a);
      playlists.push_back(p);
      sets.push_back({rows.audio, rows.text});
    }
    if (!tracks.empty()) {
      const PairTargets targets = tpc_targets(data.graph, tracks, playlists);
      out.tpc = tpc_loss(enc, fusion, gather_audio(data.pool, tracks), gather_text(data.pool, tracks), sets, targets, w)
                    .loss;
    } else {
      out.tpc = 0.0;
    }
  }

  // Table refresh uses this step's forward pass; the queue gets momentum
  // outputs after the update (see run_stage).
  for (std::size_t i = 0; i < table_rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    enc.table.update(table_rows[i], table_audio.row(r).transpose(), table_text.row(r).transpose());
  }
  return out;
}

}  // namespace

StageResult run_stage(int stage, const Checkpoint& start, const Corpus& corpus, const TrainConfig& config,
                      const Validator& validator) {
  validate(config);
  if (stage < 1 || stage > 3) throw ConfigError("stage must be 1, 2 or 3");
  if (start.stage != stage - 1) {
    throw ConfigError("stage " + std::to_string(stage) + " needs a stage-" + std::to_string(stage - 1) +
                      " checkpoint, got stage " + std::to_string(start.stage));
  }
  validate(start.encoder.config, config.batch_size);
  const TrackPool& pool = corpus.train();
  if (pool.num_tracks() == 0) throw DomainError("train pool is empty");
  if (start.encoder.table.size() != pool.num_tracks()) {
    throw ConfigError("checkpoint tables do not match the train pool size");
  }

  StageData data{pool, InteractionGraph::from_pool(pool), {}};
  data.cooc = derive_cooccurrence(data.graph);

  Checkpoint current = start;
  current.stage = stage;
  EncoderState& enc = current.encoder;
  const bool fuse = stage == 3 && config.use_fusion;
  if (fuse && !current.fusion) current.fusion = make_fusion(enc.config.embed_dim, config.seed);
  if (!fuse) current.fusion.reset();
  Fusion* fusion = fuse ? &*current.fusion : nullptr;

  ParamList params = enc.trainable();
  if (fusion) {
    for (auto* p : fusion->params()) params.push_back(p);
  }
  Adam opt(config.beta1, config.beta2, 1e-8, 0.0);
  std::seed_seq seq{config.seed, static_cast<std::uint64_t>(stage)};
  Rng rng(seq);

  const std::size_t n = pool.num_tracks();
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const long steps_per_epoch = static_cast<long>((n + bs - 1) / bs);
  const long total_steps = steps_per_epoch * config.max_epochs;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  StageResult result;
  StageMarker marker;
  marker.stage = stage;
  marker.start_hash = checkpoint_hash(start);
  std::optional<Checkpoint> best;
  double best_score = -1.0;
  long step = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.stage = stage;
    rec.epoch = epoch;
    long ttc_steps = 0, tpc_steps = 0;
    for (std::size_t begin = 0; begin < n; begin += bs) {
      const std::vector<std::size_t> anchors(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                             order.begin() + static_cast<std::ptrdiff_t>(std::min(n, begin + bs)));
      zero_grads(params);
      const StepLosses l = train_step(stage, enc, fusion, data, anchors, config, rng);
      const double objective = stage_objective(stage, StageComponents{l.wtc, l.ttc, l.tpc}, config.loss_scale);
      if (!std::isfinite(objective)) {
        char msg[256];
        std::snprintf(msg, sizeof(msg), "non-finite loss at stage %d epoch %d step %ld (wtc=%g ttc=%g tpc=%g)", stage,
                      epoch, step, l.wtc, l.ttc.value_or(0.0), l.tpc.value_or(0.0));
        throw DivergenceError(msg);
      }
      const double lr = lr_at(step, total_steps, config);
      opt.step(params, lr);
      momentum_update(enc);
      auto [ma, mt] = encode_momentum(enc, gather_audio(pool, anchors), gather_text(pool, anchors));
      queue_push(enc, ma, mt);

      rec.wtc += l.wtc;
      if (l.ttc) {
        rec.ttc += *l.ttc;
        ++ttc_steps;
      }
      if (l.tpc) {
        rec.tpc += *l.tpc;
        ++tpc_steps;
      }
      rec.objective += objective;
      rec.tpc_skipped += l.tpc_skipped;
      rec.lr = lr;
      ++rec.steps;
      ++step;
    }
    rec.wtc /= static_cast<double>(rec.steps);
    rec.objective /= static_cast<double>(rec.steps);
    if (ttc_steps) rec.ttc /= static_cast<double>(ttc_steps);
    if (tpc_steps) rec.tpc /= static_cast<double>(tpc_steps);

    const ValidationScore score = validator(enc);
    rec.val_recall = score.recall;
    rec.val_ndcg = score.ndcg;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(rec);

    if (!best || score.recall > best_score) {
      best_score = score.recall;
      best = current;
      marker.best_epoch = epoch;
    }
    marker.epochs_run = epoch;
    if (epoch - marker.best_epoch >= config.patience) break;
  }

  result.checkpoint = std::move(*best);
  marker.end_hash = checkpoint_hash(result.checkpoint);
  result.log.stages.push_back(marker);
  return result;
}

RunResult run_all_stages(const Checkpoint& start, const Corpus& corpus, const TrainConfig& config,
                         const std::vector<int>& stages, const Validator& validator) {
  if (stages.empty()) throw ConfigError("stage list is empty");
  int expected = start.stage + 1;
  for (int s : stages) {
    if (s != expected) {
      throw ConfigError("stage list must continue from stage " + std::to_string(start.stage) +
                        " without gaps (got stage " + std::to_string(s) + ")");
    }
    ++expected;
  }
  RunResult out;
  Checkpoint current = start;
  for (int s : stages) {
    StageResult r = run_stage(s, current, corpus, config, validator);
    out.log.append(r.log);
    out.per_stage.push_back(r.checkpoint);
    current = std::move(r.checkpoint);
  }
  out.final = std::move(current);
  return out;
}

}  // namespace larp
