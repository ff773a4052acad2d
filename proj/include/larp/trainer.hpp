#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "larp/checkpoint.hpp"
#include "larp/corpus.hpp"
#include "larp/encoder.hpp"

namespace larp {

struct TrainConfig {
  int batch_size = 50;
  int max_epochs = 45;
  int patience = 5;
  double lr = 1e-4;
  // Linear warmup length in steps. Unset means 5% of the stage's step budget.
  std::optional<long> warmup_steps;
  double beta1 = 0.9;
  double beta2 = 0.99;
  int playlist_size = 10;  // J: members fused per TPC sample
  double loss_scale = 1.0;
  bool use_fusion = true;
  int validation_seeds = 10;  // q for the validation tasks
  std::uint64_t seed = 1;
};

void validate(const TrainConfig& config);

/// Linear ramp from 0 to lr over `warmup` steps, then half-cosine decay to 0
/// at `total_steps`.
double lr_at(long step, long total_steps, const TrainConfig& config);
long warmup_for(long total_steps, const TrainConfig& config);

struct EpochRecord {
  int stage = 0;
  int epoch = 0;  // 1-based within the stage
  long steps = 0;
  double wtc = 0.0;
  double ttc = 0.0;
  double tpc = 0.0;
  double objective = 0.0;
  double val_recall = 0.0;  // Recall@10
  double val_ndcg = 0.0;    // NDCG@10
  double lr = 0.0;          // at the last step of the epoch
  long tpc_skipped = 0;     // anchors whose J-set was entirely cold
  double wall_seconds = 0.0;
};

// Emitted once per stage when it finishes.
struct StageMarker {
  int stage = 0;
  int epochs_run = 0;
  int best_epoch = 0;
  std::string start_hash;  // checkpoint hash of the stage input
  std::string end_hash;    // hash of the returned best checkpoint
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<StageMarker> stages;

  void append(const TrainLog& other);
};

// CSV with one "epoch" row per record and one "stage_end" row per marker.
// Wall time is the last column; pass false to omit it.
std::string train_log_csv(const TrainLog& log, bool include_wall_time = true);

struct ValidationScore {
  double recall = 0.0;
  double ndcg = 0.0;
};

using Validator = std::function<ValidationScore(const EncoderState&)>;

// Recall@10 / NDCG@10 of ItemKNN over the pool's playlists with q seeds.
Validator itemknn_validator(const TrackPool& pool, int q, std::uint64_t seed);

struct StageResult {
  Checkpoint checkpoint;  // best validation epoch
  TrainLog log;
};

/// Trains one stage starting from `start` (stage k requires a stage k-1
/// input). Returns the best-validation checkpoint. Throws DivergenceError
/// on a non-finite loss.
StageResult run_stage(int stage, const Checkpoint& start, const Corpus& corpus, const TrainConfig& config,
                      const Validator& validator);

struct RunResult {
  Checkpoint final;
  std::vector<Checkpoint> per_stage;  // one per executed stage
  TrainLog log;
};

/// Runs `stages` in order from `start`. The list must continue the start
/// checkpoint's stage contiguously.
RunResult run_all_stages(const Checkpoint& start, const Corpus& corpus, const TrainConfig& config,
                         const std::vector<int>& stages, const Validator& validator);

// Fresh untrained checkpoint sized for the corpus' train pool.
Checkpoint initial_checkpoint(const Corpus& corpus, EncoderConfig config);

}  // namespace larp
