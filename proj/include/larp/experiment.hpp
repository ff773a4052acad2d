#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "larp/checkpoint.hpp"
#include "larp/corpus.hpp"
#include "larp/eval.hpp"
#include "larp/recsys.hpp"
#include "larp/trainer.hpp"

namespace larp {

// Which encoder outputs make up a track's unified embedding.
enum class Modality { both, audio, text };

Modality modality_from_string(const std::string& name);

EmbeddingTable embed_tracks(const EncoderState& encoder, const TrackPool& pool, Modality modality = Modality::both,
                            bool normalize = true);

struct EvalParams {
  std::vector<int> ks{10, 20, 40};
  int q = 10;
  std::uint64_t seed = 1;
};

struct RecommenderParams {
  WmfConfig wmf;
  DropoutNetConfig dropoutnet;
  ClcrecConfig clcrec;
};

/// Builds "itemknn", "dropoutnet" or "clcrec". The latter two are fitted on
/// the train pool's interaction graph with `train_content` as track content.
/// Throws ConfigError for an unknown name.
std::unique_ptr<Recommender> make_recommender(const std::string& name, const TrackPool& train_pool,
                                              const EmbeddingTable& train_content, const RecommenderParams& params);

// Test-pool evaluation of one embedding table.
MetricReport evaluate_table(const Recommender& recommender, const TrackPool& test_pool, const EmbeddingTable& table,
                            const EvalParams& params);

inline const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v{"untrained", "text-only", "audio-only", "stage-1",
                                          "stage-2",   "stage-3-no-fusion", "stage-3-fusion"};
  return v;
}

struct AblationResult {
  std::vector<std::pair<std::string, MetricReport>> rows;  // requested order
  TrainLog log;
  std::vector<std::pair<std::string, Checkpoint>> checkpoints;  // every trained variant
};

/// Trains only what the requested variants need (stage 3 variants share the
/// stage 1-2 run) and evaluates each variant on the test pool.
AblationResult run_ablation(const Corpus& corpus, const EncoderConfig& encoder, const TrainConfig& train,
                            const std::vector<std::string>& variants, const EvalParams& eval,
                            const std::string& recommender = "itemknn", const RecommenderParams& rec = {});

/// Stage-3 training with each J from a shared stage-2 checkpoint; results
/// are sorted by ascending J.
std::vector<std::pair<int, MetricReport>> sensitivity_sweep(const Corpus& corpus, std::vector<int> js,
                                                            const Checkpoint& stage2, const TrainConfig& train,
                                                            const EvalParams& eval);

// Element-wise median of several reports with identical K lists.
MetricReport median_report(const std::vector<MetricReport>& reports);

}  // namespace larp
