#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "larp/corpus.hpp"
#include "larp/encoder.hpp"
#include "larp/numkit.hpp"

namespace larp {

// ---------------------------------------------------------------------------
// Primitives

struct InfoNceResult {
  double loss = 0.0;    // mean over rows of CE(target_row, softmax(row / τ))
  Matrix grad_logits;   // d loss / d logits
};

InfoNceResult info_nce(const Matrix& logits, const Matrix& targets, double temperature);

// Row-stochastic targets over `cols` in-batch candidates followed by
// `queue_cols` zero columns. Row b spreads its mass uniformly over the
// candidates c with c == b or positive(b, c).
Matrix relation_targets(std::size_t rows, std::size_t cols, std::size_t queue_cols,
                        const std::function<bool(std::size_t, std::size_t)>& positive = {});

// Inputs of one symmetric contrast. The a2t direction uses rows of `audio`
// as anchors against candidates [text; queue_text]; the t2a direction uses
// rows of `text` against [audio; queue_audio].
struct ContrastBatch {
  Matrix audio;        // B x d
  Matrix text;         // B x d
  Matrix queue_audio;  // Q x d
  Matrix queue_text;   // Q x d
  Matrix targets_a2t;  // B x (B + Q)
  Matrix targets_t2a;  // B x (B + Q)
};

struct ContrastResult {
  double loss = 0.0;
  double loss_a2t = 0.0;
  double loss_t2a = 0.0;
  Matrix grad_audio;
  Matrix grad_text;
};

/// ½·(mean_b CE(y_b^a2t, ŷ_b^a2t) + mean_b CE(y_b^t2a, ŷ_b^t2a)) with logits
/// equal to inner products (cosine for unit rows) divided by τ. Queue rows
/// receive no gradient. Throws DomainError for an empty batch or τ <= 0.
ContrastResult contrast(const ContrastBatch& batch, double temperature);

// Within-track: contrast of a_i against t_i with diagonal targets.
ContrastResult wtc(const Matrix& audio, const Matrix& text, const Matrix& queue_audio, const Matrix& queue_text,
                   double temperature);

struct PairContrastResult {
  double loss = 0.0;
  Matrix grad_audio_left, grad_text_left;
  Matrix grad_audio_right, grad_text_right;
};

/// Track-track: ½[Contrast(a_i, t_j) + Contrast(t_i, a_j)] where row b of the
/// "left" matrices is anchor i_b and row b of the "right" matrices is its
/// partner j_b. targets_lr[b][c] marks partner c as positive for anchor b,
/// targets_rl[b][c] marks anchor c as positive for partner b (B x B each,
/// queue columns are added internally).
PairContrastResult ttc(const Matrix& audio_i, const Matrix& text_i, const Matrix& audio_j, const Matrix& text_j,
                       const Matrix& queue_audio, const Matrix& queue_text, const Matrix& targets_lr,
                       const Matrix& targets_rl, double temperature);

/// Track-playlist: ½[Contrast(a_p, t_s) + Contrast(t_p, a_s)] with "left" =
/// tracks and "right" = fused playlists. targets_lr[b][c]: playlist c
/// contains track b; targets_rl[b][c]: playlist b contains track c.
PairContrastResult tpc(const Matrix& audio_s, const Matrix& text_s, const Matrix& audio_p, const Matrix& text_p,
                       const Matrix& queue_audio, const Matrix& queue_text, const Matrix& targets_lr,
                       const Matrix& targets_rl, double temperature);

// ---------------------------------------------------------------------------
// Fusion (one-layer self-attention over member representations)

struct FusionParams {
  ParamTensor query;  // d x d
  ParamTensor key;
  ParamTensor value;

  ParamList params() { return {&query, &key, &value}; }
  int dim() const { return static_cast<int>(query.value.rows()); }
};

// Independent weights for the audio and text playlist sets.
struct Fusion {
  FusionParams audio;
  FusionParams text;

  ParamList params();
};

// W_V starts at the identity and W_Q, W_K at small Gaussian noise, so the
// initial attention is close to uniform and the fused vector close to the
// member mean.
FusionParams make_fusion_params(int dim, Rng& rng, double qk_sigma = 0.01);
Fusion make_fusion(int dim, std::uint64_t seed);

struct FusionCache {
  Matrix members;   // J x d (detached inputs)
  Matrix queries;   // X W_Q^T
  Matrix keys;      // X W_K^T
  Matrix values;    // X W_V^T
  Matrix weights;   // row-softmax(Q K^T / sqrt(d))
  Vector pooled;    // mean of attended rows, before normalization
  Vector output;    // unit-norm fused vector
};

/// softmax(X W_Qᵀ (X W_Kᵀ)ᵀ / √d) · X W_Vᵀ, averaged over the J rows and
/// L2-normalized. Throws DomainError for J = 0.
Vector fuse_playlist(const FusionParams& fusion, const Matrix& members, FusionCache* cache = nullptr);

// Accumulates gradients into W_Q, W_K, W_V only; members are constants.
void fuse_playlist_backward(FusionParams& fusion, const FusionCache& cache, const Vector& grad_output);

Matrix attention_weights(const FusionParams& fusion, const Matrix& members);

// Plain normalized mean over member rows (the no-fusion TPC variant).
Vector mean_pool(const Matrix& members);

// ---------------------------------------------------------------------------
// Stage objectives

struct StageComponents {
  std::optional<double> wtc;
  std::optional<double> ttc;
  std::optional<double> tpc;
};

/// Stage 1: WTC; stage 2: WTC + TTC; stage 3: WTC + TTC + TPC, multiplied by
/// `scale`. Throws ConfigError for an unknown stage or a missing component.
double stage_objective(int stage, const StageComponents& components, double scale = 1.0);

// ---------------------------------------------------------------------------
// Encoder-level losses. Each runs the trainable encoder on raw features,
// pulls negatives from the queue, accumulates parameter gradients scaled by
// `weight`, and returns the unscaled loss with the computed embeddings.

struct EncodedLoss {
  double loss = 0.0;
  Matrix audio;  // embeddings of the anchor rows
  Matrix text;
};

// Multi-positive targets for a TTC batch from the co-occurrence graph.
// `anchors[b]` and `partners[b]` are train-pool positions; throws
// DomainError if a pair does not co-occur.
struct PairTargets {
  Matrix left_right;
  Matrix right_left;
};
PairTargets ttc_targets(const CooccurrenceGraph& graph, const std::vector<std::size_t>& anchors,
                        const std::vector<std::size_t>& partners);

// Targets for a TPC batch: `tracks[b]` belongs to `playlists[b]`.
PairTargets tpc_targets(const InteractionGraph& graph, const std::vector<std::size_t>& tracks,
                        const std::vector<std::size_t>& playlists);

EncodedLoss wtc_loss(EncoderState& encoder, const Matrix& audio_features, const Matrix& text_features,
                     double weight = 1.0);

struct TtcLoss {
  double loss = 0.0;
  Matrix audio_i, text_i, audio_j, text_j;
};

TtcLoss ttc_loss(EncoderState& encoder, const Matrix& audio_i, const Matrix& text_i, const Matrix& audio_j,
                 const Matrix& text_j, const PairTargets& targets, double weight = 1.0);

// One TPC sample's J-set, already looked up from the representation
// tables (rows are detached and warm).
struct MemberSet {
  Matrix audio;  // J x d
  Matrix text;   // J x d
};

EncodedLoss tpc_loss(EncoderState& encoder, Fusion* fusion, const Matrix& audio_s, const Matrix& text_s,
                     const std::vector<MemberSet>& members, const PairTargets& targets, double weight = 1.0);

}  // namespace larp
