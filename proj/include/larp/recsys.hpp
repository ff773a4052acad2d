#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "larp/corpus.hpp"
#include "larp/encoder.hpp"
#include "larp/mlp.hpp"
#include "larp/numkit.hpp"

namespace larp {

// Per-track unified representations with a stable id order.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> ids, Matrix vectors);

  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix& vectors() const { return vectors_; }
  std::size_t size() const { return ids_.size(); }
  int dim() const { return static_cast<int>(vectors_.cols()); }
  std::size_t index_of(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  Vector row(const std::string& id) const { return vectors_.row(static_cast<Eigen::Index>(index_of(id))).transpose(); }
  // Rows for the given ids, in order.
  Matrix rows(const std::vector<std::string>& ids) const;

  bool operator==(const EmbeddingTable& other) const { return ids_ == other.ids_ && vectors_ == other.vectors_; }

 private:
  std::vector<std::string> ids_;
  Matrix vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Plain-text format: "n d" header, then one "id v_1 ... v_d" line per row.
// Numbers use the shortest round-trip representation.
void save_embedding_table(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_embedding_table(const std::string& path);

/// e = mean(a, t), re-normalized unless `normalize` is false. Throws
/// DomainError when a and t cancel out.
Vector unify(const Vector& audio, const Vector& text, bool normalize = true);

// Encodes every track of a pool and unifies its two modalities.
EmbeddingTable embed_pool(const EncoderState& encoder, const TrackPool& pool, bool normalize = true);

/// Mean of the member rows, re-normalized unless `normalize` is false.
/// Throws DomainError for an empty id list, NotFoundError for unknown ids.
Vector pool_playlist(const EmbeddingTable& table, const std::vector<std::string>& track_ids, bool normalize = true);

// Top-K ids by descending score, ties broken by ascending id, skipping
// excluded ids. Returns fewer than K ids when the pool runs out.
std::vector<std::string> rank_top_k(const Vector& scores, const std::vector<std::string>& ids, std::size_t k,
                                    const std::unordered_set<std::string>& exclude);

std::vector<std::string> itemknn_recommend(const Vector& query, const EmbeddingTable& candidates, std::size_t k,
                                           const std::unordered_set<std::string>& exclude);

// ---------------------------------------------------------------------------
// WMF

struct WmfConfig {
  int factors = 64;
  double regularization = 0.1;
  double alpha = 40.0;  // confidence 1 + alpha on observed entries
  int iterations = 15;  // full ALS sweeps
  double init_sigma = 0.01;
  std::uint64_t seed = 1;
};

struct WmfState {
  Matrix playlist_factors;  // M x k
  Matrix track_factors;     // N x k
  WmfConfig config;
  std::vector<double> objective_trace;  // after init, then after each sweep
};

// Σ_ps c_ps (r_ps - z_p·z_s)² + λ(‖Z_P‖² + ‖Z_S‖²) with c = 1 + α r.
double wmf_objective(const InteractionGraph& graph, const Matrix& playlist_factors, const Matrix& track_factors,
                     const WmfConfig& config);

// Implicit-feedback ALS. Each half sweep solves the ridge normal equations
// exactly, so the objective never increases across sweeps.
WmfState wmf_fit(const InteractionGraph& graph, const WmfConfig& config);

// One ALS half-step: re-solves `target` rows with `fixed` held constant.
// `rows[i]` lists the observed columns of target row i.
void wmf_solve_side(const std::vector<std::vector<int>>& rows, const Matrix& fixed, Matrix& target,
                    const WmfConfig& config);

// ---------------------------------------------------------------------------
// DropoutNet

struct DropoutNetConfig {
  std::vector<int> hidden{256, 256};
  int output_dim = 256;
  Activation activation = Activation::tanh;
  double dropout = 0.2;
  double lr = 0.005;
  double momentum = 0.9;
  double weight_decay = 0.1;  // L2 on the summed batch loss
  int epochs = 10;
  int batch_size = 128;
  int negatives_per_positive = 1;
  std::uint64_t seed = 1;
};

struct DropoutNetState {
  Mlp playlist_net;  // f_p over [content ‖ collaborative]
  Mlp track_net;     // f_s over [content ‖ collaborative]
  Vector mean_playlist_factor;  // z̃_p
  Vector mean_track_factor;     // z̃_s
  DropoutNetConfig config;
  int content_dim = 0;
  int factor_dim = 0;
  std::vector<double> loss_trace;  // mean training MSE per epoch
};

// Builds untrained networks and the mean factors.
DropoutNetState dropoutnet_init(const WmfState& wmf, int content_dim, const DropoutNetConfig& config);

struct DropoutNetBatch {
  Matrix playlist_content;  // B x content_dim
  Matrix playlist_factors;  // B x k
  Matrix track_content;
  Matrix track_factors;
  Vector targets;           // z_p · z_s
};

// MSE of f_p(e_p ‖ z_p)·f_s(e_s ‖ z_s) against targets. Each sample's
// collaborative sub-vectors are zeroed with probability config.dropout when
// `rng` is given. Accumulates gradients into both networks if
// `accumulate` is set.
double dropoutnet_batch_loss(DropoutNetState& state, const DropoutNetBatch& batch, Rng* rng, bool accumulate);

// Trains on (playlist, track) pairs: every observed pair plus
// `negatives_per_positive` uniform pairs per epoch, with targets from WMF.
void dropoutnet_train(DropoutNetState& state, const WmfState& wmf, const InteractionGraph& graph,
                      const Matrix& track_content, const Matrix& playlist_content);

DropoutNetState dropoutnet_fit(const WmfState& wmf, const InteractionGraph& graph, const Matrix& track_content,
                               const Matrix& playlist_content, const DropoutNetConfig& config);

// Cold-start scores f_p(e_q ‖ z̃_p) · f_s(E ‖ Z̃_S).
Vector dropoutnet_scores(const DropoutNetState& state, const Vector& query_content, const Matrix& candidates);

std::vector<std::string> dropoutnet_recommend(const DropoutNetState& state, const Vector& query_content,
                                              const EmbeddingTable& candidates, std::size_t k,
                                              const std::unordered_set<std::string>& exclude);

// ---------------------------------------------------------------------------
// CLCRec

struct ClcrecConfig {
  int factors = 64;
  std::vector<int> hidden{256};
  Activation activation = Activation::tanh;
  double temperature = 2.0;
  double replace_prob = 0.5;
  double lr = 0.001;
  double weight_decay = 0.1;
  int epochs = 10;
  int batch_size = 256;
  std::uint64_t seed = 1;
};

struct ClcrecState {
  ParamTensor playlist_embeddings;  // M x k
  ParamTensor track_embeddings;     // N x k
  Mlp transform;                    // content -> k
  ClcrecConfig config;
  std::vector<double> loss_trace;

  ParamList params();
};

ClcrecState clcrec_init(std::size_t num_playlists, std::size_t num_tracks, int content_dim,
                        const ClcrecConfig& config);

struct ClcrecBatch {
  std::vector<std::size_t> playlists;  // p_b
  std::vector<std::size_t> tracks;     // s_i: member of p_b
  std::vector<std::size_t> partners;   // s_j: co-member of p_b
  std::vector<bool> replaced;          // use f(e_{s_i}) instead of z_{s_i}
};

// Which terms of the objective contribute gradients.
enum class ClcrecTerms { both, collaborative, content };

struct ClcrecLoss {
  double loss = 0.0;
  double collaborative_term = 0.0;
  double content_term = 0.0;
};

// Contrast(z_p, z_s) + Contrast(f(e_si), f(e_sj)) with in-batch negatives and
// graph-derived multi-positive targets. Accumulates gradients.
ClcrecLoss clcrec_batch_loss(ClcrecState& state, const InteractionGraph& graph, const CooccurrenceGraph& cooc,
                             const Matrix& track_content, const ClcrecBatch& batch,
                             ClcrecTerms terms = ClcrecTerms::both);

ClcrecBatch clcrec_sample_batch(const InteractionGraph& graph, const std::vector<std::pair<int, int>>& edges,
                                std::size_t begin, std::size_t end, double replace_prob, Rng& rng);

ClcrecState clcrec_fit(const InteractionGraph& graph, const Matrix& track_content, const ClcrecConfig& config);

// Cosine scores between f(e_q) and f(E).
Vector clcrec_scores(const ClcrecState& state, const Vector& query_content, const Matrix& candidates);

std::vector<std::string> clcrec_recommend(const ClcrecState& state, const Vector& query_content,
                                          const EmbeddingTable& candidates, std::size_t k,
                                          const std::unordered_set<std::string>& exclude);

// ---------------------------------------------------------------------------
// Recommender interface used by the evaluation harness. The query is the
// pooled seed embedding; seeds are excluded from the ranking.

class Recommender {
 public:
  virtual ~Recommender() = default;
  virtual std::string name() const = 0;
  virtual std::vector<std::string> recommend(const std::vector<std::string>& seeds,
                                             const EmbeddingTable& candidates, std::size_t k) const = 0;
};

class ItemKnnRecommender : public Recommender {
 public:
  explicit ItemKnnRecommender(bool normalize_pool = true) : normalize_(normalize_pool) {}
  std::string name() const override { return "itemknn"; }
  std::vector<std::string> recommend(const std::vector<std::string>& seeds, const EmbeddingTable& candidates,
                                     std::size_t k) const override;

 private:
  bool normalize_;
};

class DropoutNetRecommender : public Recommender {
 public:
  explicit DropoutNetRecommender(std::shared_ptr<const DropoutNetState> state) : state_(std::move(state)) {}
  std::string name() const override { return "dropoutnet"; }
  std::vector<std::string> recommend(const std::vector<std::string>& seeds, const EmbeddingTable& candidates,
                                     std::size_t k) const override;

 private:
  std::shared_ptr<const DropoutNetState> state_;
};

class ClcrecRecommender : public Recommender {
 public:
  explicit ClcrecRecommender(std::shared_ptr<const ClcrecState> state) : state_(std::move(state)) {}
  std::string name() const override { return "clcrec"; }
  std::vector<std::string> recommend(const std::vector<std::string>& seeds, const EmbeddingTable& candidates,
                                     std::size_t k) const override;

 private:
  std::shared_ptr<const ClcrecState> state_;
};

// Playlist content rows: pooled member embeddings of every playlist in the
// graph, in graph order.
Matrix pooled_playlist_content(const InteractionGraph& graph, const Matrix& track_content, bool normalize = true);

}  // namespace larp
