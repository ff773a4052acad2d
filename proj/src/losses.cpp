#include "larp/losses.hpp"

#include <cmath>

#include "larp/errors.hpp"

namespace larp {

InfoNceResult info_nce(const Matrix& logits, const Matrix& targets, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("info_nce: temperature must be positive");
  if (logits.rows() == 0) throw DomainError("info_nce: empty batch");
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ShapeError("info_nce: logits and targets differ in shape");
  }
  Matrix probs = logits / temperature;
  softmax_rows(probs);
  const auto rows = static_cast<double>(logits.rows());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const double y = targets(r, c);
      if (y != 0.0) loss -= y * std::log(std::max(probs(r, c), kLogClamp));
    }
  }
  InfoNceResult out;
  out.loss = loss / rows;
  // d/dz CE(y, softmax(z/τ)) = (p·Σy - y) / τ; target rows sum to one.
  Vector mass = targets.rowwise().sum();
  out.grad_logits = (mass.asDiagonal() * probs - targets) / (temperature * rows);
  return out;
}

Matrix relation_targets(std::size_t rows, std::size_t cols, std::size_t queue_cols,
                        const std::function<bool(std::size_t, std::size_t)>& positive) {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols + queue_cols));
  for (std::size_t b = 0; b < rows; ++b) {
    double count = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (c == b || (positive && positive(b, c))) {
        y(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) = 1.0;
        count += 1.0;
      }
    }
    if (count > 0.0) y.row(static_cast<Eigen::Index>(b)) /= count;
  }
  return y;
}

namespace {

// Logits [anchors · candidatesᵀ, anchors · queueᵀ].
Matrix stacked_logits(const Matrix& anchors, const Matrix& candidates, const Matrix& queue) {
  const Eigen::Index b = candidates.rows();
  const Eigen::Index q = queue.rows();
  Matrix logits(anchors.rows(), b + q);
  logits.leftCols(b).noalias() = anchors * candidates.transpose();
  if (q > 0) logits.rightCols(q).noalias() = anchors * queue.transpose();
  return logits;
}

Matrix pad_queue_columns(const Matrix& targets, Eigen::Index queue_cols) {
  if (queue_cols == 0) return targets;
  Matrix out = Matrix::Zero(targets.rows(), targets.cols() + queue_cols);
  out.leftCols(targets.cols()) = targets;
  return out;
}

}  // namespace

ContrastResult contrast(const ContrastBatch& batch, double temperature) {
  const Eigen::Index b = batch.audio.rows();
  if (b == 0) throw DomainError("contrast: empty batch");
  if (batch.text.rows() != b || batch.text.cols() != batch.audio.cols()) {
    throw ShapeError("contrast: audio and text blocks differ in shape");
  }
  const Eigen::Index q = batch.queue_audio.rows();
  if (batch.queue_text.rows() != q) throw ShapeError("contrast: queue halves differ in length");
  if (q > 0 && (batch.queue_audio.cols() != batch.audio.cols() || batch.queue_text.cols() != batch.audio.cols())) {
    throw ShapeError("contrast: queue dimension mismatch");
  }

  Matrix a2t_logits = stacked_logits(batch.audio, batch.text, batch.queue_text);
  Matrix t2a_logits = stacked_logits(batch.text, batch.audio, batch.queue_audio);
  InfoNceResult a2t = info_nce(a2t_logits, batch.targets_a2t, temperature);
  InfoNceResult t2a = info_nce(t2a_logits, batch.targets_t2a, temperature);

  ContrastResult out;
  out.loss_a2t = a2t.loss;
  out.loss_t2a = t2a.loss;
  out.loss = 0.5 * (a2t.loss + t2a.loss);

  const Matrix ga = 0.5 * a2t.grad_logits;
  const Matrix gt = 0.5 * t2a.grad_logits;
  out.grad_audio.noalias() = ga.leftCols(b) * batch.text;
  out.grad_text.noalias() = gt.leftCols(b) * batch.audio;
  if (q > 0) {
    out.grad_audio.noalias() += ga.rightCols(q) * batch.queue_text;
    out.grad_text.noalias() += gt.rightCols(q) * batch.queue_audio;
  }
  out.grad_text.noalias() += ga.leftCols(b).transpose() * batch.audio;
  out.grad_audio.noalias() += gt.leftCols(b).transpose() * batch.text;
  return out;
}

ContrastResult wtc(const Matrix& audio, const Matrix& text, const Matrix& queue_audio, const Matrix& queue_text,
                   double temperature) {
  const auto b = static_cast<std::size_t>(audio.rows());
  const auto q = static_cast<std::size_t>(queue_audio.rows());
  ContrastBatch batch{audio, text, queue_audio, queue_text, relation_targets(b, b, q), relation_targets(b, b, q)};
  return contrast(batch, temperature);
}

namespace {

PairContrastResult pair_contrast(const Matrix& audio_l, const Matrix& text_l, const Matrix& audio_r,
                                 const Matrix& text_r, const Matrix& queue_audio, const Matrix& queue_text,
                                 const Matrix& targets_lr, const Matrix& targets_rl, double temperature) {
  const Eigen::Index b = audio_l.rows();
  if (audio_r.rows() != b || text_l.rows() != b || text_r.rows() != b) {
    throw ShapeError("pair contrast: left and right blocks must have the same number of rows");
  }
  if (targets_lr.rows() != b || targets_lr.cols() != b || targets_rl.rows() != b || targets_rl.cols() != b) {
    throw ShapeError("pair contrast: targets must be B x B");
  }
  const Eigen::Index q = queue_audio.rows();
  const Matrix y_lr = pad_queue_columns(targets_lr, q);
  const Matrix y_rl = pad_queue_columns(targets_rl, q);

  // Contrast(a_l, t_r): a2t anchors a_l vs t_r, t2a anchors t_r vs a_l.
  ContrastResult first = contrast(ContrastBatch{audio_l, text_r, queue_audio, queue_text, y_lr, y_rl}, temperature);
  // Contrast(t_l, a_r): a2t anchors a_r vs t_l, t2a anchors t_l vs a_r.
  ContrastResult second = contrast(ContrastBatch{audio_r, text_l, queue_audio, queue_text, y_rl, y_lr}, temperature);

  PairContrastResult out;
  out.loss = 0.5 * (first.loss + second.loss);
  out.grad_audio_left = 0.5 * first.grad_audio;
  out.grad_text_right = 0.5 * first.grad_text;
  out.grad_audio_right = 0.5 * second.grad_audio;
  out.grad_text_left = 0.5 * second.grad_text;
  return out;
}

}  // namespace

PairContrastResult ttc(const Matrix& audio_i, const Matrix& text_i, const Matrix& audio_j, const Matrix& text_j,
                       const Matrix& queue_audio, const Matrix& queue_text, const Matrix& targets_lr,
                       const Matrix& targets_rl, double temperature) {
  return pair_contrast(audio_i, text_i, audio_j, text_j, queue_audio, queue_text, targets_lr, targets_rl,
                       temperature);
}

PairContrastResult tpc(const Matrix& audio_s, const Matrix& text_s, const Matrix& audio_p, const Matrix& text_p,
                       const Matrix& queue_audio, const Matrix& queue_text, const Matrix& targets_lr,
                       const Matrix& targets_rl, double temperature) {
  // Contrast(a_p, t_s) puts playlists on the audio side, so the roles of
  // the two target blocks swap relative to the track-track case.
  PairContrastResult r = pair_contrast(audio_p, text_p, audio_s, text_s, queue_audio, queue_text, targets_rl,
                                       targets_lr, temperature);
  PairContrastResult out;
  out.loss = r.loss;
  out.grad_audio_left = std::move(r.grad_audio_right);
  out.grad_text_left = std::move(r.grad_text_right);
  out.grad_audio_right = std::move(r.grad_audio_left);
  out.grad_text_right = std::move(r.grad_text_left);
  return out;
}

// ---------------------------------------------------------------------------
// Fusion

ParamList Fusion::params() {
  ParamList out = audio.params();
  for (auto* p : text.params()) out.push_back(p);
  return out;
}

FusionParams make_fusion_params(int dim, Rng& rng, double qk_sigma) {
  if (dim <= 0) throw ConfigError("fusion: dimension must be positive");
  FusionParams f;
  f.query = ParamTensor(random_normal(dim, dim, qk_sigma, rng));
  f.key = ParamTensor(random_normal(dim, dim, qk_sigma, rng));
  f.value = ParamTensor(Matrix::Identity(dim, dim));
  return f;
}

Fusion make_fusion(int dim, std::uint64_t seed) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Fusion f;
  f.audio = make_fusion_params(dim, rng);
  f.text = make_fusion_params(dim, rng);
  return f;
}

Vector fuse_playlist(const FusionParams& fusion, const Matrix& members, FusionCache* cache) {
  if (members.rows() == 0) throw DomainError("fuse_playlist: empty member set");
  if (members.cols() != fusion.dim()) throw ShapeError("fuse_playlist: member dimension mismatch");
  FusionCache local;
  FusionCache& c = cache ? *cache : local;
  const double scale = 1.0 / std::sqrt(static_cast<double>(fusion.dim()));
  c.members = members;
  c.queries.noalias() = members * fusion.query.value.transpose();
  c.keys.noalias() = members * fusion.key.value.transpose();
  c.values.noalias() = members * fusion.value.value.transpose();
  c.weights.noalias() = scale * (c.queries * c.keys.transpose());
  softmax_rows(c.weights);
  c.pooled = (c.weights * c.values).colwise().mean().transpose();
  const double n = c.pooled.norm();
  if (n == 0.0) throw DomainError("fuse_playlist: fused vector has zero norm");
  c.output = c.pooled / n;
  return c.output;
}

void fuse_playlist_backward(FusionParams& fusion, const FusionCache& c, const Vector& grad_output) {
  const double n = c.pooled.norm();
  const Vector g_pooled = (grad_output - c.output * c.output.dot(grad_output)) / n;
  const auto j = c.members.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(fusion.dim()));
  // Every attended row contributes 1/J to the pooled mean.
  Matrix g_attended = (g_pooled.transpose() / static_cast<double>(j)).replicate(j, 1);
  Matrix g_weights = g_attended * c.values.transpose();
  Matrix g_values = c.weights.transpose() * g_attended;
  Vector row_dot = (g_weights.cwiseProduct(c.weights)).rowwise().sum();
  Matrix g_scores = c.weights.cwiseProduct(g_weights - row_dot.replicate(1, j)) * scale;
  Matrix g_queries = g_scores * c.keys;
  Matrix g_keys = g_scores.transpose() * c.queries;
  fusion.query.grad.noalias() += g_queries.transpose() * c.members;
  fusion.key.grad.noalias() += g_keys.transpose() * c.members;
  fusion.value.grad.noalias() += g_values.transpose() * c.members;
}

Matrix attention_weights(const FusionParams& fusion, const Matrix& members) {
  FusionCache c;
  fuse_playlist(fusion, members, &c);
  return c.weights;
}

Vector mean_pool(const Matrix& members) {
  if (members.rows() == 0) throw DomainError("mean_pool: empty member set");
  return l2_normalized(members.colwise().mean().transpose());
}

// ---------------------------------------------------------------------------
// Stage objectives

double stage_objective(int stage, const StageComponents& c, double scale) {
  auto need = [stage](const std::optional<double>& v, const char* name) {
    if (!v) throw ConfigError("stage " + std::to_string(stage) + " requires the " + name + " component");
    return *v;
  };
  switch (stage) {
    case 1:
      return scale * need(c.wtc, "wtc");
    case 2:
      return scale * (need(c.wtc, "wtc") + need(c.ttc, "ttc"));
    case 3:
      return scale * (need(c.wtc, "wtc") + need(c.ttc, "ttc") + need(c.tpc, "tpc"));
    default:
      throw ConfigError("unknown training stage " + std::to_string(stage));
  }
}

// ---------------------------------------------------------------------------
// Encoder-level losses

PairTargets ttc_targets(const CooccurrenceGraph& graph, const std::vector<std::size_t>& anchors,
                        const std::vector<std::size_t>& partners) {
  if (anchors.size() != partners.size()) throw ShapeError("ttc_targets: anchor/partner count mismatch");
  for (std::size_t b = 0; b < anchors.size(); ++b) {
    if (!graph.contains(anchors[b], partners[b])) {
      throw DomainError("ttc: pair (" + std::to_string(anchors[b]) + ", " + std::to_string(partners[b]) +
                        ") does not co-occur");
    }
  }
  const std::size_t b = anchors.size();
  PairTargets t;
  t.left_right = relation_targets(b, b, 0, [&](std::size_t r, std::size_t c) {
    return graph.contains(anchors[r], partners[c]);
  });
  t.right_left = relation_targets(b, b, 0, [&](std::size_t r, std::size_t c) {
    return graph.contains(partners[r], anchors[c]);
  });
  return t;
}

PairTargets tpc_targets(const InteractionGraph& graph, const std::vector<std::size_t>& tracks,
                        const std::vector<std::size_t>& playlists) {
  if (tracks.size() != playlists.size()) throw ShapeError("tpc_targets: track/playlist count mismatch");
  for (std::size_t b = 0; b < tracks.size(); ++b) {
    if (!graph.contains(playlists[b], tracks[b])) {
      throw DomainError("tpc: track " + std::to_string(tracks[b]) + " is not in playlist " +
                        std::to_string(playlists[b]));
    }
  }
  const std::size_t b = tracks.size();
  PairTargets t;
  t.left_right = relation_targets(b, b, 0, [&](std::size_t r, std::size_t c) {
    return graph.contains(playlists[c], tracks[r]);
  });
  t.right_left = relation_targets(b, b, 0, [&](std::size_t r, std::size_t c) {
    return graph.contains(playlists[r], tracks[c]);
  });
  return t;
}

EncodedLoss wtc_loss(EncoderState& encoder, const Matrix& audio_features, const Matrix& text_features,
                     double weight) {
  BranchOutput a = encode_branch(encoder.audio, audio_features);
  BranchOutput t = encode_branch(encoder.text, text_features);
  auto [qa, qt] = encoder.queue.contents();
  ContrastResult r = wtc(a.embedding, t.embedding, qa, qt, encoder.config.temperature);
  backward_branch(encoder.audio, a, weight * r.grad_audio);
  backward_branch(encoder.text, t, weight * r.grad_text);
  return {r.loss, std::move(a.embedding), std::move(t.embedding)};
}

TtcLoss ttc_loss(EncoderState& encoder, const Matrix& audio_i, const Matrix& text_i, const Matrix& audio_j,
                 const Matrix& text_j, const PairTargets& targets, double weight) {
  const Eigen::Index b = audio_i.rows();
  Matrix audio_all(2 * b, audio_i.cols());
  audio_all << audio_i, audio_j;
  Matrix text_all(2 * b, text_i.cols());
  text_all << text_i, text_j;
  BranchOutput a = encode_branch(encoder.audio, audio_all);
  BranchOutput t = encode_branch(encoder.text, text_all);
  auto [qa, qt] = encoder.queue.contents();
  PairContrastResult r = ttc(a.embedding.topRows(b), t.embedding.topRows(b), a.embedding.bottomRows(b),
                             t.embedding.bottomRows(b), qa, qt, targets.left_right, targets.right_left,
                             encoder.config.temperature);
  Matrix ga(2 * b, a.embedding.cols());
  ga << r.grad_audio_left, r.grad_audio_right;
  Matrix gt(2 * b, t.embedding.cols());
  gt << r.grad_text_left, r.grad_text_right;
  backward_branch(encoder.audio, a, weight * ga);
  backward_branch(encoder.text, t, weight * gt);
  return {r.loss, a.embedding.topRows(b), t.embedding.topRows(b), a.embedding.bottomRows(b),
          t.embedding.bottomRows(b)};
}

EncodedLoss tpc_loss(EncoderState& encoder, Fusion* fusion, const Matrix& audio_s, const Matrix& text_s,
                     const std::vector<MemberSet>& members, const PairTargets& targets, double weight) {
  const auto b = static_cast<Eigen::Index>(members.size());
  if (audio_s.rows() != b) throw ShapeError("tpc_loss: one member set per anchor track is required");
  const int d = encoder.config.embed_dim;
  BranchOutput a = encode_branch(encoder.audio, audio_s);
  BranchOutput t = encode_branch(encoder.text, text_s);

  Matrix audio_p(b, d), text_p(b, d);
  std::vector<FusionCache> audio_cache(members.size()), text_cache(members.size());
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& m = members[static_cast<std::size_t>(i)];
    if (fusion) {
      audio_p.row(i) = fuse_playlist(fusion->audio, m.audio, &audio_cache[static_cast<std::size_t>(i)]).transpose();
      text_p.row(i) = fuse_playlist(fusion->text, m.text, &text_cache[static_cast<std::size_t>(i)]).transpose();
    } else {
      audio_p.row(i) = mean_pool(m.audio).transpose();
      text_p.row(i) = mean_pool(m.text).transpose();
    }
  }

  auto [qa, qt] = encoder.queue.contents();
  PairContrastResult r = tpc(a.embedding, t.embedding, audio_p, text_p, qa, qt, targets.left_right,
                             targets.right_left, encoder.config.temperature);
  backward_branch(encoder.audio, a, weight * r.grad_audio_left);
  backward_branch(encoder.text, t, weight * r.grad_text_left);
  if (fusion) {
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto k = static_cast<std::size_t>(i);
      fuse_playlist_backward(fusion->audio, audio_cache[k], weight * r.grad_audio_right.row(i).transpose());
      fuse_playlist_backward(fusion->text, text_cache[k], weight * r.grad_text_right.row(i).transpose());
    }
  }
  return {r.loss, std::move(a.embedding), std::move(t.embedding)};
}

}  // namespace larp
