#include <algorithm>

#include "larp/errors.hpp"
#include "larp/losses.hpp"
#include "larp/optim.hpp"
#include "larp/recsys.hpp"

namespace larp {

ParamList ClcrecState::params() {
  ParamList p{&playlist_embeddings, &track_embeddings};
  for (auto* q : transform.params()) p.push_back(q);
  return p;
}

ClcrecState clcrec_init(std::size_t num_playlists, std::size_t num_tracks, int content_dim,
                        const ClcrecConfig& config) {
  if (config.replace_prob < 0.0 || config.replace_prob > 1.0) {
    throw ConfigError("clcrec: replace_prob must lie in [0, 1]");
  }
  if (config.factors <= 0 || content_dim <= 0) throw ConfigError("clcrec: dimensions must be positive");
  if (!(config.temperature > 0.0)) throw ConfigError("clcrec: temperature must be positive");
  Rng rng(config.seed);
  ClcrecState s;
  s.config = config;
  s.playlist_embeddings = ParamTensor(random_normal(static_cast<Eigen::Index>(num_playlists), config.factors, 0.1, rng));
  s.track_embeddings = ParamTensor(random_normal(static_cast<Eigen::Index>(num_tracks), config.factors, 0.1, rng));
  std::vector<int> widths{content_dim};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(config.factors);
  s.transform = Mlp(widths, config.activation, rng);
  return s;
}

ClcrecLoss clcrec_batch_loss(ClcrecState& state, const InteractionGraph& graph, const CooccurrenceGraph& cooc,
                             const Matrix& track_content, const ClcrecBatch& batch, ClcrecTerms terms) {
  const std::size_t b = batch.playlists.size();
  if (b == 0) throw DomainError("clcrec: empty batch");
  if (batch.tracks.size() != b || batch.partners.size() != b || batch.replaced.size() != b) {
    throw ShapeError("clcrec: batch fields must have equal length");
  }
  if (track_content.cols() != state.transform.input_dim()) {
    throw ConfigError("clcrec: content dimension does not match the transform input");
  }
  const auto rows = static_cast<Eigen::Index>(b);
  const int k = state.config.factors;
  const double tau = state.config.temperature;
  const Matrix no_queue(0, k);

  // f over anchors and partners in one pass.
  Matrix content(2 * rows, track_content.cols());
  for (std::size_t i = 0; i < b; ++i) {
    content.row(static_cast<Eigen::Index>(i)) = track_content.row(static_cast<Eigen::Index>(batch.tracks[i]));
    content.row(rows + static_cast<Eigen::Index>(i)) =
        track_content.row(static_cast<Eigen::Index>(batch.partners[i]));
  }
  MlpCache fcache;
  const Matrix f_raw = state.transform.forward(content, &fcache);
  Vector f_norms;
  const Matrix f = normalize_rows(f_raw, &f_norms);
  Matrix grad_f = Matrix::Zero(f.rows(), f.cols());

  // Collaborative term: playlists against (possibly replaced) tracks.
  Matrix zp_raw(rows, k), zs_raw(rows, k);
  for (std::size_t i = 0; i < b; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    zp_raw.row(r) = state.playlist_embeddings.value.row(static_cast<Eigen::Index>(batch.playlists[i]));
    zs_raw.row(r) = batch.replaced[i] ? Matrix(f_raw.row(r))
                                      : Matrix(state.track_embeddings.value.row(static_cast<Eigen::Index>(batch.tracks[i])));
  }
  Vector zp_norms, zs_norms;
  const Matrix zp = normalize_rows(zp_raw, &zp_norms);
  const Matrix zs = normalize_rows(zs_raw, &zs_norms);
  const Matrix y_ps = relation_targets(b, b, 0, [&](std::size_t r, std::size_t c) {
    return graph.contains(batch.playlists[r], batch.tracks[c]);
  });
  const Matrix y_sp = relation_targets(b, b, 0, [&](std::size_t r, std::size_t c) {
    return graph.contains(batch.playlists[c], batch.tracks[r]);
  });
  const ContrastResult collab = contrast(ContrastBatch{zp, zs, no_queue, no_queue, y_ps, y_sp}, tau);

  // Content term: f(e_si) against f(e_sj).
  const Matrix y_ij = relation_targets(b, b, 0, [&](std::size_t r, std::size_t c) {
    return batch.tracks[r] == batch.partners[c] || cooc.contains(batch.tracks[r], batch.partners[c]);
  });
  const Matrix y_ji = relation_targets(b, b, 0, [&](std::size_t r, std::size_t c) {
    return batch.partners[r] == batch.tracks[c] || cooc.contains(batch.partners[r], batch.tracks[c]);
  });
  const ContrastResult cont =
      contrast(ContrastBatch{f.topRows(rows), f.bottomRows(rows), no_queue, no_queue, y_ij, y_ji}, tau);

  if (terms != ClcrecTerms::content) {
    const Matrix g_zp = normalize_rows_backward(zp, zp_norms, collab.grad_audio);
    const Matrix g_zs = normalize_rows_backward(zs, zs_norms, collab.grad_text);
    Matrix g_f_raw_top = Matrix::Zero(rows, k);
    for (std::size_t i = 0; i < b; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      state.playlist_embeddings.grad.row(static_cast<Eigen::Index>(batch.playlists[i])) += g_zp.row(r);
      if (batch.replaced[i]) {
        g_f_raw_top.row(r) = g_zs.row(r);
      } else {
        state.track_embeddings.grad.row(static_cast<Eigen::Index>(batch.tracks[i])) += g_zs.row(r);
      }
    }
    // Route the replaced rows through f directly (they bypass normalize_rows on f).
    Matrix g_raw = Matrix::Zero(f.rows(), f.cols());
    g_raw.topRows(rows) = g_f_raw_top;
    if (terms == ClcrecTerms::collaborative) {
      state.transform.backward(fcache, g_raw);
      return {collab.loss, collab.loss, cont.loss};
    }
    grad_f.topRows(rows) = cont.grad_audio;
    grad_f.bottomRows(rows) = cont.grad_text;
    g_raw += normalize_rows_backward(f, f_norms, grad_f);
    state.transform.backward(fcache, g_raw);
  } else {
    grad_f.topRows(rows) = cont.grad_audio;
    grad_f.bottomRows(rows) = cont.grad_text;
    state.transform.backward(fcache, normalize_rows_backward(f, f_norms, grad_f));
  }
  return {collab.loss + cont.loss, collab.loss, cont.loss};
}

ClcrecBatch clcrec_sample_batch(const InteractionGraph& graph, const std::vector<std::pair<int, int>>& edges,
                                std::size_t begin, std::size_t end, double replace_prob, Rng& rng) {
  ClcrecBatch batch;
  std::bernoulli_distribution replace(replace_prob);
  for (std::size_t e = begin; e < end; ++e) {
    const auto [p, s] = edges[e];
    const auto& members = graph.members(static_cast<std::size_t>(p));
    std::size_t partner = static_cast<std::size_t>(s);
    if (members.size() > 1) {
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 2);
      std::size_t idx = pick(rng);
      // Skip the anchor's own slot.
      const auto self = static_cast<std::size_t>(std::lower_bound(members.begin(), members.end(), s) - members.begin());
      if (idx >= self) ++idx;
      partner = static_cast<std::size_t>(members[idx]);
    }
    batch.playlists.push_back(static_cast<std::size_t>(p));
    batch.tracks.push_back(static_cast<std::size_t>(s));
    batch.partners.push_back(partner);
    batch.replaced.push_back(replace(rng));
  }
  return batch;
}

ClcrecState clcrec_fit(const InteractionGraph& graph, const Matrix& track_content, const ClcrecConfig& config) {
  if (track_content.rows() != static_cast<Eigen::Index>(graph.num_tracks())) {
    throw ConfigError("clcrec: every train track needs a content row");
  }
  ClcrecState s = clcrec_init(graph.num_playlists(), graph.num_tracks(), static_cast<int>(track_content.cols()), config);
  const CooccurrenceGraph cooc = derive_cooccurrence(graph);
  std::vector<std::pair<int, int>> edges;
  for (std::size_t p = 0; p < graph.num_playlists(); ++p) {
    for (int t : graph.members(p)) edges.emplace_back(static_cast<int>(p), t);
  }
  if (edges.empty()) throw DomainError("clcrec: no interactions to train on");
  Rng rng(config.seed + 1);
  Adam opt(0.9, 0.999, 1e-8, config.weight_decay);
  ParamList params = s.params();
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(edges.begin(), edges.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < edges.size(); start += bs) {
      const std::size_t end = std::min(edges.size(), start + bs);
      const ClcrecBatch batch = clcrec_sample_batch(graph, edges, start, end, config.replace_prob, rng);
      zero_grads(params);
      total += clcrec_batch_loss(s, graph, cooc, track_content, batch).loss;
      opt.step(params, config.lr);
      ++batches;
    }
    s.loss_trace.push_back(total / static_cast<double>(batches));
  }
  return s;
}

Vector clcrec_scores(const ClcrecState& state, const Vector& query_content, const Matrix& candidates) {
  if (query_content.size() != state.transform.input_dim() || candidates.cols() != state.transform.input_dim()) {
    throw ShapeError("clcrec: content dimension mismatch");
  }
  const Matrix q = normalize_rows(state.transform.forward(query_content.transpose()));
  const Matrix c = normalize_rows(state.transform.forward(candidates));
  return c * q.row(0).transpose();
}

std::vector<std::string> clcrec_recommend(const ClcrecState& state, const Vector& query_content,
                                          const EmbeddingTable& candidates, std::size_t k,
                                          const std::unordered_set<std::string>& exclude) {
  return rank_top_k(clcrec_scores(state, query_content, candidates.vectors()), candidates.ids(), k, exclude);
}

}  // namespace larp
