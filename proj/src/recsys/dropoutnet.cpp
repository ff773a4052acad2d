#include <algorithm>
#include <numeric>

#include "larp/errors.hpp"
#include "larp/optim.hpp"
#include "larp/recsys.hpp"

namespace larp {

namespace {

std::vector<int> net_widths(int input, const DropoutNetConfig& c) {
  std::vector<int> w{input};
  w.insert(w.end(), c.hidden.begin(), c.hidden.end());
  w.push_back(c.output_dim);
  return w;
}

Matrix concat_cols(const Matrix& left, const Matrix& right) {
  Matrix out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

ParamList all_params(DropoutNetState& s) {
  ParamList p = s.playlist_net.params();
  for (auto* q : s.track_net.params()) p.push_back(q);
  return p;
}

}  // namespace

DropoutNetState dropoutnet_init(const WmfState& wmf, int content_dim, const DropoutNetConfig& config) {
  if (content_dim <= 0 || config.output_dim <= 0) throw ConfigError("dropoutnet: dimensions must be positive");
  if (config.dropout < 0.0 || config.dropout > 1.0) throw ConfigError("dropoutnet: dropout must lie in [0, 1]");
  DropoutNetState s;
  s.config = config;
  s.content_dim = content_dim;
  s.factor_dim = static_cast<int>(wmf.track_factors.cols());
  Rng rng(config.seed);
  const int input = content_dim + s.factor_dim;
  s.playlist_net = Mlp(net_widths(input, config), config.activation, rng);
  s.track_net = Mlp(net_widths(input, config), config.activation, rng);
  s.mean_playlist_factor = wmf.playlist_factors.colwise().mean().transpose();
  s.mean_track_factor = wmf.track_factors.colwise().mean().transpose();
  return s;
}

double dropoutnet_batch_loss(DropoutNetState& state, const DropoutNetBatch& batch, Rng* rng, bool accumulate) {
  const Eigen::Index b = batch.targets.size();
  if (b == 0) throw DomainError("dropoutnet: empty batch");
  if (batch.playlist_content.cols() != state.content_dim || batch.track_content.cols() != state.content_dim) {
    throw ConfigError("dropoutnet: content dimension does not match the network input");
  }
  if (batch.playlist_factors.cols() != state.factor_dim || batch.track_factors.cols() != state.factor_dim) {
    throw ConfigError("dropoutnet: collaborative dimension does not match the network input");
  }
  Matrix pf = batch.playlist_factors;
  Matrix sf = batch.track_factors;
  if (rng) {
    std::bernoulli_distribution drop(state.config.dropout);
    for (Eigen::Index r = 0; r < b; ++r) {
      if (drop(*rng)) pf.row(r).setZero();
      if (drop(*rng)) sf.row(r).setZero();
    }
  }
  MlpCache pc, sc;
  const Matrix u = state.playlist_net.forward(concat_cols(batch.playlist_content, pf), &pc);
  const Matrix v = state.track_net.forward(concat_cols(batch.track_content, sf), &sc);
  const Vector pred = u.cwiseProduct(v).rowwise().sum();
  const Vector err = pred - batch.targets;
  const double loss = err.squaredNorm() / static_cast<double>(b);
  if (accumulate) {
    const Vector g = 2.0 * err / static_cast<double>(b);
    state.playlist_net.backward(pc, g.asDiagonal() * v);
    state.track_net.backward(sc, g.asDiagonal() * u);
  }
  return loss;
}

void dropoutnet_train(DropoutNetState& state, const WmfState& wmf, const InteractionGraph& graph,
                      const Matrix& track_content, const Matrix& playlist_content) {
  const auto& c = state.config;
  if (track_content.rows() != static_cast<Eigen::Index>(graph.num_tracks()) ||
      playlist_content.rows() != static_cast<Eigen::Index>(graph.num_playlists())) {
    throw ShapeError("dropoutnet: content rows must match the interaction graph");
  }
  std::vector<std::pair<int, int>> positives;
  for (std::size_t p = 0; p < graph.num_playlists(); ++p) {
    for (int s : graph.members(p)) positives.emplace_back(static_cast<int>(p), s);
  }
  if (positives.empty()) throw DomainError("dropoutnet: no interactions to train on");
  Rng rng(c.seed + 1);
  std::uniform_int_distribution<int> any_playlist(0, static_cast<int>(graph.num_playlists()) - 1);
  std::uniform_int_distribution<int> any_track(0, static_cast<int>(graph.num_tracks()) - 1);
  // The L2 term is attached to the summed batch loss, so on the mean loss it
  // is weight_decay / batch_size.
  SgdMomentum opt(c.momentum, c.weight_decay / static_cast<double>(c.batch_size));
  ParamList params = all_params(state);

  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    std::vector<std::pair<int, int>> pairs = positives;
    for (std::size_t i = 0; i < positives.size() * static_cast<std::size_t>(c.negatives_per_positive); ++i) {
      pairs.emplace_back(any_playlist(rng), any_track(rng));
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(c.batch_size)) {
      const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(c.batch_size));
      const auto n = static_cast<Eigen::Index>(end - start);
      DropoutNetBatch batch{Matrix(n, track_content.cols()), Matrix(n, state.factor_dim),
                            Matrix(n, track_content.cols()), Matrix(n, state.factor_dim), Vector(n)};
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto [p, s] = pairs[start + static_cast<std::size_t>(r)];
        batch.playlist_content.row(r) = playlist_content.row(p);
        batch.playlist_factors.row(r) = wmf.playlist_factors.row(p);
        batch.track_content.row(r) = track_content.row(s);
        batch.track_factors.row(r) = wmf.track_factors.row(s);
        batch.targets[r] = wmf.playlist_factors.row(p).dot(wmf.track_factors.row(s));
      }
      zero_grads(params);
      total += dropoutnet_batch_loss(state, batch, &rng, true);
      opt.step(params, c.lr);
      ++batches;
    }
    state.loss_trace.push_back(total / static_cast<double>(batches));
  }
}

DropoutNetState dropoutnet_fit(const WmfState& wmf, const InteractionGraph& graph, const Matrix& track_content,
                               const Matrix& playlist_content, const DropoutNetConfig& config) {
  if (track_content.cols() != playlist_content.cols()) {
    throw ConfigError("dropoutnet: track and playlist content dimensions differ");
  }
  DropoutNetState s = dropoutnet_init(wmf, static_cast<int>(track_content.cols()), config);
  dropoutnet_train(s, wmf, graph, track_content, playlist_content);
  return s;
}

Vector dropoutnet_scores(const DropoutNetState& state, const Vector& query_content, const Matrix& candidates) {
  if (query_content.size() != state.content_dim || candidates.cols() != state.content_dim) {
    throw ShapeError("dropoutnet: content dimension mismatch");
  }
  Matrix q(1, state.content_dim + state.factor_dim);
  q << query_content.transpose(), state.mean_playlist_factor.transpose();
  const Matrix u = state.playlist_net.forward(q);
  const Matrix z = state.mean_track_factor.transpose().replicate(candidates.rows(), 1);
  const Matrix v = state.track_net.forward(concat_cols(candidates, z));
  return v * u.row(0).transpose();
}

std::vector<std::string> dropoutnet_recommend(const DropoutNetState& state, const Vector& query_content,
                                              const EmbeddingTable& candidates, std::size_t k,
                                              const std::unordered_set<std::string>& exclude) {
  return rank_top_k(dropoutnet_scores(state, query_content, candidates.vectors()), candidates.ids(), k, exclude);
}

}  // namespace larp
