#include "larp/errors.hpp"
#include "larp/recsys.hpp"

namespace larp {

double wmf_objective(const InteractionGraph& graph, const Matrix& zp, const Matrix& zs, const WmfConfig& config) {
  // Unobserved cells contribute x², so start from Σ_all x² = tr(PᵀP·SᵀS)
  // and correct the observed cells to c(1 - x)².
  const Matrix pp = zp.transpose() * zp;
  const Matrix ss = zs.transpose() * zs;
  double total = pp.cwiseProduct(ss).sum();
  const double c = 1.0 + config.alpha;
  for (std::size_t p = 0; p < graph.num_playlists(); ++p) {
    for (int s : graph.members(p)) {
      const double x = zp.row(static_cast<Eigen::Index>(p)).dot(zs.row(s));
      total += c * (1.0 - x) * (1.0 - x) - x * x;
    }
  }
  total += config.regularization * (zp.squaredNorm() + zs.squaredNorm());
  return total;
}

void wmf_solve_side(const std::vector<std::vector<int>>& rows, const Matrix& fixed, Matrix& target,
                    const WmfConfig& config) {
  const int k = static_cast<int>(fixed.cols());
  const Matrix gram = fixed.transpose() * fixed;
  const Matrix ridge = config.regularization * Matrix::Identity(k, k);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& observed = rows[r];
    // (YᵀY + Yᵀ(C - I)Y + λI) x = Yᵀ C p, with C - I = α on observed cells.
    Matrix a = gram + ridge;
    Vector b = Vector::Zero(k);
    for (int j : observed) {
      const auto y = fixed.row(j).transpose();
      a.noalias() += config.alpha * (y * y.transpose());
      b += (1.0 + config.alpha) * y;
    }
    target.row(static_cast<Eigen::Index>(r)) = a.ldlt().solve(b).transpose();
  }
}

WmfState wmf_fit(const InteractionGraph& graph, const WmfConfig& config) {
  if (graph.num_playlists() == 0 || graph.num_tracks() == 0) throw DomainError("wmf: empty interaction graph");
  if (config.factors <= 0 || config.iterations < 0) throw ConfigError("wmf: factors must be positive");
  if (!(config.regularization > 0.0)) throw ConfigError("wmf: regularization must be positive");
  Rng rng(config.seed);
  WmfState s;
  s.config = config;
  s.playlist_factors = random_normal(static_cast<Eigen::Index>(graph.num_playlists()), config.factors,
                                     config.init_sigma, rng);
  s.track_factors = random_normal(static_cast<Eigen::Index>(graph.num_tracks()), config.factors, config.init_sigma, rng);

  std::vector<std::vector<int>> by_playlist(graph.num_playlists()), by_track(graph.num_tracks());
  for (std::size_t p = 0; p < graph.num_playlists(); ++p) by_playlist[p] = graph.members(p);
  for (std::size_t t = 0; t < graph.num_tracks(); ++t) by_track[t] = graph.parents(t);

  s.objective_trace.push_back(wmf_objective(graph, s.playlist_factors, s.track_factors, config));
  for (int it = 0; it < config.iterations; ++it) {
    wmf_solve_side(by_playlist, s.track_factors, s.playlist_factors, config);
    wmf_solve_side(by_track, s.playlist_factors, s.track_factors, config);
    s.objective_trace.push_back(wmf_objective(graph, s.playlist_factors, s.track_factors, config));
  }
  return s;
}

}  // namespace larp
