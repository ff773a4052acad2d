#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "larp/errors.hpp"
#include "larp/recsys.hpp"

namespace larp {

EmbeddingTable::EmbeddingTable(std::vector<std::string> ids, Matrix vectors)
    : ids_(std::move(ids)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(ids_.size()) != vectors_.rows()) {
    throw ShapeError("embedding table: " + std::to_string(ids_.size()) + " ids for " +
                     std::to_string(vectors_.rows()) + " rows");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw ValidationError("embedding table: duplicate id '" + ids_[i] + "'");
  }
}

std::size_t EmbeddingTable::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw NotFoundError("embedding table: unknown id '" + id + "'");
  return it->second;
}

Matrix EmbeddingTable::rows(const std::vector<std::string>& ids) const {
  Matrix out(static_cast<Eigen::Index>(ids.size()), vectors_.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = vectors_.row(static_cast<Eigen::Index>(index_of(ids[i])));
  }
  return out;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("failed to format number");
  out.append(buf, end);
}

}  // namespace

void save_embedding_table(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  std::string line = std::to_string(table.size()) + " " + std::to_string(table.dim()) + "\n";
  out << line;
  for (std::size_t i = 0; i < table.size(); ++i) {
    line = table.ids()[i];
    for (Eigen::Index c = 0; c < table.vectors().cols(); ++c) {
      line.push_back(' ');
      append_double(line, table.vectors()(static_cast<Eigen::Index>(i), c));
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

EmbeddingTable load_embedding_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding table '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": missing header");
  std::istringstream header(line);
  std::size_t n = 0;
  int d = 0;
  if (!(header >> n >> d) || d <= 0) throw ValidationError(path + ": malformed header");
  std::vector<std::string> ids;
  Matrix vectors(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw ValidationError(path + ": expected " + std::to_string(n) + " rows");
    const char* p = line.data();
    const char* end = line.data() + line.size();
    const char* space = std::find(p, end, ' ');
    ids.emplace_back(p, space);
    p = space;
    for (int c = 0; c < d; ++c) {
      while (p < end && *p == ' ') ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw ValidationError(path + ": bad number on row " + std::to_string(i + 2));
      vectors(static_cast<Eigen::Index>(i), c) = v;
      p = next;
    }
  }
  return EmbeddingTable(std::move(ids), std::move(vectors));
}

Vector unify(const Vector& audio, const Vector& text, bool normalize) {
  if (audio.size() != text.size()) throw ShapeError("unify: audio and text lengths differ");
  Vector mid = 0.5 * (audio + text);
  if (!normalize) return mid;
  if (mid.norm() < 1e-12) throw DomainError("unify: audio and text representations cancel out");
  return mid.normalized();
}

EmbeddingTable embed_pool(const EncoderState& encoder, const TrackPool& pool, bool normalize) {
  std::vector<std::size_t> rows(pool.num_tracks());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<std::string> ids;
  for (const auto& t : pool.tracks()) ids.push_back(t.id);
  if (rows.empty()) return EmbeddingTable(std::move(ids), Matrix(0, encoder.config.embed_dim));
  auto [a, t] = encode_batch(encoder, pool.audio_matrix(rows), pool.text_matrix(rows));
  Matrix e(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    e.row(r) = unify(a.row(r).transpose(), t.row(r).transpose(), normalize).transpose();
  }
  return EmbeddingTable(std::move(ids), std::move(e));
}

Vector pool_playlist(const EmbeddingTable& table, const std::vector<std::string>& track_ids, bool normalize) {
  if (track_ids.empty()) throw DomainError("pool_playlist: empty track list");
  Vector sum = Vector::Zero(table.dim());
  for (const auto& id : track_ids) sum += table.row(id);
  Vector mean = sum / static_cast<double>(track_ids.size());
  if (!normalize) return mean;
  if (mean.norm() < 1e-12) throw DomainError("pool_playlist: member representations cancel out");
  return mean.normalized();
}

std::vector<std::string> rank_top_k(const Vector& scores, const std::vector<std::string>& ids, std::size_t k,
                                    const std::unordered_set<std::string>& exclude) {
  if (k == 0) throw DomainError("rank_top_k: K must be at least 1");
  if (static_cast<std::size_t>(scores.size()) != ids.size()) throw ShapeError("rank_top_k: score/id count mismatch");
  std::vector<std::size_t> order;
  order.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!exclude.count(ids[i])) order.push_back(i);
  }
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = scores[static_cast<Eigen::Index>(a)];
    const double sb = scores[static_cast<Eigen::Index>(b)];
    if (sa != sb) return sa > sb;
    return ids[a] < ids[b];
  };
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(ids[order[i]]);
  return out;
}

std::vector<std::string> itemknn_recommend(const Vector& query, const EmbeddingTable& candidates, std::size_t k,
                                           const std::unordered_set<std::string>& exclude) {
  if (query.size() != candidates.dim()) throw ShapeError("itemknn: query dimension mismatch");
  Vector scores = candidates.vectors() * query;
  return rank_top_k(scores, candidates.ids(), k, exclude);
}

Matrix pooled_playlist_content(const InteractionGraph& graph, const Matrix& track_content, bool normalize) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(graph.num_playlists()), track_content.cols());
  for (std::size_t p = 0; p < graph.num_playlists(); ++p) {
    const auto& m = graph.members(p);
    if (m.empty()) continue;
    Vector sum = Vector::Zero(track_content.cols());
    for (int s : m) sum += track_content.row(s).transpose();
    sum /= static_cast<double>(m.size());
    if (normalize && sum.norm() > 1e-12) sum.normalize();
    out.row(static_cast<Eigen::Index>(p)) = sum.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recommender adapters

namespace {

std::unordered_set<std::string> as_set(const std::vector<std::string>& ids) { return {ids.begin(), ids.end()}; }

}  // namespace

std::vector<std::string> ItemKnnRecommender::recommend(const std::vector<std::string>& seeds,
                                                       const EmbeddingTable& candidates, std::size_t k) const {
  return itemknn_recommend(pool_playlist(candidates, seeds, normalize_), candidates, k, as_set(seeds));
}

std::vector<std::string> DropoutNetRecommender::recommend(const std::vector<std::string>& seeds,
                                                          const EmbeddingTable& candidates, std::size_t k) const {
  return dropoutnet_recommend(*state_, pool_playlist(candidates, seeds), candidates, k, as_set(seeds));
}

std::vector<std::string> ClcrecRecommender::recommend(const std::vector<std::string>& seeds,
                                                      const EmbeddingTable& candidates, std::size_t k) const {
  return clcrec_recommend(*state_, pool_playlist(candidates, seeds), candidates, k, as_set(seeds));
}

}  // namespace larp
