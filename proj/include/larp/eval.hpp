#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "larp/corpus.hpp"
#include "larp/recsys.hpp"

namespace larp {

/// |top-K ∩ relevant| / |relevant|. Throws DomainError for K <= 0 or an
/// empty relevant set.
double recall_at_k(const std::vector<std::string>& ranked, const std::unordered_set<std::string>& relevant, int k);

/// Binary-relevance NDCG with the ideal DCG truncated at min(K, |relevant|).
double ndcg_at_k(const std::vector<std::string>& ranked, const std::unordered_set<std::string>& relevant, int k);

struct HomogeneityResult {
  double mean = 0.0;                // over scored playlists
  std::vector<double> per_playlist;  // in pool order, skipped ones omitted
  std::size_t skipped = 0;           // playlists with fewer than 2 tracks
};

// Mean pairwise cosine similarity of member embeddings per playlist.
HomogeneityResult homogeneity(const TrackPool& pool, const std::function<Vector(const Track&)>& embedder);
HomogeneityResult homogeneity(const std::vector<std::vector<Vector>>& playlists);

struct EvalTask {
  std::string playlist_id;
  std::vector<std::string> seeds;
  std::unordered_set<std::string> relevant;
};

struct TaskSet {
  std::vector<EvalTask> tasks;
  std::size_t skipped = 0;  // playlists with <= q members
};

// q seeds per playlist drawn with a seeded shuffle; the rest are relevant.
// Throws DomainError for q = 0.
TaskSet build_tasks(const TrackPool& pool, int q, std::uint64_t seed);

struct MetricReport {
  std::vector<int> ks;
  std::vector<double> recall;  // mean per K
  std::vector<double> ndcg;
  std::vector<std::string> task_ids;
  std::vector<std::vector<double>> task_recall;  // [task][K]
  std::vector<std::vector<double>> task_ndcg;

  double recall_at(int k) const;
  double ndcg_at(int k) const;
};

MetricReport evaluate(const Recommender& recommender, const std::vector<EvalTask>& tasks,
                      const EmbeddingTable& candidates, const std::vector<int>& ks);

// Fixed-width human readable table; `rows` pairs a label with a report.
std::string format_reports(const std::vector<std::pair<std::string, MetricReport>>& rows);
// "label,metric@K,...". Numbers are printed with 6 decimals so that
// repeated runs are byte-identical.
std::string reports_csv(const std::vector<std::pair<std::string, MetricReport>>& rows);
std::string per_task_csv(const MetricReport& report);

struct ProjectedPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
};

struct Projection {
  std::vector<ProjectedPoint> points;
  Vector explained;            // top-2 eigenvalues of the covariance
  double total_variance = 0.0;
  bool rank_deficient = false;  // second axis zeroed
};

// 2-D PCA of the selected rows. Each axis is signed so that its
// largest-magnitude loading is positive. Throws DomainError for < 2 ids.
Projection project_2d(const EmbeddingTable& table, const std::vector<std::string>& ids);

}  // namespace larp
