#include "larp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "larp/errors.hpp"

namespace larp {

namespace {

void check_metric_args(const std::unordered_set<std::string>& relevant, int k) {
  if (k <= 0) throw DomainError("K must be at least 1");
  if (relevant.empty()) throw DomainError("relevant set is empty");
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double recall_at_k(const std::vector<std::string>& ranked, const std::unordered_set<std::string>& relevant, int k) {
  check_metric_args(relevant, k);
  const std::size_t n = std::min(ranked.size(), static_cast<std::size_t>(k));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += relevant.count(ranked[i]);
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_at_k(const std::vector<std::string>& ranked, const std::unordered_set<std::string>& relevant, int k) {
  check_metric_args(relevant, k);
  const std::size_t n = std::min(ranked.size(), static_cast<std::size_t>(k));
  double dcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (relevant.count(ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(relevant.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

HomogeneityResult homogeneity(const std::vector<std::vector<Vector>>& playlists) {
  HomogeneityResult out;
  for (const auto& members : playlists) {
    if (members.size() < 2) {
      ++out.skipped;
      continue;
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        sum += cosine_sim(members[i], members[j]);
        ++pairs;
      }
    }
    out.per_playlist.push_back(sum / static_cast<double>(pairs));
  }
  if (!out.per_playlist.empty()) {
    out.mean = std::accumulate(out.per_playlist.begin(), out.per_playlist.end(), 0.0) /
               static_cast<double>(out.per_playlist.size());
  }
  return out;
}

HomogeneityResult homogeneity(const TrackPool& pool, const std::function<Vector(const Track&)>& embedder) {
  std::vector<std::vector<Vector>> sets;
  sets.reserve(pool.num_playlists());
  for (const auto& p : pool.playlists()) {
    std::vector<Vector> members;
    for (const auto& id : p.track_ids) members.push_back(embedder(pool.track(id)));
    sets.push_back(std::move(members));
  }
  return homogeneity(sets);
}

TaskSet build_tasks(const TrackPool& pool, int q, std::uint64_t seed) {
  if (q <= 0) throw DomainError("build_tasks: at least one seed track is required");
  TaskSet out;
  Rng rng(seed);
  for (const auto& p : pool.playlists()) {
    if (p.track_ids.size() <= static_cast<std::size_t>(q)) {
      ++out.skipped;
      continue;
    }
    std::vector<std::string> order = p.track_ids;
    std::shuffle(order.begin(), order.end(), rng);
    EvalTask t;
    t.playlist_id = p.id;
    t.seeds.assign(order.begin(), order.begin() + q);
    t.relevant.insert(order.begin() + q, order.end());
    out.tasks.push_back(std::move(t));
  }
  return out;
}

double MetricReport::recall_at(int k) const {
  auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw NotFoundError("report has no K = " + std::to_string(k));
  return recall[static_cast<std::size_t>(it - ks.begin())];
}

double MetricReport::ndcg_at(int k) const {
  auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw NotFoundError("report has no K = " + std::to_string(k));
  return ndcg[static_cast<std::size_t>(it - ks.begin())];
}

MetricReport evaluate(const Recommender& recommender, const std::vector<EvalTask>& tasks,
                      const EmbeddingTable& candidates, const std::vector<int>& ks) {
  if (ks.empty()) throw ConfigError("evaluate: empty K list");
  if (tasks.empty()) throw DomainError("evaluate: no tasks");
  MetricReport r;
  r.ks = ks;
  r.recall.assign(ks.size(), 0.0);
  r.ndcg.assign(ks.size(), 0.0);
  const int max_k = *std::max_element(ks.begin(), ks.end());
  if (max_k <= 0) throw DomainError("evaluate: K must be at least 1");
  for (const auto& task : tasks) {
    const auto ranked = recommender.recommend(task.seeds, candidates, static_cast<std::size_t>(max_k));
    std::vector<double> rec, nd;
    for (int k : ks) {
      rec.push_back(recall_at_k(ranked, task.relevant, k));
      nd.push_back(ndcg_at_k(ranked, task.relevant, k));
    }
    r.task_ids.push_back(task.playlist_id);
    r.task_recall.push_back(std::move(rec));
    r.task_ndcg.push_back(std::move(nd));
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      r.recall[i] += r.task_recall[t][i];
      r.ndcg[i] += r.task_ndcg[t][i];
    }
    r.recall[i] /= static_cast<double>(tasks.size());
    r.ndcg[i] /= static_cast<double>(tasks.size());
  }
  return r;
}

std::string format_reports(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::ostringstream os;
  if (rows.empty()) return "";
  std::size_t label_width = 8;
  for (const auto& [label, _] : rows) label_width = std::max(label_width, label.size());
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(label_width), "variant");
  os << buf;
  for (int k : rows.front().second.ks) {
    std::snprintf(buf, sizeof(buf), "  %8s  %8s", ("R@" + std::to_string(k)).c_str(), ("N@" + std::to_string(k)).c_str());
    os << buf;
  }
  os << '\n';
  for (const auto& [label, rep] : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(label_width), label.c_str());
    os << buf;
    for (std::size_t i = 0; i < rep.ks.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "  %8.4f  %8.4f", rep.recall[i], rep.ndcg[i]);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::string reports_csv(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::ostringstream os;
  if (rows.empty()) return "";
  os << "variant";
  for (int k : rows.front().second.ks) os << ",recall@" << k << ",ndcg@" << k;
  os << '\n';
  for (const auto& [label, rep] : rows) {
    os << label;
    for (std::size_t i = 0; i < rep.ks.size(); ++i) os << ',' << fixed6(rep.recall[i]) << ',' << fixed6(rep.ndcg[i]);
    os << '\n';
  }
  return os.str();
}

std::string per_task_csv(const MetricReport& report) {
  std::ostringstream os;
  os << "playlist";
  for (int k : report.ks) os << ",recall@" << k << ",ndcg@" << k;
  os << '\n';
  for (std::size_t t = 0; t < report.task_ids.size(); ++t) {
    os << report.task_ids[t];
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
      os << ',' << fixed6(report.task_recall[t][i]) << ',' << fixed6(report.task_ndcg[t][i]);
    }
    os << '\n';
  }
  return os.str();
}

Projection project_2d(const EmbeddingTable& table, const std::vector<std::string>& ids) {
  if (ids.size() < 2) throw DomainError("project_2d: need at least two vectors");
  Matrix x = table.rows(ids);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Matrix cov = (x.transpose() * x) / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("project_2d: eigen-decomposition failed");
  // Eigenvalues come in ascending order.
  const Eigen::Index d = cov.rows();
  Projection out;
  out.total_variance = cov.trace();
  out.explained = Vector::Zero(2);
  Matrix axes = Matrix::Zero(d, 2);
  for (int c = 0; c < 2 && c < d; ++c) {
    Vector v = eig.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    axes.col(c) = v;
    out.explained[c] = std::max(0.0, eig.eigenvalues()[d - 1 - c]);
  }
  const double tol = 1e-12 * std::max(1.0, out.explained[0]);
  if (d < 2 || out.explained[1] <= tol) {
    out.rank_deficient = true;
    axes.col(1).setZero();
    out.explained[1] = 0.0;
    std::cerr << "warning: project_2d input has fewer than two effective dimensions\n";
  }
  const Matrix coords = x * axes;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.points.push_back({ids[i], coords(r, 0), coords(r, 1)});
  }
  return out;
}

}  // namespace larp
