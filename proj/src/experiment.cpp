#include "larp/experiment.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "larp/errors.hpp"

namespace larp {

Modality modality_from_string(const std::string& name) {
  if (name == "both") return Modality::both;
  if (name == "audio") return Modality::audio;
  if (name == "text") return Modality::text;
  throw ConfigError("unknown modality '" + name + "' (expected both, audio or text)");
}

EmbeddingTable embed_tracks(const EncoderState& encoder, const TrackPool& pool, Modality modality, bool normalize) {
  if (modality == Modality::both) return embed_pool(encoder, pool, normalize);
  std::vector<std::size_t> rows(pool.num_tracks());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<std::string> ids;
  for (const auto& t : pool.tracks()) ids.push_back(t.id);
  if (rows.empty()) return EmbeddingTable(std::move(ids), Matrix(0, encoder.config.embed_dim));
  auto [a, t] = encode_batch(encoder, pool.audio_matrix(rows), pool.text_matrix(rows));
  return EmbeddingTable(std::move(ids), modality == Modality::audio ? std::move(a) : std::move(t));
}

std::unique_ptr<Recommender> make_recommender(const std::string& name, const TrackPool& train_pool,
                                              const EmbeddingTable& train_content, const RecommenderParams& params) {
  if (name == "itemknn") return std::make_unique<ItemKnnRecommender>();
  if (name != "dropoutnet" && name != "clcrec") {
    throw ConfigError("unknown recommender '" + name + "' (expected itemknn, dropoutnet or clcrec)");
  }
  const InteractionGraph graph = InteractionGraph::from_pool(train_pool);
  for (const auto& id : graph.track_ids()) {
    if (!train_content.contains(id)) throw ConfigError("train embeddings lack track '" + id + "'");
  }
  const Matrix content = train_content.rows(graph.track_ids());
  if (name == "dropoutnet") {
    const WmfState wmf = wmf_fit(graph, params.wmf);
    const Matrix playlist_content = pooled_playlist_content(graph, content);
    auto state = std::make_shared<const DropoutNetState>(
        dropoutnet_fit(wmf, graph, content, playlist_content, params.dropoutnet));
    return std::make_unique<DropoutNetRecommender>(std::move(state));
  }
  auto state = std::make_shared<const ClcrecState>(clcrec_fit(graph, content, params.clcrec));
  return std::make_unique<ClcrecRecommender>(std::move(state));
}

MetricReport evaluate_table(const Recommender& recommender, const TrackPool& test_pool, const EmbeddingTable& table,
                            const EvalParams& params) {
  const TaskSet tasks = build_tasks(test_pool, params.q, params.seed);
  if (tasks.tasks.empty()) throw DomainError("no test playlist has more than q = " + std::to_string(params.q) + " tracks");
  return evaluate(recommender, tasks.tasks, table, params.ks);
}

AblationResult run_ablation(const Corpus& corpus, const EncoderConfig& encoder, const TrainConfig& train,
                            const std::vector<std::string>& variants, const EvalParams& eval,
                            const std::string& recommender, const RecommenderParams& rec) {
  if (variants.empty()) throw ConfigError("ablation: empty variant list");
  const auto& known = ablation_variants();
  for (const auto& v : variants) {
    if (std::find(known.begin(), known.end(), v) == known.end()) throw ConfigError("unknown ablation variant '" + v + "'");
  }
  const std::set<std::string> want(variants.begin(), variants.end());
  auto needs = [&](std::initializer_list<const char*> names) {
    return std::any_of(names.begin(), names.end(), [&](const char* n) { return want.count(n) != 0; });
  };
  const int max_stage = needs({"stage-3-fusion", "stage-3-no-fusion", "text-only", "audio-only"}) ? 3
                        : needs({"stage-2"})                                                     ? 2
                        : needs({"stage-1"})                                                     ? 1
                                                                                                 : 0;

  AblationResult out;
  const Validator validator = itemknn_validator(corpus.validation(), train.validation_seeds, train.seed);
  std::map<std::string, Checkpoint> models;
  Checkpoint current = initial_checkpoint(corpus, encoder);
  models.emplace("untrained", current);
  for (int stage = 1; stage <= std::min(max_stage, 2); ++stage) {
    StageResult r = run_stage(stage, current, corpus, train, validator);
    out.log.append(r.log);
    current = r.checkpoint;
    models.emplace("stage-" + std::to_string(stage), current);
  }
  if (max_stage == 3) {
    if (needs({"stage-3-fusion", "text-only", "audio-only"})) {
      TrainConfig c = train;
      c.use_fusion = true;
      StageResult r = run_stage(3, current, corpus, c, validator);
      out.log.append(r.log);
      models.emplace("stage-3-fusion", r.checkpoint);
    }
    if (want.count("stage-3-no-fusion")) {
      TrainConfig c = train;
      c.use_fusion = false;
      StageResult r = run_stage(3, current, corpus, c, validator);
      out.log.append(r.log);
      models.emplace("stage-3-no-fusion", r.checkpoint);
    }
  }

  for (const auto& v : variants) {
    Modality modality = Modality::both;
    std::string model = v;
    if (v == "text-only" || v == "audio-only") {
      modality = v == "text-only" ? Modality::text : Modality::audio;
      model = "stage-3-fusion";
    }
    const Checkpoint& ck = models.at(model);
    const EmbeddingTable test_table = embed_tracks(ck.encoder, corpus.test(), modality);
    std::unique_ptr<Recommender> r;
    if (recommender == "itemknn") {
      r = make_recommender(recommender, corpus.train(), EmbeddingTable(), rec);
    } else {
      r = make_recommender(recommender, corpus.train(), embed_tracks(ck.encoder, corpus.train(), modality), rec);
    }
    out.rows.emplace_back(v, evaluate_table(*r, corpus.test(), test_table, eval));
  }
  for (auto& [name, ck] : models) {
    if (name != "untrained") out.checkpoints.emplace_back(name, ck);
  }
  return out;
}

std::vector<std::pair<int, MetricReport>> sensitivity_sweep(const Corpus& corpus, std::vector<int> js,
                                                            const Checkpoint& stage2, const TrainConfig& train,
                                                            const EvalParams& eval) {
  if (js.empty()) throw ConfigError("sweep: empty J list");
  std::sort(js.begin(), js.end());
  js.erase(std::unique(js.begin(), js.end()), js.end());
  if (js.front() < 1) throw ConfigError("sweep: J values must be at least 1");
  const Validator validator = itemknn_validator(corpus.validation(), train.validation_seeds, train.seed);
  std::vector<std::pair<int, MetricReport>> out;
  for (int j : js) {
    TrainConfig c = train;
    c.playlist_size = j;
    StageResult r = run_stage(3, stage2, corpus, c, validator);
    const EmbeddingTable table = embed_tracks(r.checkpoint.encoder, corpus.test());
    out.emplace_back(j, evaluate_table(ItemKnnRecommender(), corpus.test(), table, eval));
  }
  return out;
}

MetricReport median_report(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw DomainError("median_report: no reports");
  MetricReport out;
  out.ks = reports.front().ks;
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  for (std::size_t i = 0; i < out.ks.size(); ++i) {
    std::vector<double> r, n;
    for (const auto& rep : reports) {
      if (rep.ks != out.ks) throw ShapeError("median_report: K lists differ");
      r.push_back(rep.recall[i]);
      n.push_back(rep.ndcg[i]);
    }
    out.recall.push_back(median(r));
    out.ndcg.push_back(median(n));
  }
  return out;
}

}  // namespace larp
