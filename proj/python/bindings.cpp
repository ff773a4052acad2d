#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "larp/checkpoint.hpp"
#include "larp/cli.hpp"
#include "larp/errors.hpp"
#include "larp/eval.hpp"
#include "larp/experiment.hpp"
#include "larp/losses.hpp"

namespace py = pybind11;
using namespace larp;

namespace {

// Keyword arguments override fields of a default-constructed config.
template <typename T>
void set_if(const py::dict& kw, const char* key, T& field) {
  if (kw.contains(key)) field = kw[key].cast<T>();
}

SyntheticParams synthetic_params(const py::dict& kw) {
  SyntheticParams p;
  set_if(kw, "n_genres", p.n_genres);
  set_if(kw, "tracks_per_genre", p.tracks_per_genre);
  set_if(kw, "playlists", p.playlists);
  set_if(kw, "tracks_per_playlist", p.tracks_per_playlist);
  set_if(kw, "validation_tracks_per_genre", p.validation_tracks_per_genre);
  set_if(kw, "validation_playlists", p.validation_playlists);
  set_if(kw, "test_tracks_per_genre", p.test_tracks_per_genre);
  set_if(kw, "test_playlists", p.test_playlists);
  set_if(kw, "purity", p.purity);
  set_if(kw, "noise_sigma", p.noise_sigma);
  set_if(kw, "shared_sigma", p.shared_sigma);
  set_if(kw, "audio_dim", p.audio_dim);
  set_if(kw, "text_dim", p.text_dim);
  set_if(kw, "seed", p.seed);
  return p;
}

EncoderConfig encoder_config(const py::dict& kw) {
  EncoderConfig c;
  set_if(kw, "hidden", c.hidden);
  set_if(kw, "embed_dim", c.embed_dim);
  set_if(kw, "momentum", c.momentum);
  set_if(kw, "queue_capacity", c.queue_capacity);
  set_if(kw, "temperature", c.temperature);
  set_if(kw, "seed", c.seed);
  if (kw.contains("activation")) c.activation = activation_from_string(kw["activation"].cast<std::string>());
  return c;
}

TrainConfig train_config(const py::dict& kw) {
  TrainConfig t;
  set_if(kw, "batch_size", t.batch_size);
  set_if(kw, "max_epochs", t.max_epochs);
  set_if(kw, "patience", t.patience);
  set_if(kw, "lr", t.lr);
  if (kw.contains("warmup_steps")) t.warmup_steps = kw["warmup_steps"].cast<long>();
  set_if(kw, "beta1", t.beta1);
  set_if(kw, "beta2", t.beta2);
  set_if(kw, "playlist_size", t.playlist_size);
  set_if(kw, "loss_scale", t.loss_scale);
  set_if(kw, "use_fusion", t.use_fusion);
  set_if(kw, "validation_seeds", t.validation_seeds);
  set_if(kw, "seed", t.seed);
  return t;
}

py::dict report_dict(const MetricReport& r) {
  py::dict out;
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    out[py::str("recall@" + std::to_string(r.ks[i]))] = r.recall[i];
    out[py::str("ndcg@" + std::to_string(r.ks[i]))] = r.ndcg[i];
  }
  return out;
}

py::list epochs_list(const TrainLog& log) {
  py::list out;
  for (const auto& e : log.epochs) {
    py::dict d;
    d["stage"] = e.stage;
    d["epoch"] = e.epoch;
    d["wtc"] = e.wtc;
    d["ttc"] = e.ttc;
    d["tpc"] = e.tpc;
    d["objective"] = e.objective;
    d["val_recall"] = e.val_recall;
    d["val_ndcg"] = e.val_ndcg;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_larp, m) {
  m.doc() = "Relational contrastive track encoders and cold-start playlist continuation";

  auto base = py::register_exception<Error>(m, "LarpError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NotFoundError>(m, "NotFoundError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  py::class_<Playlist>(m, "Playlist")
      .def_readonly("id", &Playlist::id)
      .def_readonly("track_ids", &Playlist::track_ids);

  py::class_<TrackPool>(m, "TrackPool")
      .def_property_readonly("track_ids",
                             [](const TrackPool& p) {
                               std::vector<std::string> ids;
                               for (const auto& t : p.tracks()) ids.push_back(t.id);
                               return ids;
                             })
      .def_property_readonly("playlists", &TrackPool::playlists)
      .def("audio", [](const TrackPool& p, const std::string& id) { return p.track(id).audio; })
      .def("text", [](const TrackPool& p, const std::string& id) { return p.track(id).text; })
      .def("genre", [](const TrackPool& p, const std::string& id) { return p.track(id).genre; })
      .def("__len__", &TrackPool::num_tracks);

  py::class_<Corpus>(m, "Corpus")
      .def_property_readonly("audio_dim", &Corpus::audio_dim)
      .def_property_readonly("text_dim", &Corpus::text_dim)
      .def_property_readonly("train", &Corpus::train, py::return_value_policy::reference_internal)
      .def_property_readonly("validation", &Corpus::validation, py::return_value_policy::reference_internal)
      .def_property_readonly("test", &Corpus::test, py::return_value_policy::reference_internal);

  m.def(
      "generate_synthetic", [](const py::kwargs& kw) { return generate_synthetic(synthetic_params(kw)).corpus; },
      "Planted-genre synthetic corpus. Keyword arguments override the defaults.");
  m.def("load_corpus", &load_corpus, py::arg("path"));
  m.def("save_corpus", &save_corpus, py::arg("corpus"), py::arg("path"));

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("stage", &Checkpoint::stage)
      .def_property_readonly("has_fusion", [](const Checkpoint& c) { return c.fusion.has_value(); })
      .def_property_readonly("hash", [](const Checkpoint& c) { return checkpoint_hash(c); })
      .def_property_readonly("embed_dim", [](const Checkpoint& c) { return c.encoder.config.embed_dim; });

  m.def("save_checkpoint", &save_checkpoint, py::arg("checkpoint"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def(
      "initial_checkpoint",
      [](const Corpus& corpus, const py::dict& encoder) { return initial_checkpoint(corpus, encoder_config(encoder)); },
      py::arg("corpus"), py::arg("encoder") = py::dict());

  m.def(
      "train",
      [](const Corpus& corpus, const Checkpoint& start, const std::vector<int>& stages, const py::dict& config) {
        const TrainConfig t = train_config(config);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_all_stages(start, corpus, t, stages,
                             itemknn_validator(corpus.validation(), t.validation_seeds, t.seed));
        }
        return py::make_tuple(r.final, epochs_list(r.log));
      },
      py::arg("corpus"), py::arg("start"), py::arg("stages") = std::vector<int>{1, 2, 3},
      py::arg("config") = py::dict(), "Runs the listed stages; returns (checkpoint, per-epoch log).");

  m.def(
      "embed",
      [](const Checkpoint& ck, const TrackPool& pool, const std::string& modality, bool normalize) {
        const EmbeddingTable t = embed_tracks(ck.encoder, pool, modality_from_string(modality), normalize);
        return py::make_tuple(t.ids(), t.vectors());
      },
      py::arg("checkpoint"), py::arg("pool"), py::arg("modality") = "both", py::arg("normalize") = true);

  m.def(
      "evaluate",
      [](const Corpus& corpus, const std::vector<std::string>& ids, const Matrix& vectors,
         const std::string& recommender, const std::vector<int>& ks, int q, std::uint64_t seed,
         std::optional<std::pair<std::vector<std::string>, Matrix>> train) {
        const EmbeddingTable test(ids, vectors);
        const EmbeddingTable train_table = train ? EmbeddingTable(train->first, train->second) : EmbeddingTable();
        if (recommender != "itemknn" && !train) throw ConfigError(recommender + " needs train embeddings");
        const auto rec = make_recommender(recommender, corpus.train(), train_table, RecommenderParams{});
        return report_dict(evaluate_table(*rec, corpus.test(), test, EvalParams{ks, q, seed}));
      },
      py::arg("corpus"), py::arg("ids"), py::arg("vectors"), py::arg("recommender") = "itemknn",
      py::arg("ks") = std::vector<int>{10, 20, 40}, py::arg("q") = 10, py::arg("seed") = 1,
      py::arg("train") = py::none(), "Test-pool Recall@K and NDCG@K for one embedding table.");

  m.def("recall_at_k", &recall_at_k, py::arg("ranked"), py::arg("relevant"), py::arg("k"));
  m.def("ndcg_at_k", &ndcg_at_k, py::arg("ranked"), py::arg("relevant"), py::arg("k"));
  m.def(
      "itemknn",
      [](const Vector& query, const std::vector<std::string>& ids, const Matrix& vectors, std::size_t k,
         const std::unordered_set<std::string>& exclude) {
        return itemknn_recommend(query, EmbeddingTable(ids, vectors), k, exclude);
      },
      py::arg("query"), py::arg("ids"), py::arg("vectors"), py::arg("k"),
      py::arg("exclude") = std::unordered_set<std::string>());

  m.def(
      "contrast",
      [](const Matrix& audio, const Matrix& text, double temperature) {
        const Eigen::Index b = audio.rows();
        const Matrix y = relation_targets(static_cast<std::size_t>(b), static_cast<std::size_t>(b), 0);
        const Matrix none(0, audio.cols());
        const ContrastResult r = contrast(ContrastBatch{audio, text, none, none, y, y}, temperature);
        return py::make_tuple(r.loss, r.grad_audio, r.grad_text);
      },
      py::arg("audio"), py::arg("text"), py::arg("temperature") = 0.07,
      "Symmetric in-batch contrast with identity targets; returns (loss, d_audio, d_text).");

  m.def(
      "project_2d",
      [](const std::vector<std::string>& ids, const Matrix& vectors) {
        const Projection p = project_2d(EmbeddingTable(ids, vectors), ids);
        Matrix xy(static_cast<Eigen::Index>(p.points.size()), 2);
        for (std::size_t i = 0; i < p.points.size(); ++i) {
          xy(static_cast<Eigen::Index>(i), 0) = p.points[i].x;
          xy(static_cast<Eigen::Index>(i), 1) = p.points[i].y;
        }
        return py::make_tuple(xy, p.explained);
      },
      py::arg("ids"), py::arg("vectors"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> argv{"larp"};
        argv.insert(argv.end(), args.begin(), args.end());
        std::vector<char*> ptrs;
        for (auto& a : argv) ptrs.push_back(a.data());
        return run_cli(static_cast<int>(ptrs.size()), ptrs.data());
      },
      py::arg("args"), "Runs the command-line tool in-process and returns its exit code.");
}
