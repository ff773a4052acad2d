#include "larp/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "larp/checkpoint.hpp"
#include "larp/corpus.hpp"
#include "larp/errors.hpp"
#include "larp/eval.hpp"
#include "larp/experiment.hpp"
#include "larp/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace larp {

namespace {

// Everything configurable, filled by CLI11 from flags and the config file.
struct Options {
  SyntheticParams synthetic;
  std::string source = "synthetic";
  std::string log_path, catalog_path;
  LogConversionParams conversion;

  EncoderConfig encoder;
  TrainConfig train;
  long warmup_steps = -1;
  bool no_fusion = false;
  std::vector<int> stages{1, 2, 3};

  std::string recommender = "itemknn";
  RecommenderParams rec;
  EvalParams eval;
  bool raw_mean = false;

  // Subcommand paths.
  std::string run_dir, corpus, resume, checkpoint, split = "test", modality = "both";
  std::string embeddings, train_embeddings, train_corpus, ids_file;
  std::vector<std::string> seeds_list;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seed_list;
  std::vector<int> js{1, 5, 10};
  int top = 10;
};

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << contents;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read input '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is required");
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " '" + path + "' does not exist");
}

fs::path prepare_run_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--run-dir is required");
  fs::create_directories(dir);
  return fs::path(dir);
}

// Resolved configuration plus hashes of every input file.
void write_manifest(const fs::path& dir, const std::string& command, const CLI::App& app,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  json j;
  j["command"] = command;
  // Keep the global keys and the section of the command that ran.
  std::istringstream all(app.config_to_str(true, false));
  std::string resolved, line;
  while (std::getline(all, line)) {
    const auto dot = line.find('.');
    const auto eq = line.find('=');
    const bool other = dot != std::string::npos && dot < eq && line.compare(0, dot, command) != 0;
    if (!other) resolved += line + "\n";
  }
  j["resolved_config"] = resolved;
  json in = json::object();
  for (const auto& p : inputs) {
    if (!p.empty()) in[p] = file_hash(p);
  }
  j["inputs"] = in;
  json out = json::object();
  for (const auto& name : outputs) out[name] = file_hash((dir / name).string());
  j["outputs"] = out;
  write_file(dir / ("manifest-" + command + ".json"), j.dump(2) + "\n");
}

void finalize(Options& o) {
  o.train.warmup_steps = o.warmup_steps >= 0 ? std::optional<long>(o.warmup_steps) : std::nullopt;
  o.train.use_fusion = !o.no_fusion;
  o.encoder.seed = o.train.seed;
  o.rec.wmf.seed = o.rec.dropoutnet.seed = o.rec.clcrec.seed = o.train.seed;
  if (o.eval.q <= 0) throw ConfigError("--q must be at least 1");
  for (int k : o.eval.ks) {
    if (k <= 0) throw ConfigError("--k values must be at least 1");
  }
  validate(o.train);
}

Corpus load_input_corpus(const std::string& path) {
  require_file(path, "--corpus");
  return load_corpus(path);
}

std::vector<Interaction> read_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read interaction log '" + path + "'");
  std::vector<Interaction> log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Interaction e;
    std::string ts;
    if (!std::getline(ss, e.user, ',') || !std::getline(ss, e.track, ',') || !std::getline(ss, ts)) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected user,track,timestamp");
    }
    if (lineno == 1 && e.user == "user") continue;
    try {
      e.timestamp = std::stoll(ts);
    } catch (const std::exception&) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": bad timestamp '" + ts + "'");
    }
    log.push_back(std::move(e));
  }
  return log;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen_data(Options& o, const CLI::App& app) {
  const fs::path dir = prepare_run_dir(o.run_dir);
  std::vector<std::string> inputs, outputs{"corpus.jsonl"};
  if (o.source == "synthetic") {
    const SyntheticCorpus sc = generate_synthetic(o.synthetic);
    save_corpus(sc.corpus, (dir / "corpus.jsonl").string());
    std::ostringstream genres;
    genres << "track,genre\n";
    std::vector<std::pair<std::string, int>> rows(sc.genre.begin(), sc.genre.end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [id, g] : rows) genres << id << ',' << g << '\n';
    write_file(dir / "genres.csv", genres.str());
    outputs.push_back("genres.csv");
  } else if (o.source == "log") {
    require_file(o.log_path, "--log");
    require_file(o.catalog_path, "--catalog");
    const Corpus catalog_corpus = load_corpus(o.catalog_path);
    std::unordered_map<std::string, Track> catalog;
    for (const TrackPool* p : {&catalog_corpus.train(), &catalog_corpus.validation(), &catalog_corpus.test()}) {
      for (const auto& t : p->tracks()) catalog.emplace(t.id, t);
    }
    const Corpus c = convert_interaction_log(read_log(o.log_path), o.conversion, catalog, catalog_corpus.audio_dim(),
                                             catalog_corpus.text_dim());
    save_corpus(c, (dir / "corpus.jsonl").string());
    inputs = {o.log_path, o.catalog_path};
  } else {
    throw ConfigError("--source must be 'synthetic' or 'log'");
  }
  write_manifest(dir, "gen-data", app, inputs, outputs);
  std::cout << "wrote " << (dir / "corpus.jsonl").string() << "\n";
  return 0;
}

int cmd_train(Options& o, const CLI::App& app) {
  const fs::path dir = prepare_run_dir(o.run_dir);
  const Corpus corpus = load_input_corpus(o.corpus);
  Checkpoint start;
  if (!o.resume.empty()) {
    require_file(o.resume, "--resume");
    start = load_checkpoint(o.resume);
    if (start.encoder.config.audio_dim != corpus.audio_dim() || start.encoder.config.text_dim != corpus.text_dim()) {
      throw ConfigError("checkpoint feature dimensions do not match the corpus");
    }
  } else {
    start = initial_checkpoint(corpus, o.encoder);
  }
  const Validator validator = itemknn_validator(corpus.validation(), o.train.validation_seeds, o.train.seed);
  RunResult result;
  try {
    result = run_all_stages(start, corpus, o.train, o.stages, validator);
  } catch (const DivergenceError& e) {
    write_file(dir / "divergence.txt", std::string(e.what()) + "\n");
    throw;
  }
  std::vector<std::string> outputs;
  for (const auto& ck : result.per_stage) {
    const std::string name = "stage-" + std::to_string(ck.stage) + ".ckpt";
    save_checkpoint(ck, (dir / name).string());
    outputs.push_back(name);
  }
  save_checkpoint(result.final, (dir / "checkpoint.ckpt").string());
  write_file(dir / "trainlog.csv", train_log_csv(result.log));
  outputs.insert(outputs.end(), {"checkpoint.ckpt", "trainlog.csv"});
  write_manifest(dir, "train", app, {o.corpus, o.resume}, outputs);
  std::cout << "trained stages";
  for (int s : o.stages) std::cout << ' ' << s;
  std::cout << "; checkpoint " << (dir / "checkpoint.ckpt").string() << "\n";
  return 0;
}

int cmd_embed(Options& o, const CLI::App& app) {
  const fs::path dir = prepare_run_dir(o.run_dir);
  require_file(o.checkpoint, "--checkpoint");
  const Corpus corpus = load_input_corpus(o.corpus);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Split split = split_from_string(o.split);
  const EmbeddingTable table =
      embed_tracks(ck.encoder, corpus.pool(split), modality_from_string(o.modality), !o.raw_mean);
  const std::string name = "embeddings-" + o.split + ".txt";
  save_embedding_table(table, (dir / name).string());
  write_manifest(dir, "embed", app, {o.checkpoint, o.corpus}, {name});
  std::cout << "wrote " << table.size() << " rows to " << (dir / name).string() << "\n";
  return 0;
}

// Recommender fitted on the train pool, using either given train
// embeddings or ones computed from a checkpoint.
std::unique_ptr<Recommender> build_recommender(const Options& o, const Corpus* train_corpus, const Checkpoint* ck) {
  if (o.recommender == "itemknn") return std::make_unique<ItemKnnRecommender>(!o.raw_mean);
  if (!train_corpus) throw ConfigError(o.recommender + " needs --corpus (or --train-corpus) for its train pool");
  EmbeddingTable train_table;
  if (!o.train_embeddings.empty()) {
    require_file(o.train_embeddings, "--train-embeddings");
    train_table = load_embedding_table(o.train_embeddings);
  } else if (ck) {
    train_table = embed_tracks(ck->encoder, train_corpus->train(), Modality::both, !o.raw_mean);
  } else {
    throw ConfigError(o.recommender + " needs --train-embeddings or --checkpoint");
  }
  return make_recommender(o.recommender, train_corpus->train(), train_table, o.rec);
}

int cmd_recommend(Options& o, const CLI::App& app) {
  require_file(o.embeddings, "--embeddings");
  if (o.seeds_list.empty()) throw ConfigError("--seeds is required");
  if (o.top <= 0) throw ConfigError("--top must be at least 1");
  const EmbeddingTable candidates = load_embedding_table(o.embeddings);
  std::optional<Corpus> corpus;
  if (!o.corpus.empty()) corpus = load_input_corpus(o.corpus);
  const auto rec = build_recommender(o, corpus ? &*corpus : nullptr, nullptr);
  const auto ranked = rec->recommend(o.seeds_list, candidates, static_cast<std::size_t>(o.top));
  std::ostringstream os;
  for (std::size_t i = 0; i < ranked.size(); ++i) os << i + 1 << '\t' << ranked[i] << '\n';
  std::cout << os.str();
  if (!o.run_dir.empty()) {
    const fs::path dir = prepare_run_dir(o.run_dir);
    write_file(dir / "recommendations.txt", os.str());
    write_manifest(dir, "recommend", app, {o.embeddings, o.corpus, o.train_embeddings}, {"recommendations.txt"});
  }
  return 0;
}

int cmd_eval(Options& o, const CLI::App& app) {
  const fs::path dir = prepare_run_dir(o.run_dir);
  const Corpus corpus = load_input_corpus(o.corpus);
  std::optional<Checkpoint> ck;
  EmbeddingTable test_table;
  if (!o.checkpoint.empty()) {
    require_file(o.checkpoint, "--checkpoint");
    ck = load_checkpoint(o.checkpoint);
    if (ck->encoder.config.audio_dim != corpus.audio_dim() || ck->encoder.config.text_dim != corpus.text_dim()) {
      throw ConfigError("checkpoint feature dimensions do not match the evaluation corpus");
    }
    test_table = embed_tracks(ck->encoder, corpus.test(), Modality::both, !o.raw_mean);
  } else if (!o.embeddings.empty()) {
    require_file(o.embeddings, "--embeddings");
    test_table = load_embedding_table(o.embeddings);
  } else {
    throw ConfigError("eval needs --embeddings or --checkpoint");
  }
  std::optional<Corpus> train_corpus;
  if (!o.train_corpus.empty()) train_corpus = load_input_corpus(o.train_corpus);
  const Corpus& fit_corpus = train_corpus ? *train_corpus : corpus;
  const auto rec = build_recommender(o, &fit_corpus, ck ? &*ck : nullptr);
  const MetricReport report = evaluate_table(*rec, corpus.test(), test_table, o.eval);
  const std::vector<std::pair<std::string, MetricReport>> rows{{rec->name(), report}};
  write_file(dir / "metrics.csv", reports_csv(rows));
  write_file(dir / "metrics.txt", format_reports(rows));
  write_file(dir / "per_task.csv", per_task_csv(report));
  write_manifest(dir, "eval", app, {o.corpus, o.checkpoint, o.embeddings, o.train_embeddings, o.train_corpus},
                 {"metrics.csv", "metrics.txt", "per_task.csv"});
  std::cout << format_reports(rows);
  return 0;
}

int cmd_ablate(Options& o, const CLI::App& app) {
  const fs::path dir = prepare_run_dir(o.run_dir);
  const Corpus corpus = load_input_corpus(o.corpus);
  const std::vector<std::string> variants = o.variants.empty() ? ablation_variants() : o.variants;
  const std::vector<std::uint64_t> seeds = o.seed_list.empty() ? std::vector<std::uint64_t>{o.train.seed} : o.seed_list;

  std::vector<std::pair<std::string, MetricReport>> rows;
  std::vector<std::vector<MetricReport>> by_variant(variants.size());
  std::vector<std::string> outputs;
  for (std::uint64_t seed : seeds) {
    Options so = o;
    so.train.seed = seed;
    finalize(so);
    const AblationResult r = run_ablation(corpus, so.encoder, so.train, variants, so.eval, so.recommender, so.rec);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      by_variant[i].push_back(r.rows[i].second);
      rows.emplace_back(seeds.size() > 1 ? r.rows[i].first + "@seed" + std::to_string(seed) : r.rows[i].first,
                        r.rows[i].second);
    }
    const std::string log_name = "trainlog-seed" + std::to_string(seed) + ".csv";
    write_file(dir / log_name, train_log_csv(r.log));
    outputs.push_back(log_name);
  }
  if (seeds.size() > 1) {
    for (std::size_t i = 0; i < variants.size(); ++i) rows.emplace_back(variants[i] + "@median", median_report(by_variant[i]));
  }
  write_file(dir / "ablation.csv", reports_csv(rows));
  write_file(dir / "ablation.txt", format_reports(rows));
  outputs.insert(outputs.end(), {"ablation.csv", "ablation.txt"});
  write_manifest(dir, "ablate", app, {o.corpus}, outputs);
  std::cout << format_reports(rows);
  return 0;
}

int cmd_sweep_j(Options& o, const CLI::App& app) {
  const fs::path dir = prepare_run_dir(o.run_dir);
  const Corpus corpus = load_input_corpus(o.corpus);
  Checkpoint stage2;
  if (!o.resume.empty()) {
    require_file(o.resume, "--resume");
    stage2 = load_checkpoint(o.resume);
    if (stage2.stage != 2) throw ConfigError("--resume must be a stage-2 checkpoint for sweep-j");
  } else {
    const Validator v = itemknn_validator(corpus.validation(), o.train.validation_seeds, o.train.seed);
    stage2 = run_all_stages(initial_checkpoint(corpus, o.encoder), corpus, o.train, {1, 2}, v).final;
  }
  const auto results = sensitivity_sweep(corpus, o.js, stage2, o.train, o.eval);
  std::vector<std::pair<std::string, MetricReport>> rows;
  for (const auto& [j, rep] : results) rows.emplace_back("J=" + std::to_string(j), rep);
  write_file(dir / "sweep.csv", reports_csv(rows));
  write_file(dir / "sweep.txt", format_reports(rows));
  write_manifest(dir, "sweep-j", app, {o.corpus, o.resume}, {"sweep.csv", "sweep.txt"});
  std::cout << format_reports(rows);
  return 0;
}

int cmd_project(Options& o, const CLI::App& app) {
  const fs::path dir = prepare_run_dir(o.run_dir);
  require_file(o.embeddings, "--embeddings");
  const EmbeddingTable table = load_embedding_table(o.embeddings);
  std::vector<std::string> ids;
  if (!o.ids_file.empty()) {
    require_file(o.ids_file, "--ids");
    std::ifstream in(o.ids_file);
    std::string id;
    while (in >> id) ids.push_back(id);
  } else {
    ids = table.ids();
  }
  const Projection p = project_2d(table, ids);
  std::ostringstream os;
  os << "id,x,y\n";
  char buf[96];
  for (const auto& pt : p.points) {
    std::snprintf(buf, sizeof(buf), ",%.9g,%.9g\n", pt.x, pt.y);
    os << pt.id << buf;
  }
  write_file(dir / "projection.csv", os.str());
  write_manifest(dir, "project", app, {o.embeddings, o.ids_file}, {"projection.csv"});
  std::cout << "wrote " << p.points.size() << " points to " << (dir / "projection.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Flag registration

void add_global_options(CLI::App& app, Options& o) {
  auto g = "Synthetic corpus";
  app.add_option("--source", o.source, "gen-data source: synthetic or log")->group(g)->capture_default_str();
  app.add_option("--n-genres", o.synthetic.n_genres)->group(g)->capture_default_str();
  app.add_option("--tracks-per-genre", o.synthetic.tracks_per_genre)->group(g)->capture_default_str();
  app.add_option("--playlists", o.synthetic.playlists, "train playlists")->group(g)->capture_default_str();
  app.add_option("--tracks-per-playlist", o.synthetic.tracks_per_playlist)->group(g)->capture_default_str();
  app.add_option("--validation-tracks-per-genre", o.synthetic.validation_tracks_per_genre)->group(g)->capture_default_str();
  app.add_option("--validation-playlists", o.synthetic.validation_playlists)->group(g)->capture_default_str();
  app.add_option("--test-tracks-per-genre", o.synthetic.test_tracks_per_genre)->group(g)->capture_default_str();
  app.add_option("--test-playlists", o.synthetic.test_playlists)->group(g)->capture_default_str();
  app.add_option("--purity", o.synthetic.purity)->group(g)->capture_default_str();
  app.add_option("--noise-sigma", o.synthetic.noise_sigma)->group(g)->capture_default_str();
  app.add_option("--shared-sigma", o.synthetic.shared_sigma, "per-track nuisance shared by both modalities")
      ->group(g)->capture_default_str();
  app.add_option("--audio-dim", o.synthetic.audio_dim)->group(g)->capture_default_str();
  app.add_option("--text-dim", o.synthetic.text_dim)->group(g)->capture_default_str();
  app.add_option("--data-seed", o.synthetic.seed)->group(g)->capture_default_str();

  g = "Interaction log";
  app.add_option("--log", o.log_path, "CSV of user,track,timestamp")->group(g);
  app.add_option("--catalog", o.catalog_path, "corpus file supplying track features")->group(g);
  app.add_option("--min-len", o.conversion.min_len, "test playlists need more tracks than this (paper: 30)")
      ->group(g)->capture_default_str();
  app.add_option("--max-len", o.conversion.max_len, "test playlists keep at most this many (paper: < 100)")
      ->group(g)->capture_default_str();
  app.add_option("--train-fraction", o.conversion.train_fraction)->group(g)->capture_default_str();
  app.add_option("--validation-fraction", o.conversion.validation_fraction)->group(g)->capture_default_str();

  g = "Encoder";
  app.add_option("--embed-dim", o.encoder.embed_dim, "paper: 256")->group(g)->capture_default_str();
  app.add_option("--hidden", o.encoder.hidden, "branch MLP widths")->group(g)->delimiter(',')->capture_default_str();
  app.add_option("--momentum", o.encoder.momentum, "paper: 0.995")->group(g)->capture_default_str();
  app.add_option("--queue-capacity", o.encoder.queue_capacity, "paper: 57600")->group(g)->capture_default_str();
  app.add_option("--temperature", o.encoder.temperature, "paper: 0.07")->group(g)->capture_default_str();
  app.add_option_function<std::string>(
         "--activation", [&o](const std::string& s) { o.encoder.activation = activation_from_string(s); },
         "gelu, tanh or identity")
      ->group(g)->default_str("gelu");

  g = "Training";
  app.add_option("--batch-size", o.train.batch_size, "paper: 50")->group(g)->capture_default_str();
  app.add_option("--max-epochs", o.train.max_epochs, "paper: 45")->group(g)->capture_default_str();
  app.add_option("--patience", o.train.patience, "paper: 5")->group(g)->capture_default_str();
  app.add_option("--lr", o.train.lr, "paper: 1e-4")->group(g)->capture_default_str();
  app.add_option("--warmup-steps", o.warmup_steps, "paper: 3000; negative = 5% of the stage budget")
      ->group(g)->capture_default_str();
  app.add_option("--beta1", o.train.beta1, "paper: 0.9")->group(g)->capture_default_str();
  app.add_option("--beta2", o.train.beta2, "paper: 0.99")->group(g)->capture_default_str();
  app.add_option("-J,--playlist-size", o.train.playlist_size, "members fused per TPC sample (paper: 10)")
      ->group(g)->capture_default_str();
  app.add_option("--loss-scale", o.train.loss_scale)->group(g)->capture_default_str();
  app.add_flag("--no-fusion", o.no_fusion, "mean pooling instead of self-attention in stage 3")->group(g);
  app.add_option("--seed", o.train.seed)->group(g)->capture_default_str();
  app.add_option("--validation-seeds", o.train.validation_seeds, "q for early-stopping tasks")
      ->group(g)->capture_default_str();
  app.add_option("--stages", o.stages)->group(g)->delimiter(',')->capture_default_str();

  g = "Recommenders";
  app.add_option("--recommender", o.recommender, "itemknn, dropoutnet or clcrec")->group(g)->capture_default_str();
  app.add_option("--wmf-factors", o.rec.wmf.factors, "paper: 64")->group(g)->capture_default_str();
  app.add_option("--wmf-reg", o.rec.wmf.regularization, "paper: 0.1")->group(g)->capture_default_str();
  app.add_option("--wmf-alpha", o.rec.wmf.alpha)->group(g)->capture_default_str();
  app.add_option("--wmf-iters", o.rec.wmf.iterations)->group(g)->capture_default_str();
  app.add_option("--dn-hidden", o.rec.dropoutnet.hidden)->group(g)->delimiter(',')->capture_default_str();
  app.add_option("--dn-output", o.rec.dropoutnet.output_dim, "paper: 256")->group(g)->capture_default_str();
  app.add_option("--dn-dropout", o.rec.dropoutnet.dropout, "paper: 0.2")->group(g)->capture_default_str();
  app.add_option("--dn-lr", o.rec.dropoutnet.lr, "paper: 0.005")->group(g)->capture_default_str();
  app.add_option("--dn-momentum", o.rec.dropoutnet.momentum, "paper: 0.9")->group(g)->capture_default_str();
  app.add_option("--dn-weight-decay", o.rec.dropoutnet.weight_decay, "paper: 0.1")->group(g)->capture_default_str();
  app.add_option("--dn-epochs", o.rec.dropoutnet.epochs)->group(g)->capture_default_str();
  app.add_option("--dn-batch-size", o.rec.dropoutnet.batch_size)->group(g)->capture_default_str();
  app.add_option("--clc-factors", o.rec.clcrec.factors)->group(g)->capture_default_str();
  app.add_option("--clc-hidden", o.rec.clcrec.hidden)->group(g)->delimiter(',')->capture_default_str();
  app.add_option("--clc-temperature", o.rec.clcrec.temperature, "paper: 2.0")->group(g)->capture_default_str();
  app.add_option("--clc-replace", o.rec.clcrec.replace_prob, "paper: 0.5")->group(g)->capture_default_str();
  app.add_option("--clc-lr", o.rec.clcrec.lr, "paper: 0.001")->group(g)->capture_default_str();
  app.add_option("--clc-weight-decay", o.rec.clcrec.weight_decay, "paper: 0.1")->group(g)->capture_default_str();
  app.add_option("--clc-epochs", o.rec.clcrec.epochs)->group(g)->capture_default_str();
  app.add_option("--clc-batch-size", o.rec.clcrec.batch_size)->group(g)->capture_default_str();

  g = "Evaluation";
  app.add_option("--k", o.eval.ks, "cutoffs")->group(g)->delimiter(',')->capture_default_str();
  app.add_option("--q", o.eval.q, "seed tracks per test playlist")->group(g)->capture_default_str();
  app.add_option("--eval-seed", o.eval.seed)->group(g)->capture_default_str();
  app.add_flag("--raw-mean", o.raw_mean, "skip re-normalization after pooling")->group(g);
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"LARP relational contrastive pre-training and cold-start playlist continuation"};
  app.set_config("--config", "", "TOML/INI config file; keys are the long flag names");
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  add_global_options(app, o);

  auto run_dir = [&o](CLI::App* sub, bool required = true) {
    auto* opt = sub->add_option("--run-dir", o.run_dir, "output directory");
    if (required) opt->required();
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus or convert an interaction log");
  run_dir(gen);

  auto* train = app.add_subcommand("train", "run the staged pre-training");
  train->add_option("--corpus", o.corpus)->required();
  train->add_option("--resume", o.resume, "checkpoint to continue from");
  run_dir(train);

  auto* embed = app.add_subcommand("embed", "export unified track embeddings");
  embed->add_option("--checkpoint", o.checkpoint)->required();
  embed->add_option("--corpus", o.corpus)->required();
  embed->add_option("--split", o.split, "train, validation or test")->capture_default_str();
  embed->add_option("--modality", o.modality, "both, audio or text")->capture_default_str();
  run_dir(embed);

  auto* rec = app.add_subcommand("recommend", "rank candidates for a set of seed tracks");
  rec->add_option("--embeddings", o.embeddings, "candidate embedding table")->required();
  rec->add_option("--seeds", o.seeds_list, "seed track ids")->delimiter(',')->required();
  rec->add_option("--top", o.top)->capture_default_str();
  rec->add_option("--corpus", o.corpus, "train pool for fitted recommenders");
  rec->add_option("--train-embeddings", o.train_embeddings);
  run_dir(rec, false);

  auto* ev = app.add_subcommand("eval", "Recall@K / NDCG@K on the test playlists");
  ev->add_option("--corpus", o.corpus, "corpus whose test pool is evaluated")->required();
  ev->add_option("--embeddings", o.embeddings, "test embedding table");
  ev->add_option("--checkpoint", o.checkpoint, "embed the test pool with this checkpoint");
  ev->add_option("--train-embeddings", o.train_embeddings);
  ev->add_option("--train-corpus", o.train_corpus, "train pool for fitted recommenders (generalization runs)");
  run_dir(ev);

  auto* ab = app.add_subcommand("ablate", "compare training variants with one recommender");
  ab->add_option("--corpus", o.corpus)->required();
  ab->add_option("--variants", o.variants)->delimiter(',');
  ab->add_option("--seeds", o.seed_list, "training seeds; a median row is added for several")->delimiter(',');
  run_dir(ab);

  auto* sw = app.add_subcommand("sweep-j", "stage-3 sensitivity to the fused playlist size J");
  sw->add_option("--corpus", o.corpus)->required();
  sw->add_option("--j", o.js)->delimiter(',')->capture_default_str();
  sw->add_option("--resume", o.resume, "stage-2 checkpoint shared by every J");
  run_dir(sw);

  auto* pr = app.add_subcommand("project", "2-D PCA coordinates of an embedding table");
  pr->add_option("--embeddings", o.embeddings)->required();
  pr->add_option("--ids", o.ids_file, "file listing the ids to project");
  run_dir(pr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    // Converters such as --activation throw library errors.
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    finalize(o);
    if (gen->parsed()) return cmd_gen_data(o, app);
    if (train->parsed()) return cmd_train(o, app);
    if (embed->parsed()) return cmd_embed(o, app);
    if (rec->parsed()) return cmd_recommend(o, app);
    if (ev->parsed()) return cmd_eval(o, app);
    if (ab->parsed()) return cmd_ablate(o, app);
    if (sw->parsed()) return cmd_sweep_j(o, app);
    if (pr->parsed()) return cmd_project(o, app);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace larp
