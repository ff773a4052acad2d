#include <doctest.h>

#include <cmath>

#include "larp/checkpoint.hpp"
#include "larp/errors.hpp"
#include "larp/trainer.hpp"

using namespace larp;

namespace {

Corpus tiny_corpus() {
  SyntheticParams sp;
  sp.n_genres = 3;
  sp.tracks_per_genre = 20;
  sp.playlists = 12;
  sp.tracks_per_playlist = 5;
  sp.validation_tracks_per_genre = 6;
  sp.validation_playlists = 6;
  sp.test_tracks_per_genre = 6;
  sp.test_playlists = 6;
  sp.audio_dim = 6;
  sp.text_dim = 5;
  sp.seed = 4;
  return generate_synthetic(sp).corpus;
}

EncoderConfig tiny_encoder() {
  EncoderConfig c;
  c.hidden = {8};
  c.embed_dim = 8;
  c.queue_capacity = 32;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.batch_size = 10;
  t.max_epochs = 3;
  t.patience = 2;
  t.lr = 1e-2;
  t.playlist_size = 3;
  t.validation_seeds = 2;
  return t;
}

std::string encoder_hash(const EncoderState& s) { return checkpoint_hash(Checkpoint{s, std::nullopt, 0}); }

// Returns scripted recall values and remembers the state it saw.
struct ScriptedValidator {
  std::vector<double> script;
  std::vector<std::string> seen;
  Validator fn() {
    return [this](const EncoderState& s) {
      seen.push_back(encoder_hash(s));
      const double r = script.at(seen.size() - 1);
      return ValidationScore{r, r};
    };
  }
};

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("lr_at examples") {
    TrainConfig c;
    c.lr = 0.3;
    c.warmup_steps = 100;
    const long total = 1100;
    CHECK(lr_at(0, total, c) == 0.0);
    CHECK(lr_at(50, total, c) == doctest::Approx(0.15));
    CHECK(lr_at(100, total, c) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(std::abs(lr_at(600, total, c) - 0.15) < 1e-12);
    CHECK(lr_at(total, total, c) == doctest::Approx(0.0));
    CHECK(lr_at(5 * total, total, c) >= 0.0);
    // monotone decay after warmup
    for (long s = 100; s < total; ++s) CHECK(lr_at(s + 1, total, c) <= lr_at(s, total, c));

    TrainConfig d;
    CHECK(warmup_for(1000, d) == 50);
    CHECK(warmup_for(3, d) == 1);
  }

  TEST_CASE("config validation") {
    TrainConfig c;
    c.patience = c.max_epochs + 1;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = TrainConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = TrainConfig{};
    c.lr = -1;
    CHECK_THROWS_AS(validate(c), ConfigError);
  }

  TEST_CASE("early stopping with patience 1 and a decreasing metric") {
    const Corpus corpus = tiny_corpus();
    TrainConfig t = tiny_train();
    t.patience = 1;
    t.max_epochs = 6;
    ScriptedValidator v{{0.9, 0.8, 0.7, 0.6, 0.5, 0.4}, {}};
    const StageResult r = run_stage(1, initial_checkpoint(corpus, tiny_encoder()), corpus, t, v.fn());
    CHECK(r.log.epochs.size() == 2);
    REQUIRE(r.log.stages.size() == 1);
    CHECK(r.log.stages[0].best_epoch == 1);
    CHECK(r.log.stages[0].epochs_run == 2);
    CHECK(encoder_hash(r.checkpoint.encoder) == v.seen[0]);
    CHECK(v.seen[0] != v.seen[1]);
  }

  TEST_CASE("early stopping halts exactly patience epochs after the best epoch") {
    const Corpus corpus = tiny_corpus();
    TrainConfig t = tiny_train();
    t.patience = 3;
    t.max_epochs = 10;
    ScriptedValidator v{{0.1, 0.2, 0.5, 0.5, 0.4, 0.3, 0.9, 0.9, 0.9, 0.9}, {}};
    const StageResult r = run_stage(1, initial_checkpoint(corpus, tiny_encoder()), corpus, t, v.fn());
    // ties do not count as improvement: best stays at epoch 3
    CHECK(r.log.stages[0].best_epoch == 3);
    CHECK(r.log.epochs.size() == 6);
    CHECK(encoder_hash(r.checkpoint.encoder) == v.seen[2]);
    for (std::size_t i = 0; i < r.log.epochs.size(); ++i) CHECK(r.log.epochs[i].epoch == static_cast<int>(i + 1));
  }

  TEST_CASE("stage transfer is exact and runs are deterministic") {
    const Corpus corpus = tiny_corpus();
    const TrainConfig t = tiny_train();
    const Validator v = itemknn_validator(corpus.validation(), t.validation_seeds, t.seed);
    const Checkpoint start = initial_checkpoint(corpus, tiny_encoder());
    const RunResult a = run_all_stages(start, corpus, t, {1, 2, 3}, v);
    const RunResult b = run_all_stages(start, corpus, t, {1, 2, 3}, v);

    CHECK(train_log_csv(a.log, false) == train_log_csv(b.log, false));
    CHECK(checkpoint_hash(a.final) == checkpoint_hash(b.final));

    REQUIRE(a.log.stages.size() == 3);
    REQUIRE(a.per_stage.size() == 3);
    CHECK(a.log.stages[0].start_hash == checkpoint_hash(start));
    for (int s = 0; s < 3; ++s) {
      CHECK(a.log.stages[s].end_hash == checkpoint_hash(a.per_stage[s]));
      CHECK(a.per_stage[s].stage == s + 1);
      if (s > 0) CHECK(a.log.stages[s].start_hash == a.log.stages[s - 1].end_hash);
    }
    CHECK(a.final.fusion.has_value());

    std::size_t epochs = 0;
    for (const auto& m : a.log.stages) epochs += static_cast<std::size_t>(m.epochs_run);
    CHECK(a.log.epochs.size() == epochs);

    // stage 2 and 3 carry their auxiliary losses
    for (const auto& e : a.log.epochs) {
      CHECK(std::isfinite(e.objective));
      if (e.stage >= 2) CHECK(e.ttc > 0.0);
      if (e.stage == 3) CHECK(e.tpc > 0.0);
    }
  }

  TEST_CASE("resuming from a stage boundary reproduces the remaining log") {
    const Corpus corpus = tiny_corpus();
    const TrainConfig t = tiny_train();
    const Validator v = itemknn_validator(corpus.validation(), t.validation_seeds, t.seed);
    const Checkpoint start = initial_checkpoint(corpus, tiny_encoder());
    const RunResult full = run_all_stages(start, corpus, t, {1, 2, 3}, v);

    const std::string path = "resume_test.ckpt";
    save_checkpoint(full.per_stage[0], path);
    const RunResult rest = run_all_stages(load_checkpoint(path), corpus, t, {2, 3}, v);

    TrainLog tail;
    for (const auto& e : full.log.epochs)
      if (e.stage >= 2) tail.epochs.push_back(e);
    tail.stages.assign(full.log.stages.begin() + 1, full.log.stages.end());
    CHECK(train_log_csv(rest.log, false) == train_log_csv(tail, false));
    CHECK(checkpoint_hash(rest.final) == checkpoint_hash(full.final));
  }

  TEST_CASE("stage list must continue from the checkpoint") {
    const Corpus corpus = tiny_corpus();
    const TrainConfig t = tiny_train();
    const Validator v = [](const EncoderState&) { return ValidationScore{}; };
    const Checkpoint start = initial_checkpoint(corpus, tiny_encoder());
    CHECK_THROWS_AS(run_all_stages(start, corpus, t, {2}, v), ConfigError);
    CHECK_THROWS_AS(run_all_stages(start, corpus, t, {1, 3}, v), ConfigError);
    CHECK_THROWS_AS(run_stage(3, start, corpus, t, v), ConfigError);
  }

  TEST_CASE("stage list [1] equals run_stage(1)") {
    const Corpus corpus = tiny_corpus();
    const TrainConfig t = tiny_train();
    const Validator v = itemknn_validator(corpus.validation(), t.validation_seeds, t.seed);
    const Checkpoint start = initial_checkpoint(corpus, tiny_encoder());
    const RunResult a = run_all_stages(start, corpus, t, {1}, v);
    const StageResult b = run_stage(1, start, corpus, t, v);
    CHECK(checkpoint_hash(a.final) == checkpoint_hash(b.checkpoint));
    CHECK(a.final.stage == 1);
  }

  TEST_CASE("a diverging run aborts with DivergenceError") {
    const Corpus corpus = tiny_corpus();
    TrainConfig t = tiny_train();
    t.lr = 1e300;
    t.warmup_steps = 1;
    const Validator v = [](const EncoderState&) { return ValidationScore{}; };
    CHECK_THROWS_AS(run_stage(1, initial_checkpoint(corpus, tiny_encoder()), corpus, t, v), DivergenceError);
  }

  TEST_CASE("no-fusion stage 3 drops the fusion block") {
    const Corpus corpus = tiny_corpus();
    TrainConfig t = tiny_train();
    t.use_fusion = false;
    t.max_epochs = 2;
    t.patience = 1;
    const Validator v = itemknn_validator(corpus.validation(), t.validation_seeds, t.seed);
    const RunResult r = run_all_stages(initial_checkpoint(corpus, tiny_encoder()), corpus, t, {1, 2, 3}, v);
    CHECK_FALSE(r.final.fusion.has_value());
  }

  TEST_CASE("train log csv marks stage boundaries") {
    TrainLog log;
    log.epochs.push_back(EpochRecord{1, 1, 4, 1.5, 0, 0, 1.5, 0.25, 0.3, 1e-3, 0, 0.5});
    log.stages.push_back(StageMarker{1, 1, 1, "aa", "bb"});
    const std::string csv = train_log_csv(log, false);
    CHECK(csv.find("stage_end,1,1") != std::string::npos);
    CHECK(csv.find(",aa,bb") != std::string::npos);
    CHECK(csv.find("wall_seconds") == std::string::npos);
    CHECK(train_log_csv(log, true).find("wall_seconds") != std::string::npos);
  }
}
