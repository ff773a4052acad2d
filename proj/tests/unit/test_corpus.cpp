#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "larp/corpus.hpp"
#include "larp/errors.hpp"

using namespace larp;

namespace {

Track track(const std::string& id, double x, int dim = 2) {
  Track t;
  t.id = id;
  t.audio = Vector::Constant(dim, x);
  t.text = Vector::Constant(dim, -x);
  return t;
}

CooccurrenceGraph cooc_of(const std::vector<std::pair<std::string, std::vector<std::string>>>& playlists,
                          InteractionGraph* graph_out = nullptr) {
  std::set<std::string> ids;
  std::vector<std::string> pids;
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& [p, members] : playlists) {
    pids.push_back(p);
    for (const auto& s : members) {
      ids.insert(s);
      edges.emplace_back(p, s);
    }
  }
  InteractionGraph g(pids, std::vector<std::string>(ids.begin(), ids.end()), edges);
  if (graph_out) *graph_out = g;
  return derive_cooccurrence(g);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("larp_test_" + name)).string();
}

void write_text(const std::string& path, const std::string& body) { std::ofstream(path) << body; }

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("derive_cooccurrence examples") {
    auto o1 = cooc_of({{"p1", {"a", "b"}}});
    CHECK(o1.contains(0, 1));
    CHECK(o1.contains(1, 0));
    CHECK(o1.num_pairs() == 2);

    auto o2 = cooc_of({{"p1", {"a"}}});
    CHECK(o2.num_pairs() == 0);

    // ids sort to a=0, b=1, c=2
    auto o3 = cooc_of({{"p1", {"a", "b"}}, {"p2", {"b", "c"}}});
    CHECK(o3.num_pairs() == 4);
    CHECK(o3.contains(0, 1));
    CHECK(o3.contains(1, 2));
    CHECK(o3.contains(2, 1));
    CHECK_FALSE(o3.contains(0, 2));
    CHECK_FALSE(o3.contains(1, 1));

    CHECK_THROWS_AS(InteractionGraph({"p"}, {"a"}, {{"p", "zz"}}), ValidationError);
  }

  TEST_CASE("derive_cooccurrence agrees with a brute-force double loop") {
    SyntheticParams sp;
    sp.n_genres = 4;
    sp.tracks_per_genre = 40;
    sp.playlists = 30;
    sp.tracks_per_playlist = 6;
    sp.validation_tracks_per_genre = 5;
    sp.validation_playlists = 2;
    sp.test_tracks_per_genre = 5;
    sp.test_playlists = 2;
    const Corpus c = generate_synthetic(sp).corpus;
    const InteractionGraph g = InteractionGraph::from_pool(c.train());
    const CooccurrenceGraph o = derive_cooccurrence(g);
    const std::size_t n = g.num_tracks();
    std::vector<std::vector<bool>> ref(n, std::vector<bool>(n, false));
    for (const auto& pl : c.train().playlists()) {
      for (const auto& a : pl.track_ids)
        for (const auto& b : pl.track_ids)
          if (a != b) ref[*c.train().track_index(a)][*c.train().track_index(b)] = true;
    }
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(o.contains(i, j) == ref[i][j]);
        CHECK(o.contains(i, j) == o.contains(j, i));
        pairs += ref[i][j];
      }
    }
    CHECK(o.num_pairs() == pairs);
  }

  TEST_CASE("make_caption") {
    CHECK(make_caption({"Love", "X", "Y"}) == "The track Love by X on album Y");
    CHECK(make_caption({"A", "B", "C"}) == "The track A by B on album C");
    CHECK_THROWS_AS(make_caption({"", "B", "C"}), ValidationError);
    CHECK_THROWS_AS(make_caption({"A", "B", ""}), ValidationError);
  }

  TEST_CASE("hash_caption is deterministic and unit norm") {
    const Vector a = hash_caption("The track A by B on album C", 16);
    CHECK(a == hash_caption("The track A by B on album C", 16));
    CHECK(a.norm() == doctest::Approx(1.0));
    CHECK(a != hash_caption("The track Quietly by Someone on album Elsewhere", 16));
  }

  TEST_CASE("convert_interaction_log examples") {
    std::unordered_map<std::string, Track> catalog;
    for (const char* id : {"s1", "s2", "s3", "s4", "s5", "x", "y", "z"}) catalog.emplace(id, track(id, 1.0));

    LogConversionParams p;
    p.min_len = 0;
    p.assignments = {{"u", Split::train}};
    std::vector<Interaction> one;
    for (int i = 1; i <= 5; ++i) one.push_back({"u", "s" + std::to_string(i), i});
    const Corpus c1 = convert_interaction_log(one, p, catalog, 2, 2);
    REQUIRE(c1.train().num_playlists() == 1);
    CHECK(c1.train().playlists()[0].track_ids.size() == 5);
    CHECK(c1.test().num_playlists() == 0);

    // step 3: a track listened in train is removed from test
    LogConversionParams p2;
    p2.min_len = 0;
    p2.assignments = {{"A", Split::train}, {"B", Split::test}};
    const std::vector<Interaction> two{{"A", "x", 1}, {"A", "y", 2}, {"B", "y", 3}, {"B", "z", 4}};
    const Corpus c2 = convert_interaction_log(two, p2, catalog, 2, 2);
    REQUIRE(c2.test().num_playlists() == 1);
    CHECK(c2.test().playlists()[0].track_ids == std::vector<std::string>{"z"});

    // step 4: test playlists need more than min_len tracks
    LogConversionParams p3 = p2;
    p3.min_len = 30;
    const std::vector<Interaction> three{{"A", "x", 1}, {"B", "y", 3}, {"B", "z", 4}};
    const Corpus c3 = convert_interaction_log(three, p3, catalog, 2, 2);
    CHECK(c3.test().num_playlists() == 0);

    CHECK_THROWS_AS(convert_interaction_log({}, p, catalog, 2, 2), ValidationError);
  }

  TEST_CASE("convert_interaction_log never places a track in two splits") {
    std::mt19937_64 rng(4);
    std::unordered_map<std::string, Track> catalog;
    for (int i = 0; i < 60; ++i) {
      const std::string id = "t" + std::to_string(i);
      catalog.emplace(id, track(id, i));
    }
    std::vector<Interaction> log;
    std::uniform_int_distribution<int> pick(0, 59);
    for (int u = 0; u < 40; ++u) {
      for (int k = 0; k < 15; ++k) log.push_back({"u" + std::to_string(u), "t" + std::to_string(pick(rng)), k});
    }
    LogConversionParams p;
    p.min_len = 2;
    p.max_len = 8;
    p.seed = 9;
    const Corpus c = convert_interaction_log(log, p, catalog, 2, 2);
    std::map<std::string, int> where;
    int split = 0;
    for (const TrackPool* pool : {&c.train(), &c.validation(), &c.test()}) {
      for (const auto& t : pool->tracks()) {
        CHECK(where.count(t.id) == 0);
        where[t.id] = split;
      }
      ++split;
    }
    for (const auto& pl : c.test().playlists()) {
      CHECK(pl.track_ids.size() > 2);
      CHECK(pl.track_ids.size() <= 8);
    }
  }

  TEST_CASE("generate_synthetic examples") {
    SyntheticParams sp;
    sp.n_genres = 3;
    sp.tracks_per_genre = 20;
    sp.playlists = 10;
    sp.tracks_per_playlist = 5;
    sp.validation_tracks_per_genre = 5;
    sp.validation_playlists = 3;
    sp.test_tracks_per_genre = 5;
    sp.test_playlists = 3;
    sp.audio_dim = 4;
    sp.text_dim = 3;

    SUBCASE("purity 1, no noise: every playlist has identical audio features") {
      sp.purity = 1.0;
      sp.noise_sigma = 0.0;
      const Corpus c = generate_synthetic(sp).corpus;
      for (const TrackPool* pool : {&c.train(), &c.test()}) {
        for (const auto& pl : pool->playlists()) {
          const Vector& first = pool->track(pl.track_ids.front()).audio;
          for (const auto& id : pl.track_ids) CHECK(pool->track(id).audio == first);
        }
      }
    }
    SUBCASE("fixed seed is deterministic, byte for byte") {
      const std::string a = temp_path("syn_a.jsonl"), b = temp_path("syn_b.jsonl");
      save_corpus(generate_synthetic(sp).corpus, a);
      save_corpus(generate_synthetic(sp).corpus, b);
      std::ifstream fa(a), fb(b);
      const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
      CHECK(sa == sb);
      sp.seed = 2;
      CHECK_FALSE(generate_synthetic(sp).corpus == generate_synthetic(SyntheticParams{}).corpus);
    }
    SUBCASE("cold-start disjointness") {
      const Corpus c = generate_synthetic(sp).corpus;
      for (const auto& t : c.train().tracks()) {
        CHECK_FALSE(c.test().contains(t.id));
        CHECK_FALSE(c.validation().contains(t.id));
      }
      std::set<std::string> pids;
      for (const TrackPool* pool : {&c.train(), &c.validation(), &c.test()}) {
        for (const auto& pl : pool->playlists()) {
          CHECK(pids.insert(pl.id).second);
          for (const auto& id : pl.track_ids) CHECK(pool->contains(id));
        }
      }
    }
    SUBCASE("infeasible configurations") {
      sp.tracks_per_playlist = 1000;
      CHECK_THROWS_AS(generate_synthetic(sp), ConfigError);
    }
    SUBCASE("purity bounds") {
      sp.purity = 0.3;
      CHECK_THROWS_AS(generate_synthetic(sp), ConfigError);
    }
  }

  TEST_CASE("corpus file round trip and validation") {
    SyntheticParams sp;
    sp.n_genres = 2;
    sp.tracks_per_genre = 6;
    sp.playlists = 3;
    sp.tracks_per_playlist = 3;
    sp.validation_tracks_per_genre = 2;
    sp.validation_playlists = 1;
    sp.test_tracks_per_genre = 3;
    sp.test_playlists = 2;
    const Corpus c = generate_synthetic(sp).corpus;
    const std::string path = temp_path("rt.jsonl");
    save_corpus(c, path);
    CHECK(load_corpus(path) == c);

    // small hand-made corpus with captions instead of text vectors
    const std::string hdr = R"({"type":"header","version":1,"audio_dim":2,"text_dim":4})";
    const std::string good = hdr + "\n" +
                             R"({"type":"track","split":"train","id":"a","audio":[1,0],"caption":"The track A by B on album C"})" "\n"
                             R"({"type":"track","split":"train","id":"b","audio":[0,1],"metadata":{"track_name":"x","artist_name":"y","album_name":"z"}})" "\n"
                             R"({"type":"track","split":"test","id":"c","audio":[1,1],"text":[1,0,0,0]})" "\n"
                             R"({"type":"playlist","split":"train","id":"p","tracks":["a","b"]})" "\n";
    write_text(path, good);
    const Corpus small = load_corpus(path);
    CHECK(small.train().num_tracks() == 2);
    CHECK(small.train().track("a").text == hash_caption("The track A by B on album C", 4));
    CHECK(small.train().track("b").text == hash_caption("The track x by y on album z", 4));
    save_corpus(small, path);
    CHECK(load_corpus(path) == small);

    const std::string dup = hdr + "\n" +
                            R"({"type":"track","split":"train","id":"a","audio":[1,0],"text":[1,0,0,0]})" "\n"
                            R"({"type":"track","split":"test","id":"a","audio":[1,0],"text":[1,0,0,0]})" "\n";
    write_text(path, dup);
    try {
      load_corpus(path);
      FAIL("duplicate id accepted");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    }

    const std::string missing = hdr + "\n" +
                                R"({"type":"track","split":"train","id":"a","audio":[1,0],"text":[1,0,0,0]})" "\n"
                                R"({"type":"playlist","split":"train","id":"p","tracks":["a","ghost"]})" "\n";
    write_text(path, missing);
    CHECK_THROWS_AS(load_corpus(path), ValidationError);

    const std::string wrong_dim = hdr + "\n" + R"({"type":"track","split":"train","id":"a","audio":[1,0,3],"text":[1,0,0,0]})" "\n";
    write_text(path, wrong_dim);
    CHECK_THROWS_AS(load_corpus(path), ValidationError);
  }

  TEST_CASE("playlists may not repeat a track") {
    std::vector<Track> ts{track("a", 1), track("b", 2)};
    TrackPool pool(ts, {Playlist{"p", {"a", "a"}}});
    CHECK_THROWS_AS(Corpus(2, 2, pool, TrackPool(), TrackPool()), ValidationError);
  }
}
