#include "larp/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "larp/errors.hpp"

namespace larp {

using json = nlohmann::json;

bool operator==(const Track& a, const Track& b) {
  auto same = [](const Vector& x, const Vector& y) { return x.size() == y.size() && x == y; };
  return a.id == b.id && same(a.audio, b.audio) && same(a.text, b.text) && a.caption == b.caption &&
         a.metadata == b.metadata && a.genre == b.genre;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::validation:
      return "validation";
    case Split::test:
      return "test";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "validation" || name == "val") return Split::validation;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + name + "'");
}

// ---------------------------------------------------------------------------
// TrackPool / Corpus

TrackPool::TrackPool(std::vector<Track> tracks, std::vector<Playlist> playlists)
    : tracks_(std::move(tracks)), playlists_(std::move(playlists)) {
  index_.reserve(tracks_.size());
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    if (!index_.emplace(tracks_[i].id, i).second) {
      throw ValidationError("duplicate track id '" + tracks_[i].id + "'");
    }
  }
}

const Track& TrackPool::track(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw NotFoundError("unknown track id '" + id + "'");
  return tracks_[it->second];
}

std::optional<std::size_t> TrackPool::track_index(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Matrix TrackPool::audio_matrix(const std::vector<std::size_t>& rows) const {
  if (rows.empty()) return Matrix(0, 0);
  Matrix out(static_cast<Eigen::Index>(rows.size()), tracks_[rows[0]].audio.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = tracks_[rows[r]].audio.transpose();
  return out;
}

Matrix TrackPool::text_matrix(const std::vector<std::size_t>& rows) const {
  if (rows.empty()) return Matrix(0, 0);
  Matrix out(static_cast<Eigen::Index>(rows.size()), tracks_[rows[0]].text.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = tracks_[rows[r]].text.transpose();
  return out;
}

bool TrackPool::operator==(const TrackPool& other) const {
  return tracks_ == other.tracks_ && playlists_ == other.playlists_;
}

Corpus::Corpus(int audio_dim, int text_dim, TrackPool train, TrackPool validation, TrackPool test)
    : audio_dim_(audio_dim),
      text_dim_(text_dim),
      train_(std::move(train)),
      validation_(std::move(validation)),
      test_(std::move(test)) {
  validate();
}

const TrackPool& Corpus::pool(Split s) const {
  switch (s) {
    case Split::train:
      return train_;
    case Split::validation:
      return validation_;
    case Split::test:
      return test_;
  }
  return train_;
}

bool Corpus::operator==(const Corpus& other) const {
  return audio_dim_ == other.audio_dim_ && text_dim_ == other.text_dim_ && train_ == other.train_ &&
         validation_ == other.validation_ && test_ == other.test_;
}

void Corpus::validate() const {
  if (audio_dim_ <= 0 || text_dim_ <= 0) throw ValidationError("feature dimensions must be positive");
  std::unordered_map<std::string, Split> track_owner;
  std::unordered_map<std::string, Split> playlist_owner;
  for (Split s : {Split::train, Split::validation, Split::test}) {
    const TrackPool& p = pool(s);
    for (const Track& t : p.tracks()) {
      if (t.audio.size() != audio_dim_ || t.text.size() != text_dim_) {
        throw ValidationError("track '" + t.id + "' has feature dimensions (" + std::to_string(t.audio.size()) +
                              ", " + std::to_string(t.text.size()) + "), expected (" +
                              std::to_string(audio_dim_) + ", " + std::to_string(text_dim_) + ")");
      }
      if (!t.audio.allFinite() || !t.text.allFinite()) {
        throw ValidationError("track '" + t.id + "' has non-finite features");
      }
      auto [it, fresh] = track_owner.emplace(t.id, s);
      if (!fresh) {
        throw ValidationError("track id '" + t.id + "' appears in both " + to_string(it->second) + " and " +
                              to_string(s));
      }
    }
    for (const Playlist& pl : p.playlists()) {
      auto [it, fresh] = playlist_owner.emplace(pl.id, s);
      if (!fresh) {
        throw ValidationError("playlist id '" + pl.id + "' appears in both " + to_string(it->second) + " and " +
                              to_string(s));
      }
      std::unordered_set<std::string> seen;
      for (const auto& tid : pl.track_ids) {
        if (!p.contains(tid)) {
          throw ValidationError("playlist '" + pl.id + "' references track '" + tid + "' missing from the " +
                                to_string(s) + " pool");
        }
        if (!seen.insert(tid).second) {
          throw ValidationError("playlist '" + pl.id + "' lists track '" + tid + "' twice");
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Graphs

InteractionGraph::InteractionGraph(std::vector<std::string> playlist_ids, std::vector<std::string> track_ids,
                                   const std::vector<std::pair<std::string, std::string>>& edges)
    : playlist_ids_(std::move(playlist_ids)), track_ids_(std::move(track_ids)) {
  std::unordered_map<std::string, int> pidx, sidx;
  for (std::size_t i = 0; i < playlist_ids_.size(); ++i) pidx.emplace(playlist_ids_[i], static_cast<int>(i));
  for (std::size_t i = 0; i < track_ids_.size(); ++i) sidx.emplace(track_ids_[i], static_cast<int>(i));
  members_.assign(playlist_ids_.size(), {});
  parents_.assign(track_ids_.size(), {});
  for (const auto& [p, s] : edges) {
    auto pi = pidx.find(p);
    if (pi == pidx.end()) throw ValidationError("interaction graph: unknown playlist id '" + p + "'");
    auto si = sidx.find(s);
    if (si == sidx.end()) throw ValidationError("interaction graph: unknown track id '" + s + "'");
    members_[static_cast<std::size_t>(pi->second)].push_back(si->second);
    parents_[static_cast<std::size_t>(si->second)].push_back(pi->second);
  }
  auto tidy = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  for (auto& m : members_) tidy(m);
  for (auto& p : parents_) tidy(p);
}

InteractionGraph InteractionGraph::from_pool(const TrackPool& pool) {
  std::vector<std::string> pids, sids;
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& t : pool.tracks()) sids.push_back(t.id);
  for (const auto& p : pool.playlists()) {
    pids.push_back(p.id);
    for (const auto& s : p.track_ids) edges.emplace_back(p.id, s);
  }
  return InteractionGraph(std::move(pids), std::move(sids), edges);
}

bool InteractionGraph::contains(std::size_t p, std::size_t s) const {
  const auto& m = members_[p];
  return std::binary_search(m.begin(), m.end(), static_cast<int>(s));
}

std::size_t InteractionGraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& m : members_) n += m.size();
  return n;
}

bool CooccurrenceGraph::contains(std::size_t i, std::size_t j) const {
  const auto& n = neighbors_[i];
  return std::binary_search(n.begin(), n.end(), static_cast<int>(j));
}

std::size_t CooccurrenceGraph::num_pairs() const {
  std::size_t n = 0;
  for (const auto& v : neighbors_) n += v.size();
  return n;
}

CooccurrenceGraph derive_cooccurrence(const InteractionGraph& graph) {
  std::vector<std::vector<int>> neighbors(graph.num_tracks());
  for (std::size_t p = 0; p < graph.num_playlists(); ++p) {
    const auto& m = graph.members(p);
    for (int a : m) {
      for (int b : m) {
        if (a != b) neighbors[static_cast<std::size_t>(a)].push_back(b);
      }
    }
  }
  for (auto& v : neighbors) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return CooccurrenceGraph(std::move(neighbors));
}

// ---------------------------------------------------------------------------
// Captions

std::string make_caption(const TrackMetadata& m) {
  if (m.track_name.empty()) throw ValidationError("caption incomplete: empty track name");
  if (m.artist_name.empty()) throw ValidationError("caption incomplete: empty artist name");
  if (m.album_name.empty()) throw ValidationError("caption incomplete: empty album name");
  return "The track " + m.track_name + " by " + m.artist_name + " on album " + m.album_name;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Vector hash_caption(const std::string& caption, int dim) {
  if (dim <= 0) throw DomainError("hash_caption: dimension must be positive");
  Vector v = Vector::Zero(dim);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = fnv1a(token);
    const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim));
    v[bucket] += (h >> 63) ? -1.0 : 1.0;
    token.clear();
  };
  for (unsigned char c : caption) {
    if (std::isalnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return v;
}

// ---------------------------------------------------------------------------
// Interaction-log conversion

Corpus convert_interaction_log(const std::vector<Interaction>& log, const LogConversionParams& params,
                               const std::unordered_map<std::string, Track>& catalog, int audio_dim,
                               int text_dim) {
  if (log.empty()) throw ValidationError("empty interaction log");
  if (params.train_fraction < 0 || params.validation_fraction < 0 ||
      params.train_fraction + params.validation_fraction > 1.0) {
    throw ConfigError("split fractions must be non-negative and sum to at most 1");
  }

  // Per-user history in timestamp order (stable for equal stamps),
  // de-duplicated on first listen.
  std::map<std::string, std::vector<const Interaction*>> by_user;
  for (const auto& e : log) by_user[e.user].push_back(&e);
  std::vector<std::string> users;
  for (auto& [u, events] : by_user) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Interaction* a, const Interaction* b) { return a->timestamp < b->timestamp; });
    users.push_back(u);
  }

  // Step 1: random user -> split assignment.
  Rng rng(params.seed);
  std::vector<std::string> shuffled = users;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto n_users = static_cast<double>(shuffled.size());
  const auto n_train = static_cast<std::size_t>(std::round(params.train_fraction * n_users));
  const auto n_val = static_cast<std::size_t>(std::round(params.validation_fraction * n_users));
  std::map<std::string, Split> split_of;
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    Split s = i < n_train ? Split::train : (i < n_train + n_val ? Split::validation : Split::test);
    split_of[shuffled[i]] = s;
  }
  for (const auto& [u, s] : params.assignments) {
    if (by_user.count(u)) split_of[u] = s;
  }

  // Step 2: one playlist per user.
  std::map<Split, std::vector<std::pair<std::string, std::vector<std::string>>>> raw;
  for (const auto& u : users) {
    std::vector<std::string> seq;
    std::unordered_set<std::string> seen;
    for (const auto* e : by_user[u]) {
      if (seen.insert(e->track).second) seq.push_back(e->track);
    }
    raw[split_of[u]].emplace_back(u, std::move(seq));
  }

  // Step 3: remove tracks already claimed by an earlier split.
  std::unordered_set<std::string> claimed;
  std::map<Split, std::vector<Playlist>> playlists;
  std::map<Split, std::vector<std::string>> pool_tracks;
  for (Split s : {Split::train, Split::validation, Split::test}) {
    std::unordered_set<std::string> claimed_here;
    for (auto& [user, seq] : raw[s]) {
      std::vector<std::string> kept;
      for (const auto& t : seq) {
        if (!claimed.count(t)) kept.push_back(t);
      }
      // Step 4: contiguous window for test playlists.
      if (s == Split::test) {
        if (kept.size() <= params.min_len) continue;
        if (kept.size() > params.max_len) kept.resize(params.max_len);
      }
      if (kept.empty()) continue;
      for (const auto& t : kept) {
        if (claimed_here.insert(t).second) pool_tracks[s].push_back(t);
      }
      playlists[s].push_back(Playlist{user, std::move(kept)});
    }
    claimed.insert(claimed_here.begin(), claimed_here.end());
  }

  auto build_pool = [&](Split s) {
    std::vector<Track> tracks;
    for (const auto& id : pool_tracks[s]) {
      auto it = catalog.find(id);
      if (it == catalog.end()) throw ValidationError("track '" + id + "' missing from the feature catalog");
      Track t = it->second;
      t.id = id;
      if (t.text.size() == 0) {
        if (!t.caption && t.metadata) t.caption = make_caption(*t.metadata);
        if (!t.caption) throw ValidationError("track '" + id + "' has neither text features nor a caption");
        t.text = hash_caption(*t.caption, text_dim);
      }
      tracks.push_back(std::move(t));
    }
    return TrackPool(std::move(tracks), std::move(playlists[s]));
  };
  TrackPool train = build_pool(Split::train);
  TrackPool validation = build_pool(Split::validation);
  TrackPool test = build_pool(Split::test);
  return Corpus(audio_dim, text_dim, std::move(train), std::move(validation), std::move(test));
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

std::string padded(const std::string& prefix, int i) {
  std::ostringstream os;
  os << prefix;
  os.width(6);
  os.fill('0');
  os << i;
  return os.str();
}

struct GenreModel {
  Matrix audio_centers;  // n_genres x audio_dim
  Matrix text_centers;
  Matrix audio_shared;   // shared-latent -> audio
  Matrix text_shared;
};

constexpr int kSharedLatentDim = 8;

std::vector<Track> sample_tracks(const SyntheticParams& p, const GenreModel& model, int per_genre,
                                 const std::string& prefix, Rng& rng) {
  std::vector<Track> out;
  std::normal_distribution<double> unit(0.0, 1.0);
  int counter = 0;
  for (int g = 0; g < p.n_genres; ++g) {
    for (int k = 0; k < per_genre; ++k) {
      Track t;
      t.id = padded(prefix, counter);
      t.audio = model.audio_centers.row(g).transpose() + random_normal(p.audio_dim, 1, p.noise_sigma, rng);
      t.text = model.text_centers.row(g).transpose() + random_normal(p.text_dim, 1, p.noise_sigma, rng);
      if (p.shared_sigma > 0.0) {
        Vector latent = random_normal(kSharedLatentDim, 1, p.shared_sigma, rng);
        t.audio += model.audio_shared * latent;
        t.text += model.text_shared * latent;
      }
      t.metadata = TrackMetadata{"Song " + t.id, "Artist " + std::to_string(g) + "-" + std::to_string(k % 5),
                                 "Album " + std::to_string(g) + "-" + std::to_string(k % 3)};
      t.caption = make_caption(*t.metadata);
      t.genre = g;
      out.push_back(std::move(t));
      ++counter;
    }
  }
  return out;
}

std::vector<Playlist> sample_playlists(const SyntheticParams& p, const std::vector<Track>& tracks, int count,
                                       int size, const std::string& prefix, Rng& rng) {
  std::vector<std::vector<int>> by_genre(static_cast<std::size_t>(p.n_genres));
  for (std::size_t i = 0; i < tracks.size(); ++i) by_genre[static_cast<std::size_t>(*tracks[i].genre)].push_back(static_cast<int>(i));
  std::uniform_int_distribution<int> pick_genre(0, p.n_genres - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Playlist> out;
  for (int k = 0; k < count; ++k) {
    const int home = pick_genre(rng);
    std::vector<int> chosen;
    std::unordered_set<int> used;
    int guard = 0;
    while (static_cast<int>(chosen.size()) < size) {
      if (++guard > 1000 * size) throw ValidationError("synthetic playlist sampling did not converge");
      int genre = home;
      if (p.n_genres > 1 && coin(rng) >= p.purity) {
        genre = std::uniform_int_distribution<int>(0, p.n_genres - 2)(rng);
        if (genre >= home) ++genre;
      }
      const auto& members = by_genre[static_cast<std::size_t>(genre)];
      if (members.empty()) continue;
      const int idx = members[std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng)];
      if (used.insert(idx).second) chosen.push_back(idx);
    }
    Playlist pl;
    pl.id = padded(prefix, k);
    for (int idx : chosen) pl.track_ids.push_back(tracks[static_cast<std::size_t>(idx)].id);
    out.push_back(std::move(pl));
  }
  return out;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticParams& p) {
  if (p.n_genres <= 0 || p.tracks_per_genre <= 0 || p.playlists <= 0 || p.tracks_per_playlist <= 0 ||
      p.audio_dim <= 0 || p.text_dim <= 0 || p.validation_tracks_per_genre < 0 || p.test_tracks_per_genre <= 0 ||
      p.validation_playlists < 0 || p.test_playlists <= 0) {
    throw ConfigError("synthetic corpus: counts and dimensions must be positive");
  }
  if (p.purity < 0.5 || p.purity > 1.0) throw ConfigError("synthetic corpus: purity must lie in [0.5, 1]");
  if (p.noise_sigma < 0.0 || p.shared_sigma < 0.0) throw ConfigError("synthetic corpus: noise must be >= 0");
  const int train_total = p.n_genres * p.tracks_per_genre;
  const int val_total = p.n_genres * p.validation_tracks_per_genre;
  const int test_total = p.n_genres * p.test_tracks_per_genre;
  if (p.tracks_per_playlist > train_total || p.tracks_per_playlist > test_total ||
      (p.validation_playlists > 0 && p.tracks_per_playlist > val_total)) {
    throw ConfigError("synthetic corpus: tracks_per_playlist exceeds the available tracks of a pool");
  }

  Rng rng(p.seed);
  GenreModel model;
  model.audio_centers = random_normal(p.n_genres, p.audio_dim, 1.0, rng);
  model.text_centers = random_normal(p.n_genres, p.text_dim, 1.0, rng);
  model.audio_shared = random_normal(p.audio_dim, kSharedLatentDim, 1.0, rng);
  model.text_shared = random_normal(p.text_dim, kSharedLatentDim, 1.0, rng);

  auto train_tracks = sample_tracks(p, model, p.tracks_per_genre, "s", rng);
  auto val_tracks = sample_tracks(p, model, p.validation_tracks_per_genre, "v", rng);
  auto test_tracks = sample_tracks(p, model, p.test_tracks_per_genre, "t", rng);
  auto train_pl = sample_playlists(p, train_tracks, p.playlists, p.tracks_per_playlist, "P", rng);
  auto val_pl = p.validation_playlists > 0
                    ? sample_playlists(p, val_tracks, p.validation_playlists, p.tracks_per_playlist, "V", rng)
                    : std::vector<Playlist>{};
  auto test_pl = sample_playlists(p, test_tracks, p.test_playlists, p.tracks_per_playlist, "T", rng);

  SyntheticCorpus out;
  for (const auto* pool : {&train_tracks, &val_tracks, &test_tracks}) {
    for (const auto& t : *pool) out.genre.emplace(t.id, *t.genre);
  }
  out.corpus = Corpus(p.audio_dim, p.text_dim, TrackPool(std::move(train_tracks), std::move(train_pl)),
                      TrackPool(std::move(val_tracks), std::move(val_pl)),
                      TrackPool(std::move(test_tracks), std::move(test_pl)));
  return out;
}

// ---------------------------------------------------------------------------
// File I/O

namespace {

constexpr int kCorpusFormatVersion = 1;

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& j, const std::string& id) {
  if (!j.is_array()) throw ValidationError("track '" + id + "': feature vector must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError("track '" + id + "': non-numeric feature value");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  json header = {{"type", "header"},
                 {"version", kCorpusFormatVersion},
                 {"audio_dim", corpus.audio_dim()},
                 {"text_dim", corpus.text_dim()}};
  out << header.dump() << '\n';
  for (Split s : {Split::train, Split::validation, Split::test}) {
    const TrackPool& pool = corpus.pool(s);
    for (const Track& t : pool.tracks()) {
      json rec = {{"type", "track"},
                  {"split", to_string(s)},
                  {"id", t.id},
                  {"audio", vector_to_json(t.audio)},
                  {"text", vector_to_json(t.text)}};
      if (t.caption) rec["caption"] = *t.caption;
      if (t.metadata) {
        rec["metadata"] = {{"track_name", t.metadata->track_name},
                           {"artist_name", t.metadata->artist_name},
                           {"album_name", t.metadata->album_name}};
      }
      if (t.genre) rec["genre"] = *t.genre;
      out << rec.dump() << '\n';
    }
    for (const Playlist& p : pool.playlists()) {
      json rec = {{"type", "playlist"}, {"split", to_string(s)}, {"id", p.id}, {"tracks", p.track_ids}};
      out << rec.dump() << '\n';
    }
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  int audio_dim = -1, text_dim = -1;
  std::map<Split, std::vector<Track>> tracks;
  std::map<Split, std::vector<Playlist>> playlists;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string type = rec.value("type", "");
    if (line_no == 1) {
      if (type != "header") throw ValidationError(path + ": first record must be the header");
      if (rec.value("version", 0) != kCorpusFormatVersion) {
        throw ValidationError(path + ": unsupported corpus version");
      }
      audio_dim = rec.value("audio_dim", -1);
      text_dim = rec.value("text_dim", -1);
      continue;
    }
    try {
      const std::string id = rec.at("id").get<std::string>();
      const Split split = split_from_string(rec.at("split").get<std::string>());
      if (type == "track") {
        Track t;
        t.id = id;
        if (!rec.contains("audio")) throw ValidationError("track '" + id + "' has no audio features");
        t.audio = vector_from_json(rec.at("audio"), id);
        if (rec.contains("caption")) t.caption = rec.at("caption").get<std::string>();
        if (rec.contains("metadata")) {
          const auto& m = rec.at("metadata");
          t.metadata = TrackMetadata{m.at("track_name").get<std::string>(), m.at("artist_name").get<std::string>(),
                                     m.at("album_name").get<std::string>()};
        }
        if (rec.contains("text")) {
          t.text = vector_from_json(rec.at("text"), id);
        } else {
          if (!t.caption && t.metadata) t.caption = make_caption(*t.metadata);
          if (!t.caption) throw ValidationError("track '" + id + "' has neither text features nor a caption");
          t.text = hash_caption(*t.caption, text_dim);
        }
        if (rec.contains("genre")) t.genre = rec.at("genre").get<int>();
        tracks[split].push_back(std::move(t));
      } else if (type == "playlist") {
        playlists[split].push_back(Playlist{id, rec.at("tracks").get<std::vector<std::string>>()});
      } else {
        throw ValidationError("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (audio_dim < 0) throw ValidationError(path + ": missing header");
  return Corpus(audio_dim, text_dim, TrackPool(std::move(tracks[Split::train]), std::move(playlists[Split::train])),
                TrackPool(std::move(tracks[Split::validation]), std::move(playlists[Split::validation])),
                TrackPool(std::move(tracks[Split::test]), std::move(playlists[Split::test])));
}

}  // namespace larp
