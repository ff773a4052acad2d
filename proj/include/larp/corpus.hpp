#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "larp/numkit.hpp"

namespace larp {

struct TrackMetadata {
  std::string track_name;
  std::string artist_name;
  std::string album_name;

  bool operator==(const TrackMetadata&) const = default;
};

struct Track {
  std::string id;
  Vector audio;  // length audio_dim
  Vector text;   // length text_dim
  std::optional<std::string> caption;
  std::optional<TrackMetadata> metadata;
  std::optional<int> genre;  // ground-truth cluster for synthetic corpora
};

bool operator==(const Track& a, const Track& b);

// Member order is kept for reproducibility; algorithms treat it as a set.
struct Playlist {
  std::string id;
  std::vector<std::string> track_ids;

  bool operator==(const Playlist&) const = default;
};

enum class Split { train, validation, test };

std::string to_string(Split s);
Split split_from_string(const std::string& name);

// Tracks and playlists of one split, with an id -> position index.
class TrackPool {
 public:
  TrackPool() = default;
  TrackPool(std::vector<Track> tracks, std::vector<Playlist> playlists);

  const std::vector<Track>& tracks() const { return tracks_; }
  const std::vector<Playlist>& playlists() const { return playlists_; }
  const Track& track(const std::string& id) const;
  const Track& track(std::size_t i) const { return tracks_[i]; }
  std::optional<std::size_t> track_index(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::size_t num_tracks() const { return tracks_.size(); }
  std::size_t num_playlists() const { return playlists_.size(); }

  // Stacks the audio / text feature vectors of the given track positions.
  Matrix audio_matrix(const std::vector<std::size_t>& rows) const;
  Matrix text_matrix(const std::vector<std::size_t>& rows) const;

  bool operator==(const TrackPool& other) const;

 private:
  std::vector<Track> tracks_;
  std::vector<Playlist> playlists_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Train / validation / test pools with the cold-start guarantees: no track
// or playlist id appears in two pools and every playlist only references
// tracks of its own pool. Immutable after construction.
class Corpus {
 public:
  Corpus() = default;
  Corpus(int audio_dim, int text_dim, TrackPool train, TrackPool validation, TrackPool test);

  int audio_dim() const { return audio_dim_; }
  int text_dim() const { return text_dim_; }
  const TrackPool& train() const { return train_; }
  const TrackPool& validation() const { return validation_; }
  const TrackPool& test() const { return test_; }
  const TrackPool& pool(Split s) const;

  bool operator==(const Corpus& other) const;

 private:
  void validate() const;

  int audio_dim_ = 0;
  int text_dim_ = 0;
  TrackPool train_, validation_, test_;
};

// Bipartite playlist-track membership (R) over one pool, in index space.
class InteractionGraph {
 public:
  InteractionGraph() = default;
  // Throws ValidationError when an edge names an unknown playlist or track.
  InteractionGraph(std::vector<std::string> playlist_ids, std::vector<std::string> track_ids,
                   const std::vector<std::pair<std::string, std::string>>& edges);

  static InteractionGraph from_pool(const TrackPool& pool);

  std::size_t num_playlists() const { return playlist_ids_.size(); }
  std::size_t num_tracks() const { return track_ids_.size(); }
  const std::vector<std::string>& playlist_ids() const { return playlist_ids_; }
  const std::vector<std::string>& track_ids() const { return track_ids_; }
  // Sorted, de-duplicated track positions of playlist p.
  const std::vector<int>& members(std::size_t p) const { return members_[p]; }
  // Sorted playlist positions that contain track s.
  const std::vector<int>& parents(std::size_t s) const { return parents_[s]; }
  bool contains(std::size_t p, std::size_t s) const;
  std::size_t num_edges() const;

 private:
  std::vector<std::string> playlist_ids_;
  std::vector<std::string> track_ids_;
  std::vector<std::vector<int>> members_;
  std::vector<std::vector<int>> parents_;
};

// Symmetric track-track co-occurrence (O) with o_ii = 0.
class CooccurrenceGraph {
 public:
  CooccurrenceGraph() = default;
  explicit CooccurrenceGraph(std::vector<std::vector<int>> neighbors) : neighbors_(std::move(neighbors)) {}

  std::size_t num_tracks() const { return neighbors_.size(); }
  const std::vector<int>& neighbors(std::size_t s) const { return neighbors_[s]; }
  bool contains(std::size_t i, std::size_t j) const;
  std::size_t num_pairs() const;  // ordered pairs

 private:
  std::vector<std::vector<int>> neighbors_;
};

CooccurrenceGraph derive_cooccurrence(const InteractionGraph& graph);

// "The track <name> by <artist> on album <album>". Throws
// ValidationError if any field is empty.
std::string make_caption(const TrackMetadata& metadata);

// Signed bag-of-tokens hashing into `dim` buckets, L2-normalized. Tokens
// are lower-cased alphanumeric runs. Returns a zero vector for text
// without tokens.
Vector hash_caption(const std::string& caption, int dim);

struct Interaction {
  std::string user;
  std::string track;
  std::int64_t timestamp = 0;
};

struct LogConversionParams {
  std::size_t min_len = 30;   // test playlists need more than min_len tracks
  std::size_t max_len = 99;   // ... and at most max_len
  double train_fraction = 0.8;
  double validation_fraction = 0.1;  // remainder goes to test
  std::uint64_t seed = 0;
  // Optional fixed split per user; users not listed are assigned randomly.
  std::map<std::string, Split> assignments;
};

// Turns a user listening log into a cold-start playlist corpus (one
// playlist per user). `catalog` supplies track features; a catalog entry
// with a caption but an empty text vector gets a hashed caption vector.
Corpus convert_interaction_log(const std::vector<Interaction>& log, const LogConversionParams& params,
                               const std::unordered_map<std::string, Track>& catalog, int audio_dim,
                               int text_dim);

struct SyntheticParams {
  int n_genres = 8;
  int tracks_per_genre = 250;
  int playlists = 400;
  int tracks_per_playlist = 20;
  int validation_tracks_per_genre = 25;
  int validation_playlists = 40;
  int test_tracks_per_genre = 25;
  int test_playlists = 40;
  double purity = 0.9;
  double noise_sigma = 1.0;
  // Per-track nuisance shared by both modalities (0 disables it).
  double shared_sigma = 0.0;
  int audio_dim = 32;
  int text_dim = 32;
  std::uint64_t seed = 1;
};

struct SyntheticCorpus {
  Corpus corpus;
  std::unordered_map<std::string, int> genre;  // track id -> genre
};

// Planted-cluster corpus: each genre has fixed latent centers per modality
// and every track is its center plus Gaussian noise. Playlists pick a home
// genre and draw each member from it with probability `purity`.
SyntheticCorpus generate_synthetic(const SyntheticParams& params);

// Line-delimited JSON, one header record followed by one record per track
// and per playlist.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

}  // namespace larp
