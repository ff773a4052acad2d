#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "larp/corpus.hpp"
#include "larp/mlp.hpp"
#include "larp/numkit.hpp"

namespace larp {

struct EncoderConfig {
  int audio_dim = 32;
  int text_dim = 32;
  std::vector<int> hidden{128, 128};  // per-branch MLP widths
  int embed_dim = 256;
  double momentum = 0.995;
  int queue_capacity = 1024;  // 57600 at paper scale
  double temperature = 0.07;
  Activation activation = Activation::gelu;
  std::uint64_t seed = 1;
};

void validate(const EncoderConfig& config, int batch_size = 1);

// FIFO of paired (audio, text) unit vectors used as contrastive negatives.
class EmbeddingQueue {
 public:
  EmbeddingQueue() = default;
  EmbeddingQueue(int capacity, int dim) : capacity_(capacity), dim_(dim) {}

  // Appends row pairs in order and evicts the oldest beyond capacity.
  void push(const Matrix& audio, const Matrix& text);
  // The newest `count` entries (or all if fewer), oldest first.
  std::pair<Matrix, Matrix> negatives(std::size_t count) const;
  std::pair<Matrix, Matrix> contents() const { return negatives(size()); }

  std::size_t size() const { return audio_.size(); }
  int capacity() const { return capacity_; }
  int dim() const { return dim_; }
  void clear();

  bool operator==(const EmbeddingQueue& other) const;

 private:
  int capacity_ = 0;
  int dim_ = 0;
  std::deque<Vector> audio_;
  std::deque<Vector> text_;
};

// Result of a lookup in the representation tables.
struct TableRows {
  Matrix audio;
  Matrix text;
  std::vector<bool> cold;  // true for rows never written
};

// Latest audio/text representation per train track. Rows are read without
// gradient; a row stays zero and "cold" until its track first appears in a
// batch.
class RepresentationTable {
 public:
  RepresentationTable() = default;
  RepresentationTable(const std::vector<std::string>& ids, int dim);

  void update(const std::string& id, const Vector& audio, const Vector& text);
  void update(std::size_t row, const Vector& audio, const Vector& text);
  TableRows lookup(const std::vector<std::string>& ids) const;
  TableRows lookup_rows(const std::vector<std::size_t>& rows) const;

  std::size_t row_of(const std::string& id) const;
  bool is_cold(std::size_t row) const { return !warm_[row]; }
  std::size_t size() const { return ids_.size(); }
  int dim() const { return static_cast<int>(audio_.cols()); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix& audio() const { return audio_; }
  const Matrix& text() const { return text_; }

  bool operator==(const RepresentationTable& other) const;

  // Rebuilds a table from serialized contents.
  static RepresentationTable restore(std::vector<std::string> ids, Matrix audio, Matrix text,
                                     std::vector<bool> warm);

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  Matrix audio_, text_;
  std::vector<bool> warm_;
};

// Trainable dual encoder plus its EMA copy, negative queue and
// representation tables.
struct EncoderState {
  EncoderConfig config;
  Mlp audio;
  Mlp text;
  Mlp audio_momentum;
  Mlp text_momentum;
  EmbeddingQueue queue;
  RepresentationTable table;

  ParamList trainable();
};

// Builds a freshly initialized encoder whose momentum copy is an exact
// clone. `train_ids` sizes the representation tables.
EncoderState make_encoder(const EncoderConfig& config, const std::vector<std::string>& train_ids);

// Forward pass of one branch followed by row-wise L2 normalization.
struct BranchOutput {
  Matrix embedding;  // unit rows
  Vector norms;      // pre-normalization norms
  MlpCache cache;
};

BranchOutput encode_branch(const Mlp& branch, const Matrix& features);
// Backprop dL/d(embedding) into the branch parameters.
void backward_branch(Mlp& branch, const BranchOutput& out, const Matrix& grad_embedding);

// Unit-norm audio and text representations of one track.
std::pair<Vector, Vector> encode(const EncoderState& state, const Track& track);
// Same for a stack of feature rows.
std::pair<Matrix, Matrix> encode_batch(const EncoderState& state, const Matrix& audio, const Matrix& text);
// Outputs of the momentum copy.
std::pair<Matrix, Matrix> encode_momentum(const EncoderState& state, const Matrix& audio, const Matrix& text);

// θ_m <- m θ_m + (1 - m) θ for every momentum parameter.
void momentum_update(EncoderState& state);

void queue_push(EncoderState& state, const Matrix& audio, const Matrix& text);
std::pair<Matrix, Matrix> queue_negatives(const EncoderState& state, std::size_t count);

void table_update(EncoderState& state, const std::string& track_id, const Vector& audio, const Vector& text);
TableRows table_lookup(const EncoderState& state, const std::vector<std::string>& track_ids);

}  // namespace larp
