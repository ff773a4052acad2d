#include "larp/encoder.hpp"

#include "larp/errors.hpp"

namespace larp {

void validate(const EncoderConfig& c, int batch_size) {
  if (c.audio_dim <= 0 || c.text_dim <= 0) throw ConfigError("encoder: input dimensions must be positive");
  if (c.embed_dim <= 0) throw ConfigError("encoder: embed_dim must be positive");
  for (int h : c.hidden) {
    if (h <= 0) throw ConfigError("encoder: hidden widths must be positive");
  }
  if (!(c.momentum > 0.0 && c.momentum < 1.0)) throw ConfigError("encoder: momentum must lie in (0, 1)");
  if (c.queue_capacity < batch_size) throw ConfigError("encoder: queue_capacity must be >= batch size");
  if (!(c.temperature > 0.0)) throw ConfigError("encoder: temperature must be positive");
}

// ---------------------------------------------------------------------------
// EmbeddingQueue

void EmbeddingQueue::push(const Matrix& audio, const Matrix& text) {
  if (audio.rows() != text.rows()) throw ShapeError("queue push: audio/text row counts differ");
  if (audio.rows() > 0 && (audio.cols() != dim_ || text.cols() != dim_)) {
    throw ShapeError("queue push: expected dimension " + std::to_string(dim_));
  }
  for (Eigen::Index r = 0; r < audio.rows(); ++r) {
    audio_.push_back(audio.row(r).transpose());
    text_.push_back(text.row(r).transpose());
    while (audio_.size() > static_cast<std::size_t>(capacity_)) {
      audio_.pop_front();
      text_.pop_front();
    }
  }
}

std::pair<Matrix, Matrix> EmbeddingQueue::negatives(std::size_t count) const {
  const std::size_t n = std::min(count, audio_.size());
  Matrix a(static_cast<Eigen::Index>(n), dim_), t(static_cast<Eigen::Index>(n), dim_);
  const std::size_t start = audio_.size() - n;
  for (std::size_t i = 0; i < n; ++i) {
    a.row(static_cast<Eigen::Index>(i)) = audio_[start + i].transpose();
    t.row(static_cast<Eigen::Index>(i)) = text_[start + i].transpose();
  }
  return {std::move(a), std::move(t)};
}

void EmbeddingQueue::clear() {
  audio_.clear();
  text_.clear();
}

bool EmbeddingQueue::operator==(const EmbeddingQueue& other) const {
  if (capacity_ != other.capacity_ || dim_ != other.dim_ || audio_.size() != other.audio_.size()) return false;
  for (std::size_t i = 0; i < audio_.size(); ++i) {
    if (audio_[i] != other.audio_[i] || text_[i] != other.text_[i]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// RepresentationTable

RepresentationTable::RepresentationTable(const std::vector<std::string>& ids, int dim)
    : ids_(ids),
      audio_(Matrix::Zero(static_cast<Eigen::Index>(ids.size()), dim)),
      text_(Matrix::Zero(static_cast<Eigen::Index>(ids.size()), dim)),
      warm_(ids.size(), false) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw ValidationError("representation table: duplicate id '" + ids_[i] + "'");
  }
}

RepresentationTable RepresentationTable::restore(std::vector<std::string> ids, Matrix audio, Matrix text,
                                                 std::vector<bool> warm) {
  RepresentationTable t(ids, static_cast<int>(audio.cols()));
  if (audio.rows() != static_cast<Eigen::Index>(ids.size()) || text.rows() != audio.rows() ||
      text.cols() != audio.cols() || warm.size() != ids.size()) {
    throw ShapeError("representation table: inconsistent serialized shapes");
  }
  t.audio_ = std::move(audio);
  t.text_ = std::move(text);
  t.warm_ = std::move(warm);
  return t;
}

std::size_t RepresentationTable::row_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw NotFoundError("representation table: unknown track id '" + id + "'");
  return it->second;
}

void RepresentationTable::update(std::size_t row, const Vector& audio, const Vector& text) {
  if (audio.size() != audio_.cols() || text.size() != text_.cols()) {
    throw ShapeError("representation table: row dimension mismatch");
  }
  audio_.row(static_cast<Eigen::Index>(row)) = audio.transpose();
  text_.row(static_cast<Eigen::Index>(row)) = text.transpose();
  warm_[row] = true;
}

void RepresentationTable::update(const std::string& id, const Vector& audio, const Vector& text) {
  update(row_of(id), audio, text);
}

TableRows RepresentationTable::lookup_rows(const std::vector<std::size_t>& rows) const {
  TableRows out;
  out.audio.resize(static_cast<Eigen::Index>(rows.size()), audio_.cols());
  out.text.resize(static_cast<Eigen::Index>(rows.size()), text_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.audio.row(static_cast<Eigen::Index>(i)) = audio_.row(static_cast<Eigen::Index>(rows[i]));
    out.text.row(static_cast<Eigen::Index>(i)) = text_.row(static_cast<Eigen::Index>(rows[i]));
    out.cold.push_back(!warm_[rows[i]]);
  }
  return out;
}

TableRows RepresentationTable::lookup(const std::vector<std::string>& ids) const {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) rows.push_back(row_of(id));
  return lookup_rows(rows);
}

bool RepresentationTable::operator==(const RepresentationTable& other) const {
  return ids_ == other.ids_ && audio_ == other.audio_ && text_ == other.text_ && warm_ == other.warm_;
}

// ---------------------------------------------------------------------------
// EncoderState

ParamList EncoderState::trainable() {
  ParamList out = audio.params();
  for (auto* p : text.params()) out.push_back(p);
  return out;
}

namespace {

std::vector<int> branch_widths(int input, const EncoderConfig& c) {
  std::vector<int> w{input};
  w.insert(w.end(), c.hidden.begin(), c.hidden.end());
  w.push_back(c.embed_dim);
  return w;
}

}  // namespace

EncoderState make_encoder(const EncoderConfig& config, const std::vector<std::string>& train_ids) {
  validate(config);
  Rng rng(config.seed);
  EncoderState s;
  s.config = config;
  s.audio = Mlp(branch_widths(config.audio_dim, config), config.activation, rng);
  s.text = Mlp(branch_widths(config.text_dim, config), config.activation, rng);
  s.audio_momentum = s.audio;
  s.text_momentum = s.text;
  s.queue = EmbeddingQueue(config.queue_capacity, config.embed_dim);
  s.table = RepresentationTable(train_ids, config.embed_dim);
  return s;
}

BranchOutput encode_branch(const Mlp& branch, const Matrix& features) {
  BranchOutput out;
  Matrix raw = branch.forward(features, &out.cache);
  out.embedding = normalize_rows(raw, &out.norms);
  return out;
}

void backward_branch(Mlp& branch, const BranchOutput& out, const Matrix& grad_embedding) {
  Matrix g = normalize_rows_backward(out.embedding, out.norms, grad_embedding);
  branch.backward(out.cache, g);
}

std::pair<Matrix, Matrix> encode_batch(const EncoderState& state, const Matrix& audio, const Matrix& text) {
  if (audio.cols() != state.config.audio_dim || text.cols() != state.config.text_dim) {
    throw ShapeError("encode: feature dimensions do not match the encoder configuration");
  }
  return {normalize_rows(state.audio.forward(audio)), normalize_rows(state.text.forward(text))};
}

std::pair<Matrix, Matrix> encode_momentum(const EncoderState& state, const Matrix& audio, const Matrix& text) {
  if (audio.cols() != state.config.audio_dim || text.cols() != state.config.text_dim) {
    throw ShapeError("encode: feature dimensions do not match the encoder configuration");
  }
  return {normalize_rows(state.audio_momentum.forward(audio)), normalize_rows(state.text_momentum.forward(text))};
}

std::pair<Vector, Vector> encode(const EncoderState& state, const Track& track) {
  if (track.audio.size() != state.config.audio_dim || track.text.size() != state.config.text_dim) {
    throw ShapeError("encode: track '" + track.id + "' feature dimensions do not match the encoder");
  }
  auto [a, t] = encode_batch(state, track.audio.transpose(), track.text.transpose());
  return {a.row(0).transpose(), t.row(0).transpose()};
}

void momentum_update(EncoderState& state) {
  const double m = state.config.momentum;
  auto blend = [m](Mlp& target, const Mlp& source) {
    auto dst = target.params();
    auto src = source.params();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i]->value = m * dst[i]->value + (1.0 - m) * src[i]->value;
    }
  };
  blend(state.audio_momentum, state.audio);
  blend(state.text_momentum, state.text);
}

void queue_push(EncoderState& state, const Matrix& audio, const Matrix& text) { state.queue.push(audio, text); }

std::pair<Matrix, Matrix> queue_negatives(const EncoderState& state, std::size_t count) {
  return state.queue.negatives(count);
}

void table_update(EncoderState& state, const std::string& track_id, const Vector& audio, const Vector& text) {
  state.table.update(track_id, audio, text);
}

TableRows table_lookup(const EncoderState& state, const std::vector<std::string>& track_ids) {
  return state.table.lookup(track_ids);
}

}  // namespace larp
