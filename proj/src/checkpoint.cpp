#include "larp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "larp/errors.hpp"

namespace larp {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'L', 'A', 'R', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void raw(const void* data, std::size_t n) { buf_.append(static_cast<const char*>(data), n); }
  template <typename T>
  void pod(T v) {
    raw(&v, sizeof(T));
  }
  void matrix(const Matrix& m) { raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size())); }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  void raw(void* out, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ValidationError("checkpoint: truncated payload");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

json config_to_json(const EncoderConfig& c) {
  return {{"audio_dim", c.audio_dim},       {"text_dim", c.text_dim},
          {"hidden", c.hidden},             {"embed_dim", c.embed_dim},
          {"momentum", c.momentum},         {"queue_capacity", c.queue_capacity},
          {"temperature", c.temperature},   {"activation", to_string(c.activation)},
          {"seed", c.seed}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  c.audio_dim = j.at("audio_dim").get<int>();
  c.text_dim = j.at("text_dim").get<int>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.momentum = j.at("momentum").get<double>();
  c.queue_capacity = j.at("queue_capacity").get<int>();
  c.temperature = j.at("temperature").get<double>();
  c.activation = activation_from_string(j.at("activation").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void write_mlp(Writer& w, const Mlp& m) {
  for (const auto* p : m.params()) w.matrix(p->value);
}

void read_mlp(Reader& r, Mlp& m) {
  for (auto* p : m.params()) {
    p->value = r.matrix(p->value.rows(), p->value.cols());
    p->zero_grad();
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  const EncoderState& e = ck.encoder;
  json header = {{"config", config_to_json(e.config)},
                 {"stage", ck.stage},
                 {"has_fusion", ck.fusion.has_value()},
                 {"queue_size", e.queue.size()},
                 {"table_ids", e.table.ids()}};
  const std::string h = header.dump();

  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kVersion);
  w.pod<std::uint64_t>(h.size());
  w.raw(h.data(), h.size());
  write_mlp(w, e.audio);
  write_mlp(w, e.text);
  write_mlp(w, e.audio_momentum);
  write_mlp(w, e.text_momentum);
  if (ck.fusion) {
    for (const FusionParams* f : {&ck.fusion->audio, &ck.fusion->text}) {
      w.matrix(f->query.value);
      w.matrix(f->key.value);
      w.matrix(f->value.value);
    }
  }
  auto [qa, qt] = e.queue.contents();
  w.matrix(qa);
  w.matrix(qt);
  w.matrix(e.table.audio());
  w.matrix(e.table.text());
  for (std::size_t i = 0; i < e.table.size(); ++i) w.pod<std::uint8_t>(e.table.is_cold(i) ? 0 : 1);
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ValidationError("checkpoint: bad magic");
  if (r.pod<std::uint32_t>() != kVersion) throw ValidationError("checkpoint: unsupported version");
  const auto hlen = r.pod<std::uint64_t>();
  std::string h(hlen, '\0');
  r.raw(h.data(), hlen);
  json header;
  try {
    header = json::parse(h);
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("checkpoint: corrupt header: ") + ex.what());
  }

  Checkpoint ck;
  ck.stage = header.at("stage").get<int>();
  const EncoderConfig config = config_from_json(header.at("config"));
  const auto ids = header.at("table_ids").get<std::vector<std::string>>();
  ck.encoder = make_encoder(config, ids);
  EncoderState& e = ck.encoder;
  read_mlp(r, e.audio);
  read_mlp(r, e.text);
  read_mlp(r, e.audio_momentum);
  read_mlp(r, e.text_momentum);
  const int d = config.embed_dim;
  if (header.at("has_fusion").get<bool>()) {
    Fusion f;
    for (FusionParams* p : {&f.audio, &f.text}) {
      p->query = ParamTensor(r.matrix(d, d));
      p->key = ParamTensor(r.matrix(d, d));
      p->value = ParamTensor(r.matrix(d, d));
    }
    ck.fusion = std::move(f);
  }
  const auto q = static_cast<Eigen::Index>(header.at("queue_size").get<std::size_t>());
  Matrix qa = r.matrix(q, d);
  Matrix qt = r.matrix(q, d);
  e.queue.push(qa, qt);
  const auto n = static_cast<Eigen::Index>(ids.size());
  Matrix ta = r.matrix(n, d);
  Matrix tt = r.matrix(n, d);
  std::vector<bool> warm(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) warm[i] = r.pod<std::uint8_t>() != 0;
  e.table = RepresentationTable::restore(ids, std::move(ta), std::move(tt), std::move(warm));
  if (!r.done()) throw ValidationError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  const std::string bytes = serialize_checkpoint(checkpoint);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string checkpoint_hash(const Checkpoint& checkpoint) { return sha256_hex(serialize_checkpoint(checkpoint)); }

}  // namespace larp
