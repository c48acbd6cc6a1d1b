// neural/checkpoint.cc

#include "adlmvdr/neural/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace adlmvdr::nn {

namespace {

constexpr char kMagic[8] = {'A', 'D', 'L', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "little-endian host expected");

uint64_t Fnv1a(const char *p, size_t n) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void Put(std::string &out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string &b, size_t end) : b_(b), end_(end) {}
  template <typename T>
  T Get() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string Bytes(size_t n) {
    Need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  size_t pos() const { return pos_; }

 private:
  void Need(size_t n) {
    if (n > end_ - pos_) throw FormatError("checkpoint: truncated");
  }
  const std::string &b_;
  size_t end_;
  size_t pos_ = 0;
};

}  // namespace

Checkpoint Snapshot(const ParamStore &store, std::string config_json) {
  Checkpoint c;
  c.config_json = std::move(config_json);
  for (const auto &[name, t] : store.entries()) c.tensors.push_back({name, t.shape(), t.value()});
  return c;
}

void Restore(const Checkpoint &ckpt, ParamStore &store) {
  const auto &entries = store.entries();
  if (entries.size() != ckpt.tensors.size())
    throw FormatError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                      " tensors, model has " + std::to_string(entries.size()));
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto &src = ckpt.tensors[i];
    Tensor dst = entries[i].second;
    if (src.name != entries[i].first || src.shape != dst.shape())
      throw FormatError("checkpoint tensor " + src.name + " " + ShapeString(src.shape) +
                        " does not match model tensor " + entries[i].first + " " +
                        ShapeString(dst.shape()));
    dst.mutable_value() = src.values;
  }
}

std::string SerializeCheckpoint(const Checkpoint &ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  Put<uint32_t>(out, kCheckpointVersion);
  Put<uint64_t>(out, ckpt.config_json.size());
  out += ckpt.config_json;
  Put<uint64_t>(out, ckpt.tensors.size());
  for (const auto &t : ckpt.tensors) {
    Put<uint32_t>(out, static_cast<uint32_t>(t.name.size()));
    out += t.name;
    Put<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
    for (size_t d : t.shape) Put<uint64_t>(out, d);
    if (t.values.size() != NumElements(t.shape))
      throw ShapeError("checkpoint tensor " + t.name + ": values do not match shape");
    for (double v : t.values) Put<double>(out, v);
  }
  Put<uint64_t>(out, Fnv1a(out.data(), out.size()));
  return out;
}

Checkpoint ParseCheckpoint(const std::string &bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("checkpoint: bad magic");
  const size_t body = bytes.size() - 8;
  uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != Fnv1a(bytes.data(), body)) throw FormatError("checkpoint: checksum mismatch");
  Reader r(bytes, body);
  r.Bytes(sizeof(kMagic));
  const auto version = r.Get<uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  c.config_json = r.Bytes(r.Get<uint64_t>());
  const auto count = r.Get<uint64_t>();
  for (uint64_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.Bytes(r.Get<uint32_t>());
    const auto rank = r.Get<uint32_t>();
    for (uint32_t k = 0; k < rank; ++k) t.shape.push_back(r.Get<uint64_t>());
    const size_t n = NumElements(t.shape);
    if (n > (body - r.pos()) / 8) throw FormatError("checkpoint: truncated tensor " + t.name);
    t.values.resize(n);
    for (double &v : t.values) v = r.Get<double>();
    c.tensors.push_back(std::move(t));
  }
  if (r.pos() != body) throw FormatError("checkpoint: trailing bytes");
  return c;
}

void SaveCheckpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
  const std::string bytes = SerializeCheckpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseCheckpoint(ss.str());
}

}  // namespace adlmvdr::nn
