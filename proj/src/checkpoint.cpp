#include "mottx/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>
#include <vector>

#include "mottx/errors.hpp"

namespace mottx {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'T', 'X', 'C', 'K', 'P', 'T'};
constexpr char kAppearanceMagic[8] = {'M', 'O', 'T', 'X', 'A', 'P', 'P', 'R'};

std::uint64_t fnv1a(const unsigned char* data, size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void bytes(const void* p, size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const unsigned char* data, size_t size) : data_(data), size_(size) {}

  void need(size_t n) const {
    if (size_ - pos_ < n) throw DataError("checkpoint: truncated file");
  }
  void bytes(void* p, size_t n) {
    need(n);
    std::memcpy(p, data_ + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == size_; }

 private:
  const unsigned char* data_;
  size_t size_;
  size_t pos_ = 0;
};

std::string describe(const ModelConfig& c) {
  return "d_model=" + std::to_string(c.d_model) + " n_layers=" + std::to_string(c.n_layers) +
         " n_heads=" + std::to_string(c.n_heads) + " ffn_dim=" + std::to_string(c.ffn()) +
         " max_window=" + std::to_string(c.max_window);
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelParams<float>& params) {
  params.validate();
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  const ModelConfig& c = params.config;
  w.i32(c.d_model);
  w.i32(c.n_layers);
  w.i32(c.n_heads);
  w.i32(c.ffn_dim);
  w.i32(c.max_window);
  w.f64(c.norm_eps);
  w.f64(c.dropout);

  std::uint32_t count = 0;
  params.visit([&](const std::string&, const TensorF&) { ++count; });
  w.u32(count);
  params.visit([&](const std::string& name, const TensorF& t) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.size(); ++i) w.f32(t.data()[i]);
  });
  auto& buf = w.buffer();
  const std::uint64_t sum = fnv1a(buf.data(), buf.size());
  w.u64(sum);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  save_checkpoint(out, params);
}

ModelParams<float> load_checkpoint(std::istream& in, const std::optional<ModelConfig>& expected) {
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + 4 + 8) throw DataError("checkpoint: truncated file");
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) throw DataError("checkpoint: bad magic");

  Reader r(buf.data(), buf.size() - 8);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: format version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  Reader tail(buf.data() + buf.size() - 8, 8);
  if (tail.u64() != fnv1a(buf.data(), buf.size() - 8)) throw DataError("checkpoint: checksum mismatch");

  ModelConfig c;
  c.d_model = r.i32();
  c.n_layers = r.i32();
  c.n_heads = r.i32();
  c.ffn_dim = r.i32();
  c.max_window = r.i32();
  c.norm_eps = r.f64();
  c.dropout = r.f64();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: stored config is invalid: ") + e.what());
  }
  if (expected) {
    const ModelConfig& e = *expected;
    if (e.d_model != c.d_model || e.n_layers != c.n_layers || e.n_heads != c.n_heads || e.ffn() != c.ffn()) {
      throw ShapeError("checkpoint: stored model (" + describe(c) + ") does not match the requested one (" +
                       describe(e) + ")");
    }
  }

  ModelParams<float> params = ModelParams<float>::zeros(c);
  const std::uint32_t count = r.u32();
  std::uint32_t expected_count = 0;
  params.visit([&](const std::string&, TensorF&) { ++expected_count; });
  if (count != expected_count) throw ShapeError("checkpoint: array count does not match the stored config");
  params.visit([&](const std::string& name, TensorF& t) {
    const std::uint32_t len = r.u32();
    r.need(len);
    std::string stored(len, '\0');
    r.bytes(stored.data(), len);
    if (stored != name) throw ShapeError("checkpoint: expected array " + name + ", found " + stored);
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != t.rows() || cols != t.cols()) {
      throw ShapeError("checkpoint: " + name + " has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                       ", expected " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
    }
    r.need(static_cast<size_t>(rows) * cols * 4);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = r.f32();
  });
  if (!r.done()) throw DataError("checkpoint: trailing bytes after the last array");
  if (expected) params.config.max_window = std::max(params.config.max_window, expected->max_window);
  params.validate();
  return params;
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path, const std::optional<ModelConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return load_checkpoint(in, expected);
}

void save_appearance(const std::filesystem::path& path, const AppearanceBank& bank) {
  Writer w;
  w.bytes(kAppearanceMagic, sizeof(kAppearanceMagic));
  w.u32(kCheckpointVersion);
  w.u64(bank.seed());
  w.f64(bank.brightness_jitter());
  w.f64(bank.noise());
  w.u32(static_cast<std::uint32_t>(bank.base().size()));
  w.u32(static_cast<std::uint32_t>(kRawPatchSize));
  for (const auto& v : bank.base()) {
    for (float x : v) w.f32(x);
  }
  auto& buf = w.buffer();
  w.u64(fnv1a(buf.data(), buf.size()));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

AppearanceBank load_appearance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (buf.size() < sizeof(kAppearanceMagic) + 4 + 8) throw DataError(name + ": truncated appearance file");
  if (std::memcmp(buf.data(), kAppearanceMagic, sizeof(kAppearanceMagic)) != 0) {
    throw DataError(name + ": not an appearance file");
  }
  Reader tail(buf.data() + buf.size() - 8, 8);
  if (tail.u64() != fnv1a(buf.data(), buf.size() - 8)) throw DataError(name + ": checksum mismatch");
  Reader r(buf.data(), buf.size() - 8);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (r.u32() != kCheckpointVersion) throw DataError(name + ": unsupported version");
  const std::uint64_t seed = r.u64();
  const double jitter = r.f64();
  const double noise = r.f64();
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  if (dim != static_cast<std::uint32_t>(kRawPatchSize)) throw DataError(name + ": vectors must have 12288 values");
  r.need(static_cast<size_t>(count) * dim * 4);
  std::vector<std::vector<float>> base(count, std::vector<float>(dim));
  for (auto& v : base) {
    for (float& x : v) x = r.f32();
  }
  if (!r.done()) throw DataError(name + ": trailing bytes");
  return AppearanceBank(std::move(base), jitter, noise, seed);
}

}  // namespace mottx
