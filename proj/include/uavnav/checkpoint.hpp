#ifndef UAVNAV_CHECKPOINT_HPP
#define UAVNAV_CHECKPOINT_HPP

// Binary layout (all integers and floats little-endian):
//   "PPONAV1"                        7 magic bytes
//   u32 version                      currently 1
//   u32 input, u32 n_hidden, n_hidden x u32, u32 actions, str activation
//   u64 seed, u64 iteration, i64 adam_step, str config
//   u32 n_tensors, then per tensor: str name, u32 ndim, ndim x u64 dims,
//   prod(dims) x f64 (weights column-major)
// where str = u32 byte length followed by the bytes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "uavnav/errors.hpp"
#include "uavnav/nn.hpp"

namespace uavnav {

inline constexpr char kCheckpointMagic[7] = {'P', 'P', 'O', 'N', 'A', 'V', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  PolicyParams params;
  AdamState adam;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  std::string config_text;  // run configuration the weights were trained under
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<char> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<char>& bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get(4, what)); }
  std::uint64_t u64(const char* what) { return get(8, what); }
  double f64(const char* what) { return std::bit_cast<double>(get(8, what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void raw(char* out, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError("checkpoint truncated while reading " + std::string(what) + " at byte " +
                            std::to_string(pos_) + " (file has " + std::to_string(bytes_.size()) + " bytes)");
  }
  std::uint64_t get(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

template <typename Ckpt, typename Fn>
void for_each_checkpoint_tensor(Ckpt& c, Fn&& fn) {
  for_each_tensor(c.params, [&](const std::string& n, auto& t) { fn(n, t); });
  for_each_tensor(c.adam.m, [&](const std::string& n, auto& t) { fn("adam.m." + n, t); });
  for_each_tensor(c.adam.v, [&](const std::string& n, auto& t) { fn("adam.v." + n, t); });
}

}  // namespace detail

inline std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  const Architecture& a = ckpt.params.arch;
  w.u32(static_cast<std::uint32_t>(a.input));
  w.u32(static_cast<std::uint32_t>(a.hidden.size()));
  for (int h : a.hidden) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(a.actions));
  w.str(a.activation);
  w.u64(ckpt.seed);
  w.u64(ckpt.iteration);
  w.u64(static_cast<std::uint64_t>(ckpt.adam.t));
  w.str(ckpt.config_text);

  std::uint32_t count = 0;
  detail::for_each_checkpoint_tensor(ckpt, [&](const std::string&, const auto&) { ++count; });
  w.u32(count);
  detail::for_each_checkpoint_tensor(ckpt, [&](const std::string& name, const auto& t) {
    w.str(name);
    const bool is_vector = t.cols() == 1 && name.ends_with("bias");
    w.u32(is_vector ? 1 : 2);
    w.u64(static_cast<std::uint64_t>(t.rows()));
    if (!is_vector) w.u64(static_cast<std::uint64_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.size(); ++i) w.f64(t.data()[i]);
  });
  return w.take();
}

inline Checkpoint decode_checkpoint(const std::vector<char>& bytes) {
  detail::ByteReader r(bytes);
  char magic[sizeof(kCheckpointMagic)];
  r.raw(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw CheckpointError("not a checkpoint: bad magic bytes (expected PPONAV1)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  Checkpoint c;
  Architecture& a = c.params.arch;
  a.input = static_cast<int>(r.u32("architecture.input"));
  const std::uint32_t n_hidden = r.u32("architecture.hidden count");
  if (n_hidden > 64) throw CheckpointError("implausible hidden layer count " + std::to_string(n_hidden));
  a.hidden.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i) a.hidden.push_back(static_cast<int>(r.u32("architecture.hidden")));
  a.actions = static_cast<int>(r.u32("architecture.actions"));
  a.activation = r.str("architecture.activation");
  if (a.activation != "tanh") throw CheckpointError("unsupported activation '" + a.activation + "'");
  c.seed = r.u64("seed");
  c.iteration = r.u64("iteration");
  c.adam = AdamState::zeros(a);
  c.adam.t = static_cast<std::int64_t>(r.u64("adam step"));
  c.config_text = r.str("config");
  c.params = PolicyParams::zeros(a);
  c.params.arch = a;

  std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> expected;
  detail::for_each_checkpoint_tensor(c, [&](const std::string& name, const auto& t) {
    expected[name] = {t.rows(), t.cols()};
  });
  const std::uint32_t count = r.u32("tensor count");
  if (count != expected.size())
    throw CheckpointError("checkpoint has " + std::to_string(count) + " tensors, architecture needs " +
                          std::to_string(expected.size()));
  std::map<std::string, std::vector<double>> loaded;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.str("tensor name");
    auto it = expected.find(name);
    if (it == expected.end()) throw CheckpointError("unexpected tensor '" + name + "'");
    const std::uint32_t ndim = r.u32("tensor ndim");
    if (ndim < 1 || ndim > 2) throw CheckpointError("tensor '" + name + "' has invalid ndim " + std::to_string(ndim));
    const std::uint64_t rows = r.u64("tensor dims");
    const std::uint64_t cols = ndim == 2 ? r.u64("tensor dims") : 1;
    if (rows != static_cast<std::uint64_t>(it->second.first) || cols != static_cast<std::uint64_t>(it->second.second))
      throw CheckpointError("tensor '" + name + "' has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                            ", architecture expects " + std::to_string(it->second.first) + "x" +
                            std::to_string(it->second.second));
    std::vector<double> data(rows * cols);
    for (double& v : data) v = r.f64("tensor data");
    if (!loaded.emplace(name, std::move(data)).second) throw CheckpointError("duplicate tensor '" + name + "'");
  }
  if (!r.at_end()) throw CheckpointError("trailing bytes after tensor data at byte " + std::to_string(r.pos()));
  detail::for_each_checkpoint_tensor(c, [&](const std::string& name, auto& t) {
    const std::vector<double>& d = loaded.at(name);
    std::copy(d.begin(), d.end(), t.data());
  });
  return c;
}

/// Writes to a sibling temp file and renames, so readers never see a partial file.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::vector<char> bytes = encode_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace uavnav

#endif  // UAVNAV_CHECKPOINT_HPP
