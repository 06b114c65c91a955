#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "srf/cnn.hpp"
#include "srf/error.hpp"

namespace srf::cnn {

namespace {

constexpr char kMagic[8] = {'S', 'R', 'F', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.append(p, n); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{u8()} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{u8()} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::CorruptPayload, "model file is truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string save_model_bytes(const Model& m) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(m.format_version);
  const auto& a = m.architecture;
  w.u32(static_cast<std::uint32_t>(a.input.channels));
  w.u32(static_cast<std::uint32_t>(a.input.height));
  w.u32(static_cast<std::uint32_t>(a.input.width));
  w.u32(static_cast<std::uint32_t>(a.layers.size()));
  for (const auto& l : a.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u32(static_cast<std::uint32_t>(l.units));
  }
  w.u32(static_cast<std::uint32_t>(m.labels.size()));
  for (const auto& name : m.labels.names()) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name.data(), name.size());
  }
  w.f64(m.input_norm.shift);
  w.f64(m.input_norm.scale);
  w.u32(static_cast<std::uint32_t>(m.parameters.size()));
  for (const auto& t : m.parameters) {
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (const auto d : t.shape) w.u64(static_cast<std::uint64_t>(d));
    for (Eigen::Index i = 0; i < t.size(); ++i) w.f64(t.data(i));
  }
  return w.bytes();
}

Model load_model_bytes(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::BadMagic, "not a model file");
  }
  Reader r(bytes);
  r.str(sizeof(kMagic));
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "model format version " + std::to_string(version));
  }

  Architecture arch;
  arch.input.channels = r.u32();
  arch.input.height = r.u32();
  arch.input.width = r.u32();
  const std::uint32_t layer_count = r.u32();
  if (layer_count > 1024) throw Error(ErrorCode::CorruptPayload, "implausible layer count");
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const std::uint8_t kind = r.u8();
    const std::uint32_t units = r.u32();
    if (kind < 1 || kind > 6) throw Error(ErrorCode::CorruptPayload, "unknown layer kind");
    arch.layers.push_back({static_cast<LayerKind>(kind), static_cast<Eigen::Index>(units)});
  }

  const std::uint32_t class_count = r.u32();
  if (class_count > kMaxCount / 2) throw Error(ErrorCode::CorruptPayload, "implausible class count");
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < class_count; ++i) names.push_back(r.str(r.u32()));
  InputNorm norm;
  norm.shift = r.f64();
  norm.scale = r.f64();
  if (!std::isfinite(norm.shift) || !std::isfinite(norm.scale) || norm.scale <= 0.0) {
    throw Error(ErrorCode::CorruptPayload, "bad input normalization");
  }

  std::vector<Tensor> params;
  const std::uint32_t tensor_count = r.u32();
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 8) throw Error(ErrorCode::CorruptPayload, "bad tensor rank");
    std::vector<Eigen::Index> shape;
    std::uint64_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint64_t d = r.u64();
      if (d < 1 || d > kMaxCount || count * d > kMaxCount) {
        throw Error(ErrorCode::CorruptPayload, "bad tensor shape");
      }
      count *= d;
      shape.push_back(static_cast<Eigen::Index>(d));
    }
    if (count * sizeof(double) > r.remaining()) {
      throw Error(ErrorCode::CorruptPayload, "model file is truncated");
    }
    Tensor t(std::move(shape));
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data(k) = r.f64();
    params.push_back(std::move(t));
  }
  if (!r.at_end()) throw Error(ErrorCode::CorruptPayload, "trailing bytes after parameters");

  try {
    Model m = make_model(arch, LabelSet(std::move(names)));
    if (params.size() != m.parameters.size()) {
      throw Error(ErrorCode::CorruptPayload, "parameter count does not match architecture");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].shape != m.parameters[i].shape) {
        throw Error(ErrorCode::CorruptPayload, "parameter shape does not match architecture");
      }
    }
    m.parameters = std::move(params);
    m.input_norm = norm;
    return m;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptPayload) throw;
    throw Error(ErrorCode::CorruptPayload, e.what());
  }
}

void save_model(std::ostream& out, const Model& m) {
  const std::string bytes = save_model_bytes(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing model");
}

Model load_model(std::istream& in) {
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::Io, "failed reading model");
  return load_model_bytes(bytes);
}

}  // namespace srf::cnn
