#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "stegan/error.hpp"
#include "stegan/stego.hpp"

namespace stegan {
namespace {

static_assert(std::endian::native == std::endian::little, "model I/O assumes a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { bytes(&v, 2); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) {
    if (s.size() > 0xFFFF) fail(ErrorCode::InvalidArgument, "model: string too long");
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }
  Bytes& buffer() { return out_; }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  void bytes(void* p, std::size_t n) {
    if (n > data_.size() - pos_) fail(ErrorCode::Malformed, "model: unexpected end of data");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T get() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint16_t>();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

constexpr std::size_t kMagicSize = 8;
constexpr std::size_t kDigestSize = 32;

}  // namespace

Bytes save(const StegoModel& model) {
  const nn::Generator& gen = model.generator;
  Writer header;
  header.u32(static_cast<std::uint32_t>(gen.scale_count()));
  header.u32(static_cast<std::uint32_t>(gen.width()));
  header.f64(model.ratio);
  for (const Dims& d : gen.dims()) {
    header.u32(static_cast<std::uint32_t>(d.height));
    header.u32(static_cast<std::uint32_t>(d.width));
  }
  for (float a : gen.noise_amp()) header.f32(a);
  header.u32(static_cast<std::uint32_t>(gen.block_count()));
  header.str(model.noise_scheme);
  header.u8(model.obfuscated ? 1 : 0);
  header.str(model.shuffle_scheme);

  Writer out;
  out.bytes(kModelMagic, kMagicSize);
  out.u32(kModelFormatVersion);
  out.u32(static_cast<std::uint32_t>(header.buffer().size()));
  out.bytes(header.buffer().data(), header.buffer().size());

  auto params = const_cast<nn::Generator&>(gen).parameters();
  if (gen.block_count() == 0) params.clear();
  out.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    out.str(p.name);
    out.u32(static_cast<std::uint32_t>(p.param->size()));
    out.bytes(p.param->value.data(), p.param->size() * sizeof(float));
  }
  const auto digest = sha256(out.buffer());
  out.bytes(digest.data(), digest.size());
  return std::move(out.buffer());
}

StegoModel load(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagicSize || std::memcmp(bytes.data(), kModelMagic, kMagicSize) != 0) {
    fail(ErrorCode::BadMagic, "model: not a stego model file (bad magic)");
  }
  if (bytes.size() >= kMagicSize + 4) {
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + kMagicSize, 4);
    if (version != kModelFormatVersion) {
      fail(ErrorCode::UnsupportedVersion, "model: unsupported format version " + std::to_string(version) +
                                              " (expected " + std::to_string(kModelFormatVersion) + ")");
    }
  }
  if (bytes.size() < kMagicSize + 8 + kDigestSize) fail(ErrorCode::ChecksumMismatch, "model: file truncated");
  const auto body = bytes.first(bytes.size() - kDigestSize);
  const auto digest = sha256(body);
  if (std::memcmp(digest.data(), bytes.data() + body.size(), kDigestSize) != 0) {
    fail(ErrorCode::ChecksumMismatch, "model: checksum mismatch (file corrupted or truncated)");
  }

  Reader r(body);
  std::uint8_t magic[kMagicSize];
  r.bytes(magic, kMagicSize);
  r.get<std::uint32_t>();
  const auto header_bytes = r.get<std::uint32_t>();
  const std::size_t header_start = r.pos();

  const auto scales = r.get<std::uint32_t>();
  const auto width = r.get<std::uint32_t>();
  if (scales == 0 || scales > 64 || width == 0 || width > 4096) fail(ErrorCode::Malformed, "model: bad architecture");
  const double ratio = r.get<double>();
  std::vector<Dims> dims(scales);
  for (auto& d : dims) {
    d.height = static_cast<int>(r.get<std::uint32_t>());
    d.width = static_cast<int>(r.get<std::uint32_t>());
    if (d.height < 1 || d.width < 1) fail(ErrorCode::Malformed, "model: bad level dims");
  }
  std::vector<float> amps(scales);
  for (auto& a : amps) a = r.get<float>();
  const auto blocks = r.get<std::uint32_t>();
  if (blocks > scales) fail(ErrorCode::Malformed, "model: more blocks than scales");
  StegoModel model;
  model.generator = nn::Generator(static_cast<int>(width), dims);
  model.ratio = ratio;
  model.noise_scheme = r.str();
  model.obfuscated = r.get<std::uint8_t>() != 0;
  model.shuffle_scheme = r.str();
  if (r.pos() - header_start != header_bytes) fail(ErrorCode::Malformed, "model: header length mismatch");

  std::mt19937_64 scratch(0);
  for (std::uint32_t b = 0; b < blocks; ++b) model.generator.init_stage(model.generator.grown_stage() - 1, scratch);
  model.generator.noise_amp() = amps;

  auto params = model.generator.parameters();
  if (blocks == 0) params.clear();
  const auto count = r.get<std::uint32_t>();
  if (count != params.size()) fail(ErrorCode::Malformed, "model: tensor count mismatch");
  for (auto& p : params) {
    const std::string name = r.str();
    if (name != p.name) fail(ErrorCode::Malformed, "model: expected tensor " + p.name + ", found " + name);
    const auto n = r.get<std::uint32_t>();
    if (n != p.param->size()) fail(ErrorCode::Malformed, "model: tensor " + name + " has wrong size");
    r.bytes(p.param->value.data(), n * sizeof(float));
  }
  if (r.pos() != body.size()) fail(ErrorCode::Malformed, "model: trailing data");
  return model;
}

void save_file(const std::filesystem::path& path, const StegoModel& model) {
  const Bytes bytes = save(model);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::Io, "cannot write " + tmp.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) fail(ErrorCode::Io, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::Io, "cannot move model into place at " + path.string() + ": " + ec.message());
}

StegoModel load_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open " + path.string());
  const Bytes bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return load(bytes);
}

}  // namespace stegan
