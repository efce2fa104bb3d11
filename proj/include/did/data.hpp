#pragma once

// Procedural factor-controlled sprite dataset ("mini-sprites") and its
// bit-exact binary container (FDS).
//
// FDS layout, all integers little-endian:
//   magic "FDS1" | u32 version=1 | u32 N,H,W,C,K | K x u32 cardinality
//   | N*K x u16 factor index | N*H*W*C x u8 pixel

#include <did/rng.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace did {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Factor {
  std::string name;
  std::uint32_t cardinality = 1;
};

struct FactorSpec {
  std::vector<Factor> factors;
  std::uint32_t height = 16, width = 16, channels = 1;

  std::size_t combinations() const {
    std::size_t n = 1;
    for (const auto& f : factors) n *= f.cardinality;
    return n;
  }
  std::size_t pixels() const { return std::size_t{height} * width * channels; }

  // shape(3) x scale(4) x pos_x(8) x pos_y(8) at 16x16x1 -> 768 images
  static FactorSpec default_spec() {
    FactorSpec s;
    s.factors = {{"shape", 3}, {"scale", 4}, {"pos_x", 8}, {"pos_y", 8}};
    return s;
  }

  void validate() const {
    if (factors.empty()) throw FormatError("factor spec: no factors");
    for (const auto& f : factors)
      if (f.cardinality < 1) throw FormatError("factor spec: cardinality must be >= 1");
    if (height == 0 || width == 0 || channels == 0)
      throw FormatError("factor spec: image dims must be positive");
  }
};

struct FactorDataset {
  FactorSpec spec;
  std::vector<std::uint16_t> factors;  // N x K
  std::vector<std::uint8_t> images;    // N x H x W x C

  std::size_t size() const { return spec.factors.empty() ? 0 : factors.size() / spec.factors.size(); }

  bool operator==(const FactorDataset& o) const {
    if (factors != o.factors || images != o.images) return false;
    if (spec.height != o.spec.height || spec.width != o.spec.width ||
        spec.channels != o.spec.channels || spec.factors.size() != o.spec.factors.size())
      return false;
    for (std::size_t i = 0; i < spec.factors.size(); ++i)
      if (spec.factors[i].cardinality != o.spec.factors[i].cardinality) return false;
    return true;
  }
};

constexpr std::size_t kSpriteMinHalfSize = 1;

// Deterministic binary rasterizer. Factor semantics for the default spec:
// shape in {square, disc, diamond}, half-size h = h_min + scale index,
// center offset by a margin equal to the maximum half-size so sprites never
// clip. Extra factors beyond the first four are accepted and ignored by the
// renderer (they still count as ground truth).
inline std::vector<std::uint8_t> render_sprite(const FactorSpec& spec,
                                               const std::vector<std::uint16_t>& idx) {
  if (idx.size() != spec.factors.size())
    throw FormatError("render_sprite: expected " + std::to_string(spec.factors.size()) + " indices");
  for (std::size_t i = 0; i < idx.size(); ++i)
    if (idx[i] >= spec.factors[i].cardinality)
      throw FormatError("render_sprite: index " + std::to_string(idx[i]) + " out of range for factor " +
                        spec.factors[i].name);

  const auto card = [&](std::size_t i) { return i < idx.size() ? spec.factors[i].cardinality : 1u; };
  const std::uint16_t shape = idx.size() > 0 ? idx[0] : 0;
  const std::uint16_t scale = idx.size() > 1 ? idx[1] : 0;
  const std::uint16_t px = idx.size() > 2 ? idx[2] : 0;
  const std::uint16_t py = idx.size() > 3 ? idx[3] : 0;

  const long h = static_cast<long>(kSpriteMinHalfSize + scale);
  const long margin = static_cast<long>(kSpriteMinHalfSize + card(1) - 1);  // max half-size
  const long W = spec.width, H = spec.height;

  auto center = [&](std::uint16_t p, std::uint32_t cardp, long extent) {
    if (cardp <= 1) return margin;
    const double span = static_cast<double>(extent - 1 - 2 * margin);
    return margin + std::lround(p * span / (cardp - 1));
  };
  const long cx = center(px, card(2), W);
  const long cy = center(py, card(3), H);

  std::vector<std::uint8_t> img(spec.pixels(), 0);
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      const long dx = x - cx, dy = y - cy;
      bool lit = false;
      switch (shape) {
        case 0: lit = std::abs(dx) <= h && std::abs(dy) <= h; break;       // square
        case 1: lit = dx * dx + dy * dy <= h * h; break;                   // disc
        default: lit = std::abs(dx) + std::abs(dy) <= h; break;            // diamond
      }
      if (lit)
        for (std::uint32_t c = 0; c < spec.channels; ++c)
          img[(y * W + x) * spec.channels + c] = 255;
    }
  }
  return img;
}

// Exhaustive Cartesian product in row-major factor order.
inline FactorDataset generate_dataset(const FactorSpec& spec, std::size_t cap = 1000000) {
  spec.validate();
  const std::size_t n = spec.combinations();
  if (n > cap)
    throw FormatError("generate_dataset: " + std::to_string(n) + " combinations exceed cap " +
                      std::to_string(cap));
  const std::size_t k = spec.factors.size();
  FactorDataset ds;
  ds.spec = spec;
  ds.factors.reserve(n * k);
  ds.images.reserve(n * spec.pixels());
  std::vector<std::uint16_t> idx(k, 0);
  for (std::size_t row = 0; row < n; ++row) {
    ds.factors.insert(ds.factors.end(), idx.begin(), idx.end());
    auto img = render_sprite(spec, idx);
    ds.images.insert(ds.images.end(), img.begin(), img.end());
    for (std::size_t d = k; d-- > 0;) {
      if (++idx[d] < spec.factors[d].cardinality) break;
      idx[d] = 0;
    }
  }
  return ds;
}

namespace detail {
template <typename T>
void put_le(std::string& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
template <typename T>
T get_le(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw FormatError("fds: truncated file");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
  pos += sizeof(T);
  return v;
}
}  // namespace detail

inline void write_fds(const std::string& path, const FactorDataset& ds) {
  const std::size_t n = ds.size();
  const std::size_t k = ds.spec.factors.size();
  std::string buf;
  buf += "FDS1";
  detail::put_le<std::uint32_t>(buf, 1);
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(n));
  detail::put_le<std::uint32_t>(buf, ds.spec.height);
  detail::put_le<std::uint32_t>(buf, ds.spec.width);
  detail::put_le<std::uint32_t>(buf, ds.spec.channels);
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(k));
  for (const auto& f : ds.spec.factors) detail::put_le<std::uint32_t>(buf, f.cardinality);
  for (auto v : ds.factors) detail::put_le<std::uint16_t>(buf, v);
  buf.append(reinterpret_cast<const char*>(ds.images.data()), ds.images.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("fds: cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("fds: write failed: " + path);
}

inline FactorDataset read_fds(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("fds: cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 4 || buf.compare(0, 4, "FDS1") != 0) throw FormatError("fds: bad magic");
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint32_t>(buf, pos);
  if (version != 1) throw FormatError("fds: unsupported version " + std::to_string(version));
  const auto n = detail::get_le<std::uint32_t>(buf, pos);
  FactorDataset ds;
  ds.spec.height = detail::get_le<std::uint32_t>(buf, pos);
  ds.spec.width = detail::get_le<std::uint32_t>(buf, pos);
  ds.spec.channels = detail::get_le<std::uint32_t>(buf, pos);
  const auto k = detail::get_le<std::uint32_t>(buf, pos);
  for (std::uint32_t i = 0; i < k; ++i)
    ds.spec.factors.push_back({"factor_" + std::to_string(i), detail::get_le<std::uint32_t>(buf, pos)});
  ds.factors.resize(std::size_t{n} * k);
  for (auto& v : ds.factors) v = detail::get_le<std::uint16_t>(buf, pos);
  const std::size_t npix = std::size_t{n} * ds.spec.pixels();
  if (pos + npix > buf.size()) throw FormatError("fds: truncated file");
  ds.images.assign(buf.begin() + static_cast<long>(pos), buf.begin() + static_cast<long>(pos + npix));
  pos += npix;
  if (pos != buf.size()) throw FormatError("fds: trailing bytes");

  for (std::size_t row = 0; row < n; ++row)
    for (std::uint32_t f = 0; f < k; ++f)
      if (ds.factors[row * k + f] >= ds.spec.factors[f].cardinality)
        throw FormatError("fds: factor index out of range at row " + std::to_string(row));
  return ds;
}

// Uniform-with-replacement image batches, pixels scaled to [0,1].
class BatchSampler {
 public:
  BatchSampler(const FactorDataset& ds, std::size_t batch, std::mt19937_64 rng)
      : ds_(ds), batch_(batch), rng_(rng) {
    if (ds.size() == 0) throw std::invalid_argument("BatchSampler: empty dataset");
    if (batch < 1) throw std::invalid_argument("BatchSampler: batch must be >= 1");
  }

  // returns [batch, pixels] row-major
  std::vector<double> next() {
    const std::size_t p = ds_.spec.pixels();
    std::vector<double> out(batch_ * p);
    for (std::size_t i = 0; i < batch_; ++i) {
      const std::size_t row = uniform_index(rng_, ds_.size());
      for (std::size_t j = 0; j < p; ++j)
        out[i * p + j] = ds_.images[row * p + j] / 255.0;
    }
    return out;
  }

 private:
  const FactorDataset& ds_;
  std::size_t batch_;
  std::mt19937_64 rng_;
};

// Whole dataset as [N, pixels] in [0,1], for evaluation.
inline std::vector<double> all_images_scaled(const FactorDataset& ds) {
  std::vector<double> out(ds.images.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ds.images[i] / 255.0;
  return out;
}

}  // namespace did
