/*
 * Copyright 2026 The TEMN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Model file layout. Integers are fixed-width little-endian, reals are
// IEEE-754 binary64 stored through their bit pattern.
//
//   "TEMN"  u32 version
//   u8 scenario  u64 d  u64 h  u64 pi  u8 distance_mode  u64 seed
//   str config (key = value lines)
//   dict users  dict pois
//   u64 n, n x vec<u64>                 training histories
//   u64 n, n x (f64 lat, f64 lon)       user centroids, then POI coordinates
//   mat poi_embeddings  mat keys  mat memory
//   mat fusion_weight   vec<f64> fusion_bias
//   vec<f64> user_pref  vec<f64> poi_infl  f64 geo_bias
//   dict topic_users  dict topic_venues  mat theta  mat varphi  mat phi
//   mat user_topics
//   u64 FNV-1a hash of every preceding byte
//
// str = u64 length + bytes; dict = u64 count + str each; mat = u64 rows,
// u64 cols + row-major f64; vec = u64 length + elements.

#include <bit>
#include <fstream>
#include <sstream>

#include "temn/errors.hpp"
#include "temn/text_io.hpp"
#include "temn/trainer.hpp"

namespace temn {

namespace {

constexpr char kMagic[4] = {'T', 'E', 'M', 'N'};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t x) { buf_.push_back(static_cast<char>(x)); }
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void str(std::string_view s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void dict(const Dictionary& d) {
    u64(d.size());
    for (const std::string& s : d.names()) str(s);
  }
  void vec(std::span<const double> v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void indices(std::span<const std::size_t> v) {
    u64(v.size());
    for (std::size_t x : v) u64(x);
  }
  void mat(const Matrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double x : m.data()) f64(x);
  }
  void coords(std::span<const Coordinates> cs) {
    u64(cs.size());
    for (const Coordinates& c : cs) {
      f64(c.lat);
      f64(c.lon);
    }
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : rest_(bytes) {}

  std::string_view take(std::size_t n) {
    if (n > rest_.size()) throw LoadError("model file truncated");
    std::string_view out = rest_.substr(0, n);
    rest_.remove_prefix(n);
    return out;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    std::uint32_t x = 0;
    auto b = take(4);
    for (int i = 0; i < 4; ++i) x |= std::uint32_t{static_cast<unsigned char>(b[i])} << (8 * i);
    return x;
  }
  std::uint64_t u64() {
    std::uint64_t x = 0;
    auto b = take(8);
    for (int i = 0; i < 8; ++i) x |= std::uint64_t{static_cast<unsigned char>(b[i])} << (8 * i);
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  // Guards lengths against the remaining bytes before allocating.
  std::size_t count(std::size_t min_bytes_each) {
    const std::uint64_t n = u64();
    if (min_bytes_each > 0 && n > rest_.size() / min_bytes_each) {
      throw LoadError("model file truncated");
    }
    return static_cast<std::size_t>(n);
  }
  std::string str() { return std::string(take(count(1))); }
  Dictionary dict() {
    const std::size_t n = count(8);
    std::vector<std::string> names;
    names.reserve(n);
    for (std::size_t i = 0; i < n; ++i) names.push_back(str());
    return Dictionary(std::move(names));
  }
  Vector vec() {
    Vector v(count(8));
    for (double& x : v) x = f64();
    return v;
  }
  std::vector<std::size_t> indices() {
    std::vector<std::size_t> v(count(8));
    for (std::size_t& x : v) x = static_cast<std::size_t>(u64());
    return v;
  }
  Matrix mat() {
    const std::size_t r = count(0), c = count(0);
    if (c != 0 && r > rest_.size() / 8 / c) throw LoadError("model file truncated");
    Matrix m(r, c);
    for (double& x : m.data()) x = f64();
    return m;
  }
  std::vector<Coordinates> coords() {
    std::vector<Coordinates> v(count(16));
    for (Coordinates& c : v) {
      c.lat = f64();
      c.lon = f64();
    }
    return v;
  }
  bool done() const { return rest_.empty(); }

 private:
  std::string_view rest_;
};

std::string config_text(const TrainConfig& c) {
  std::string s;
  for (const auto& [k, v] : to_key_values(c)) s += k + " = " + v + "\n";
  return s;
}

void check_shapes(const Model& m) {
  const std::size_t U = m.num_users(), V = m.num_pois(), d = m.config.dim_d,
                    h = m.config.slots_h, pi = m.config.patterns_pi;
  const bool ok =
      m.memnet.poi_embeddings.rows() == V && m.memnet.poi_embeddings.cols() == d &&
      m.memnet.keys.rows() == d && m.memnet.keys.cols() == h && m.memnet.memory.rows() == h &&
      m.memnet.memory.cols() == d && m.fusion.weight.rows() == pi && m.fusion.weight.cols() == d &&
      m.fusion.bias.size() == pi && m.geo.user_pref.size() == U && m.geo.poi_infl.size() == V &&
      m.histories.size() == U && m.centroids.size() == U && m.poi_coordinates.size() == V &&
      m.user_topics.rows() == U && m.user_topics.cols() == pi &&
      m.topics.theta.cols() == pi;
  if (!ok) throw LoadError("model file has inconsistent dimensions");
  for (const auto& hist : m.histories) {
    for (std::size_t v : hist) {
      if (v >= V) throw LoadError("model file has an out-of-range POI index");
    }
  }
}

}  // namespace

void save_model(const Model& m, const std::filesystem::path& path) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kModelFormatVersion);
  w.u8(static_cast<std::uint8_t>(m.config.scenario));
  w.u64(m.config.dim_d);
  w.u64(m.config.slots_h);
  w.u64(m.config.patterns_pi);
  w.u8(static_cast<std::uint8_t>(m.config.distance_mode));
  w.u64(m.config.seed);
  w.str(config_text(m.config));
  w.dict(m.users);
  w.dict(m.pois);
  w.u64(m.histories.size());
  for (const auto& hist : m.histories) w.indices(hist);
  w.coords(m.centroids);
  w.coords(m.poi_coordinates);
  w.mat(m.memnet.poi_embeddings);
  w.mat(m.memnet.keys);
  w.mat(m.memnet.memory);
  w.mat(m.fusion.weight);
  w.vec(m.fusion.bias);
  w.vec(m.geo.user_pref);
  w.vec(m.geo.poi_infl);
  w.f64(m.geo.bias);
  w.dict(m.topics.users);
  w.dict(m.topics.venues);
  w.mat(m.topics.theta);
  w.mat(m.topics.varphi);
  w.mat(m.topics.phi);
  w.mat(m.user_topics);
  w.u64(fnv1a(w.buffer()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw InputError("write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();

  Reader head(bytes);
  if (head.take(std::min<std::size_t>(4, bytes.size())) != std::string_view(kMagic, 4)) {
    throw LoadError(path.string() + " is not a model file");
  }
  const std::uint32_t version = head.u32();
  if (version != kModelFormatVersion) {
    throw LoadError("unsupported model format version: expected " +
                    std::to_string(kModelFormatVersion) + ", found " + std::to_string(version));
  }
  if (bytes.size() < 16) throw LoadError("model file truncated");
  const std::string_view body(bytes.data(), bytes.size() - 8);
  Reader trailer(std::string_view(bytes).substr(bytes.size() - 8));
  if (trailer.u64() != fnv1a(body)) {
    throw LoadError("model file checksum mismatch (truncated or corrupted)");
  }

  Reader r(body);
  r.take(8);
  const auto scenario = r.u8();
  const std::uint64_t d = r.u64(), h = r.u64(), pi = r.u64();
  const auto mode = r.u8();
  const std::uint64_t seed = r.u64();

  Model m;
  try {
    m.config = resolve_config(parse_key_values(r.str()));
  } catch (const Error& e) {
    throw LoadError(std::string("model file has an invalid config: ") + e.what());
  }
  if (static_cast<std::uint8_t>(m.config.scenario) != scenario || m.config.dim_d != d ||
      m.config.slots_h != h || m.config.patterns_pi != pi ||
      static_cast<std::uint8_t>(m.config.distance_mode) != mode || m.config.seed != seed) {
    throw LoadError("model file header disagrees with its config");
  }
  m.users = r.dict();
  m.pois = r.dict();
  m.histories.resize(r.count(8));
  for (auto& hist : m.histories) hist = r.indices();
  m.centroids = r.coords();
  m.poi_coordinates = r.coords();
  m.memnet.poi_embeddings = r.mat();
  m.memnet.keys = r.mat();
  m.memnet.memory = r.mat();
  m.fusion.weight = r.mat();
  m.fusion.bias = r.vec();
  m.geo.user_pref = r.vec();
  m.geo.poi_infl = r.vec();
  m.geo.bias = r.f64();
  m.topics.users = r.dict();
  m.topics.venues = r.dict();
  m.topics.theta = r.mat();
  m.topics.varphi = r.mat();
  m.topics.phi = r.mat();
  m.user_topics = r.mat();
  if (!r.done()) throw LoadError("model file has trailing data");
  check_shapes(m);
  return m;
}

}  // namespace temn
