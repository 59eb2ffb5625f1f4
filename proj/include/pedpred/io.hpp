#pragma once

// Persistence: native dataset text files, occupancy maps (text or PGM), binary weight
// archives, and BIWI-style obsmat tracking files.

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "pedpred/core.hpp"
#include "pedpred/nn/tensor.hpp"

namespace pedpred::io {

namespace fs = std::filesystem;

// Locale-independent number formatting and parsing.

inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw IoError("cannot parse " + what + " from '" + std::string(s) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view s, const std::string& what) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  std::int64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw IoError("cannot parse " + what + " from '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::ifstream open_in(const fs::path& p, bool binary = false) {
  std::ifstream f(p, binary ? std::ios::binary : std::ios::in);
  if (!f) throw IoError("cannot open '" + p.string() + "' for reading");
  return f;
}

inline std::ofstream open_out(const fs::path& p, bool binary = false) {
  std::ofstream f(p, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
  return f;
}

// ---------------------------------------------------------------------------
// Maps
//
// Text form:
//   resolution <m>
//   origin <x> <y>
//   size <width> <height>
//   <height rows of width '0'/'1' characters; the first row is the top (largest y)>

inline void write_map(std::ostream& os, const WorldMap& m) {
  os << "resolution " << format_double(m.resolution) << "\n";
  os << "origin " << format_double(m.origin.x) << " " << format_double(m.origin.y) << "\n";
  os << "size " << m.width << " " << m.height << "\n";
  std::string row(static_cast<std::size_t>(m.width), '0');
  for (int r = 0; r < m.height; ++r) {
    const int iy = m.height - 1 - r;
    for (int ix = 0; ix < m.width; ++ix) row[static_cast<std::size_t>(ix)] = m.at(ix, iy) ? '1' : '0';
    os << row << "\n";
  }
  if (!os) throw IoError("failed writing map");
}

namespace detail {

struct MapHeader {
  double resolution = 0.0;
  Vec2 origin;
  int width = -1;
  int height = -1;
  bool has_resolution = false, has_origin = false;
};

inline bool parse_header_line(const std::vector<std::string_view>& tok, MapHeader& h) {
  if (tok.empty()) return false;
  if (tok[0] == "resolution" && tok.size() == 2) {
    h.resolution = parse_double(tok[1], "map resolution");
    h.has_resolution = true;
    return true;
  }
  if (tok[0] == "origin" && tok.size() == 3) {
    h.origin = {parse_double(tok[1], "map origin"), parse_double(tok[2], "map origin")};
    h.has_origin = true;
    return true;
  }
  if (tok[0] == "size" && tok.size() == 3) {
    h.width = static_cast<int>(parse_int(tok[1], "map width"));
    h.height = static_cast<int>(parse_int(tok[2], "map height"));
    return true;
  }
  return false;
}

inline WorldMap make_map(const MapHeader& h) {
  if (!h.has_resolution || !h.has_origin) throw IoError("map header must declare resolution and origin");
  try {
    return WorldMap(h.origin, h.resolution, h.width, h.height);
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid map header: ") + e.what());
  }
}

}  // namespace detail

inline WorldMap read_text_map(std::istream& is) {
  detail::MapHeader h;
  std::string line;
  while (h.width < 0) {
    if (!std::getline(is, line)) throw IoError("map header is incomplete");
    auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (!detail::parse_header_line(tok, h)) throw IoError("unexpected map header line '" + line + "'");
  }
  WorldMap m = detail::make_map(h);
  for (int r = 0; r < m.height; ++r) {
    if (!std::getline(is, line)) throw IoError("map has fewer rows than declared");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (static_cast<int>(line.size()) != m.width)
      throw IoError("map row " + std::to_string(r) + " has " + std::to_string(line.size()) + " cells, expected " +
                    std::to_string(m.width));
    const int iy = m.height - 1 - r;
    for (int ix = 0; ix < m.width; ++ix) {
      const char c = line[static_cast<std::size_t>(ix)];
      if (c != '0' && c != '1') throw IoError("map cells must be '0' or '1'");
      m.at(ix, iy) = c == '1' ? 1 : 0;
    }
  }
  while (std::getline(is, line))
    if (!split_ws(line).empty()) throw IoError("map has more rows than declared");
  return m;
}

/// Binary PGM (P5); the header comments carry resolution and origin. Occupied cells are black.
inline void write_pgm_map(std::ostream& os, const WorldMap& m) {
  os << "P5\n# resolution " << format_double(m.resolution) << "\n# origin " << format_double(m.origin.x) << " "
     << format_double(m.origin.y) << "\n"
     << m.width << " " << m.height << "\n255\n";
  std::string row(static_cast<std::size_t>(m.width), '\0');
  for (int r = 0; r < m.height; ++r) {
    const int iy = m.height - 1 - r;
    for (int ix = 0; ix < m.width; ++ix) row[static_cast<std::size_t>(ix)] = m.at(ix, iy) ? char(0) : char(255);
    os.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw IoError("failed writing PGM map");
}

/// P5 or P2 grayscale; a pixel below 128 is occupied.
inline WorldMap read_pgm_map(std::istream& is) {
  std::string magic;
  is >> magic;
  if (magic != "P5" && magic != "P2") throw IoError("not a PGM file");
  detail::MapHeader h;
  std::vector<std::int64_t> nums;
  while (nums.size() < 3) {
    is >> std::ws;
    if (is.peek() == '#') {
      std::string line;
      std::getline(is, line);
      auto tok = split_ws(std::string_view(line).substr(1));
      detail::parse_header_line(tok, h);
      continue;
    }
    std::string tok;
    if (!(is >> tok)) throw IoError("PGM header is incomplete");
    nums.push_back(parse_int(tok, "PGM header field"));
  }
  h.width = static_cast<int>(nums[0]);
  h.height = static_cast<int>(nums[1]);
  const std::int64_t maxval = nums[2];
  if (maxval < 1 || maxval > 255) throw IoError("only 8-bit PGM maps are supported");
  WorldMap m = detail::make_map(h);
  const std::size_t n = static_cast<std::size_t>(m.width) * static_cast<std::size_t>(m.height);
  std::vector<int> pixels(n);
  if (magic == "P5") {
    is.get();  // single whitespace after maxval
    std::string raw(n, '\0');
    is.read(raw.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) throw IoError("PGM pixel data is truncated");
    for (std::size_t i = 0; i < n; ++i) pixels[i] = static_cast<unsigned char>(raw[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::string tok;
      if (!(is >> tok)) throw IoError("PGM pixel data is truncated");
      pixels[i] = static_cast<int>(parse_int(tok, "PGM pixel"));
    }
  }
  for (int r = 0; r < m.height; ++r)
    for (int ix = 0; ix < m.width; ++ix)
      m.at(ix, m.height - 1 - r) = pixels[static_cast<std::size_t>(r) * m.width + ix] < 128 ? 1 : 0;
  return m;
}

inline WorldMap load_map(const fs::path& p) {
  auto f = open_in(p, true);
  char c[2] = {0, 0};
  f.read(c, 2);
  f.clear();
  f.seekg(0);
  if (c[0] == 'P' && (c[1] == '5' || c[1] == '2')) return read_pgm_map(f);
  return read_text_map(f);
}

inline void save_map(const fs::path& p, const WorldMap& m) {
  auto f = open_out(p, true);
  if (p.extension() == ".pgm")
    write_pgm_map(f, m);
  else
    write_map(f, m);
}

// ---------------------------------------------------------------------------
// Native dataset format
//
//   dt <seconds>
//   map <path of the map file, relative to the dataset file>
//   <agent_id> <time_index> <x> <y> <vx> <vy>     one row per sample
//
// Headings are not stored; they are re-derived from the velocities on load.

inline void write_dataset(std::ostream& os, const Dataset& ds, const std::string& map_ref) {
  os << "dt " << format_double(ds.dt) << "\n";
  os << "map " << map_ref << "\n";
  for (const auto& tr : ds.trajectories) {
    for (std::size_t k = 0; k < tr.samples.size(); ++k) {
      const auto& s = tr.samples[k];
      os << tr.agent_id << ' ' << tr.start_index + static_cast<std::int64_t>(k) << ' ' << format_double(s.position.x)
         << ' ' << format_double(s.position.y) << ' ' << format_double(s.velocity.x) << ' '
         << format_double(s.velocity.y) << '\n';
    }
  }
  if (!os) throw IoError("failed writing dataset");
}

struct DatasetHeader {
  double dt = 0.0;
  std::string map_ref;
};

/// Parses rows into trajectories; `map` is attached as-is.
inline Dataset read_dataset(std::istream& is, WorldMap map, DatasetHeader* header_out = nullptr) {
  DatasetHeader h;
  bool has_dt = false, has_map = false;
  std::map<int, std::vector<std::pair<std::int64_t, AgentState>>> rows;
  std::vector<int> order;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok[0] == "dt") {
      if (tok.size() != 2) throw IoError("malformed dt line");
      h.dt = parse_double(tok[1], "dt");
      has_dt = true;
      continue;
    }
    if (tok[0] == "map") {
      std::string_view rest = std::string_view(line).substr(line.find("map") + 3);
      while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
      while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.back()))) rest.remove_suffix(1);
      h.map_ref = std::string(rest);
      has_map = true;
      continue;
    }
    if (tok.size() != 6) throw IoError("dataset line " + std::to_string(lineno) + ": expected 6 fields");
    const int id = static_cast<int>(parse_int(tok[0], "agent id"));
    AgentState s;
    s.id = id;
    const std::int64_t t = parse_int(tok[1], "time index");
    s.position = {parse_double(tok[2], "x"), parse_double(tok[3], "y")};
    s.velocity = {parse_double(tok[4], "vx"), parse_double(tok[5], "vy")};
    auto [it, inserted] = rows.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.emplace_back(t, s);
  }
  if (!has_dt) throw IoError("dataset is missing its dt header");
  if (!has_map) throw IoError("dataset is missing its map header");
  if (!(h.dt > 0.0)) throw IoError("dataset dt must be positive");
  Dataset ds;
  ds.dt = h.dt;
  ds.map = std::move(map);
  for (int id : order) {
    auto& r = rows[id];
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Trajectory tr;
    tr.agent_id = id;
    tr.dt = h.dt;
    tr.start_index = r.front().first;
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (r[k].first != tr.start_index + static_cast<std::int64_t>(k))
        throw IoError("agent " + std::to_string(id) + " has a gap or duplicate at time index " +
                      std::to_string(r[k].first));
      tr.samples.push_back(r[k].second);
    }
    derive_headings(tr);
    ds.trajectories.push_back(std::move(tr));
  }
  if (header_out) *header_out = h;
  return ds;
}

/// Writes the dataset and, next to it, its map (as `map_name`).
inline void save_dataset(const fs::path& p, const Dataset& ds, const std::string& map_name = "") {
  const std::string name = map_name.empty() ? p.stem().string() + ".map" : map_name;
  save_map(p.parent_path() / name, ds.map);
  auto f = open_out(p);
  write_dataset(f, ds, name);
}

inline Dataset load_dataset(const fs::path& p) {
  auto f = open_in(p);
  DatasetHeader h;
  // Header first, then the map it points to.
  std::stringstream buf;
  buf << f.rdbuf();
  Dataset ds = read_dataset(buf, WorldMap{}, &h);
  fs::path mp = h.map_ref;
  if (mp.is_relative()) mp = p.parent_path() / mp;
  ds.map = load_map(mp);
  return ds;
}

// ---------------------------------------------------------------------------
// Weight archives
//
//   "PPWA" | u32 version | u32 meta count | meta (key, value)* | u32 section count |
//   section* | u32 crc32 of all preceding bytes
//   section = str name | u64 byte length | u32 tensor count | tensor*
//   tensor  = str name | u32 rank | u64 dims[rank] | f64 values (little endian)
//   str     = u32 length | bytes

constexpr std::uint32_t kWeightFormatVersion = 1;
constexpr char kWeightMagic[4] = {'P', 'P', 'W', 'A'};

struct WeightArchive {
  std::uint32_t version = kWeightFormatVersion;
  std::map<std::string, std::string> meta;
  std::map<std::string, nn::LayerParams> sections;
};

namespace detail {

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    le(bits, 8);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void raw(const std::string& s) { buf_.append(s); }
  std::string& buffer() { return buf_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : p_(data), end_(data + size) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() {
    const std::uint64_t bits = le(8);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(p_, n);
    p_ += n;
    return s;
  }
  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw IoError("weight archive is truncated");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p_[i])) << (8 * i);
    p_ += n;
    return v;
  }
  const char* p_;
  const char* end_;
};

inline std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(::crc32(crc, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

}  // namespace detail

inline std::string serialize_weights(const WeightArchive& a) {
  detail::Writer w;
  w.raw(std::string(kWeightMagic, 4));
  w.u32(a.version);
  w.u32(static_cast<std::uint32_t>(a.meta.size()));
  for (const auto& [k, v] : a.meta) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(a.sections.size()));
  for (const auto& [name, tensors] : a.sections) {
    detail::Writer body;
    body.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [tname, t] : tensors) {
      body.str(tname);
      body.u32(static_cast<std::uint32_t>(t.shape().size()));
      for (auto d : t.shape()) body.u64(d);
      for (double v : t.span()) body.f64(v);
    }
    w.str(name);
    w.u64(body.buffer().size());
    w.raw(body.buffer());
  }
  w.u32(detail::crc32_of(w.buffer().data(), w.buffer().size()));
  return std::move(w.buffer());
}

/// Sections outside `known` are rejected; an empty list accepts any name.
inline WeightArchive deserialize_weights(const std::string& bytes, const std::vector<std::string>& known = {}) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kWeightMagic, 4) != 0) throw IoError("not a weight archive");
  if (bytes.size() < 12) throw IoError("weight archive checksum failure: file is truncated");
  detail::Reader tail(bytes.data() + bytes.size() - 4, 4);
  const std::uint32_t stored = tail.u32();
  if (detail::crc32_of(bytes.data(), bytes.size() - 4) != stored)
    throw IoError("weight archive checksum failure: file is corrupt or truncated");
  detail::Reader r(bytes.data() + 4, bytes.size() - 8);
  WeightArchive a;
  a.version = r.u32();
  if (a.version != kWeightFormatVersion)
    throw IoError("weight archive version " + std::to_string(a.version) + " is not supported (expected " +
                  std::to_string(kWeightFormatVersion) + ")");
  const std::uint32_t nmeta = r.u32();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.str();
    a.meta[k] = r.str();
  }
  const std::uint32_t nsec = r.u32();
  for (std::uint32_t s = 0; s < nsec; ++s) {
    const std::string name = r.str();
    if (!known.empty() && std::find(known.begin(), known.end(), name) == known.end())
      throw IoError("unknown weight archive section '" + name + "'");
    const std::uint64_t len = r.u64();
    if (len > r.remaining()) throw IoError("weight archive is truncated");
    const std::size_t before = r.remaining();
    nn::LayerParams tensors;
    const std::uint32_t nt = r.u32();
    for (std::uint32_t i = 0; i < nt; ++i) {
      std::string tname = r.str();
      const std::uint32_t rank = r.u32();
      nn::Shape shape(rank);
      for (auto& d : shape) d = static_cast<std::size_t>(r.u64());
      const std::size_t n = nn::shape_size(shape);
      if (n * 8 > r.remaining()) throw IoError("weight archive is truncated");
      std::vector<double> data(n);
      for (auto& v : data) v = r.f64();
      tensors.emplace(std::move(tname), nn::Tensor(shape, std::move(data)));
    }
    if (before - r.remaining() != len) throw IoError("weight archive section '" + name + "' has an inconsistent length");
    a.sections.emplace(name, std::move(tensors));
  }
  if (r.remaining() != 0) throw IoError("weight archive has trailing bytes");
  return a;
}

inline void save_weights(const fs::path& p, const WeightArchive& a) {
  auto f = open_out(p, true);
  const std::string bytes = serialize_weights(a);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + p.string() + "'");
}

inline WeightArchive load_weights(const fs::path& p, const std::vector<std::string>& known = {}) {
  auto f = open_in(p, true);
  std::stringstream buf;
  buf << f.rdbuf();
  return deserialize_weights(buf.str(), known);
}

// ---------------------------------------------------------------------------
// Obsmat tracking files: rows "frame id pos_x pos_z pos_y v_x v_z v_y".

struct ObsmatOptions {
  double frame_rate = 2.5;  // frames per second
  double dt = 0.3;          // output sampling interval
};

namespace detail {

struct RawTrack {
  int id = 0;
  std::vector<double> times;
  std::vector<Vec2> positions;
};

/// Linear interpolation of positions onto the grid t * dt; velocities by backward differences
/// (forward for the first sample). A lone sample keeps `fallback_velocity`.
inline Trajectory resample_track(const RawTrack& raw, double dt, Vec2 fallback_velocity = {}) {
  Trajectory tr;
  tr.agent_id = raw.id;
  tr.dt = dt;
  const double t0 = raw.times.front();
  const double t1 = raw.times.back();
  const auto first = static_cast<std::int64_t>(std::ceil(t0 / dt - 1e-9));
  const auto last = static_cast<std::int64_t>(std::floor(t1 / dt + 1e-9));
  tr.start_index = first;
  std::size_t seg = 0;
  for (std::int64_t k = first; k <= last; ++k) {
    const double t = std::clamp(static_cast<double>(k) * dt, t0, t1);
    while (seg + 1 < raw.times.size() - 1 && raw.times[seg + 1] < t) ++seg;
    Vec2 p = raw.positions[seg];
    if (raw.times.size() > 1) {
      const double a = raw.times[seg], b = raw.times[seg + 1];
      const double w = b > a ? (t - a) / (b - a) : 0.0;
      p = raw.positions[seg] + (raw.positions[seg + 1] - raw.positions[seg]) * w;
    }
    AgentState s;
    s.id = raw.id;
    s.position = p;
    tr.samples.push_back(s);
  }
  const std::size_t n = tr.samples.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (n == 1)
      tr.samples[k].velocity = fallback_velocity;
    else if (k == 0)
      tr.samples[k].velocity = (tr.samples[1].position - tr.samples[0].position) / dt;
    else
      tr.samples[k].velocity = (tr.samples[k].position - tr.samples[k - 1].position) / dt;
  }
  derive_headings(tr);
  return tr;
}

}  // namespace detail

inline Dataset parse_obsmat(std::istream& is, const ObsmatOptions& opt = {}, WorldMap map = {}) {
  if (!(opt.frame_rate > 0.0) || !(opt.dt > 0.0)) throw InvalidArgument("obsmat frame rate and dt must be positive");
  std::map<int, detail::RawTrack> tracks;
  std::map<int, Vec2> first_velocity;
  std::vector<int> order;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok.size() != 8) throw IoError("obsmat line " + std::to_string(lineno) + ": expected 8 fields");
    double v[8];
    for (std::size_t i = 0; i < 8; ++i) v[i] = parse_double(tok[i], "obsmat field");
    const double id_d = v[1];
    if (id_d != std::floor(id_d)) throw IoError("obsmat line " + std::to_string(lineno) + ": agent id is not integral");
    const int id = static_cast<int>(id_d);
    const double t = v[0] / opt.frame_rate;
    auto [it, inserted] = tracks.try_emplace(id);
    auto& tr = it->second;
    if (inserted) {
      tr.id = id;
      order.push_back(id);
      first_velocity[id] = {v[5], v[7]};
    }
    if (!tr.times.empty() && !(t > tr.times.back()))
      throw IoError("obsmat line " + std::to_string(lineno) + ": frames of agent " + std::to_string(id) +
                    " are not increasing");
    tr.times.push_back(t);
    tr.positions.push_back({v[2], v[4]});
  }
  Dataset ds;
  ds.dt = opt.dt;
  ds.map = std::move(map);
  for (int id : order) {
    Trajectory tr = detail::resample_track(tracks[id], opt.dt, first_velocity[id]);
    if (!tr.samples.empty()) ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

/// Positions at frame = time * frame_rate; z columns are written as zero.
inline void write_obsmat(std::ostream& os, const Dataset& ds, double frame_rate) {
  if (!(frame_rate > 0.0)) throw InvalidArgument("frame rate must be positive");
  char buf[256];
  std::vector<std::tuple<double, int, const AgentState*>> rows;
  for (const auto& tr : ds.trajectories)
    for (std::size_t k = 0; k < tr.samples.size(); ++k)
      rows.emplace_back(static_cast<double>(tr.start_index + static_cast<std::int64_t>(k)) * ds.dt * frame_rate,
                        tr.agent_id, &tr.samples[k]);
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
  for (const auto& [frame, id, s] : rows) {
    std::snprintf(buf, sizeof buf, "%.10e %.10e %.10e %.10e %.10e %.10e %.10e %.10e\n", frame,
                  static_cast<double>(id), s->position.x, 0.0, s->position.y, s->velocity.x, 0.0, s->velocity.y);
    os << buf;
  }
  if (!os) throw IoError("failed writing obsmat");
}

/// Linear-interpolation resampling of every trajectory to a new dt.
inline Dataset resample_dataset(const Dataset& ds, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("resample dt must be positive");
  Dataset out;
  out.dt = dt;
  out.map = ds.map;
  for (const auto& tr : ds.trajectories) {
    if (tr.samples.empty()) continue;
    detail::RawTrack raw;
    raw.id = tr.agent_id;
    for (std::size_t k = 0; k < tr.samples.size(); ++k) {
      raw.times.push_back(static_cast<double>(tr.start_index + static_cast<std::int64_t>(k)) * ds.dt);
      raw.positions.push_back(tr.samples[k].position);
    }
    Trajectory r = detail::resample_track(raw, dt, tr.samples.front().velocity);
    if (!r.samples.empty()) out.trajectories.push_back(std::move(r));
  }
  return out;
}

}  // namespace pedpred::io
