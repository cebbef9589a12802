// SPDX-License-Identifier: Apache-2.0
#include "sspt/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "sspt/error.hpp"

namespace sspt::io {

using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Byte helpers

template <class T>
T load(std::span<const std::uint8_t> b, std::size_t off, bool swap) {
  std::array<std::uint8_t, sizeof(T)> raw;
  std::memcpy(raw.data(), b.data() + off, sizeof(T));
  if (swap) std::reverse(raw.begin(), raw.end());
  return std::bit_cast<T>(raw);
}

template <class T>
void store(std::vector<std::uint8_t>& b, std::size_t off, T v) {
  static_assert(std::endian::native == std::endian::little);
  std::memcpy(b.data() + off, &v, sizeof(T));
}

bool ends_with_gz(const fs::path& p) {
  const auto s = p.string();
  return s.size() >= 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (ends_with_gz(path)) {
    gzFile f = gzopen(path.string().c_str(), "wb");
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    std::size_t done = 0;
    while (done < bytes.size()) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
      if (gzwrite(f, bytes.data() + done, chunk) != static_cast<int>(chunk)) {
        gzclose(f);
        throw IoError("write failed for '" + path.string() + "'");
      }
      done += chunk;
    }
    if (gzclose(f) != Z_OK) throw IoError("write failed for '" + path.string() + "'");
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::ofstream open_text(const fs::path& path, bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_text_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

// Shortest round-trip formatting for CSV numbers.
std::string num(double v) { return json(v).dump(); }

} // namespace

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> buf;
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      int code = 0;
      const std::string msg = gzerror(f, &code);
      gzclose(f);
      throw IoError("read failed for '" + path.string() + "': " + msg);
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
}

// ---------------------------------------------------------------------------
// NIfTI-1

Affine NiftiHeader::affine() const {
  if (sform_code > 0) {
    std::array<double, 16> m{};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) m[static_cast<std::size_t>(r * 4 + c)] = srow[r][c];
    m[15] = 1.0;
    return Affine(m);
  }
  const double dx = pixdim[1], dy = pixdim[2], dz = pixdim[3];
  if (qform_code > 0) {
    const double b = quatern_b, c = quatern_c, d = quatern_d;
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    const double qfac = pixdim[0] < 0.0f ? -1.0 : 1.0;
    const double r[3][3] = {{a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
                            {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
                            {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b}};
    const double s[3] = {dx, dy, qfac * dz};
    const double t[3] = {qoffset_x, qoffset_y, qoffset_z};
    std::array<double, 16> m{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[static_cast<std::size_t>(i * 4 + j)] = r[i][j] * s[j];
      m[static_cast<std::size_t>(i * 4 + 3)] = t[i];
    }
    m[15] = 1.0;
    return Affine(m);
  }
  return Affine::scaling(dx, dy, dz);
}

NiftiHeader parse_nifti_header(std::span<const std::uint8_t> b) {
  if (b.size() < nifti::kHeaderSize)
    throw FormatError("NIfTI file shorter than the 348-byte header (" + std::to_string(b.size()) + " bytes)");
  NiftiHeader h;
  const auto dim0 = load<std::int16_t>(b, 40, false);
  h.big_endian = !(dim0 >= 1 && dim0 <= 7);
  const bool sw = h.big_endian;
  if (sw) {
    const auto swapped = load<std::int16_t>(b, 40, true);
    if (swapped < 1 || swapped > 7) throw FormatError("dim[0] out of range [1, 7] in either byte order");
  }
  const auto sizeof_hdr = load<std::int32_t>(b, 0, sw);
  if (sizeof_hdr != 348) throw FormatError("sizeof_hdr is " + std::to_string(sizeof_hdr) + ", expected 348");

  for (std::size_t i = 0; i < 8; ++i) h.dim[i] = load<std::int16_t>(b, 40 + 2 * i, sw);
  h.datatype = load<std::int16_t>(b, 70, sw);
  for (std::size_t i = 0; i < 8; ++i) h.pixdim[i] = load<float>(b, 76 + 4 * i, sw);
  h.vox_offset = load<float>(b, 108, sw);
  h.scl_slope = load<float>(b, 112, sw);
  h.scl_inter = load<float>(b, 116, sw);
  h.qform_code = load<std::int16_t>(b, 252, sw);
  h.sform_code = load<std::int16_t>(b, 254, sw);
  h.quatern_b = load<float>(b, 256, sw);
  h.quatern_c = load<float>(b, 260, sw);
  h.quatern_d = load<float>(b, 264, sw);
  h.qoffset_x = load<float>(b, 268, sw);
  h.qoffset_y = load<float>(b, 272, sw);
  h.qoffset_z = load<float>(b, 276, sw);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c) h.srow[r][c] = load<float>(b, 280 + 16 * r + 4 * c, sw);
  std::memcpy(h.magic.data(), b.data() + 344, 4);

  if (std::memcmp(h.magic.data(), "n+1\0", 4) != 0)
    throw FormatError("magic is not \"n+1\" (only single-file NIfTI-1 is supported)");
  if (h.dim[0] != 3 && h.dim[0] != 4) throw FormatError("dim[0] is " + std::to_string(h.dim[0]) + ", expected 3 or 4");
  for (int i = 1; i <= h.dim[0]; ++i)
    if (h.dim[i] < 1) throw FormatError("dim[" + std::to_string(i) + "] is " + std::to_string(h.dim[i]));
  switch (h.datatype) {
  case nifti::kUint8:
  case nifti::kInt16:
  case nifti::kFloat32:
  case nifti::kFloat64: break;
  default: throw FormatError("unsupported datatype " + std::to_string(h.datatype));
  }
  if (!(h.vox_offset >= 348.0f) || h.vox_offset != std::floor(h.vox_offset))
    throw FormatError("vox_offset " + std::to_string(h.vox_offset) + " is invalid");
  return h;
}

namespace {

std::size_t datatype_bytes(std::int16_t dt) {
  switch (dt) {
  case nifti::kUint8: return 1;
  case nifti::kInt16: return 2;
  case nifti::kFloat32: return 4;
  default: return 8;
  }
}

// Decodes the voxel payload to doubles in file order with scaling applied.
std::vector<double> decode_payload(const NiftiHeader& h, std::span<const std::uint8_t> b, std::size_t count) {
  const std::size_t bytes = datatype_bytes(h.datatype);
  const auto off = static_cast<std::size_t>(h.vox_offset);
  if (off > b.size() || (b.size() - off) / bytes < count)
    throw FormatError("dim fields need " + std::to_string(count * bytes) + " data bytes after vox_offset, file has " +
                      std::to_string(b.size() > off ? b.size() - off : 0));
  std::vector<double> v(count);
  const bool sw = h.big_endian;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = off + i * bytes;
    switch (h.datatype) {
    case nifti::kUint8: v[i] = b[p]; break;
    case nifti::kInt16: v[i] = load<std::int16_t>(b, p, sw); break;
    case nifti::kFloat32: v[i] = load<float>(b, p, sw); break;
    default: v[i] = load<double>(b, p, sw); break;
    }
  }
  if (h.scl_slope != 0.0f && std::isfinite(h.scl_slope)) {
    const double s = h.scl_slope, t = h.scl_inter;
    if (s != 1.0 || t != 0.0)
      for (auto& x : v) x = x * s + t;
  }
  return v;
}

std::array<int, 3> spatial_dims(const NiftiHeader& h) { return {h.dim[1], h.dim[2], h.dim[3]}; }

std::size_t spatial_count(const NiftiHeader& h) {
  return static_cast<std::size_t>(h.dim[1]) * static_cast<std::size_t>(h.dim[2]) * static_cast<std::size_t>(h.dim[3]);
}

FodImage fod_from(const NiftiHeader& h, std::span<const std::uint8_t> bytes) {
  const std::size_t nv = spatial_count(h);
  const auto nc = static_cast<std::size_t>(h.dim[4]);
  try {
    lmax_from_ncoeffs(nc);
  } catch (const FormatError& e) {
    throw FormatError("dim[4] = " + std::to_string(nc) + ": " + e.what());
  }
  const auto v = decode_payload(h, bytes, nv * nc);
  std::vector<float> data(nv * nc);
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t i = 0; i < nv; ++i) data[i * nc + c] = static_cast<float>(v[c * nv + i]);
  return FodImage(spatial_dims(h), nc, h.affine(), std::move(data));
}

BinaryMask mask_from(const NiftiHeader& h, std::span<const std::uint8_t> bytes) {
  const std::size_t nv = spatial_count(h);
  const auto v = decode_payload(h, bytes, nv);
  std::vector<std::uint8_t> on(nv);
  for (std::size_t i = 0; i < nv; ++i) on[i] = v[i] != 0.0 ? 1 : 0;
  return BinaryMask(spatial_dims(h), h.affine(), std::move(on));
}

std::vector<std::uint8_t> header_bytes(std::array<int, 3> dims, int nt, std::int16_t datatype, const Affine& a) {
  std::vector<std::uint8_t> b(nifti::kVoxOffset, 0);
  store<std::int32_t>(b, 0, 348);
  const std::int16_t ndim = nt > 1 || datatype == nifti::kFloat32 ? 4 : 3;
  const std::array<std::int16_t, 8> dim = {ndim, static_cast<std::int16_t>(dims[0]), static_cast<std::int16_t>(dims[1]),
                                           static_cast<std::int16_t>(dims[2]), static_cast<std::int16_t>(ndim == 4 ? nt : 1),
                                           1, 1, 1};
  for (std::size_t i = 0; i < 8; ++i) store<std::int16_t>(b, 40 + 2 * i, dim[i]);
  store<std::int16_t>(b, 70, datatype);
  store<std::int16_t>(b, 72, static_cast<std::int16_t>(8 * datatype_bytes(datatype)));
  const auto vs = a.column_norms();
  const std::array<float, 8> pixdim = {1.0f, float(vs[0]), float(vs[1]), float(vs[2]), 1.0f, 1.0f, 1.0f, 1.0f};
  for (std::size_t i = 0; i < 8; ++i) store<float>(b, 76 + 4 * i, pixdim[i]);
  store<float>(b, 108, static_cast<float>(nifti::kVoxOffset));
  store<float>(b, 112, 1.0f);
  store<float>(b, 116, 0.0f);
  b[123] = 2;  // xyzt_units: mm
  store<std::int16_t>(b, 252, 0);
  store<std::int16_t>(b, 254, 2);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      store<float>(b, 280 + 16 * r + 4 * c, static_cast<float>(a(static_cast<int>(r), static_cast<int>(c))));
  std::memcpy(b.data() + 344, "n+1\0", 4);
  return b;
}

void check_dims_fit(std::array<int, 3> dims, std::size_t nt) {
  for (int d : dims)
    if (d > std::numeric_limits<std::int16_t>::max()) throw ParameterError("dimension too large for NIfTI-1");
  if (nt > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max()))
    throw ParameterError("too many volumes for NIfTI-1");
}

} // namespace

NiftiImage read_nifti(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    const auto h = parse_nifti_header(bytes);
    if (h.dim[0] == 4) return fod_from(h, bytes);
    return mask_from(h, bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

FodImage read_fod(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    const auto h = parse_nifti_header(bytes);
    if (h.dim[0] != 4) throw FormatError("dim[0] is " + std::to_string(h.dim[0]) + ", an FOD image needs 4");
    return fod_from(h, bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

BinaryMask read_mask(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    const auto h = parse_nifti_header(bytes);
    if (h.dim[0] == 4 && h.dim[4] != 1)
      throw FormatError("dim[4] is " + std::to_string(h.dim[4]) + ", a mask needs a single volume");
    return mask_from(h, bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_nifti(const fs::path& path, const FodImage& img) {
  check_dims_fit(img.dims(), img.n_coeffs());
  const std::size_t nc = img.n_coeffs();
  auto b = header_bytes(img.dims(), static_cast<int>(nc), nifti::kFloat32, img.affine());
  const std::size_t nv = img.voxel_count();
  b.resize(nifti::kVoxOffset + 4 * nv * nc);
  const auto& data = img.data();
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t i = 0; i < nv; ++i) store<float>(b, nifti::kVoxOffset + 4 * (c * nv + i), data[i * nc + c]);
  write_bytes(path, b);
}

void write_nifti(const fs::path& path, const BinaryMask& mask) {
  check_dims_fit(mask.dims(), 1);
  auto b = header_bytes(mask.dims(), 1, nifti::kUint8, mask.affine());
  b.insert(b.end(), mask.voxels().begin(), mask.voxels().end());
  write_bytes(path, b);
}

// ---------------------------------------------------------------------------
// TCK

void write_tck(const fs::path& path, const Tractogram& tracks) {
  // The data offset depends on the header length, which contains the offset.
  std::string header;
  std::size_t offset = 0;
  for (int pass = 0; pass < 3; ++pass) {
    std::ostringstream h;
    h << "mrtrix tracks\n"
      << "datatype: Float32LE\n"
      << "count: " << tracks.size() << "\n"
      << "file: . " << offset << "\n"
      << "END\n";
    header = h.str();
    if (header.size() == offset) break;
    offset = header.size();
  }

  std::size_t n_triplets = 1;
  for (const auto& s : tracks) n_triplets += s.size() + 1;
  std::vector<std::uint8_t> b(header.begin(), header.end());
  b.resize(header.size() + 12 * n_triplets);
  std::size_t p = header.size();
  auto put = [&](float x, float y, float z) {
    store<float>(b, p, x);
    store<float>(b, p + 4, y);
    store<float>(b, p + 8, z);
    p += 12;
  };
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const float inf = std::numeric_limits<float>::infinity();
  for (const auto& s : tracks) {
    for (const auto& v : s) put(static_cast<float>(v.x), static_cast<float>(v.y), static_cast<float>(v.z));
    put(nan, nan, nan);
  }
  put(inf, inf, inf);
  write_bytes(path, b);
}

Tractogram read_tck(const fs::path& path) {
  const auto b = read_file_bytes(path);
  const std::string_view text(reinterpret_cast<const char*>(b.data()), b.size());
  auto fail = [&](const std::string& why) { return FormatError(path.string() + ": " + why); };

  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) return false;
    line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl + 1;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || line != "mrtrix tracks") throw fail("missing \"mrtrix tracks\" magic line");
  std::map<std::string, std::string, std::less<>> keys;
  bool ended = false;
  while (next_line(line)) {
    if (line == "END") {
      ended = true;
      break;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string key(line.substr(0, colon));
    std::string_view val = line.substr(colon + 1);
    while (!val.empty() && val.front() == ' ') val.remove_prefix(1);
    keys[key] = std::string(val);
  }
  if (!ended) throw fail("header has no END line");

  bool big = false;
  if (auto it = keys.find("datatype"); it != keys.end()) {
    if (it->second == "Float32BE")
      big = true;
    else if (it->second != "Float32LE")
      throw fail("unsupported datatype '" + it->second + "'");
  }
  std::size_t offset = pos;
  if (auto it = keys.find("file"); it != keys.end()) {
    std::istringstream fs_(it->second);
    std::string dot;
    std::size_t off = 0;
    if (!(fs_ >> dot >> off) || dot != ".") throw fail("unsupported file field '" + it->second + "'");
    offset = off;
  }
  if (offset > b.size()) throw fail("data offset beyond end of file");

  Tractogram out;
  Streamline cur;
  const std::span<const std::uint8_t> body(b);
  bool terminated = false;
  for (std::size_t p = offset; p + 12 <= b.size(); p += 12) {
    const float x = load<float>(body, p, big), y = load<float>(body, p + 4, big), z = load<float>(body, p + 8, big);
    if (std::isinf(x) && std::isinf(y) && std::isinf(z)) {
      terminated = true;
      break;
    }
    if (std::isnan(x) && std::isnan(y) && std::isnan(z)) {
      out.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur.push_back({x, y, z});
  }
  if (!terminated) throw fail("truncated body: no Inf terminator");
  if (!cur.empty()) throw fail("truncated body: last streamline has no separator");
  if (auto it = keys.find("count"); it != keys.end()) {
    if (it->second != std::to_string(out.size()))
      throw fail("count field says " + it->second + " but body holds " + std::to_string(out.size()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records

std::string record_to_json(const TrackingRecord& r) {
  json j;
  j["seed"] = {r.seed_pos.x, r.seed_pos.y, r.seed_pos.z};
  j["step_size"] = r.params.step_size;
  j["radius"] = r.params.radius;
  j["cone_angle"] = r.params.cone_angle;
  j["fod_threshold"] = r.params.fod_threshold;
  j["accepted"] = r.accepted;
  json flags = json::array();
  for (auto f : r.flags.list()) flags.push_back(std::string(flag_name(f)));
  j["flags"] = std::move(flags);
  j["n_backtracks"] = r.n_backtracks;
  j["n_points"] = r.n_points;
  j["duration_us"] = r.duration_us;
  j["streamline_index"] = r.streamline_index ? json(*r.streamline_index) : json(nullptr);
  return j.dump();
}

TrackingRecord record_from_json(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("record is not a JSON object");
  auto field = [&](const char* name) -> const json& {
    const auto it = j.find(name);
    if (it == j.end()) throw FormatError(std::string("missing field '") + name + "'");
    return *it;
  };
  try {
    TrackingRecord r;
    const auto& seed = field("seed");
    if (!seed.is_array() || seed.size() != 3) throw FormatError("field 'seed' must be an array of 3 numbers");
    r.seed_pos = {seed[0].get<double>(), seed[1].get<double>(), seed[2].get<double>()};
    r.params.step_size = field("step_size").get<double>();
    r.params.radius = field("radius").get<double>();
    r.params.cone_angle = field("cone_angle").get<double>();
    r.params.fod_threshold = field("fod_threshold").get<double>();
    r.accepted = field("accepted").get<bool>();
    const auto& flags = field("flags");
    if (!flags.is_array()) throw FormatError("field 'flags' must be an array");
    for (const auto& f : flags) {
      const auto name = f.get<std::string>();
      const auto flag = flag_from_name(name);
      if (!flag) throw FormatError("unknown flag '" + name + "'");
      r.flags.set(*flag);
    }
    r.n_backtracks = field("n_backtracks").get<int>();
    r.n_points = field("n_points").get<std::size_t>();
    r.duration_us = field("duration_us").get<std::int64_t>();
    const auto& idx = field("streamline_index");
    if (!idx.is_null()) r.streamline_index = idx.get<std::size_t>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad field type: ") + e.what());
  }
}

void write_records(const fs::path& path, std::span<const TrackingRecord> records, bool append) {
  auto out = open_text(path, append);
  for (const auto& r : records) out << record_to_json(r) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<TrackingRecord> read_records(const fs::path& path) {
  auto in = open_text_in(path);
  std::vector<TrackingRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV and sidecars

void write_histogram_csv(const fs::path& path, const ParamHistogram& h) {
  auto out = open_text(path);
  out << "bin_lo,bin_hi,attempted,accepted,rate\n";
  for (std::size_t i = 0; i < h.bins(); ++i)
    out << num(h.bin_edges[i]) << ',' << num(h.bin_edges[i + 1]) << ',' << h.attempted_counts[i] << ','
        << h.accepted_counts[i] << ',' << num(h.acceptance_rate[i]) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_suggestion_csv(const fs::path& path, const RangeSuggestion& s) {
  auto out = open_text(path);
  out << "param,suggested_min,suggested_max,support_fraction\n"
      << param_name(s.param) << ',' << num(s.suggested_min) << ',' << num(s.suggested_max) << ','
      << num(s.support_fraction) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_clusters_csv(const fs::path& path, std::span<const Cluster> clusters) {
  std::vector<std::pair<std::size_t, std::size_t>> rows;
  for (const auto& c : clusters)
    for (std::size_t m : c.members) rows.emplace_back(m, c.id);
  std::sort(rows.begin(), rows.end());
  auto out = open_text(path);
  out << "streamline_index,cluster_id\n";
  for (const auto& [s, c] : rows) out << s << ',' << c << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<Cluster> read_clusters_csv(const fs::path& path) {
  auto in = open_text_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty cluster table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "streamline_index,cluster_id")
    throw FormatError(path.string() + ": header must be 'streamline_index,cluster_id'");
  std::vector<Cluster> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    std::size_t s = 0, c = 0;
    char comma = 0;
    std::istringstream row(line);
    if (!(row >> s >> comma >> c) || comma != ',')
      throw FormatError(path.string() + ":" + std::to_string(n) + ": expected 'streamline_index,cluster_id'");
    if (c >= out.size()) {
      const std::size_t old = out.size();
      out.resize(c + 1);
      for (std::size_t k = old; k < out.size(); ++k) out[k].id = k;
    }
    out[c].members.push_back(s);
  }
  std::erase_if(out, [](const Cluster& c) { return c.members.empty(); });
  return out;
}

void write_ranges_json(const fs::path& path, const ParameterRanges& r) {
  json j;
  j["step_size"] = {r.step_min, r.step_max};
  j["radius"] = {r.radius_min, r.radius_max};
  j["fod_threshold"] = {r.threshold_min, r.threshold_max};
  j["min_length"] = r.min_length;
  j["max_length"] = r.max_length;
  auto out = open_text(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ParameterRanges read_ranges_json(const fs::path& path) {
  auto in = open_text_in(path);
  try {
    const json j = json::parse(in);
    ParameterRanges r;
    auto pair = [&](const char* key, double& lo, double& hi) {
      const auto& v = j.at(key);
      if (!v.is_array() || v.size() != 2) throw FormatError(std::string("field '") + key + "' must be [min, max]");
      lo = v[0].get<double>();
      hi = v[1].get<double>();
    };
    pair("step_size", r.step_min, r.step_max);
    pair("radius", r.radius_min, r.radius_max);
    pair("fod_threshold", r.threshold_min, r.threshold_max);
    r.min_length = j.at("min_length").get<double>();
    r.max_length = j.at("max_length").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

} // namespace sspt::io
