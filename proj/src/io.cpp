#include "carotid3d/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "carotid3d/error.hpp"

namespace carotid::io {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kPoseHeader = "frame_id,tx,ty,tz,qw,qx,qy,qz,t";
constexpr std::string_view kCentroidHeader = "frame_id,cx,cy,cz";
constexpr std::string_view kVolumeFormat = "carotid3d-volume";

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw InvalidArgument("cannot format number");
  return std::string(buf.data(), end);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Non-empty lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> lines_of(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  const auto raw = split(text, '\n');
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto line = trim(raw[i]);
    if (!line.empty()) out.emplace_back(i + 1, line);
  }
  return out;
}

[[noreturn]] void fail_line(std::size_t line, const std::string& msg) {
  throw InvalidArgument("line " + std::to_string(line) + ": " + msg);
}

double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) {
    fail_line(line, "invalid number '" + std::string(field) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view field, std::size_t line) {
  field = trim(field);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    fail_line(line, "invalid integer '" + std::string(field) + "'");
  }
  return v;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> keys,
                    const std::string& where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto k : keys) known = known || item.key() == k;
    if (!known) throw InvalidArgument(where + ": unknown key '" + item.key() + "'");
  }
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

std::string encode_pgm(const Raster<std::uint8_t>& pixels, std::optional<double> pixel_spacing_mm) {
  std::string out = "P5\n";
  if (pixel_spacing_mm) out += "# pixel_spacing_mm " + format_double(*pixel_spacing_mm) + "\n";
  out += std::to_string(pixels.width()) + " " + std::to_string(pixels.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(pixels.data().data()), pixels.size());
  return out;
}

PgmImage decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  PgmImage img;
  // Reads the next whitespace-delimited header token, collecting comments.
  auto token = [&]() -> std::string_view {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        const auto eol = bytes.find('\n', pos);
        const auto comment = trim(bytes.substr(pos + 1, eol == std::string_view::npos ? eol : eol - pos - 1));
        constexpr std::string_view key = "pixel_spacing_mm";
        if (comment.starts_with(key)) {
          const auto value = trim(comment.substr(key.size()));
          double v = 0.0;
          auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
          if (ec == std::errc{} && p == value.data() + value.size() && v > 0.0) img.pixel_spacing_mm = v;
        }
        pos = eol == std::string_view::npos ? bytes.size() : eol + 1;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };

  if (token() != "P5") throw InvalidArgument("not a binary PGM (P5) image");
  auto number = [&](const char* what) {
    const auto t = token();
    int v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size()) {
      throw InvalidArgument(std::string("PGM header: bad ") + what);
    }
    return v;
  };
  const int width = number("width");
  const int height = number("height");
  const int maxval = number("maxval");
  if (maxval != 255) throw InvalidArgument("PGM: only maxval 255 is supported");
  if (width < 1 || height < 1) throw InvalidArgument("PGM: bad dimensions");
  ++pos;  // single whitespace before the raster
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() < pos + n) throw InvalidArgument("PGM: truncated pixel data");
  img.pixels = Raster<std::uint8_t>(width, height);
  std::copy_n(bytes.data() + pos, n, reinterpret_cast<char*>(img.pixels.data().data()));
  return img;
}

PgmImage read_pgm(const fs::path& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Raster<std::uint8_t> labels_to_palette(const LabelRaster& labels) {
  Raster<std::uint8_t> out(labels.width(), labels.height());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    switch (labels.data()[i]) {
      case kBackground: out.data()[i] = 0; break;
      case kWall: out.data()[i] = 128; break;
      case kLumen: out.data()[i] = 255; break;
      default: throw InvalidArgument("label raster holds a value outside {0,1,2}");
    }
  }
  return out;
}

LabelRaster palette_to_labels(const Raster<std::uint8_t>& palette) {
  LabelRaster out(palette.width(), palette.height());
  for (std::size_t i = 0; i < palette.size(); ++i) {
    switch (palette.data()[i]) {
      case 0: out.data()[i] = kBackground; break;
      case 128: out.data()[i] = kWall; break;
      case 255: out.data()[i] = kLumen; break;
      default:
        throw InvalidArgument("label mask holds grey value " + std::to_string(palette.data()[i]) +
                              " (expected 0, 128 or 255)");
    }
  }
  return out;
}

std::string format_pose_csv(std::span<const PoseRecord> rows) {
  std::string out(kPoseHeader);
  out += '\n';
  for (const auto& r : rows) {
    const auto& t = r.pose.translation;
    const auto& q = r.pose.rotation.quaternion();
    out += std::to_string(r.frame_id);
    for (double v : {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z(), r.t}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

PoseCsv parse_pose_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines.front().second != kPoseHeader) {
    throw InvalidArgument("pose CSV must start with header '" + std::string(kPoseHeader) + "'");
  }
  PoseCsv out;
  std::set<std::int64_t> ids;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [line, content] = lines[i];
    const auto fields = split(content, ',');
    if (fields.size() != 9) fail_line(line, "expected 9 fields, found " + std::to_string(fields.size()));
    PoseRecord r;
    r.frame_id = parse_int(fields[0], line);
    if (!ids.insert(r.frame_id).second) fail_line(line, "duplicate frame_id " + std::to_string(r.frame_id));
    const Eigen::Vector3d t(parse_double(fields[1], line), parse_double(fields[2], line),
                            parse_double(fields[3], line));
    const Eigen::Quaterniond q(parse_double(fields[4], line), parse_double(fields[5], line),
                               parse_double(fields[6], line), parse_double(fields[7], line));
    const double norm = q.norm();
    if (!(norm > 0.0)) fail_line(line, "zero quaternion");
    if (std::abs(norm - 1.0) > 1e-3) {
      out.warnings.push_back("line " + std::to_string(line) + ": quaternion norm " +
                             format_double(norm) + " renormalized");
    }
    r.pose = Pose{Rotation(q), t};
    r.t = parse_double(fields[8], line);
    out.rows.push_back(r);
  }
  if (out.rows.empty()) throw InvalidArgument("pose CSV has no rows");
  return out;
}

std::string format_centroid_csv(std::span<const CentroidRecord> rows) {
  std::string out(kCentroidHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.frame_id);
    for (int a = 0; a < 3; ++a) {
      out += ',';
      out += format_double(r.c[a]);
    }
    out += '\n';
  }
  return out;
}

std::vector<CentroidRecord> parse_centroid_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines.front().second != kCentroidHeader) {
    throw InvalidArgument("centroid CSV must start with header '" + std::string(kCentroidHeader) + "'");
  }
  std::vector<CentroidRecord> out;
  std::set<std::int64_t> ids;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [line, content] = lines[i];
    const auto fields = split(content, ',');
    if (fields.size() != 4) fail_line(line, "expected 4 fields, found " + std::to_string(fields.size()));
    CentroidRecord r;
    r.frame_id = parse_int(fields[0], line);
    if (!ids.insert(r.frame_id).second) fail_line(line, "duplicate frame_id " + std::to_string(r.frame_id));
    for (int a = 0; a < 3; ++a) r.c[a] = parse_double(fields[static_cast<std::size_t>(a) + 1], line);
    out.push_back(r);
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> parse_series_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.size() < 2) throw InvalidArgument("series CSV needs a header and at least one row");
  if (split(lines.front().second, ',').size() != 2) {
    throw InvalidArgument("series CSV header must name exactly two columns");
  }
  std::vector<double> a, b;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [line, content] = lines[i];
    const auto fields = split(content, ',');
    if (fields.size() != 2) fail_line(line, "expected 2 fields, found " + std::to_string(fields.size()));
    a.push_back(parse_double(fields[0], line));
    b.push_back(parse_double(fields[1], line));
  }
  return {std::move(a), std::move(b)};
}

std::vector<bool> parse_flag_list(std::string_view text) {
  std::vector<bool> flags;
  for (const auto& [line, content] : lines_of(text)) {
    if (content == "1" || content == "true") {
      flags.push_back(true);
    } else if (content == "0" || content == "false") {
      flags.push_back(false);
    } else {
      fail_line(line, "expected 0, 1, true or false, found '" + std::string(content) + "'");
    }
  }
  return flags;
}

json volume_sidecar(const Volume& v, const std::string& data_file) {
  return json{{"format", kVolumeFormat},
              {"version", kFormatVersion},
              {"dims", {v.dims[0], v.dims[1], v.dims[2]}},
              {"spacing_mm", v.spacing},
              {"origin_mm", {v.origin.x(), v.origin.y(), v.origin.z()}},
              {"dtype", "u8"},
              {"label_mode", v.label_mode},
              {"byte_order", "little"},
              {"voxel_order", "x-fastest"},
              {"data_file", data_file}};
}

std::string volume_payload(const Volume& v) {
  return std::string(reinterpret_cast<const char*>(v.voxels.data()), v.voxels.size());
}

Volume read_volume(const fs::path& sidecar) {
  json j;
  try {
    j = json::parse(read_file(sidecar));
  } catch (const json::exception& e) {
    throw IoError(sidecar.string() + ": invalid JSON: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kVolumeFormat) {
      throw InvalidArgument("not a carotid3d volume sidecar");
    }
    if (j.at("dtype").get<std::string>() != "u8") throw InvalidArgument("unsupported dtype");
    const auto dims = j.at("dims").get<std::array<int, 3>>();
    const auto origin = j.at("origin_mm").get<std::array<double, 3>>();
    Volume v = Volume::make(Eigen::Vector3d(origin[0], origin[1], origin[2]),
                            j.at("spacing_mm").get<double>(), dims, j.at("label_mode").get<bool>());
    const fs::path data = sidecar.parent_path() / j.at("data_file").get<std::string>();
    const std::string payload = read_file(data);
    if (payload.size() != v.size()) {
      throw IoError(data.string() + ": expected " + std::to_string(v.size()) + " bytes, found " +
                    std::to_string(payload.size()));
    }
    std::copy(payload.begin(), payload.end(), reinterpret_cast<char*>(v.voxels.data()));
    std::fill(v.fill_mask.begin(), v.fill_mask.end(), std::uint8_t{1});
    if (v.label_mode) {
      for (auto value : v.voxels) {
        if (value > kLumen) throw InvalidArgument("label volume holds a value outside {0,1,2}");
      }
    }
    return v;
  } catch (const json::exception& e) {
    throw IoError(sidecar.string() + ": malformed sidecar: " + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(sidecar.string() + ": " + e.what());
  }
}

PhantomSpec phantom_spec_from_json(const json& j) {
  try {
    if (!j.is_object()) throw InvalidArgument("phantom spec must be a JSON object");
    reject_unknown(j,
                   {"length_mm", "mab_radius_mm", "lib_radius_mm", "lumen_offset_mm", "bump",
                    "intensity", "pixel_noise_sigma", "seed", "frame", "n_frames",
                    "frame_pitch_mm", "tilt_deg", "frame_rate_hz"},
                   "phantom spec");
    PhantomSpec s;
    s.length_mm = get_or(j, "length_mm", s.length_mm);
    s.mab_radius_mm = get_or(j, "mab_radius_mm", s.mab_radius_mm);
    s.lib_radius_mm = get_or(j, "lib_radius_mm", s.lib_radius_mm);
    s.lumen_offset_mm = get_or(j, "lumen_offset_mm", s.lumen_offset_mm);
    if (j.contains("bump") && !j.at("bump").is_null()) {
      const json& b = j.at("bump");
      reject_unknown(b, {"center_mm", "length_mm", "depth_mm", "grade"}, "phantom spec bump");
      Bump bump;
      bump.center_mm = get_or(b, "center_mm", 0.5 * s.length_mm);
      bump.length_mm = get_or(b, "length_mm", bump.length_mm);
      if (b.contains("depth_mm") == b.contains("grade")) {
        throw InvalidArgument("phantom spec bump needs exactly one of depth_mm or grade");
      }
      if (b.contains("grade")) {
        if (s.lumen_offset_mm != 0.0) {
          throw InvalidArgument("bump grade requires a concentric lumen (lumen_offset_mm = 0)");
        }
        bump.depth_mm = bump_depth_for_grade(s.mab_radius_mm, s.lib_radius_mm, b.at("grade").get<double>());
      } else {
        bump.depth_mm = b.at("depth_mm").get<double>();
      }
      s.bump = bump;
    }
    if (j.contains("intensity")) {
      const json& in = j.at("intensity");
      reject_unknown(in, {"wall", "lumen", "background"}, "phantom spec intensity");
      s.wall_intensity = get_or<std::uint8_t>(in, "wall", s.wall_intensity);
      s.lumen_intensity = get_or<std::uint8_t>(in, "lumen", s.lumen_intensity);
      s.background_intensity = get_or<std::uint8_t>(in, "background", s.background_intensity);
    }
    s.pixel_noise_sigma = get_or(j, "pixel_noise_sigma", s.pixel_noise_sigma);
    s.seed = get_or(j, "seed", s.seed);
    if (j.contains("frame")) {
      const json& f = j.at("frame");
      reject_unknown(f, {"width", "height", "pixel_spacing_mm"}, "phantom spec frame");
      s.frame_width = get_or(f, "width", s.frame_width);
      s.frame_height = get_or(f, "height", s.frame_height);
      s.pixel_spacing_mm = get_or(f, "pixel_spacing_mm", s.pixel_spacing_mm);
    }
    s.n_frames = get_or(j, "n_frames", s.n_frames);
    s.frame_pitch_mm = get_or(j, "frame_pitch_mm", s.frame_pitch_mm);
    s.tilt_deg = get_or(j, "tilt_deg", s.tilt_deg);
    s.frame_rate_hz = get_or(j, "frame_rate_hz", s.frame_rate_hz);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("phantom spec: ") + e.what());
  }
}

json phantom_spec_to_json(const PhantomSpec& s) {
  json j{{"length_mm", s.length_mm},
         {"mab_radius_mm", s.mab_radius_mm},
         {"lib_radius_mm", s.lib_radius_mm},
         {"lumen_offset_mm", s.lumen_offset_mm},
         {"bump", nullptr},
         {"intensity",
          {{"wall", s.wall_intensity}, {"lumen", s.lumen_intensity}, {"background", s.background_intensity}}},
         {"pixel_noise_sigma", s.pixel_noise_sigma},
         {"seed", s.seed},
         {"frame", {{"width", s.frame_width}, {"height", s.frame_height}, {"pixel_spacing_mm", s.pixel_spacing_mm}}},
         {"n_frames", s.n_frames},
         {"frame_pitch_mm", s.frame_pitch_mm},
         {"tilt_deg", s.tilt_deg},
         {"frame_rate_hz", s.frame_rate_hz}};
  if (s.bump) {
    j["bump"] = {{"center_mm", s.bump->center_mm},
                 {"length_mm", s.bump->length_mm},
                 {"depth_mm", s.bump->depth_mm}};
  }
  return j;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place: " + path.string());
  }
}

void OutputStage::add(const std::string& relative_path, std::string bytes) {
  if (!files_.emplace(relative_path, std::move(bytes)).second) {
    throw InvalidArgument("output file staged twice: " + relative_path);
  }
}

void OutputStage::add_json(const std::string& relative_path, const json& j) {
  add(relative_path, dump_json(j));
}

void OutputStage::commit() const {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create output directory " + dir_.string());
  for (const auto& [name, bytes] : files_) {
    const fs::path target = dir_ / name;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + target.parent_path().string());
    write_file_atomic(target, bytes);
  }
}

}  // namespace carotid::io
