#pragma once

// On-disk formats.
//
//   Pose CSV     header "frame_id,tx,ty,tz,qw,qx,qy,qz,t", one row per frame,
//                comma separated, LF line endings; mm, unit quaternion, seconds.
//   Centroid CSV header "frame_id,cx,cy,cz"; world mm.
//   PGM          binary P5, maxval 255; an optional header comment
//                "# pixel_spacing_mm <value>" carries the in-plane spacing.
//   Label PGM    P5 with palette 0 background, 128 wall, 255 lumen.
//   Volume       <name>.raw (u8, x fastest, then y, then z) plus <name>.json
//                sidecar {format, version, dims, spacing_mm, origin_mm, dtype,
//                label_mode, byte_order, data_file}.
//   Phantom spec JSON object; see phantom_spec_from_json for the keys.
//   Flag list   one per-slice plaque flag per line (0/1/false/true).

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "carotid3d/phantom.hpp"
#include "carotid3d/pose.hpp"
#include "carotid3d/raster.hpp"
#include "carotid3d/recon.hpp"

namespace carotid::io {

inline constexpr int kFormatVersion = 1;

std::string read_file(const std::filesystem::path& path);

// ---- PGM -------------------------------------------------------------------

struct PgmImage {
  Raster<std::uint8_t> pixels;
  std::optional<double> pixel_spacing_mm;
};

std::string encode_pgm(const Raster<std::uint8_t>& pixels,
                       std::optional<double> pixel_spacing_mm = std::nullopt);
PgmImage decode_pgm(std::string_view bytes);
PgmImage read_pgm(const std::filesystem::path& path);

/// Labels {0,1,2} to palette {0,128,255} and back. decode throws
/// InvalidArgument on any other grey value.
Raster<std::uint8_t> labels_to_palette(const LabelRaster& labels);
LabelRaster palette_to_labels(const Raster<std::uint8_t>& palette);

// ---- Pose and centroid CSV ---------------------------------------------------

struct PoseRecord {
  std::int64_t frame_id = 0;
  Pose pose;
  double t = 0.0;
};

struct PoseCsv {
  std::vector<PoseRecord> rows;
  std::vector<std::string> warnings;  // e.g. renormalized quaternions
};

std::string format_pose_csv(std::span<const PoseRecord> rows);
/// Throws InvalidArgument naming the offending line.
PoseCsv parse_pose_csv(std::string_view text);

struct CentroidRecord {
  std::int64_t frame_id = 0;
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
};

std::string format_centroid_csv(std::span<const CentroidRecord> rows);
std::vector<CentroidRecord> parse_centroid_csv(std::string_view text);

/// Two numeric columns with a header row; used for paired series.
std::pair<std::vector<double>, std::vector<double>> parse_series_csv(std::string_view text);

/// Per-slice plaque flags from an external classifier: one value per line,
/// 0 / 1 / false / true. Blank lines are skipped.
std::vector<bool> parse_flag_list(std::string_view text);

// ---- Volume ------------------------------------------------------------------

/// Sidecar for a payload stored next to it as `data_file`.
nlohmann::json volume_sidecar(const Volume& v, const std::string& data_file);
std::string volume_payload(const Volume& v);
/// Reads the sidecar and its payload. The fill mask is set to all ones.
Volume read_volume(const std::filesystem::path& sidecar);

// ---- Phantom spec --------------------------------------------------------------

PhantomSpec phantom_spec_from_json(const nlohmann::json& j);
nlohmann::json phantom_spec_to_json(const PhantomSpec& spec);

// ---- Output staging ------------------------------------------------------------

/// Lowercase hex SHA-256 of bytes.
std::string sha256_hex(std::string_view bytes);

/// Collects output files in memory and writes them only on commit(), so a
/// failing command leaves no partial outputs. Each file is first written to
/// a temporary name and then renamed into place.
class OutputStage {
 public:
  explicit OutputStage(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& relative_path, std::string bytes);
  void add_json(const std::string& relative_path, const nlohmann::json& j);
  [[nodiscard]] const std::map<std::string, std::string>& files() const { return files_; }

  void commit() const;

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> files_;
};

/// Writes one file via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Deterministic JSON text: 2-space indent, trailing newline.
std::string dump_json(const nlohmann::json& j);

}  // namespace carotid::io
