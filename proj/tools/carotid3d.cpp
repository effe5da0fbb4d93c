// carotid3d: command-line pipeline for freehand 3D carotid ultrasound.
//
//   simulate     phantom sweep -> frames/, masks/, poses.csv, poses_gt.csv, centroids.csv
//   regularize   poses.csv (+ centroids) -> poses_reg.csv
//   reconstruct  frames or masks + poses -> volume.raw + volume.json
//   cut          intensity + label volume -> longitudinal PGMs + cut.json
//   measure      label volume -> report.json
//   diagnose     label volume -> diagnosis.json
//   evaluate     masks / series / counts -> metrics.json
//
// Every command writes manifest.json next to its outputs. Outputs are staged
// in memory and written only once the command has succeeded.
//
// Exit codes: 0 success, 1 computation-domain failure, 2 I/O or argument error.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <tuple>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "carotid3d/analysis.hpp"
#include "carotid3d/error.hpp"
#include "carotid3d/io.hpp"
#include "carotid3d/metrics.hpp"
#include "carotid3d/phantom.hpp"
#include "carotid3d/recon.hpp"
#include "carotid3d/regularization.hpp"
#include "carotid3d/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace carotid;

namespace {

// ---- manifest ---------------------------------------------------------------

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}

  void input_file(const std::string& role, const fs::path& path) {
    inputs_.push_back({{"role", role}, {"path", path.generic_string()},
                       {"sha256", io::sha256_hex(io::read_file(path))}});
  }

  // One digest over "name sha256\n" lines of the listed files.
  void input_dir(const std::string& role, const fs::path& dir, const std::vector<fs::path>& files) {
    std::string listing;
    for (const auto& f : files) {
      listing += f.filename().string() + " " + io::sha256_hex(io::read_file(f)) + "\n";
    }
    inputs_.push_back({{"role", role}, {"path", dir.generic_string()},
                       {"files", files.size()}, {"sha256", io::sha256_hex(listing)}});
  }

  json config = json::object();

  [[nodiscard]] json to_json() const {
    return {{"tool", "carotid3d"},
            {"version", kVersion},
            {"format_version", io::kFormatVersion},
            {"command", command_},
            {"config", config},
            {"inputs", inputs_}};
  }

 private:
  std::string command_;
  json inputs_ = json::array();
};

void commit(io::OutputStage& stage, const Manifest& manifest) {
  stage.add_json("manifest.json", manifest.to_json());
  stage.commit();
}

// ---- inputs -----------------------------------------------------------------

json read_json(const fs::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw InvalidArgument(path.string() + ": invalid JSON: " + e.what());
  }
}

io::PoseCsv read_poses(const fs::path& path) {
  auto text = io::read_file(path);
  try {
    auto csv = io::parse_pose_csv(text);
    for (const auto& w : csv.warnings) std::cerr << path.string() << ": " << w << "\n";
    return csv;
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

// frame id = last run of digits in the file stem.
std::optional<std::int64_t> frame_id_of(const fs::path& p) {
  const std::string stem = p.stem().string();
  auto end = stem.find_last_of("0123456789");
  if (end == std::string::npos) return std::nullopt;
  auto begin = stem.find_last_not_of("0123456789", end);
  begin = begin == std::string::npos ? 0 : begin + 1;
  std::int64_t id = 0;
  auto [ptr, ec] = std::from_chars(stem.data() + begin, stem.data() + end + 1, id);
  if (ec != std::errc{}) return std::nullopt;
  return id;
}

std::vector<fs::path> list_pgm(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .pgm files in " + dir.string());
  return files;
}

std::map<std::int64_t, fs::path> index_by_frame_id(const std::vector<fs::path>& files) {
  std::map<std::int64_t, fs::path> out;
  for (const auto& f : files) {
    const auto id = frame_id_of(f);
    if (!id) throw InvalidArgument(f.string() + ": file name carries no frame id");
    if (!out.emplace(*id, f).second) throw InvalidArgument("two files share frame id " + std::to_string(*id));
  }
  return out;
}

// Images paired with pose rows by frame id. Pixel spacing comes from the PGM
// header comment or, failing that, from the fallback.
struct PairedFrames {
  std::vector<io::PgmImage> images;
  std::vector<fs::path> files;
  double pixel_spacing = 0.0;
};

PairedFrames pair_frames(const fs::path& dir, const std::vector<io::PoseRecord>& rows,
                         std::optional<double> spacing_fallback) {
  const auto files = list_pgm(dir);
  const auto by_id = index_by_frame_id(files);
  if (by_id.size() != rows.size()) {
    throw InvalidArgument(std::to_string(by_id.size()) + " images in " + dir.string() + " but " +
                          std::to_string(rows.size()) + " pose rows");
  }
  PairedFrames out;
  std::optional<double> spacing;
  for (const auto& row : rows) {
    const auto it = by_id.find(row.frame_id);
    if (it == by_id.end()) throw InvalidArgument("no image for frame id " + std::to_string(row.frame_id));
    auto img = io::read_pgm(it->second);
    const double s = img.pixel_spacing_mm ? *img.pixel_spacing_mm
                     : spacing_fallback   ? *spacing_fallback
                                          : throw InvalidArgument(it->second.string() +
                                                                  ": no pixel spacing; pass --pixel-spacing");
    if (spacing && std::abs(*spacing - s) > 1e-12) {
      throw InvalidArgument("frames disagree on pixel spacing");
    }
    spacing = s;
    out.files.push_back(it->second);
    out.images.push_back(std::move(img));
  }
  out.pixel_spacing = *spacing;
  return out;
}

Volume read_volume_checked(const fs::path& sidecar) {
  try {
    return io::read_volume(sidecar);
  } catch (const InvalidArgument& e) {
    throw IoError(e.what());
  }
}

void require_label_volume(const Volume& v, const fs::path& path) {
  if (!v.label_mode) throw InvalidArgument(path.string() + " is not a label volume");
}

std::vector<double> parse_angles(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::string field = text.substr(start, end - start);
    field.erase(0, field.find_first_not_of(" \t"));
    field.erase(field.find_last_not_of(" \t") + 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
      throw InvalidArgument("bad angle '" + field + "' in --angles");
    }
    if (!(v >= -90.0 && v < 90.0)) {
      throw InvalidArgument("angle " + field + " outside [-90, 90)");
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

std::string angle_tag(double deg) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), deg);
  (void)ec;
  std::string s(buf.data(), end);
  if (deg >= 0.0 && s.front() != '-') s = "+" + s;
  if (s == "-0") s = "+0";
  return s;
}

json optional_array(const std::vector<std::optional<double>>& values) {
  json out = json::array();
  for (const auto& v : values) out.push_back(v ? json(*v) : json(nullptr));
  return out;
}

json run_json(const PlaqueRun& r) {
  return {{"first_slice", r.first_slice}, {"last_slice", r.last_slice},
          {"length_mm", r.length_mm}, {"thickness_mm", r.thickness_mm}};
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string spec;
  std::string out;
  double sigma_trans = 0.0;
  double sigma_rot = 0.0;
  std::optional<std::size_t> fallback_start;
  std::size_t fallback_length = 5;
  std::uint64_t seed = 0;
};

int run_simulate(const SimulateArgs& a) {
  const fs::path spec_path = a.spec;
  const PhantomSpec spec = io::phantom_spec_from_json(read_json(spec_path));
  NoiseSpec noise;
  noise.sigma_trans = a.sigma_trans;
  noise.sigma_rot = a.sigma_rot;
  noise.seed = a.seed;
  if (a.fallback_start) noise.fallback = Fallback{*a.fallback_start, a.fallback_length};
  noise.validate(static_cast<std::size_t>(spec.n_frames));

  const Sweep sweep = perturb_sweep(generate_sweep(spec), noise);
  const std::size_t n = sweep.seq.size();

  std::vector<Mask> mab;
  for (const auto& m : sweep.masks) mab.push_back(m.mab);
  const auto centroids = world_centroids(mab, sweep.seq.poses, spec.pixel_spacing_mm);

  io::OutputStage stage(a.out);
  std::vector<io::PoseRecord> poses, truth;
  std::vector<io::CentroidRecord> cents;
  char name[64];
  for (std::size_t k = 0; k < n; ++k) {
    const auto id = static_cast<std::int64_t>(k);
    std::snprintf(name, sizeof name, "frames/frame_%05zu.pgm", k);
    stage.add(name, io::encode_pgm(sweep.seq.frames[k].pixels, spec.pixel_spacing_mm));
    std::snprintf(name, sizeof name, "masks/mask_%05zu.pgm", k);
    stage.add(name, io::encode_pgm(io::labels_to_palette(to_labels(sweep.masks[k])), spec.pixel_spacing_mm));
    poses.push_back({id, sweep.seq.poses[k], sweep.seq.timestamps[k]});
    truth.push_back({id, sweep.ground_truth[k], sweep.seq.timestamps[k]});
    cents.push_back({id, centroids[k]});
  }
  stage.add("poses.csv", io::format_pose_csv(poses));
  stage.add("poses_gt.csv", io::format_pose_csv(truth));
  stage.add("centroids.csv", io::format_centroid_csv(cents));

  Manifest manifest("simulate");
  manifest.input_file("spec", spec_path);
  manifest.config = {{"spec", io::phantom_spec_to_json(spec)},
                     {"sigma_trans", a.sigma_trans},
                     {"sigma_rot", a.sigma_rot},
                     {"fallback", noise.fallback ? json{{"start", noise.fallback->start},
                                                        {"length", noise.fallback->length}}
                                                 : json(nullptr)},
                     {"seed", a.seed},
                     {"designed_grade", spec.designed_grade()}};
  commit(stage, manifest);
  std::cout << "wrote " << n << " frames to " << a.out << "\n";
  return 0;
}

// ---- regularize -------------------------------------------------------------

struct RegularizeArgs {
  std::string poses;
  std::string centroids;
  std::string masks;
  std::string out;
  RegConfig cfg;
  bool rerank = false;
};

int run_regularize(RegularizeArgs a) {
  Manifest manifest("regularize");
  const fs::path poses_path = a.poses;
  auto rows = read_poses(poses_path).rows;
  manifest.input_file("poses", poses_path);
  if (a.cfg.alpha != 0.0) a.cfg.validate();

  std::vector<std::size_t> permutation(rows.size());
  std::iota(permutation.begin(), permutation.end(), std::size_t{0});
  if (a.rerank) {
    std::vector<Eigen::Vector3d> centroids;
    if (!a.centroids.empty()) {
      manifest.input_file("centroids", a.centroids);
      std::map<std::int64_t, Eigen::Vector3d> by_id;
      for (const auto& c : io::parse_centroid_csv(io::read_file(a.centroids))) by_id[c.frame_id] = c.c;
      for (const auto& r : rows) {
        const auto it = by_id.find(r.frame_id);
        if (it == by_id.end()) throw InvalidArgument("no centroid for frame id " + std::to_string(r.frame_id));
        centroids.push_back(it->second);
      }
    } else if (!a.masks.empty()) {
      const auto paired = pair_frames(a.masks, rows, std::nullopt);
      manifest.input_dir("masks", a.masks, paired.files);
      std::vector<Mask> mab;
      std::vector<Pose> poses;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        mab.push_back(from_labels(io::palette_to_labels(paired.images[k].pixels)).mab);
        poses.push_back(rows[k].pose);
      }
      centroids = world_centroids(mab, poses, paired.pixel_spacing);
    } else {
      throw InvalidArgument("--rerank needs --centroids or --masks");
    }
    permutation = rerank(centroids).permutation;
  }
  rows = apply_permutation<io::PoseRecord>(rows, permutation);

  PoseSequence noisy;
  for (const auto& r : rows) noisy.push_back(r.pose);
  DenoiseResult result;
  if (a.cfg.alpha == 0.0) {
    // Without coupling the data term alone is minimized by the input.
    const double e = data_term(noisy, noisy, a.cfg.weights);
    result = {noisy, e, e, 0};
  } else if (noisy.size() < 2) {
    throw InvalidArgument("need at least two poses to regularize");
  } else {
    result = cppa_denoise(noisy, a.cfg);
  }
  for (std::size_t k = 0; k < rows.size(); ++k) rows[k].pose = result.poses[k];

  io::OutputStage stage(a.out);
  stage.add("poses_reg.csv", io::format_pose_csv(rows));
  json order = json::array();
  for (const auto& r : rows) order.push_back(r.frame_id);
  stage.add_json("regularize.json", {{"initial_objective", result.initial_objective},
                                     {"final_objective", result.final_objective},
                                     {"cycles", result.cycles},
                                     {"frame_order", order}});
  manifest.config = {{"alpha", a.cfg.alpha},   {"lambda0", a.cfg.lambda0},
                     {"cycles", a.cfg.n_cycles}, {"tol", a.cfg.tol},
                     {"w_trans", a.cfg.weights.w_trans}, {"w_rot", a.cfg.weights.w_rot},
                     {"rerank", a.rerank}};
  commit(stage, manifest);
  std::printf("initial objective %.10g\nfinal objective %.10g\ncycles %d\n", result.initial_objective,
              result.final_objective, result.cycles);
  return 0;
}

// ---- reconstruct ------------------------------------------------------------

struct ReconstructArgs {
  std::string frames;
  std::string poses;
  std::string out;
  std::string mode = "intensity";
  std::string name = "volume";
  double voxel = 0.2;
  int hole_radius = 3;
  bool pseudo = false;
  std::optional<double> pixel_spacing;
};

int run_reconstruct(const ReconstructArgs& a) {
  if (a.mode != "intensity" && a.mode != "label") throw InvalidArgument("--mode must be intensity or label");
  const bool label = a.mode == "label";
  Manifest manifest("reconstruct");
  const auto rows = read_poses(a.poses).rows;
  manifest.input_file("poses", a.poses);
  auto paired = pair_frames(a.frames, rows, a.pixel_spacing);
  manifest.input_dir("frames", a.frames, paired.files);

  ReconConfig cfg;
  cfg.spacing = a.voxel;
  cfg.hole_fill_radius = a.hole_radius;
  cfg.label_mode = label;
  cfg.validate();

  FrameSequence seq;
  seq.frame_rate = 24.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    Raster<std::uint8_t> px = paired.images[k].pixels;
    if (label) px = io::palette_to_labels(px);
    seq.frames.push_back({std::move(px), paired.pixel_spacing});
    seq.poses.push_back(rows[k].pose);
    seq.timestamps.push_back(rows[k].t);
  }
  seq.validate();
  const Volume vol = a.pseudo ? stack_pseudo_volume(seq, cfg) : reconstruct(seq, cfg);

  io::OutputStage stage(a.out);
  stage.add(a.name + ".raw", io::volume_payload(vol));
  stage.add_json(a.name + ".json", io::volume_sidecar(vol, a.name + ".raw"));
  manifest.config = {{"voxel_mm", a.voxel}, {"mode", a.mode}, {"pseudo", a.pseudo},
                     {"hole_fill_radius", a.hole_radius}, {"pixel_spacing_mm", paired.pixel_spacing}};
  commit(stage, manifest);
  std::printf("dims %d %d %d, filled fraction %.6f\n", vol.dims[0], vol.dims[1], vol.dims[2],
              vol.filled_fraction());
  return 0;
}

// ---- cut --------------------------------------------------------------------

struct CutArgs {
  std::string volume;
  std::string labels;
  std::string out;
  std::string angles = "0,15,-15,30,-30";
  double extent = 20.0;
};

int run_cut(const CutArgs& a) {
  const auto angles = parse_angles(a.angles);
  const Volume vol = read_volume_checked(a.volume);
  const Volume labels = read_volume_checked(a.labels);
  require_label_volume(labels, a.labels);
  if (!vol.same_grid(labels)) throw InvalidArgument("intensity and label volumes are not aligned");

  const CentroidPath path = centroid_path(labels);
  io::OutputStage stage(a.out);
  json files = json::array();
  for (double theta : angles) {
    const auto cut = cut_longitudinal(vol, path, theta, a.extent, vol.spacing);
    const std::string file = "cut_" + angle_tag(theta) + ".pgm";
    stage.add(file, io::encode_pgm(cut.image, cut.row_pixel_mm));
    files.push_back({{"angle_deg", theta}, {"file", file}});
  }
  json columns = json::array();
  for (std::size_t k = 0; k < path.size(); ++k) {
    const auto& p = path.points[k];
    columns.push_back(path.valid[k] ? json{p.x(), p.y(), p.z()} : json(nullptr));
  }
  stage.add_json("cut.json", {{"cuts", files},
                              {"column_pixel_mm", vol.spacing},
                              {"row_pixel_mm", vol.spacing},
                              {"extent_mm", a.extent},
                              {"centroids_mm", columns}});
  Manifest manifest("cut");
  manifest.input_file("volume", a.volume);
  manifest.input_file("labels", a.labels);
  manifest.config = {{"angles_deg", angles}, {"extent_mm", a.extent}};
  commit(stage, manifest);
  return 0;
}

// ---- measure / diagnose -------------------------------------------------------

struct MeasureArgs {
  std::string labels;
  std::string flags;  // diagnose only: external per-slice flags instead of a volume
  std::string out;
  double threshold = 1.5;
  std::size_t run_length = 5;
};

int run_diagnose_flags(const MeasureArgs& a) {
  if (a.run_length < 1) throw InvalidArgument("--run-length must be >= 1");
  const auto flags = io::parse_flag_list(io::read_file(a.flags));
  const auto diagnosis = scan_diagnosis(flags, a.run_length);
  io::OutputStage stage(a.out);
  stage.add_json("diagnosis.json", {{"per_slice_flags", flags}, {"diseased", diagnosis.diseased}});
  Manifest manifest("diagnose");
  manifest.input_file("flags", a.flags);
  manifest.config = {{"run_length", a.run_length}};
  commit(stage, manifest);
  std::printf("diseased %s\n", diagnosis.diseased ? "true" : "false");
  return 0;
}

int run_measure(const MeasureArgs& a, bool diagnose_only) {
  if (diagnose_only && !a.flags.empty()) {
    if (!a.labels.empty()) throw InvalidArgument("give either a label volume or --flags, not both");
    return run_diagnose_flags(a);
  }
  if (a.labels.empty()) throw InvalidArgument("a label volume is required");
  const Volume labels = read_volume_checked(a.labels);
  require_label_volume(labels, a.labels);
  if (a.run_length < 1) throw InvalidArgument("--run-length must be >= 1");

  const auto profiles = thickness_profiles(labels);
  const auto flags = detect_plaque_slices(profiles, a.threshold);
  const auto diagnosis = scan_diagnosis(flags, a.run_length);

  json out;
  out["slice_spacing_mm"] = labels.spacing;
  out["per_slice_flags"] = flags;
  out["diseased"] = diagnosis.diseased;
  if (!diagnose_only) {
    const auto report = stenosis_grade(labels);
    const auto plaque = plaque_size(flags, profiles, labels.spacing);
    std::vector<std::optional<double>> max_thickness;
    for (const auto& p : profiles) {
      max_thickness.push_back(p.empty() ? std::nullopt
                                        : std::optional(*std::max_element(p.begin(), p.end())));
    }
    json runs = json::array();
    for (const auto& r : plaque.runs) runs.push_back(run_json(r));
    out["per_slice_stenosis"] = optional_array(report.per_slice);
    out["grade"] = report.grade;
    out["grade_slice"] = report.argmax_slice;
    out["grade_angle_deg"] = report.argmax_angle_deg;
    out["bifurcation_slices"] = report.bifurcation_slices;
    out["per_slice_max_thickness_mm"] = optional_array(max_thickness);
    out["plaque_length_mm"] = plaque.length_mm;
    out["plaque_thickness_mm"] = plaque.thickness_mm;
    out["plaque_runs"] = runs;
  }

  io::OutputStage stage(a.out);
  stage.add_json(diagnose_only ? "diagnosis.json" : "report.json", out);
  Manifest manifest(diagnose_only ? "diagnose" : "measure");
  manifest.input_file("labels", a.labels);
  manifest.config = {{"threshold_mm", a.threshold}, {"run_length", a.run_length}};
  commit(stage, manifest);
  if (!diagnose_only) std::printf("grade %.4f\n", out["grade"].get<double>());
  std::printf("diseased %s\n", diagnosis.diseased ? "true" : "false");
  return 0;
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string pred;
  std::string gt;
  std::string series;
  std::string counts;
  std::string out;
};

json mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {{"mean", nullptr}, {"sd", nullptr}, {"n", 0}};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {{"mean", mean}, {"sd", std::sqrt(var / double(v.size()))}, {"n", v.size()}};
}

// HD95 between two masks; 0 when both are empty, undefined when one is.
std::optional<double> mask_hd95(const Mask& p, const Mask& g, double spacing) {
  const auto bp = boundary_points(p, spacing);
  const auto bg = boundary_points(g, spacing);
  if (bp.empty() && bg.empty()) return 0.0;
  if (bp.empty() || bg.empty()) return std::nullopt;
  return hd95(bp, bg);
}

json evaluate_masks(const EvaluateArgs& a, Manifest& manifest) {
  const auto pred_files = list_pgm(a.pred);
  const auto gt_files = list_pgm(a.gt);
  std::map<std::string, fs::path> gt_by_name;
  for (const auto& f : gt_files) gt_by_name[f.filename().string()] = f;
  if (pred_files.size() != gt_files.size()) throw InvalidArgument("prediction and reference file lists differ");
  for (const auto& f : pred_files) {
    if (!gt_by_name.count(f.filename().string())) {
      throw InvalidArgument("no reference mask for " + f.filename().string());
    }
  }
  manifest.input_dir("pred", a.pred, pred_files);
  manifest.input_dir("gt", a.gt, gt_files);

  json frames = json::array();
  std::map<std::string, std::vector<double>> dsc_of, hd_of;
  std::string unit = "mm";
  for (const auto& f : pred_files) {
    const auto p = io::read_pgm(f);
    const auto g = io::read_pgm(gt_by_name[f.filename().string()]);
    if (!p.pixels.same_shape(g.pixels)) throw InvalidArgument(f.filename().string() + ": size mismatch");
    const double spacing = g.pixel_spacing_mm.value_or(1.0);
    if (!g.pixel_spacing_mm) unit = "px";
    const auto pm = from_labels(io::palette_to_labels(p.pixels));
    const auto gm = from_labels(io::palette_to_labels(g.pixels));
    json row{{"file", f.filename().string()}};
    for (const auto& [key, pmask, gmask] :
         {std::tuple{"mab", &pm.mab, &gm.mab}, std::tuple{"lib", &pm.lib, &gm.lib}}) {
      const double d = dsc(*pmask, *gmask);
      const auto h = mask_hd95(*pmask, *gmask, spacing);
      dsc_of[key].push_back(d);
      if (h) hd_of[key].push_back(*h);
      row[key] = {{"dsc", d}, {"hd95", h ? json(*h) : json(nullptr)}};
    }
    frames.push_back(row);
  }
  json summary;
  for (const char* key : {"mab", "lib"}) {
    summary[key] = {{"dsc", mean_sd(dsc_of[key])}, {"hd95", mean_sd(hd_of[key])}};
  }
  return {{"mode", "masks"}, {"hd95_unit", unit}, {"frames", frames}, {"summary", summary}};
}

json evaluate_series(const EvaluateArgs& a, Manifest& manifest) {
  manifest.input_file("series", a.series);
  const auto [x, y] = io::parse_series_csv(io::read_file(a.series));
  const auto diff = mad(x, y);
  json out{{"mode", "series"}, {"n", x.size()}, {"mad", diff.mad}, {"mad_sd", diff.sd}};
  try {
    out["pearson"] = pearson(x, y);
    out["error"] = nullptr;
  } catch (const DomainError& e) {
    out["pearson"] = nullptr;
    out["error"] = e.what();
  }
  return out;
}

json evaluate_counts(const EvaluateArgs& a) {
  std::vector<std::int64_t> v;
  std::size_t start = 0;
  while (start <= a.counts.size()) {
    auto end = a.counts.find(',', start);
    if (end == std::string::npos) end = a.counts.size();
    const std::string field = a.counts.substr(start, end - start);
    std::int64_t n = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), n);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
      throw InvalidArgument("bad count '" + field + "' in --counts");
    }
    v.push_back(n);
    start = end + 1;
  }
  if (v.size() != 4) throw InvalidArgument("--counts takes tp,fn,fp,tn");
  const Contingency c{v[0], v[1], v[2], v[3]};
  const auto r = classification_rates(c);
  return {{"mode", "counts"},
          {"counts", {{"tp", c.tp}, {"fn", c.fn}, {"fp", c.fp}, {"tn", c.tn}}},
          {"sensitivity", r.sensitivity},
          {"specificity", r.specificity},
          {"accuracy", r.accuracy}};
}

int run_evaluate(const EvaluateArgs& a) {
  const int modes = int(!a.pred.empty() || !a.gt.empty()) + int(!a.series.empty()) + int(!a.counts.empty());
  if (modes != 1) throw InvalidArgument("give exactly one of --pred/--gt, --series or --counts");
  Manifest manifest("evaluate");
  json out;
  if (!a.series.empty()) {
    out = evaluate_series(a, manifest);
  } else if (!a.counts.empty()) {
    out = evaluate_counts(a);
    manifest.config = {{"counts", a.counts}};
  } else {
    if (a.pred.empty() || a.gt.empty()) throw InvalidArgument("--pred and --gt go together");
    out = evaluate_masks(a, manifest);
  }
  io::OutputStage stage(a.out);
  stage.add_json("metrics.json", out);
  commit(stage, manifest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Freehand 3D carotid ultrasound: reconstruction and plaque quantification"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a phantom sweep");
  simulate->add_option("spec", sim.spec, "Phantom spec JSON")->required();
  simulate->add_option("-o,--out", sim.out, "Output directory")->required();
  simulate->add_option("--sigma-trans", sim.sigma_trans, "Pose translation noise, mm per axis");
  simulate->add_option("--sigma-rot", sim.sigma_rot, "Pose rotation noise, rad per axis");
  simulate->add_option("--fallback-start", sim.fallback_start, "First frame of a reversed run");
  simulate->add_option("--fallback-length", sim.fallback_length, "Length of the reversed run");
  simulate->add_option("--seed", sim.seed, "Pose noise seed");

  RegularizeArgs reg;
  auto* regularize = app.add_subcommand("regularize", "Re-rank and TV-denoise a pose sequence");
  regularize->add_option("poses", reg.poses, "Pose CSV")->required();
  regularize->add_option("-o,--out", reg.out, "Output directory")->required();
  regularize->add_option("--centroids", reg.centroids, "Centroid CSV for --rerank");
  regularize->add_option("--masks", reg.masks, "Label mask directory for --rerank");
  regularize->add_flag("--rerank", reg.rerank, "Re-order frames by centroid projection first");
  regularize->add_option("--alpha", reg.cfg.alpha, "Smoothness weight (0 disables denoising)");
  regularize->add_option("--lambda0", reg.cfg.lambda0, "Initial proximal step");
  regularize->add_option("--cycles", reg.cfg.n_cycles, "Maximum CPPA cycles");
  regularize->add_option("--tol", reg.cfg.tol, "Relative objective tolerance");
  regularize->add_option("--w-trans", reg.cfg.weights.w_trans, "Metric weight of translation");
  regularize->add_option("--w-rot", reg.cfg.weights.w_rot, "Metric weight of rotation");

  ReconstructArgs rec;
  auto* recon = app.add_subcommand("reconstruct", "Forward-map posed frames into a volume");
  recon->add_option("frames", rec.frames, "Directory of PGM frames (or label masks)")->required();
  recon->add_option("poses", rec.poses, "Pose CSV")->required();
  recon->add_option("-o,--out", rec.out, "Output directory")->required();
  recon->add_option("--voxel", rec.voxel, "Voxel size, mm");
  recon->add_option("--mode", rec.mode, "intensity or label");
  recon->add_option("--hole-radius", rec.hole_radius, "Hole-fill radius, voxels");
  recon->add_option("--name", rec.name, "Output file stem");
  recon->add_option("--pixel-spacing", rec.pixel_spacing, "Pixel spacing when the PGMs carry none");
  recon->add_flag("--pseudo", rec.pseudo, "Stack frames as parallel slabs instead");

  CutArgs cutargs;
  auto* cut = app.add_subcommand("cut", "Longitudinal cuts through the vessel centre line");
  cut->add_option("volume", cutargs.volume, "Intensity volume sidecar")->required();
  cut->add_option("labels", cutargs.labels, "Label volume sidecar")->required();
  cut->add_option("-o,--out", cutargs.out, "Output directory")->required();
  cut->add_option("--angles", cutargs.angles, "Comma-separated angles in degrees, [-90, 90)");
  cut->add_option("--extent", cutargs.extent, "Half length of each cut line, mm");

  MeasureArgs meas;
  auto* measure = app.add_subcommand("measure", "Stenosis grade, plaque size and diagnosis");
  MeasureArgs diag;
  auto* diagnose = app.add_subcommand("diagnose", "Per-slice plaque flags and scan diagnosis");
  for (auto [cmd, args] : {std::pair{measure, &meas}, std::pair{diagnose, &diag}}) {
    cmd->add_option("labels", args->labels, "Label volume sidecar");
    cmd->add_option("-o,--out", args->out, "Output directory")->required();
    cmd->add_option("--threshold", args->threshold, "Wall thickness that flags a slice, mm");
    cmd->add_option("--run-length", args->run_length, "Consecutive flagged slices for a diagnosis");
  }
  measure->get_option("labels")->required();
  diagnose->add_option("--flags", diag.flags, "Per-slice flags (one 0/1 per line) from another classifier");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Segmentation, agreement or detection metrics");
  evaluate->add_option("--pred", ev.pred, "Predicted label mask directory");
  evaluate->add_option("--gt", ev.gt, "Reference label mask directory");
  evaluate->add_option("--series", ev.series, "Two-column CSV of paired measurements");
  evaluate->add_option("--counts", ev.counts, "tp,fn,fp,tn");
  evaluate->add_option("-o,--out", ev.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*regularize) return run_regularize(reg);
    if (*recon) return run_reconstruct(rec);
    if (*cut) return run_cut(cutargs);
    if (*measure) return run_measure(meas, false);
    if (*diagnose) return run_measure(diag, true);
    if (*evaluate) return run_evaluate(ev);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
