// Python bindings. Poses cross the boundary as (N, 7) float arrays
// [tx, ty, tz, qw, qx, qy, qz]; images as (H, W) uint8 arrays; volumes as
// (nz, ny, nx) uint8 arrays with origin and spacing alongside.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "carotid3d/analysis.hpp"
#include "carotid3d/io.hpp"
#include "carotid3d/metrics.hpp"
#include "carotid3d/phantom.hpp"
#include "carotid3d/recon.hpp"
#include "carotid3d/regularization.hpp"
#include "carotid3d/version.hpp"

namespace py = pybind11;
using namespace carotid;

namespace {

using PoseArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Pose pose_from(const double* r) { return {Rotation(r[3], r[4], r[5], r[6]), {r[0], r[1], r[2]}}; }

PoseSequence poses_from(const PoseArray& a) {
  if (a.ndim() != 2 || a.shape(1) != 7) throw InvalidArgument("poses must have shape (N, 7)");
  PoseSequence out;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out.push_back(pose_from(a.data(i, 0)));
  return out;
}

Pose single_pose(const PoseArray& a) {
  if (a.ndim() != 1 || a.shape(0) != 7) throw InvalidArgument("pose must have shape (7,)");
  return pose_from(a.data());
}

PoseArray poses_to(std::span<const Pose> poses) {
  PoseArray out({py::ssize_t(poses.size()), py::ssize_t(7)});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto& q = poses[i].rotation.quaternion();
    const auto& t = poses[i].translation;
    const double row[7] = {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()};
    for (int c = 0; c < 7; ++c) m(py::ssize_t(i), c) = row[c];
  }
  return out;
}

Raster<std::uint8_t> raster_from(const ByteArray& a) {
  if (a.ndim() != 2) throw InvalidArgument("image must be 2-D (H, W)");
  Raster<std::uint8_t> r(int(a.shape(1)), int(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), r.data().begin());
  return r;
}

std::vector<Raster<std::uint8_t>> stack_from(const ByteArray& a) {
  if (a.ndim() != 3) throw InvalidArgument("frames must have shape (N, H, W)");
  std::vector<Raster<std::uint8_t>> out;
  const auto h = a.shape(1), w = a.shape(2);
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    Raster<std::uint8_t> r{int(w), int(h)};
    std::copy(a.data(i, 0, 0), a.data(i, 0, 0) + w * h, r.data().begin());
    out.push_back(std::move(r));
  }
  return out;
}

template <typename T>
ByteArray stack_to(const std::vector<T>& rasters, auto get) {
  const auto& first = get(rasters.at(0));
  ByteArray out({py::ssize_t(rasters.size()), py::ssize_t(first.height()), py::ssize_t(first.width())});
  auto* dst = out.mutable_data();
  for (const auto& r : rasters) {
    const auto& px = get(r);
    dst = std::copy(px.data().begin(), px.data().end(), dst);
  }
  return out;
}

py::dict volume_to(const Volume& v) {
  ByteArray voxels({py::ssize_t(v.dims[2]), py::ssize_t(v.dims[1]), py::ssize_t(v.dims[0])});
  std::copy(v.voxels.begin(), v.voxels.end(), voxels.mutable_data());
  ByteArray fill({py::ssize_t(v.dims[2]), py::ssize_t(v.dims[1]), py::ssize_t(v.dims[0])});
  std::copy(v.fill_mask.begin(), v.fill_mask.end(), fill.mutable_data());
  py::dict d;
  d["voxels"] = voxels;
  d["fill_mask"] = fill;
  d["origin"] = std::vector<double>{v.origin.x(), v.origin.y(), v.origin.z()};
  d["spacing"] = v.spacing;
  d["label_mode"] = v.label_mode;
  return d;
}

Volume volume_from(const ByteArray& voxels, double spacing, std::array<double, 3> origin, bool label_mode) {
  if (voxels.ndim() != 3) throw InvalidArgument("volume must have shape (nz, ny, nx)");
  Volume v = Volume::make({origin[0], origin[1], origin[2]}, spacing,
                          {int(voxels.shape(2)), int(voxels.shape(1)), int(voxels.shape(0))}, label_mode);
  std::copy(voxels.data(), voxels.data() + voxels.size(), v.voxels.begin());
  std::fill(v.fill_mask.begin(), v.fill_mask.end(), std::uint8_t{1});
  return v;
}

MetricWeights weights(double w_trans, double w_rot) {
  MetricWeights w{w_trans, w_rot};
  w.validate();
  return w;
}

std::vector<Point2> points_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw InvalidArgument("points must have shape (N, 2)");
  std::vector<Point2> out;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out.emplace_back(*a.data(i, 0), *a.data(i, 1));
  return out;
}

}  // namespace

PYBIND11_MODULE(_carotid3d, m) {
  m.doc() = "Freehand 3D carotid ultrasound: pose regularization, reconstruction, quantification";
  m.attr("__version__") = kVersion;

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<InvalidArgument> invalid(m, "InvalidArgument", PyExc_ValueError);
  static py::exception<IoError> io_error(m, "IoError", PyExc_OSError);
  static py::exception<DomainError> domain(m, "DomainError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InvalidArgument& e) {
      py::set_error(invalid, e.what());
    } catch (const IoError& e) {
      py::set_error(io_error, e.what());
    } catch (const DomainError& e) {
      py::set_error(domain, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  // ---- poses ----
  m.def("geodesic_distance",
        [](const PoseArray& a, const PoseArray& b, double w_trans, double w_rot) {
          return geodesic_distance(single_pose(a), single_pose(b), weights(w_trans, w_rot));
        },
        py::arg("a"), py::arg("b"), py::arg("w_trans") = 1.0, py::arg("w_rot") = 10.0);
  m.def("geodesic_interpolate",
        [](const PoseArray& a, const PoseArray& b, double t) {
          const Pose p = geodesic_interpolate(single_pose(a), single_pose(b), t);
          return poses_to(std::vector<Pose>{p}).attr("reshape")(7);
        },
        py::arg("a"), py::arg("b"), py::arg("t"));
  m.def("huber", &huber, py::arg("s"));
  m.def("tv_objective",
        [](const PoseArray& x, const PoseArray& p, double alpha, double w_trans, double w_rot) {
          RegConfig cfg;
          cfg.alpha = alpha;
          cfg.weights = weights(w_trans, w_rot);
          return tv_objective(poses_from(x), poses_from(p), cfg);
        },
        py::arg("x"), py::arg("p"), py::arg("alpha") = 0.5, py::arg("w_trans") = 1.0, py::arg("w_rot") = 10.0);
  m.def("denoise",
        [](const PoseArray& p, double alpha, double lambda0, int cycles, double tol, double w_trans,
           double w_rot) {
          RegConfig cfg;
          cfg.alpha = alpha;
          cfg.lambda0 = lambda0;
          cfg.n_cycles = cycles;
          cfg.tol = tol;
          cfg.weights = weights(w_trans, w_rot);
          const auto poses = poses_from(p);
          DenoiseResult r;
          {
            py::gil_scoped_release release;
            r = cppa_denoise(poses, cfg);
          }
          py::dict d;
          d["poses"] = poses_to(r.poses);
          d["initial_objective"] = r.initial_objective;
          d["final_objective"] = r.final_objective;
          d["cycles"] = r.cycles;
          return d;
        },
        py::arg("poses"), py::arg("alpha") = 0.5, py::arg("lambda0") = 1.0, py::arg("cycles") = 200,
        py::arg("tol") = 1e-8, py::arg("w_trans") = 1.0, py::arg("w_rot") = 10.0,
        "TV-denoise a pose trajectory with the cyclic proximal point algorithm.");
  m.def("rerank",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& c) {
          if (c.ndim() != 2 || c.shape(1) != 3) throw InvalidArgument("centroids must have shape (N, 3)");
          std::vector<Eigen::Vector3d> pts;
          for (py::ssize_t i = 0; i < c.shape(0); ++i) pts.emplace_back(*c.data(i, 0), *c.data(i, 1), *c.data(i, 2));
          return rerank(pts).permutation;
        },
        py::arg("centroids"), "Frame order by projection of world centroids on their principal axis.");
  m.def("trajectory_rmse",
        [](const PoseArray& a, const PoseArray& b) { return trajectory_rmse(poses_from(a), poses_from(b)); },
        py::arg("a"), py::arg("b"));

  // ---- reconstruction ----
  m.def("reconstruct",
        [](const ByteArray& frames, const PoseArray& poses, double pixel_spacing, double voxel, int hole_radius,
           bool label_mode, bool pseudo) {
          FrameSequence seq;
          for (auto& r : stack_from(frames)) seq.frames.push_back({std::move(r), pixel_spacing});
          seq.poses = poses_from(poses);
          ReconConfig cfg{voxel, hole_radius, label_mode};
          Volume v;
          {
            py::gil_scoped_release release;
            v = pseudo ? stack_pseudo_volume(seq, cfg) : reconstruct(seq, cfg);
          }
          return volume_to(v);
        },
        py::arg("frames"), py::arg("poses"), py::arg("pixel_spacing"), py::arg("voxel") = 0.2,
        py::arg("hole_radius") = 3, py::arg("label_mode") = false, py::arg("pseudo") = false);

  // ---- quantification ----
  m.def("stenosis_diameter",
        [](const ByteArray& mab, const ByteArray& lib, double pixel_mm) {
          const auto r = stenosis_diameter(raster_from(mab), raster_from(lib), pixel_mm);
          py::dict d;
          d["stenosis"] = r.stenosis;
          d["angle_deg"] = r.angle_deg;
          d["mab_length_mm"] = r.mab_length_mm;
          d["lumen_length_mm"] = r.lumen_length_mm;
          return d;
        },
        py::arg("mab"), py::arg("lib"), py::arg("pixel_mm"));
  m.def("wall_thickness_profile",
        [](const ByteArray& mab, const ByteArray& lib, double pixel_mm) {
          return wall_thickness_profile(raster_from(mab), raster_from(lib), pixel_mm);
        },
        py::arg("mab"), py::arg("lib"), py::arg("pixel_mm"));
  m.def("stenosis_grade",
        [](const ByteArray& labels, double spacing, std::array<double, 3> origin) {
          const auto r = stenosis_grade(volume_from(labels, spacing, origin, true));
          py::dict d;
          d["grade"] = r.grade;
          d["slice"] = r.argmax_slice;
          d["angle_deg"] = r.argmax_angle_deg;
          d["per_slice"] = r.per_slice;
          d["bifurcation_slices"] = r.bifurcation_slices;
          return d;
        },
        py::arg("labels"), py::arg("spacing"), py::arg("origin") = std::array<double, 3>{0, 0, 0});
  m.def("scan_diagnosis",
        [](const std::vector<bool>& flags, std::size_t run_length) {
          return scan_diagnosis(flags, run_length).diseased;
        },
        py::arg("flags"), py::arg("run_length") = 5);
  m.def("diagnose_volume",
        [](const ByteArray& labels, double spacing, double threshold, std::size_t run_length) {
          const auto profiles = thickness_profiles(volume_from(labels, spacing, {0, 0, 0}, true));
          const auto flags = detect_plaque_slices(profiles, threshold);
          const auto plaque = plaque_size(flags, profiles, spacing);
          py::dict d;
          d["per_slice_flags"] = flags;
          d["diseased"] = scan_diagnosis(flags, run_length).diseased;
          d["plaque_length_mm"] = plaque.length_mm;
          d["plaque_thickness_mm"] = plaque.thickness_mm;
          return d;
        },
        py::arg("labels"), py::arg("spacing"), py::arg("threshold") = 1.5, py::arg("run_length") = 5);

  // ---- metrics ----
  m.def("dsc", [](const ByteArray& p, const ByteArray& l) { return dsc(raster_from(p), raster_from(l)); },
        py::arg("prediction"), py::arg("reference"));
  m.def("boundary_points",
        [](const ByteArray& mask, double spacing) {
          const auto pts = boundary_points(raster_from(mask), spacing);
          py::array_t<double> out({py::ssize_t(pts.size()), py::ssize_t(2)});
          auto o = out.mutable_unchecked<2>();
          for (std::size_t i = 0; i < pts.size(); ++i) {
            o(py::ssize_t(i), 0) = pts[i].x();
            o(py::ssize_t(i), 1) = pts[i].y();
          }
          return out;
        },
        py::arg("mask"), py::arg("spacing") = 1.0);
  m.def("hd95", [](const py::array_t<double>& a, const py::array_t<double>& b) {
    return hd95(points_from(a), points_from(b));
  });
  m.def("hausdorff", [](const py::array_t<double>& a, const py::array_t<double>& b) {
    return hausdorff(points_from(a), points_from(b));
  });
  m.def("classification_rates",
        [](std::int64_t tp, std::int64_t fn, std::int64_t fp, std::int64_t tn) {
          const auto r = classification_rates({tp, fn, fp, tn});
          py::dict d;
          d["sensitivity"] = r.sensitivity;
          d["specificity"] = r.specificity;
          d["accuracy"] = r.accuracy;
          return d;
        },
        py::arg("tp"), py::arg("fn"), py::arg("fp"), py::arg("tn"));
  m.def("mad",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          const auto r = mad(a, b);
          return py::make_tuple(r.mad, r.sd);
        },
        py::arg("a"), py::arg("b"));
  m.def("pearson", [](const std::vector<double>& a, const std::vector<double>& b) { return pearson(a, b); },
        py::arg("a"), py::arg("b"));

  // ---- phantom ----
  m.def("bump_depth_for_grade", &bump_depth_for_grade, py::arg("mab_radius_mm"), py::arg("lib_radius_mm"),
        py::arg("grade"));
  m.def("simulate",
        [](const std::string& spec_json, double sigma_trans, double sigma_rot, std::optional<std::size_t> fallback_start,
           std::size_t fallback_length, std::uint64_t seed) {
          const PhantomSpec spec = io::phantom_spec_from_json(nlohmann::json::parse(spec_json));
          NoiseSpec noise{sigma_trans, sigma_rot, std::nullopt, seed};
          if (fallback_start) noise.fallback = Fallback{*fallback_start, fallback_length};
          Sweep s;
          {
            py::gil_scoped_release release;
            s = perturb_sweep(generate_sweep(spec), noise);
          }
          py::dict d;
          d["frames"] = stack_to(s.seq.frames, [](const Frame& f) -> const auto& { return f.pixels; });
          const auto labels = s.labels();
          d["labels"] = stack_to(labels, [](const LabelRaster& r) -> const auto& { return r; });
          d["poses"] = poses_to(s.seq.poses);
          d["ground_truth"] = poses_to(s.ground_truth);
          d["source"] = s.source;
          d["pixel_spacing"] = spec.pixel_spacing_mm;
          d["designed_grade"] = spec.designed_grade();
          return d;
        },
        py::arg("spec_json"), py::arg("sigma_trans") = 0.0, py::arg("sigma_rot") = 0.0,
        py::arg("fallback_start") = py::none(), py::arg("fallback_length") = 5, py::arg("seed") = 0,
        "Generate a phantom sweep from a JSON spec string.");
  m.def("world_centroids",
        [](const ByteArray& labels, const PoseArray& poses, double pixel_spacing) {
          std::vector<Mask> mab;
          for (const auto& l : stack_from(labels)) mab.push_back(from_labels(l).mab);
          const auto c = world_centroids(mab, poses_from(poses), pixel_spacing);
          py::array_t<double> out({py::ssize_t(c.size()), py::ssize_t(3)});
          auto o = out.mutable_unchecked<2>();
          for (std::size_t i = 0; i < c.size(); ++i)
            for (int k = 0; k < 3; ++k) o(py::ssize_t(i), k) = c[i][k];
          return out;
        },
        py::arg("labels"), py::arg("poses"), py::arg("pixel_spacing"));
}
