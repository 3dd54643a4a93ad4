#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstring>

#include "hpal/data_io.h"
#include "hpal/metrics.h"
#include "hpal/selection.h"
#include "hpal/spatial_index.h"
#include "hpal/trainer.h"
#include "hpal/uncertainty.h"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IndexArray =
    py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;

hpal::Matrix<double> ToMatrix(const Array& a, const char* what) {
  if (a.ndim() != 2) throw hpal::Error(std::string(what) + " must be 2-D");
  hpal::Matrix<double> m(a.shape(0), a.shape(1));
  std::memcpy(m.data.data(), a.data(), m.data.size() * sizeof(double));
  return m;
}

Array FromMatrix(const hpal::Matrix<double>& m) {
  Array out({m.rows, m.cols});
  std::memcpy(out.mutable_data(), m.data.data(), m.data.size() * sizeof(double));
  return out;
}

std::vector<hpal::Vec3> ToVec3(const Array& a, const char* what) {
  if (a.ndim() != 2 || a.shape(1) != 3) {
    throw hpal::Error(std::string(what) + " must have shape (N, 3)");
  }
  std::vector<hpal::Vec3> out(a.shape(0));
  std::memcpy(out.data(), a.data(), out.size() * sizeof(hpal::Vec3));
  return out;
}

Array FromVec3(const std::vector<hpal::Vec3>& v) {
  Array out({v.size(), std::size_t{3}});
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(hpal::Vec3));
  return out;
}

hpal::PointCloud MakeCloud(const Array& positions, std::optional<Array> colors,
                           std::optional<IndexArray> labels) {
  hpal::PointCloud c;
  c.positions = ToVec3(positions, "positions");
  if (colors) {
    c.colors = ToVec3(*colors, "colors");
  } else {
    c.colors.assign(c.positions.size(), {0.5, 0.5, 0.5});
  }
  if (labels) {
    c.gt_labels.emplace(labels->data(), labels->data() + labels->size());
  }
  hpal::require_valid(c);
  return c;
}

py::dict CloudDict(const hpal::PointCloud& c) {
  py::dict d;
  d["positions"] = FromVec3(c.positions);
  d["colors"] = FromVec3(c.colors);
  if (c.gt_labels) {
    d["labels"] = IndexArray(c.gt_labels->size(), c.gt_labels->data());
  } else {
    d["labels"] = py::none();
  }
  return d;
}

std::vector<hpal::LevelSpec> Levels(
    std::optional<std::vector<std::pair<double, double>>> levels) {
  if (!levels) return hpal::DefaultLevels();
  std::vector<hpal::LevelSpec> out;
  for (auto [r, w] : *levels) out.push_back({r, w});
  return out;
}

hpal::ContextMode Mode(const std::string& name) {
  if (name == "exact") return hpal::ContextMode::kExact;
  if (name == "voxel") return hpal::ContextMode::kVoxel;
  throw hpal::Error("context mode must be 'exact' or 'voxel'");
}

py::object Optional(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::list PerClass(const std::vector<std::optional<double>>& v) {
  py::list out;
  for (const auto& x : v) out.append(Optional(x));
  return out;
}

}  // namespace

PYBIND11_MODULE(_hpal, m) {
  m.doc() = "Hierarchical uncertainty active learning for point clouds";
  py::register_exception<hpal::Error>(m, "HpalError", PyExc_ValueError);

  m.def("strategy_names", [] {
    std::vector<std::string> out;
    for (auto s : hpal::StrategyNames()) out.emplace_back(s);
    return out;
  });

  m.def(
      "gen_synthetic",
      [](std::size_t n_points, std::size_t n_classes, std::uint64_t seed,
         std::array<double, 3> room, double surface_noise, double color_noise,
         double outlier_fraction) {
        hpal::SceneSpec spec;
        spec.n_points = n_points;
        spec.n_classes = n_classes;
        spec.seed = seed;
        spec.room = room;
        spec.surface_noise = surface_noise;
        spec.color_noise = color_noise;
        spec.outlier_fraction = outlier_fraction;
        return CloudDict(hpal::gen_synthetic(spec));
      },
      py::arg("n_points") = 50000, py::arg("n_classes") = 8,
      py::arg("seed") = 1, py::arg("room") = std::array<double, 3>{8, 6, 3},
      py::arg("surface_noise") = 0.005, py::arg("color_noise") = 0.06,
      py::arg("outlier_fraction") = 0.005);

  m.def("load_ply", [](const std::string& path) {
    return CloudDict(hpal::load_ply(path));
  });
  m.def(
      "save_ply",
      [](const std::string& path, const Array& positions,
         std::optional<Array> colors, std::optional<IndexArray> labels) {
        hpal::save_ply(MakeCloud(positions, colors, labels), path);
      },
      py::arg("path"), py::arg("positions"), py::arg("colors") = py::none(),
      py::arg("labels") = py::none());

  m.def("point_margin", [](const std::vector<double>& row) {
    return hpal::point_margin(row);
  });

  m.def(
      "score_hmmu",
      [](const Array& positions, const Array& probs,
         std::optional<std::vector<std::pair<double, double>>> levels,
         const std::string& mode, unsigned threads) {
        const hpal::PointCloud cloud = MakeCloud(positions, std::nullopt, std::nullopt);
        const hpal::ProbabilityField p(ToMatrix(probs, "probs"));
        const auto specs = Levels(levels);
        hpal::UncertaintyScores s;
        {
          py::gil_scoped_release release;
          s = hpal::score_hmmu(cloud, p, specs, {Mode(mode), threads});
        }
        py::dict d;
        d["u_point"] = py::array(py::cast(s.u_point));
        py::list lv;
        for (const auto& l : s.u_level) lv.append(py::array(py::cast(l)));
        d["u_level"] = lv;
        d["fused"] = py::array(py::cast(s.fused));
        return d;
      },
      py::arg("positions"), py::arg("probs"), py::arg("levels") = py::none(),
      py::arg("mode") = "exact", py::arg("threads") = 1);

  m.def(
      "score_points",
      [](const std::string& strategy, const Array& positions, const Array& probs,
         std::optional<std::vector<std::pair<double, double>>> levels,
         std::uint64_t seed) {
        const hpal::PointCloud cloud = MakeCloud(positions, std::nullopt, std::nullopt);
        const hpal::ProbabilityField p(ToMatrix(probs, "probs"));
        return py::array(py::cast(hpal::score_points(
            hpal::ParseStrategy(strategy), cloud, p, Levels(levels), seed)));
      },
      py::arg("strategy"), py::arg("positions"), py::arg("probs"),
      py::arg("levels") = py::none(), py::arg("seed") = 0);

  m.def(
      "local_geometric_features",
      [](const Array& positions, std::optional<Array> colors, double radius) {
        return FromMatrix(
            hpal::local_geometric_features(MakeCloud(positions, colors, std::nullopt),
                                           radius)
                .feats);
      },
      py::arg("positions"), py::arg("colors") = py::none(),
      py::arg("radius") = 0.15);

  m.def(
      "rank_candidates",
      [](const std::vector<double>& scores, const std::vector<hpal::Index>& unlabeled,
         bool ascending) {
        return hpal::rank_candidates(scores, unlabeled,
                                     ascending ? hpal::RankDirection::kAscending
                                               : hpal::RankDirection::kDescending);
      },
      py::arg("scores"), py::arg("unlabeled"), py::arg("ascending") = true);

  m.def(
      "fds_select",
      [](const std::vector<hpal::Index>& ranked, const Array& positions,
         const Array& feats, std::size_t k, double radius, double tau) {
        const hpal::PointCloud cloud = MakeCloud(positions, std::nullopt, std::nullopt);
        const hpal::FeatureField f(ToMatrix(feats, "features"));
        hpal::SelectionConfig cfg;
        cfg.budget_k = k;
        cfg.radius_m = radius;
        cfg.tau = tau;
        const auto r =
            hpal::fds_select(ranked, cloud, f, cfg, hpal::build_grid(cloud, radius));
        py::list sup;
        for (const auto& s : r.suppressed) {
          sup.append(py::make_tuple(s.index, s.neighbor, s.distance, s.similarity));
        }
        py::dict d;
        d["selected"] = r.selected;
        d["suppressed"] = sup;
        d["exhausted"] = r.exhausted;
        return d;
      },
      py::arg("ranked"), py::arg("positions"), py::arg("features"), py::arg("k"),
      py::arg("radius") = 0.2, py::arg("tau") = 0.8);

  m.def(
      "miou",
      [](const IndexArray& pred, const IndexArray& gt, std::size_t n_classes) {
        const std::vector<hpal::ClassId> p(pred.data(), pred.data() + pred.size());
        const std::vector<hpal::ClassId> g(gt.data(), gt.data() + gt.size());
        const auto r = hpal::miou(hpal::confusion(p, g, n_classes));
        return py::make_tuple(r.miou, PerClass(r.per_class));
      },
      py::arg("pred"), py::arg("gt"), py::arg("n_classes"));

  m.def(
      "ema_update",
      [](const Array& teacher, const Array& student, double alpha) {
        // Treats each array as the weight matrix of a bias-free model.
        hpal::SegmenterParams t{ToMatrix(teacher, "teacher"), {}};
        hpal::SegmenterParams s{ToMatrix(student, "student"), {}};
        t.bias.assign(t.weights.rows, 0.0);
        s.bias.assign(s.weights.rows, 0.0);
        return FromMatrix(hpal::ema_update(t, s, alpha).weights);
      },
      py::arg("teacher"), py::arg("student"), py::arg("alpha"));

  m.def("parse_config", [](const std::string& text) {
    return hpal::ConfigToJson(hpal::ParseConfig(text));
  });

  m.def(
      "active_loop",
      [](const Array& positions, const Array& colors, const IndexArray& labels,
         const std::string& config_json, const std::string& strategy,
         std::uint64_t seed) {
        const hpal::PointCloud cloud = MakeCloud(positions, colors, labels);
        hpal::RunConfig cfg = hpal::ParseConfig(config_json);
        cfg.trainer.seed = seed;
        cfg.selection.strategy = hpal::ParseStrategy(strategy);
        hpal::LoopOptions lo;
        lo.scoring.mode = cfg.context_mode;
        std::vector<hpal::IterationReport> reports;
        {
          py::gil_scoped_release release;
          reports = hpal::active_loop(cloud, cfg.trainer, cfg.selection,
                                      cfg.levels, lo);
        }
        py::list out;
        for (const auto& r : reports) {
          py::dict d;
          d["iteration"] = r.iteration;
          d["labeled_count"] = r.labeled_count;
          d["labeled_fraction"] = r.labeled_fraction;
          d["miou"] = r.miou;
          d["per_class_iou"] = PerClass(r.per_class_iou);
          d["selected"] = r.selected;
          out.append(d);
        }
        return out;
      },
      py::arg("positions"), py::arg("colors"), py::arg("labels"),
      py::arg("config_json") = "{}", py::arg("strategy") = "hmmu_fds",
      py::arg("seed") = 0);
}
