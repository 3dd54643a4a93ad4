#ifndef HPAL_DATA_IO_H_
#define HPAL_DATA_IO_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpal/core_model.h"
#include "hpal/selection.h"
#include "hpal/trainer.h"
#include "hpal/uncertainty.h"

namespace hpal {

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, std::string_view contents);

// ---------------------------------------------------------------------------
// ASCII PLY: element vertex with float x y z, uchar red green blue and an
// optional integer label. Other scalar vertex properties are ignored; other
// elements are skipped line by line. Errors carry the 1-based line number.

PointCloud ParsePly(std::string_view text);
std::string FormatPly(const PointCloud& cloud);
PointCloud load_ply(const std::string& path);
void save_ply(const PointCloud& cloud, const std::string& path);

// ---------------------------------------------------------------------------
// Binary matrix file, little-endian:
//   bytes 0-7   magic "HPALMTRX"
//   bytes 8-11  u32 version (1)
//   byte  12    dtype (0 = f32, 1 = u32)
//   bytes 13-16 u32 rows
//   bytes 17-20 u32 cols
//   then rows * cols values, row-major.

inline constexpr char kMatrixMagic[] = "HPALMTRX";
inline constexpr std::uint32_t kMatrixVersion = 1;
inline constexpr std::size_t kMatrixHeaderSize = 21;

enum class MatrixDtype : std::uint8_t { kFloat32 = 0, kUint32 = 1 };

// A decoded matrix file; exactly one of the members is populated.
struct MatrixBlob {
  MatrixDtype dtype = MatrixDtype::kFloat32;
  Matrix<float> f32;
  Matrix<std::uint32_t> u32;

  std::size_t rows() const {
    return dtype == MatrixDtype::kFloat32 ? f32.rows : u32.rows;
  }
  std::size_t cols() const {
    return dtype == MatrixDtype::kFloat32 ? f32.cols : u32.cols;
  }
};

std::string EncodeMatrix(const Matrix<float>& m);
std::string EncodeMatrix(const Matrix<std::uint32_t>& m);
MatrixBlob DecodeMatrix(std::string_view bytes);

void save_matrix(const Matrix<float>& m, const std::string& path);
void save_matrix(const Matrix<std::uint32_t>& m, const std::string& path);
MatrixBlob load_matrix(const std::string& path);

Matrix<float> ToFloat32(const Matrix<double>& m);
Matrix<double> ToFloat64(const Matrix<float>& m);

// Typed views of a decoded file; throw Error on the wrong dtype.
ProbabilityField ProbabilitiesFromBlob(const MatrixBlob& blob);
FeatureField FeaturesFromBlob(const MatrixBlob& blob);

// Parameters as a C x (F + 1) float matrix, bias in the last column.
Matrix<float> ParamsToMatrix(const SegmenterParams& params);
SegmenterParams ParamsFromBlob(const MatrixBlob& blob);

// ---------------------------------------------------------------------------
// Selection lists: one zero-based decimal index per line, LF-terminated.

std::string FormatSelectionList(std::span<const Index> indices);
std::vector<Index> ParseSelectionList(std::string_view text);

// SelectionState as a JSON document.
std::string SerializeState(const SelectionState& state);
SelectionState DeserializeState(std::string_view json_text);

// ---------------------------------------------------------------------------
// Run configuration. Missing keys take the defaults of the member structs;
// unknown keys, wrong types and out-of-range values are rejected by name.
//
// {"levels":[{"radius_m":..,"weight":..}],
//  "fds":{"radius_m":..,"tau":..},
//  "budget":{"initial_fraction":..,"per_iter_fraction":..,"iterations":..},
//  "trainer":{"alpha":..,"pseudo_threshold":..,"learning_rate":..,"steps":..,
//             "seed":..,"jitter_sigma_m":..,"color_sigma":..,
//             "feature_radius_m":..,"augment_views":..,
//             "retrain_from_scratch":..},
//  "strategy":"hmmu_fds", "context_mode":"exact"}

struct RunConfig {
  TrainerConfig trainer;
  SelectionConfig selection;
  std::vector<LevelSpec> levels = DefaultLevels();
  ContextMode context_mode = ContextMode::kExact;

  bool operator==(const RunConfig&) const = default;
};

RunConfig ParseConfig(std::string_view json_text);
RunConfig load_config(const std::string& path);
// The full effective configuration, every key present.
std::string ConfigToJson(const RunConfig& cfg, int indent = 2);

// ---------------------------------------------------------------------------
// Synthetic indoor scenes.

struct SceneSpec {
  std::size_t n_points = 50000;
  std::size_t n_classes = 8;
  Vec3 room = {8.0, 6.0, 3.0};  // extent in meters
  double surface_noise = 0.005;  // meters
  double color_noise = 0.06;
  double outlier_fraction = 0.005;
  std::uint64_t seed = 1;
};

// Throws Error when the spec is invalid or infeasible.
void ValidateSceneSpec(const SceneSpec& spec);

// Class 0 is the floor plane, class 1 the walls, higher classes are furniture
// built from boxes, slabs, panels and spheres. Every class receives at least
// ceil(1% of n_points) points; outliers are uniform in the room with random
// labels. Deterministic per seed.
PointCloud gen_synthetic(const SceneSpec& spec);

}  // namespace hpal

#endif  // HPAL_DATA_IO_H_
