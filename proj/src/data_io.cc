#include "hpal/data_io.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hpal {

using nlohmann::json;

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw Error("read error on '" + path + "'");
  return os.str();
}

void WriteFile(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) throw Error("write error on '" + path + "'");
}

// ---------------------------------------------------------------------------
// PLY

namespace {

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  // Next line without its terminator; nullopt at end of input.
  std::optional<std::string_view> Next() {
    if (pos_ >= text_.size()) return std::nullopt;
    const std::size_t end = text_.find('\n', pos_);
    std::string_view line = text_.substr(
        pos_, end == std::string_view::npos ? std::string_view::npos
                                            : end - pos_);
    pos_ = end == std::string_view::npos ? text_.size() : end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no_;
    return line;
  }
  std::size_t line_no() const { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> Tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void PlyError(std::size_t line, const std::string& what) {
  throw Error("ply: " + what + " at line " + std::to_string(line));
}

template <typename T>
bool ParseNumber(std::string_view tok, T& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

enum class PropKind { kFloat, kDouble, kUchar, kInt, kUint, kOther };

PropKind KindOf(std::string_view type) {
  if (type == "float" || type == "float32") return PropKind::kFloat;
  if (type == "double" || type == "float64") return PropKind::kDouble;
  if (type == "uchar" || type == "uint8") return PropKind::kUchar;
  if (type == "int" || type == "int32" || type == "short" || type == "int16" ||
      type == "char" || type == "int8") {
    return PropKind::kInt;
  }
  if (type == "uint" || type == "uint32" || type == "ushort" ||
      type == "uint16") {
    return PropKind::kUint;
  }
  return PropKind::kOther;
}

struct ElementDecl {
  std::string name;
  std::size_t count = 0;
  std::size_t line = 0;
  std::vector<std::pair<std::string, PropKind>> props;
  bool has_list = false;
};

}  // namespace

PointCloud ParsePly(std::string_view text) {
  LineReader reader(text);
  auto first = reader.Next();
  if (!first || *first != "ply") PlyError(1, "missing 'ply' magic");
  auto fmt = reader.Next();
  if (!fmt) PlyError(reader.line_no() + 1, "missing header");
  {
    const auto t = Tokens(*fmt);
    if (t.size() != 3 || t[0] != "format") {
      PlyError(reader.line_no(), "expected 'format ascii 1.0'");
    }
    if (t[1] != "ascii") {
      PlyError(reader.line_no(), "unsupported format '" + std::string(t[1]) +
                                     "' (only ascii)");
    }
    if (t[2] != "1.0") PlyError(reader.line_no(), "unsupported version");
  }

  std::vector<ElementDecl> elements;
  bool ended = false;
  while (auto line = reader.Next()) {
    const auto t = Tokens(*line);
    if (t.empty()) continue;
    if (t[0] == "end_header") {
      ended = true;
      break;
    }
    if (t[0] == "comment" || t[0] == "obj_info") continue;
    if (t[0] == "element") {
      if (t.size() != 3) PlyError(reader.line_no(), "malformed element line");
      ElementDecl e;
      e.name = std::string(t[1]);
      e.line = reader.line_no();
      if (!ParseNumber(t[2], e.count)) {
        PlyError(reader.line_no(), "bad element count '" + std::string(t[2]) + "'");
      }
      for (const auto& prev : elements) {
        if (prev.name == e.name) {
          PlyError(reader.line_no(), "duplicate element '" + e.name + "'");
        }
      }
      elements.push_back(std::move(e));
      continue;
    }
    if (t[0] == "property") {
      if (elements.empty()) {
        PlyError(reader.line_no(), "property before any element");
      }
      auto& e = elements.back();
      if (t.size() == 5 && t[1] == "list") {
        e.has_list = true;
        e.props.emplace_back(std::string(t[4]), PropKind::kOther);
        continue;
      }
      if (t.size() != 3) PlyError(reader.line_no(), "malformed property line");
      const PropKind kind = KindOf(t[1]);
      if (kind == PropKind::kOther) {
        PlyError(reader.line_no(),
                 "unknown property type '" + std::string(t[1]) + "'");
      }
      for (const auto& p : e.props) {
        if (p.first == t[2]) {
          PlyError(reader.line_no(),
                   "duplicate property '" + std::string(t[2]) + "'");
        }
      }
      e.props.emplace_back(std::string(t[2]), kind);
      continue;
    }
    PlyError(reader.line_no(), "unknown header keyword '" + std::string(t[0]) + "'");
  }
  if (!ended) PlyError(reader.line_no() + 1, "missing end_header");

  const ElementDecl* vertex = nullptr;
  for (const auto& e : elements) {
    if (e.name == "vertex") vertex = &e;
  }
  if (!vertex) PlyError(reader.line_no(), "no vertex element");
  if (vertex->has_list) {
    PlyError(vertex->line, "list property on vertex element");
  }

  // Column of each required or optional property.
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t k = 0; k < vertex->props.size(); ++k) {
      if (vertex->props[k].first == name) return k;
    }
    return std::nullopt;
  };
  std::size_t col_xyz[3], col_rgb[3];
  const char* xyz_names[3] = {"x", "y", "z"};
  const char* rgb_names[3] = {"red", "green", "blue"};
  for (int a = 0; a < 3; ++a) {
    auto c = column(xyz_names[a]);
    if (!c) {
      PlyError(vertex->line,
               std::string("missing required property '") + xyz_names[a] + "'");
    }
    const PropKind k = vertex->props[*c].second;
    if (k != PropKind::kFloat && k != PropKind::kDouble) {
      PlyError(vertex->line,
               std::string("property '") + xyz_names[a] + "' must be float");
    }
    col_xyz[a] = *c;
  }
  for (int a = 0; a < 3; ++a) {
    auto c = column(rgb_names[a]);
    if (!c) {
      PlyError(vertex->line,
               std::string("missing required property '") + rgb_names[a] + "'");
    }
    if (vertex->props[*c].second != PropKind::kUchar) {
      PlyError(vertex->line,
               std::string("property '") + rgb_names[a] + "' must be uchar");
    }
    col_rgb[a] = *c;
  }
  const auto col_label = column("label");
  if (col_label) {
    const PropKind k = vertex->props[*col_label].second;
    if (k != PropKind::kInt && k != PropKind::kUint && k != PropKind::kUchar) {
      PlyError(vertex->line, "property 'label' must be an integer type");
    }
  }

  PointCloud cloud;
  const std::size_t reserve = std::min<std::size_t>(vertex->count, 1u << 20);
  cloud.positions.reserve(reserve);
  cloud.colors.reserve(reserve);
  if (col_label) {
    cloud.gt_labels.emplace();
    cloud.gt_labels->reserve(reserve);
  }

  for (const auto& e : elements) {
    for (std::size_t k = 0; k < e.count; ++k) {
      auto line = reader.Next();
      if (!line) {
        PlyError(reader.line_no() + 1,
                 e.name + " count mismatch: header declares " +
                     std::to_string(e.count) + ", body has " +
                     std::to_string(k));
      }
      if (&e != vertex) continue;
      const auto t = Tokens(*line);
      if (t.size() != e.props.size()) {
        PlyError(reader.line_no(), "expected " + std::to_string(e.props.size()) +
                                       " values, found " +
                                       std::to_string(t.size()));
      }
      Vec3 pos, col;
      for (int a = 0; a < 3; ++a) {
        double v;
        if (!ParseNumber(t[col_xyz[a]], v)) {
          PlyError(reader.line_no(),
                   "non-numeric token '" + std::string(t[col_xyz[a]]) + "'");
        }
        if (vertex->props[col_xyz[a]].second == PropKind::kFloat) {
          v = static_cast<double>(static_cast<float>(v));
        }
        if (!std::isfinite(v)) {
          PlyError(reader.line_no(), "non-finite coordinate");
        }
        pos[a] = v;
        unsigned c;
        if (!ParseNumber(t[col_rgb[a]], c) || c > 255) {
          PlyError(reader.line_no(), "bad color token '" +
                                         std::string(t[col_rgb[a]]) + "'");
        }
        col[a] = c / 255.0;
      }
      // Tokens of ignored properties must still be numeric.
      for (std::size_t p = 0; p < t.size(); ++p) {
        double v;
        if (!ParseNumber(t[p], v)) {
          PlyError(reader.line_no(),
                   "non-numeric token '" + std::string(t[p]) + "'");
        }
      }
      if (col_label) {
        ClassId label;
        if (!ParseNumber(t[*col_label], label)) {
          PlyError(reader.line_no(),
                   "bad label token '" + std::string(t[*col_label]) + "'");
        }
        cloud.gt_labels->push_back(label);
      }
      cloud.positions.push_back(pos);
      cloud.colors.push_back(col);
    }
  }
  while (auto line = reader.Next()) {
    if (!Tokens(*line).empty()) {
      PlyError(reader.line_no(), "vertex count mismatch: trailing data");
    }
  }
  return cloud;
}

std::string FormatPly(const PointCloud& cloud) {
  std::string out;
  out.reserve(64 * cloud.size() + 256);
  out += "ply\nformat ascii 1.0\nelement vertex ";
  out += std::to_string(cloud.size());
  out +=
      "\nproperty float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.gt_labels) out += "property int label\n";
  out += "end_header\n";
  char buf[128];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.positions[i];
    const auto& c = cloud.colors[i];
    auto q = [](double v) {
      return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    };
    int len = std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %d %d %d",
                            static_cast<double>(static_cast<float>(p[0])),
                            static_cast<double>(static_cast<float>(p[1])),
                            static_cast<double>(static_cast<float>(p[2])),
                            q(c[0]), q(c[1]), q(c[2]));
    out.append(buf, static_cast<std::size_t>(len));
    if (cloud.gt_labels) {
      out += ' ';
      out += std::to_string((*cloud.gt_labels)[i]);
    }
    out += '\n';
  }
  return out;
}

PointCloud load_ply(const std::string& path) {
  try {
    return ParsePly(ReadFile(path));
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

void save_ply(const PointCloud& cloud, const std::string& path) {
  WriteFile(path, FormatPly(cloud));
}

// ---------------------------------------------------------------------------
// Matrix files

namespace {

void PutU32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint32_t GetU32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + b]))
         << (8 * b);
  }
  return v;
}

std::string EncodeHeader(MatrixDtype dtype, std::size_t rows, std::size_t cols) {
  if (rows > 0xFFFFFFFFu || cols > 0xFFFFFFFFu) {
    throw Error("matrix too large for the file format");
  }
  std::string out(kMatrixMagic, 8);
  PutU32(out, kMatrixVersion);
  out.push_back(static_cast<char>(dtype));
  PutU32(out, static_cast<std::uint32_t>(rows));
  PutU32(out, static_cast<std::uint32_t>(cols));
  return out;
}

}  // namespace

std::string EncodeMatrix(const Matrix<float>& m) {
  std::string out = EncodeHeader(MatrixDtype::kFloat32, m.rows, m.cols);
  out.reserve(out.size() + 4 * m.data.size());
  for (float v : m.data) PutU32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

std::string EncodeMatrix(const Matrix<std::uint32_t>& m) {
  std::string out = EncodeHeader(MatrixDtype::kUint32, m.rows, m.cols);
  out.reserve(out.size() + 4 * m.data.size());
  for (std::uint32_t v : m.data) PutU32(out, v);
  return out;
}

MatrixBlob DecodeMatrix(std::string_view bytes) {
  if (bytes.size() < kMatrixHeaderSize) {
    if (bytes.size() >= 8 && bytes.substr(0, 8) != std::string_view(kMatrixMagic, 8)) {
      throw Error("matrix: bad magic");
    }
    throw Error("matrix: truncated header");
  }
  if (bytes.substr(0, 8) != std::string_view(kMatrixMagic, 8)) {
    throw Error("matrix: bad magic");
  }
  const std::uint32_t version = GetU32(bytes, 8);
  if (version != kMatrixVersion) {
    throw Error("matrix: unsupported version " + std::to_string(version));
  }
  const auto dtype_byte = static_cast<unsigned char>(bytes[12]);
  if (dtype_byte > 1) {
    throw Error("matrix: unsupported dtype " + std::to_string(dtype_byte));
  }
  const std::uint64_t rows = GetU32(bytes, 13);
  const std::uint64_t cols = GetU32(bytes, 17);
  const std::uint64_t want = rows * cols * 4;
  const std::uint64_t have = bytes.size() - kMatrixHeaderSize;
  if (have < want) {
    throw Error("matrix: truncated payload (" + std::to_string(have / 4) +
                " of " + std::to_string(rows * cols) + " values)");
  }
  if (have > want) {
    throw Error("matrix: " + std::to_string(have - want) +
                " trailing bytes after payload");
  }
  MatrixBlob blob;
  blob.dtype = static_cast<MatrixDtype>(dtype_byte);
  const std::size_t n = static_cast<std::size_t>(rows * cols);
  if (blob.dtype == MatrixDtype::kFloat32) {
    blob.f32 = Matrix<float>(rows, cols);
    for (std::size_t k = 0; k < n; ++k) {
      blob.f32.data[k] =
          std::bit_cast<float>(GetU32(bytes, kMatrixHeaderSize + 4 * k));
    }
  } else {
    blob.u32 = Matrix<std::uint32_t>(rows, cols);
    for (std::size_t k = 0; k < n; ++k) {
      blob.u32.data[k] = GetU32(bytes, kMatrixHeaderSize + 4 * k);
    }
  }
  return blob;
}

void save_matrix(const Matrix<float>& m, const std::string& path) {
  WriteFile(path, EncodeMatrix(m));
}

void save_matrix(const Matrix<std::uint32_t>& m, const std::string& path) {
  WriteFile(path, EncodeMatrix(m));
}

MatrixBlob load_matrix(const std::string& path) {
  try {
    return DecodeMatrix(ReadFile(path));
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

Matrix<float> ToFloat32(const Matrix<double>& m) {
  Matrix<float> out(m.rows, m.cols);
  for (std::size_t k = 0; k < m.data.size(); ++k) {
    out.data[k] = static_cast<float>(m.data[k]);
  }
  return out;
}

Matrix<double> ToFloat64(const Matrix<float>& m) {
  Matrix<double> out(m.rows, m.cols);
  for (std::size_t k = 0; k < m.data.size(); ++k) out.data[k] = m.data[k];
  return out;
}

ProbabilityField ProbabilitiesFromBlob(const MatrixBlob& blob) {
  if (blob.dtype != MatrixDtype::kFloat32) {
    throw Error("probabilities must be a float32 matrix");
  }
  return ProbabilityField(ToFloat64(blob.f32));
}

FeatureField FeaturesFromBlob(const MatrixBlob& blob) {
  if (blob.dtype != MatrixDtype::kFloat32) {
    throw Error("features must be a float32 matrix");
  }
  return FeatureField(ToFloat64(blob.f32));
}

Matrix<float> ParamsToMatrix(const SegmenterParams& params) {
  Matrix<float> out(params.n_classes(), params.dim() + 1);
  for (std::size_t c = 0; c < params.n_classes(); ++c) {
    for (std::size_t k = 0; k < params.dim(); ++k) {
      out(c, k) = static_cast<float>(params.weights(c, k));
    }
    out(c, params.dim()) = static_cast<float>(params.bias[c]);
  }
  return out;
}

SegmenterParams ParamsFromBlob(const MatrixBlob& blob) {
  if (blob.dtype != MatrixDtype::kFloat32 || blob.cols() < 1) {
    throw Error("parameters must be a float32 matrix with a bias column");
  }
  const std::size_t c_n = blob.rows();
  const std::size_t f_n = blob.cols() - 1;
  SegmenterParams p = SegmenterParams::Zeros(c_n, f_n);
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t k = 0; k < f_n; ++k) p.weights(c, k) = blob.f32(c, k);
    p.bias[c] = blob.f32(c, f_n);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Selection lists and state

std::string FormatSelectionList(std::span<const Index> indices) {
  std::string out;
  out.reserve(indices.size() * 8);
  for (Index i : indices) {
    out += std::to_string(i);
    out += '\n';
  }
  return out;
}

std::vector<Index> ParseSelectionList(std::string_view text) {
  std::vector<Index> out;
  LineReader reader(text);
  while (auto line = reader.Next()) {
    if (line->empty()) continue;
    Index v;
    auto [ptr, ec] = std::from_chars(line->data(), line->data() + line->size(), v);
    if (ec != std::errc() || ptr != line->data() + line->size()) {
      throw Error("selection list: bad index '" + std::string(*line) +
                  "' at line " + std::to_string(reader.line_no()));
    }
    out.push_back(v);
  }
  return out;
}

std::string SerializeState(const SelectionState& state) {
  json j;
  j["n_points"] = state.n_points();
  j["initial"] = state.initial_labeled();
  j["iteration"] = state.iteration();
  j["selections"] = state.selections_per_iteration();
  return j.dump();
}

SelectionState DeserializeState(std::string_view json_text) {
  try {
    const json j = json::parse(json_text);
    return SelectionState::FromParts(
        j.at("n_points").get<std::size_t>(),
        j.at("initial").get<std::vector<Index>>(),
        j.at("iteration").get<std::size_t>(),
        j.at("selections").get<std::vector<std::vector<Index>>>());
  } catch (const json::exception& e) {
    throw Error(std::string("selection state: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Config

namespace {

class ConfigReader {
 public:
  ConfigReader(const json& obj, std::string where)
      : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw Error(where_ + " must be a JSON object");
  }

  void Allow(std::initializer_list<const char*> keys) {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      bool known = false;
      for (const char* k : keys) known |= it.key() == k;
      if (!known) {
        throw Error("unknown key '" + it.key() + "' in " + where_);
      }
    }
  }

  void Number(const char* key, double& out) {
    if (!obj_.contains(key)) return;
    const json& v = obj_[key];
    if (!v.is_number()) throw Error(Name(key) + " must be a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw Error(Name(key) + " must be finite");
  }

  template <typename T>
  void Count(const char* key, T& out) {
    if (!obj_.contains(key)) return;
    const json& v = obj_[key];
    if (!v.is_number_unsigned()) {
      throw Error(Name(key) + " must be a non-negative integer");
    }
    out = static_cast<T>(v.get<std::uint64_t>());
  }

  void Bool(const char* key, bool& out) {
    if (!obj_.contains(key)) return;
    const json& v = obj_[key];
    if (!v.is_boolean()) throw Error(Name(key) + " must be a boolean");
    out = v.get<bool>();
  }

  std::optional<std::string> String(const char* key) {
    if (!obj_.contains(key)) return std::nullopt;
    const json& v = obj_[key];
    if (!v.is_string()) throw Error(Name(key) + " must be a string");
    return v.get<std::string>();
  }

  const json* Child(const char* key) const {
    return obj_.contains(key) ? &obj_[key] : nullptr;
  }

  std::string Name(const char* key) const {
    return where_ == "config" ? std::string(key) : where_ + "." + key;
  }

 private:
  const json& obj_;
  std::string where_;
};

void RangeCheck(double v, double lo, double hi, const std::string& name) {
  if (!(v >= lo && v <= hi)) {
    std::ostringstream os;
    os << name << " out of range [" << lo << "," << hi << "]: " << v;
    throw Error(os.str());
  }
}

}  // namespace

RunConfig ParseConfig(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  ConfigReader top(root, "config");
  top.Allow({"levels", "fds", "budget", "trainer", "strategy", "context_mode"});

  if (const json* levels = top.Child("levels")) {
    if (!levels->is_array()) throw Error("levels must be an array");
    cfg.levels.clear();
    for (std::size_t i = 0; i < levels->size(); ++i) {
      ConfigReader lr((*levels)[i], "levels[" + std::to_string(i) + "]");
      lr.Allow({"radius_m", "weight"});
      LevelSpec spec{std::nan(""), 0.0};
      for (const char* key : {"radius_m", "weight"}) {
        if (!(*levels)[i].contains(key)) {
          throw Error(lr.Name(key) + " is required");
        }
      }
      lr.Number("radius_m", spec.radius_m);
      lr.Number("weight", spec.weight);
      if (!(spec.radius_m > 0.0)) {
        throw Error(lr.Name("radius_m") + " must be positive");
      }
      if (!(spec.weight >= 0.0)) {
        throw Error(lr.Name("weight") + " must be non-negative");
      }
      cfg.levels.push_back(spec);
    }
  }
  if (const json* fds = top.Child("fds")) {
    ConfigReader fr(*fds, "fds");
    fr.Allow({"radius_m", "tau"});
    fr.Number("radius_m", cfg.selection.radius_m);
    fr.Number("tau", cfg.selection.tau);
    RangeCheck(cfg.selection.tau, 0.0, 1.0, "tau");
    if (!(cfg.selection.radius_m > 0.0)) {
      throw Error("fds.radius_m must be positive");
    }
  }
  if (const json* budget = top.Child("budget")) {
    ConfigReader br(*budget, "budget");
    br.Allow({"initial_fraction", "per_iter_fraction", "iterations"});
    br.Number("initial_fraction", cfg.trainer.initial_fraction);
    br.Number("per_iter_fraction", cfg.trainer.per_iter_fraction);
    br.Count("iterations", cfg.trainer.iterations);
    RangeCheck(cfg.trainer.initial_fraction, 0.0, 1.0, "initial_fraction");
    RangeCheck(cfg.trainer.per_iter_fraction, 0.0, 1.0, "per_iter_fraction");
  }
  if (const json* trainer = top.Child("trainer")) {
    ConfigReader tr(*trainer, "trainer");
    tr.Allow({"alpha", "pseudo_threshold", "learning_rate", "steps", "seed",
              "jitter_sigma_m", "color_sigma", "feature_radius_m",
              "augment_views", "retrain_from_scratch"});
    auto& t = cfg.trainer;
    tr.Number("alpha", t.alpha);
    tr.Number("pseudo_threshold", t.pseudo_threshold);
    tr.Number("learning_rate", t.learning_rate);
    tr.Count("steps", t.steps);
    tr.Count("seed", t.seed);
    tr.Number("jitter_sigma_m", t.jitter_sigma);
    tr.Number("color_sigma", t.color_sigma);
    tr.Number("feature_radius_m", t.feature_radius_m);
    tr.Count("augment_views", t.augment_views);
    tr.Bool("retrain_from_scratch", t.retrain_from_scratch);
    RangeCheck(t.alpha, 0.0, 1.0, "alpha");
    RangeCheck(t.pseudo_threshold, 0.0, 1.0, "pseudo_threshold");
  }
  if (auto s = top.String("strategy")) cfg.selection.strategy = ParseStrategy(*s);
  if (auto m = top.String("context_mode")) {
    if (*m == "exact") {
      cfg.context_mode = ContextMode::kExact;
    } else if (*m == "voxel") {
      cfg.context_mode = ContextMode::kVoxel;
    } else {
      throw Error("context_mode must be 'exact' or 'voxel', got '" + *m + "'");
    }
  }

  ValidateTrainerConfig(cfg.trainer);
  ValidateSelectionConfig(cfg.selection);
  for (const auto& l : cfg.levels) ValidateLevel(l);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  try {
    return ParseConfig(ReadFile(path));
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string ConfigToJson(const RunConfig& cfg, int indent) {
  json j;
  j["levels"] = json::array();
  for (const auto& l : cfg.levels) {
    j["levels"].push_back({{"radius_m", l.radius_m}, {"weight", l.weight}});
  }
  j["fds"] = {{"radius_m", cfg.selection.radius_m}, {"tau", cfg.selection.tau}};
  const auto& t = cfg.trainer;
  j["budget"] = {{"initial_fraction", t.initial_fraction},
                 {"per_iter_fraction", t.per_iter_fraction},
                 {"iterations", t.iterations}};
  j["trainer"] = {{"alpha", t.alpha},
                  {"pseudo_threshold", t.pseudo_threshold},
                  {"learning_rate", t.learning_rate},
                  {"steps", t.steps},
                  {"seed", t.seed},
                  {"jitter_sigma_m", t.jitter_sigma},
                  {"color_sigma", t.color_sigma},
                  {"feature_radius_m", t.feature_radius_m},
                  {"augment_views", t.augment_views},
                  {"retrain_from_scratch", t.retrain_from_scratch}};
  j["strategy"] = std::string(StrategyName(cfg.selection.strategy));
  j["context_mode"] =
      cfg.context_mode == ContextMode::kExact ? "exact" : "voxel";
  return j.dump(indent);
}

}  // namespace hpal
