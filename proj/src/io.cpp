#include "gplcp/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

#include "gplcp/error.hpp"

namespace gplcp {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "raw volumes assume a little-endian host");

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& item : obj.items())
    if (!known.count(item.key()))
      throw ParseError("unknown key \"" + item.key() + "\" in " + where);
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + " must be an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing key \"" + std::string(key) + "\" in " + where);
  return *it;
}

double number(const json& j, const std::string& name) {
  if (!j.is_number()) throw ParseError(name + " must be a number");
  return j.get<double>();
}

Vec3 vec3(const json& j, const std::string& name) {
  if (!j.is_array() || j.size() != 3) throw ParseError(name + " must be an array of 3 numbers");
  return {number(j[0], name), number(j[1], name), number(j[2], name)};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out.write(data.data(), std::streamsize(data.size()));
  if (!out) throw ConfigError("write failed for " + path);
}

json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON in " + what + ": " + e.what());
  }
}

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

}  // namespace

std::string model_to_json(const SparseGpModel& model) {
  json positions = json::array();
  for (const auto& p : model.inducing_positions) positions.push_back(vec_json(p));
  json mean = json::array();
  for (Eigen::Index i = 0; i < model.inducing_mean.size(); ++i)
    mean.push_back(model.inducing_mean[i]);
  json cov = json::array();
  for (Eigen::Index i = 0; i < model.inducing_cov.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < model.inducing_cov.cols(); ++j)
      row.push_back(model.inducing_cov(i, j));
    cov.push_back(std::move(row));
  }
  json doc = {
      {"format_version", 1},
      {"kernel",
       {{"kind", "rbf"},
        {"lengthscale", model.kernel.lengthscale},
        {"variance", model.kernel.variance}}},
      {"noise_variance", model.noise_variance},
      {"scalar_mean", model.scalar_mean},
      {"domain_bounds", {{"lo", vec_json(model.domain.lo)}, {"hi", vec_json(model.domain.hi)}}},
      {"inducing_positions", std::move(positions)},
      {"inducing_mean", std::move(mean)},
      {"inducing_cov", std::move(cov)},
  };
  return doc.dump(1);
}

SparseGpModel model_from_json(const std::string& text) {
  const json doc = parse(text, "model file");
  if (!doc.is_object()) throw ParseError("model file must be a JSON object");
  reject_unknown(doc,
                 {"format_version", "kernel", "noise_variance", "scalar_mean", "domain_bounds",
                  "inducing_positions", "inducing_mean", "inducing_cov"},
                 "model file");
  const auto& version = field(doc, "format_version", "model file");
  if (!version.is_number_integer() || version.get<int>() != 1)
    throw ParseError("unsupported format_version (expected 1)");

  SparseGpModel model;
  const auto& kernel = field(doc, "kernel", "model file");
  reject_unknown(kernel, {"kind", "lengthscale", "variance"}, "kernel");
  const auto& kind = field(kernel, "kind", "kernel");
  if (!kind.is_string() || kind.get<std::string>() != "rbf")
    throw ParseError("kernel kind must be \"rbf\"");
  model.kernel.lengthscale = number(field(kernel, "lengthscale", "kernel"), "lengthscale");
  model.kernel.variance = number(field(kernel, "variance", "kernel"), "variance");
  model.noise_variance = number(field(doc, "noise_variance", "model file"), "noise_variance");
  model.scalar_mean = number(field(doc, "scalar_mean", "model file"), "scalar_mean");

  const auto& bounds = field(doc, "domain_bounds", "model file");
  reject_unknown(bounds, {"lo", "hi"}, "domain_bounds");
  model.domain.lo = vec3(field(bounds, "lo", "domain_bounds"), "domain_bounds.lo");
  model.domain.hi = vec3(field(bounds, "hi", "domain_bounds"), "domain_bounds.hi");

  const auto& positions = field(doc, "inducing_positions", "model file");
  if (!positions.is_array()) throw ParseError("inducing_positions must be an array");
  for (const auto& p : positions) model.inducing_positions.push_back(vec3(p, "inducing_positions"));
  const auto m = Eigen::Index(model.inducing_positions.size());

  const auto& mean = field(doc, "inducing_mean", "model file");
  if (!mean.is_array()) throw ParseError("inducing_mean must be an array");
  if (Eigen::Index(mean.size()) != m)
    throw ParseError("inducing_mean length does not match inducing_positions");
  model.inducing_mean.resize(m);
  for (Eigen::Index i = 0; i < m; ++i)
    model.inducing_mean[i] = number(mean[std::size_t(i)], "inducing_mean");

  const auto& cov = field(doc, "inducing_cov", "model file");
  if (!cov.is_array()) throw ParseError("inducing_cov must be an array");
  for (const auto& row : cov)
    if (!row.is_array() || row.size() != cov.size()) throw ParseError("inducing_cov not square");
  if (Eigen::Index(cov.size()) != m)
    throw ParseError("inducing_cov size does not match inducing_positions");
  model.inducing_cov.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      model.inducing_cov(i, j) = number(cov[std::size_t(i)][std::size_t(j)], "inducing_cov");

  if (auto report = validate_model(model); !report.empty()) throw ValidationError(std::move(report));
  return model;
}

void write_model(const SparseGpModel& model, const std::string& path) {
  write_file(path, model_to_json(model) + "\n");
}

SparseGpModel read_model(const std::string& path) { return model_from_json(read_file(path)); }

std::string volume_stem(const std::string& path) {
  for (const char* ext : {".json", ".raw"}) {
    const std::size_t n = std::strlen(ext);
    if (path.size() > n && path.compare(path.size() - n, n, ext) == 0)
      return path.substr(0, path.size() - n);
  }
  return path;
}

void write_volume(const VolumeField& field, const std::string& path, VolumeDtype dtype) {
  if (!field.consistent()) throw SizeMismatch("volume values do not match its grid");
  const std::string stem = volume_stem(path);
  json sidecar = {
      {"format_version", 1},
      {"dims", json::array({field.spec.dims[0], field.spec.dims[1], field.spec.dims[2]})},
      {"origin", vec_json(field.spec.origin)},
      {"spacing", vec_json(field.spec.spacing)},
      {"kind", field.kind == Centering::cell ? "cell" : "point"},
      {"dtype", dtype == VolumeDtype::f32le ? "f32le" : "u8"},
  };
  std::string raw;
  if (dtype == VolumeDtype::f32le) {
    raw.resize(field.values.size() * sizeof(float));
    for (std::size_t i = 0; i < field.values.size(); ++i) {
      const float f = float(field.values[i]);
      std::memcpy(&raw[i * sizeof(float)], &f, sizeof(float));
    }
  } else {
    raw.resize(field.values.size());
    for (std::size_t i = 0; i < field.values.size(); ++i)
      raw[i] = char(std::uint8_t(std::lround(255.0 * std::clamp(field.values[i], 0.0, 1.0))));
  }
  write_file(stem + ".json", sidecar.dump(1) + "\n");
  write_file(stem + ".raw", raw);
}

VolumeField read_volume(const std::string& path) {
  const std::string stem = volume_stem(path);
  const json doc = parse(read_file(stem + ".json"), stem + ".json");
  if (!doc.is_object()) throw ParseError("volume sidecar must be a JSON object");
  reject_unknown(doc, {"format_version", "dims", "origin", "spacing", "kind", "dtype"},
                 "volume sidecar");
  const auto& version = field(doc, "format_version", "volume sidecar");
  if (!version.is_number_integer() || version.get<int>() != 1)
    throw ParseError("unsupported format_version (expected 1)");

  VolumeField out;
  const auto& dims = field(doc, "dims", "volume sidecar");
  if (!dims.is_array() || dims.size() != 3) throw ParseError("dims must be an array of 3 integers");
  for (int a = 0; a < 3; ++a) {
    if (!dims[std::size_t(a)].is_number_integer()) throw ParseError("dims must be integers");
    out.spec.dims[a] = dims[std::size_t(a)].get<int>();
  }
  out.spec.origin = vec3(field(doc, "origin", "volume sidecar"), "origin");
  out.spec.spacing = vec3(field(doc, "spacing", "volume sidecar"), "spacing");
  try {
    out.spec.check();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("volume sidecar: ") + e.what());
  }
  const auto& kind = field(doc, "kind", "volume sidecar");
  if (kind == "cell") out.kind = Centering::cell;
  else if (kind == "point") out.kind = Centering::point;
  else throw ParseError("kind must be \"cell\" or \"point\"");
  const auto& dtype = field(doc, "dtype", "volume sidecar");
  std::size_t width;
  if (dtype == "f32le") width = 4;
  else if (dtype == "u8") width = 1;
  else throw ParseError("dtype must be \"f32le\" or \"u8\"");

  const std::string raw = read_file(stem + ".raw");
  const auto count = std::size_t(VolumeField::expected_size(out.spec, out.kind));
  if (raw.size() != count * width) {
    std::ostringstream msg;
    msg << stem << ".raw has " << raw.size() << " bytes, expected " << count * width;
    throw SizeMismatch(msg.str());
  }
  out.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (width == 4) {
      float f;
      std::memcpy(&f, &raw[i * 4], 4);
      out.values[i] = f;
    } else {
      out.values[i] = double(std::uint8_t(raw[i])) / 255.0;
    }
  }
  return out;
}

void export_vtk_legacy(const VolumeField& field, const std::string& path, const std::string& name) {
  if (!field.consistent()) throw SizeMismatch("volume values do not match its grid");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  const auto& s = field.spec;
  out << "# vtk DataFile Version 3.0\n"
      << name << "\n"
      << "ASCII\n"
      << "DATASET STRUCTURED_POINTS\n"
      << "DIMENSIONS " << s.dims[0] << " " << s.dims[1] << " " << s.dims[2] << "\n"
      << std::setprecision(17) << "ORIGIN " << s.origin[0] << " " << s.origin[1] << " "
      << s.origin[2] << "\n"
      << "SPACING " << s.spacing[0] << " " << s.spacing[1] << " " << s.spacing[2] << "\n"
      << (field.kind == Centering::cell ? "CELL_DATA " : "POINT_DATA ") << field.values.size()
      << "\n"
      << "SCALARS " << name << " double 1\n"
      << "LOOKUP_TABLE default\n";
  for (std::size_t i = 0; i < field.values.size(); ++i)
    out << field.values[i] << ((i + 1) % 8 == 0 ? '\n' : ' ');
  out << "\n";
  if (!out) throw ConfigError("write failed for " + path);
}

double tangle_value(double x, double y, double z) {
  auto axis = [](double t) {
    const double t2 = t * t;
    return t2 * t2 - 5.0 * t2;
  };
  return axis(x) + axis(y) + axis(z) + 11.8;
}

VolumeField generate_tangle(const std::array<int, 3>& dims, double scale, double offset) {
  GridSpec spec;
  spec.dims = dims;
  spec.check();
  VolumeField field = VolumeField::zeros(spec, Centering::point);
  auto coord = [&](int axis, int i) { return -2.5 + 5.0 * double(i) / double(dims[axis] - 1); };
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i)
        field.values[std::size_t(spec.point_index(i, j, k))] =
            scale * tangle_value(coord(0, i), coord(1, j), coord(2, k)) + offset;
  return field;
}

std::uint64_t file_hash(const std::string& path) {
  const std::string bytes = read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace gplcp
