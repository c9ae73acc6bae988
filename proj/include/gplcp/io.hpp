#pragma once

#include <string>

#include "gplcp/types.hpp"

namespace gplcp {

/// Model as a JSON document (format_version 1).
std::string model_to_json(const SparseGpModel& model);
/// Rejects unknown keys, ragged arrays and invalid models.
SparseGpModel model_from_json(const std::string& text);

void write_model(const SparseGpModel& model, const std::string& path);
SparseGpModel read_model(const std::string& path);

enum class VolumeDtype { f32le, u8 };

/// Writes `<base>.json` and `<base>.raw`. `path` may name either file or the
/// common stem. u8 stores round(255 * clamp(v, 0, 1)).
void write_volume(const VolumeField& field, const std::string& path,
                  VolumeDtype dtype = VolumeDtype::f32le);
VolumeField read_volume(const std::string& path);

/// Stem shared by the sidecar and raw file.
std::string volume_stem(const std::string& path);

/// Legacy ASCII VTK, STRUCTURED_POINTS with CELL_DATA or POINT_DATA.
void export_vtk_legacy(const VolumeField& field, const std::string& path,
                       const std::string& name = "value");

/// x^4 - 5x^2 + y^4 - 5y^2 + z^4 - 5z^2 + 11.8.
double tangle_value(double x, double y, double z);

/// Tangle sampled on `dims` points per axis over [-2.5, 2.5]^3. The returned
/// grid uses index coordinates (origin 0, spacing 1). Values are
/// scale * t + offset.
VolumeField generate_tangle(const std::array<int, 3>& dims, double scale = 1.0,
                            double offset = 0.0);

/// 64-bit FNV-1a of a file's bytes.
std::uint64_t file_hash(const std::string& path);

}  // namespace gplcp
