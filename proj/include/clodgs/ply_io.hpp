#pragma once

#include "clodgs/splat_model.hpp"

#include <cstddef>
#include <filesystem>

namespace clodgs {

/// Bytes per vertex record written by save_ply: 17 base floats (position,
/// zero normals, DC color, opacity, scale, rotation), 3 * (B - 1) SH rest
/// floats, plus one float for sigma_d when `with_sigma_d`.
constexpr std::size_t ply_record_size(int sh_degree, bool with_sigma_d = true) {
    return 4 * (17 + 3 * (sh_coeff_count(sh_degree) - 1) + (with_sigma_d ? 1 : 0));
}

/// Reads a binary little-endian 3DGS PLY. A missing `sigma_d` property is
/// filled with kDefaultSigmaD; quaternions are normalized. Throws IoError
/// naming the offending property or row.
GaussianScene load_ply(const std::filesystem::path& path);

/// Writes the fixed property order x,y,z,nx,ny,nz,f_dc_0..2,f_rest_*,
/// opacity,scale_0..2,rot_0..3,sigma_d as float32. Background and SH degree
/// travel in header comments.
void save_ply(const GaussianScene& scene, const std::filesystem::path& path);

/// Same layout without the sigma_d column (plain 3DGS interchange).
void save_ply_without_sigma(const GaussianScene& scene, const std::filesystem::path& path);

}  // namespace clodgs
