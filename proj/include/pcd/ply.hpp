#pragma once

#include <filesystem>

#include "pcd/geometry.hpp"

namespace pcd {

// ASCII PLY with vertex properties `x y z` (float) and `class` (uchar in
// {0,1,2}) and a `comment units mm` header line. Unknown class values are
// rejected on read.
void write_ply(const std::filesystem::path& path, const MultiClassPointCloud& cloud);
MultiClassPointCloud read_ply(const std::filesystem::path& path);

}  // namespace pcd
