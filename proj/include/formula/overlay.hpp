#pragma once

#include <filesystem>

#include "formula/feature_io.hpp"
#include "formula/saliency_heads.hpp"

namespace formula::overlay {

/// Heatmap of the map upsampled to (grid * patch_size) pixels with the box
/// outlined in red. Diagnostic output only.
void write_overlay_png(const std::filesystem::path& path, const heads::IntermediateMap& map, const Box& box,
                       const io::Manifest& manifest);

}  // namespace formula::overlay
