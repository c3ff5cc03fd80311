#include "formula/overlay.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "formula/error.hpp"

namespace formula::overlay {

namespace {

// Piecewise-linear blue -> cyan -> yellow -> red ramp.
std::array<std::uint8_t, 3> ramp(double t) {
  static constexpr std::array<std::array<double, 3>, 4> stops = {{{0.0, 0.0, 0.5}, {0.0, 0.8, 1.0}, {1.0, 0.9, 0.0}, {0.8, 0.0, 0.0}}};
  t = std::clamp(t, 0.0, 1.0) * 3.0;
  const int k = std::min(2, static_cast<int>(t));
  const double f = t - k;
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    const double v = stops[k][c] * (1.0 - f) + stops[k + 1][c] * f;
    rgb[c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return rgb;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

void write_overlay_png(const std::filesystem::path& path, const heads::IntermediateMap& map, const Box& box,
                       const io::Manifest& manifest) {
  const int p = manifest.patch_size;
  const int width = map.grid.cols * p;
  const int height = map.grid.rows * p;
  if (map.values.size() != map.grid.size() || width <= 0 || height <= 0) {
    throw Error(ErrorCode::GridMismatch, "overlay map does not match the manifest");
  }

  const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo > 0.0 ? *hi_it - lo : 1.0;

  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto rgb = ramp((map.values[map.grid.index(y / p, x / p)] - lo) / span);
      std::copy(rgb.begin(), rgb.end(), pixels.begin() + (static_cast<std::ptrdiff_t>(y) * width + x) * 3);
    }
  }
  const int thickness = std::max(1, p / 8);
  const int x0 = static_cast<int>(box.xmin), x1 = std::min(width, static_cast<int>(box.xmax));
  const int y0 = static_cast<int>(box.ymin), y1 = std::min(height, static_cast<int>(box.ymax));
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool edge = x < x0 + thickness || x >= x1 - thickness || y < y0 + thickness || y >= y1 - thickness;
      if (!edge) continue;
      auto* px = &pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3];
      px[0] = 255;
      px[1] = 0;
      px[2] = 0;
    }
  }

  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoFailure, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoFailure, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) png_write_row(png, &pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) * 3]);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace formula::overlay
