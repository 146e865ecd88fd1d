#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hncf/tensor.hpp"

namespace hncf {

// 8-bit interleaved RGB raster.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
  bool operator==(const RgbImage&) const = default;
};

// Binary PPM (P6, maxval 255). Throws FileNotFound / DecodeError / IoError.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

// Nearest-neighbour resize (source index floor(i * src / dst)) followed by
// division by 255, giving a [height×width×3] tensor in [0, 1].
Tensor image_to_tensor(const RgbImage& image, std::size_t height, std::size_t width);

}  // namespace hncf
