#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tce {

// Dense H x W x C image, row-major interleaved channels, values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c) : height(h), width(w), channels(c), data(size_t(h) * w * c, 0.0f) {}

  float& at(int y, int x, int c) { return data[(size_t(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const { return data[(size_t(y) * width + x) * channels + c]; }
  size_t pixel_count() const { return size_t(height) * width; }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Channel-major tensor (C, H, W), the layout consumed by the conv stack.
struct Tensor3f {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Tensor3f() = default;
  Tensor3f(int c, int h, int w) : channels(c), height(h), width(w), data(size_t(c) * h * w, 0.0f) {}
  float& at(int c, int y, int x) { return data[(size_t(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return data[(size_t(c) * height + y) * width + x]; }
};

// HWC image -> CHW tensor.
Tensor3f to_chw(const Image& img);

// Binary PPM (P6, 8-bit). Pixel values map to [0,1] by /255 on read and
// round(v*255) clamped on write.
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);
// Reads only the header, for cheap shape validation.
void read_ppm_header(const std::filesystem::path& path, int& height, int& width);

// Counterclockwise rotation by k*90 degrees as an exact pixel permutation.
// Requires a square frame.
Image rotate90(const Image& img, int k);

// 6 consecutive frames -> 15-channel stack of the 5 neighbouring channel-wise
// differences: output channel 3*j+c = frames[j+1] - frames[j], channel c.
Tensor3f stack_of_differences(std::span<const Image> frames);

}  // namespace tce
