#include "tce/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "tce/errors.hpp"

namespace tce {

namespace {

// Next whitespace-delimited token, skipping '#' comments (PPM allows them
// anywhere in the header).
std::string next_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

int parse_positive(const std::string& tok, const char* what, const std::filesystem::path& path) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(c); })) {
    throw LoadError(std::string("ppm: bad ") + what + " in " + path.string());
  }
  const long v = std::stol(tok);
  if (v <= 0 || v > 1 << 20) {
    throw LoadError(std::string("ppm: out-of-range ") + what + " in " + path.string());
  }
  return static_cast<int>(v);
}

void parse_header(std::istream& in, const std::filesystem::path& path, int& w, int& h) {
  if (next_token(in) != "P6") throw LoadError("ppm: not a P6 file: " + path.string());
  w = parse_positive(next_token(in), "width", path);
  h = parse_positive(next_token(in), "height", path);
  const int maxval = parse_positive(next_token(in), "maxval", path);
  if (maxval != 255) throw LoadError("ppm: only maxval 255 supported: " + path.string());
  // exactly one whitespace byte separates the header from the pixel data;
  // next_token already consumed it
}

}  // namespace

Tensor3f to_chw(const Image& img) {
  Tensor3f t(img.channels, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) t.at(c, y, x) = img.at(y, x, c);
  return t;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 3) throw std::invalid_argument("write_ppm: need 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("ppm: cannot open for writing: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(size_t(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(y, x, c), 0.0f, 1.0f);
        row[size_t(x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw LoadError("ppm: write failed: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("ppm: cannot open: " + path.string());
  int w = 0, h = 0;
  parse_header(in, path, w, h);
  Image img(h, w, 3);
  std::vector<unsigned char> raw(size_t(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw LoadError("ppm: truncated pixel data: " + path.string());
  }
  for (size_t i = 0; i < raw.size(); ++i) img.data[i] = float(raw[i]) / 255.0f;
  return img;
}

void read_ppm_header(const std::filesystem::path& path, int& height, int& width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("ppm: cannot open: " + path.string());
  parse_header(in, path, width, height);
}

Image rotate90(const Image& img, int k) {
  if (img.height != img.width) throw std::invalid_argument("rotate90: frame must be square");
  if (k < 0 || k > 3) throw std::invalid_argument("rotate90: k must be in 0..3");
  if (k == 0) return img;
  const int n = img.height;
  Image out(n, n, img.channels);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      // one CCW quarter turn maps source (y, x) to destination (n-1-x, y)
      int sy = y, sx = x;
      for (int i = 0; i < k; ++i) {
        const int ty = sx;
        const int tx = n - 1 - sy;
        sy = ty;
        sx = tx;
      }
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

Tensor3f stack_of_differences(std::span<const Image> frames) {
  if (frames.size() != 6) {
    throw std::invalid_argument("stack_of_differences: need exactly 6 frames, got " +
                                std::to_string(frames.size()));
  }
  for (const auto& f : frames) {
    if (f.channels != 3 || !f.same_shape(frames[0])) {
      throw std::invalid_argument("stack_of_differences: frames must share H x W x 3");
    }
  }
  const int h = frames[0].height;
  const int w = frames[0].width;
  Tensor3f out(15, h, w);
  for (int j = 0; j < 5; ++j) {
    const Image& a = frames[j];
    const Image& b = frames[j + 1];
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          out.at(j * 3 + c, y, x) = b.at(y, x, c) - a.at(y, x, c);
        }
      }
    }
  }
  return out;
}

}  // namespace tce
