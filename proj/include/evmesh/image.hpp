#pragma once

#include <algorithm>
#include <string>
#include <vector>

namespace evmesh {

/// Row-major single-channel image.
template <class T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return data_.size(); }

  T& operator()(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
  const T& operator()(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  void fill(const T& value) { std::fill(data_.begin(), data_.end(), value); }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using ImageD = Image<double>;

// Grayscale image in [0, 1] from a PGM (P2/P5) or PNG file.
ImageD load_grayscale(const std::string& path);
// 8-bit binary PGM; values are clamped to [0, 1] after (v - lo) / (hi - lo).
void save_pgm(const ImageD& img, const std::string& path, double lo = 0.0, double hi = 1.0);

// Seeded multi-octave value noise with values in [lo, hi], used as a
// texture-rich stand-in background.
ImageD procedural_texture(int width, int height, unsigned long long seed, double lo = 0.03,
                          double hi = 0.97);

}  // namespace evmesh
