#include "evmesh/image.hpp"

#include "evmesh/rng.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace evmesh {

namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                    [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

// Skips whitespace and '#' comments in a PGM header.
void skip_pgm_space(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

ImageD load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image '" + path + "'");
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") throw std::invalid_argument("'" + path + "' is not a PGM file");
  int w = 0, h = 0, maxval = 0;
  skip_pgm_space(in);
  in >> w;
  skip_pgm_space(in);
  in >> h;
  skip_pgm_space(in);
  in >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw std::invalid_argument("'" + path + "': bad PGM header");
  }
  ImageD img(w, h);
  if (magic == "P2") {
    for (size_t i = 0; i < img.size(); ++i) {
      int v = 0;
      if (!(in >> v)) throw std::invalid_argument("'" + path + "': truncated PGM");
      img[i] = static_cast<double>(v) / maxval;
    }
  } else {
    in.get();  // single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(img.size() * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw std::invalid_argument("'" + path + "': truncated PGM");
    for (size_t i = 0; i < img.size(); ++i) {
      const int v = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
      img[i] = static_cast<double>(v) / maxval;
    }
  }
  return img;
}

ImageD load_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error("cannot read PNG '" + path + "': " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error("cannot decode PNG '" + path + "': " + msg);
  }
  ImageD img(static_cast<int>(image.width), static_cast<int>(image.height));
  for (size_t i = 0; i < img.size(); ++i) img[i] = buffer[i] / 255.0;
  return img;
}

}  // namespace

ImageD load_grayscale(const std::string& path) {
  if (has_suffix(path, ".png")) return load_png(path);
  return load_pgm(path);
}

void save_pgm(const ImageD& img, const std::string& path, double lo, double hi) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> raw(img.size());
  const double scale = hi > lo ? 1.0 / (hi - lo) : 1.0;
  for (size_t i = 0; i < img.size(); ++i) {
    const double v = std::isfinite(img[i]) ? std::clamp((img[i] - lo) * scale, 0.0, 1.0) : 1.0;
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

ImageD procedural_texture(int width, int height, unsigned long long seed, double lo, double hi) {
  const CounterRng rng(seed);
  ImageD img(width, height, 0.0);
  struct Octave {
    int cell;
    double amplitude;
  };
  const Octave octaves[] = {{180, 0.40}, {64, 0.30}, {22, 0.20}, {7, 0.10}};
  std::uint64_t stream = 1;
  for (const auto& oct : octaves) {
    const int gw = width / oct.cell + 2;
    auto lattice = [&](int gx, int gy) {
      return rng.uniform(stream, static_cast<std::uint64_t>(gy) * gw + gx);
    };
    for (int y = 0; y < height; ++y) {
      const double fy = static_cast<double>(y) / oct.cell;
      const int gy = static_cast<int>(fy);
      double ty = fy - gy;
      ty = ty * ty * (3.0 - 2.0 * ty);
      for (int x = 0; x < width; ++x) {
        const double fx = static_cast<double>(x) / oct.cell;
        const int gx = static_cast<int>(fx);
        double tx = fx - gx;
        tx = tx * tx * (3.0 - 2.0 * tx);
        const double top = lattice(gx, gy) * (1 - tx) + lattice(gx + 1, gy) * tx;
        const double bottom = lattice(gx, gy + 1) * (1 - tx) + lattice(gx + 1, gy + 1) * tx;
        img(x, y) += oct.amplitude * (top * (1 - ty) + bottom * ty);
      }
    }
    ++stream;
  }
  // Hard-edged blocks, like furniture and shelves in indoor scenes.
  for (int r = 0; r < 24; ++r) {
    const int x0 = static_cast<int>(rng.uniform(100, r, 0) * width);
    const int y0 = static_cast<int>(rng.uniform(100, r, 1) * height);
    const int w = static_cast<int>((0.05 + 0.25 * rng.uniform(100, r, 2)) * width);
    const int h = static_cast<int>((0.05 + 0.25 * rng.uniform(100, r, 3)) * height);
    const double shade = rng.uniform(100, r, 4) - 0.5;
    for (int y = y0; y < std::min(height, y0 + h); ++y) {
      for (int x = x0; x < std::min(width, x0 + w); ++x) img(x, y) += 0.6 * shade;
    }
  }
  const auto [mn, mx] = std::minmax_element(img.data().begin(), img.data().end());
  const double a = *mn, b = *mx;
  for (auto& v : img.data()) v = lo + (hi - lo) * (b > a ? (v - a) / (b - a) : 0.5);
  return img;
}

}  // namespace evmesh
