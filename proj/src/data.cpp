#include "elda/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace elda::data {

namespace {

using Rng = std::mt19937_64;

// Keeps a background frame around every scene so class 0 is always present.
constexpr double kBorder = 2.0;

constexpr std::array<std::array<double, 3>, 5> kClassColors{{
    {0.45, 0.45, 0.45},  // background
    {0.85, 0.25, 0.20},  // rectangle
    {0.20, 0.70, 0.30},  // disk
    {0.25, 0.35, 0.85},  // triangle
    {0.90, 0.80, 0.20},  // stripe
}};
constexpr double kColorJitter = 0.08;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

struct Point {
  double x, y;
};

double cross(Point a, Point b, Point p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); }

// Inside test for one shape instance, evaluated at pixel centres.
struct Shape {
  std::int32_t cls = 1;
  std::array<double, 3> color{};
  std::array<double, 6> g{};  // class-specific geometry

  bool contains(double px, double py) const {
    switch (cls) {
      case 1:
        return px >= g[0] && px <= g[2] && py >= g[1] && py <= g[3];
      case 2: {
        const double dx = px - g[0], dy = py - g[1];
        return dx * dx + dy * dy <= g[2] * g[2];
      }
      case 3: {
        const Point a{g[0], g[1]}, b{g[2], g[3]}, c{g[4], g[5]}, p{px, py};
        const double d1 = cross(a, b, p), d2 = cross(b, c, p), d3 = cross(c, a, p);
        const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
        return !(neg && pos);
      }
      default: {
        // Segment (g0,g1)-(g2,g3) with half-width g4.
        const double vx = g[2] - g[0], vy = g[3] - g[1];
        const double len2 = vx * vx + vy * vy;
        double t = len2 > 0 ? ((px - g[0]) * vx + (py - g[1]) * vy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double dx = px - (g[0] + t * vx), dy = py - (g[1] + t * vy);
        return dx * dx + dy * dy <= g[4] * g[4];
      }
    }
  }
};

Shape random_shape(Rng& rng, std::size_t num_classes, double size) {
  Shape s;
  s.cls = static_cast<std::int32_t>(std::uniform_int_distribution<std::size_t>(1, num_classes - 1)(rng));
  const auto& base = kClassColors[static_cast<std::size_t>(s.cls)];
  for (std::size_t c = 0; c < 3; ++c) s.color[c] = std::clamp(base[c] + uniform(rng, -kColorJitter, kColorJitter), 0.0, 1.0);

  const double lo = kBorder, hi = size - kBorder;
  const double cx = uniform(rng, lo + 0.15 * size, hi - 0.15 * size);
  const double cy = uniform(rng, lo + 0.15 * size, hi - 0.15 * size);
  switch (s.cls) {
    case 1: {
      const double w = uniform(rng, 0.12, 0.35) * size, h = uniform(rng, 0.12, 0.35) * size;
      s.g = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2, 0, 0};
      break;
    }
    case 2:
      s.g = {cx, cy, uniform(rng, 0.07, 0.17) * size, 0, 0, 0};
      break;
    case 3: {
      const double r = uniform(rng, 0.1, 0.2) * size;
      const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      for (int k = 0; k < 3; ++k) {
        const double a = phase + k * 2.0 * std::numbers::pi / 3.0 + uniform(rng, -0.3, 0.3);
        s.g[2 * k] = cx + r * std::cos(a);
        s.g[2 * k + 1] = cy + r * std::sin(a);
      }
      break;
    }
    default: {
      const double len = uniform(rng, 0.25, 0.5) * size;
      const double a = uniform(rng, 0.0, std::numbers::pi);
      const double dx = 0.5 * len * std::cos(a), dy = 0.5 * len * std::sin(a);
      s.g = {cx - dx, cy - dy, cx + dx, cy + dy, uniform(rng, 1.2, 2.2), 0};
      break;
    }
  }
  return s;
}

void skip_space_and_comments(std::istream& is) {
  for (;;) {
    const int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (c != EOF && std::isspace(c)) {
      is.get();
    } else {
      return;
    }
  }
}

std::size_t read_header_number(std::istream& is, const std::filesystem::path& path, const char* what) {
  skip_space_and_comments(is);
  std::size_t v = 0;
  if (!std::isdigit(is.peek()) || !(is >> v)) {
    throw FormatError("malformed PNM header in '" + path.string() + "': bad " + what);
  }
  return v;
}

}  // namespace

void SceneSpec::validate() const {
  if (num_classes < 2 || num_classes > 5) throw std::invalid_argument("SceneSpec: num_classes must be in [2,5]");
  if (size < 16) throw std::invalid_argument("SceneSpec: size must be at least 16");
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double hashed_uniform(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t bits = mix64(mix64(seed) ^ index) >> 11;  // 53 bits
  return static_cast<double>(bits) * 0x1.0p-52 - 1.0;
}

Tensor apply_domain_gap(const Tensor& image, const GapSpec& gap, std::uint64_t seed) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("apply_domain_gap: expected [3,H,W], got " + to_string(image.shape()));
  const std::size_t H = image.dim(1), W = image.dim(2), plane = H * W;
  const auto v = image.values();
  std::vector<double> out(v.size());
  const std::uint64_t noise_seed = seed ^ 0x7a2f3c9d11e4b5a1ULL;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const std::size_t i = c * plane + y * W + x;
        const double texture = gap.texture_amplitude *
                               std::sin(2.0 * std::numbers::pi * gap.texture_frequency * static_cast<double>(x) / W) *
                               std::cos(2.0 * std::numbers::pi * gap.texture_frequency * static_cast<double>(y) / H);
        const double noise = gap.noise_amplitude * hashed_uniform(noise_seed, i);
        out[i] = std::clamp(v[i] + gap.color_shift[c] + texture + noise, 0.0, 1.0);
      }
  return Tensor::from(image.shape(), std::move(out));
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(mix64(seed));
  const std::size_t n = spec.size;
  const double size = static_cast<double>(n);
  const auto count = std::uniform_int_distribution<int>(2, 6)(rng);
  std::vector<Shape> shapes;
  for (int k = 0; k < count; ++k) shapes.push_back(random_shape(rng, spec.num_classes, size));

  Scene scene;
  scene.label = LabelMap(n, n, 0);
  std::vector<double> pixels(3 * n * n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      std::int32_t cls = 0;
      std::array<double, 3> color = kClassColors[0];
      const bool interior = px > kBorder && py > kBorder && px < size - kBorder && py < size - kBorder;
      if (interior) {
        for (const auto& s : shapes) {  // back to front
          if (s.contains(px, py)) {
            cls = s.cls;
            color = s.color;
          }
        }
      }
      scene.label.at(y, x) = cls;
      for (std::size_t c = 0; c < 3; ++c) pixels[c * n * n + y * n + x] = color[c];
    }
  scene.image = Tensor::from({3, n, n}, std::move(pixels));
  if (spec.domain == Domain::Target) scene.image = apply_domain_gap(scene.image, spec.gap, seed);
  return scene;
}

PnmImage read_pnm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  char magic[2] = {0, 0};
  is.read(magic, 2);
  if (is.gcount() != 2 || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw FormatError("malformed PNM header in '" + path.string() + "': expected P5 or P6");
  }
  PnmImage img;
  img.channels = magic[1] == '6' ? 3 : 1;
  img.width = read_header_number(is, path, "width");
  img.height = read_header_number(is, path, "height");
  const auto maxval = read_header_number(is, path, "maxval");
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 255) {
    throw FormatError("malformed PNM header in '" + path.string() + "': unsupported dimensions or maxval");
  }
  img.maxval = static_cast<unsigned>(maxval);
  if (!std::isspace(is.get())) throw FormatError("malformed PNM header in '" + path.string() + "': missing separator");
  img.data.resize(img.width * img.height * img.channels);
  is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (static_cast<std::size_t>(is.gcount()) != img.data.size()) {
    throw FormatError("truncated pixel data in '" + path.string() + "'");
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const PnmImage& image) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  os << (image.channels == 3 ? "P6" : "P5") << '\n' << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
  os.write(reinterpret_cast<const char*>(image.data.data()), static_cast<std::streamsize>(image.data.size()));
  if (!os) throw FormatError("failed writing '" + path.string() + "'");
}

Tensor pnm_to_tensor(const PnmImage& image) {
  const std::size_t plane = image.width * image.height;
  std::vector<double> v(3 * plane);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      const auto raw = image.data[i * image.channels + (image.channels == 3 ? c : 0)];
      v[c * plane + i] = static_cast<double>(raw) / image.maxval;
    }
  return Tensor::from({3, image.height, image.width}, std::move(v));
}

PnmImage tensor_to_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("tensor_to_ppm: expected [3,H,W], got " + to_string(image.shape()));
  PnmImage out{image.dim(2), image.dim(1), 3, 255, {}};
  const std::size_t plane = out.width * out.height;
  out.data.resize(3 * plane);
  const auto v = image.values();
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      out.data[i * 3 + c] = static_cast<std::uint8_t>(std::lround(std::clamp(v[c * plane + i], 0.0, 1.0) * 255.0));
  return out;
}

LabelMap pnm_to_labels(const PnmImage& image, const std::filesystem::path& origin) {
  if (image.channels != 1) throw FormatError("label map '" + origin.string() + "' must be a P5 image");
  LabelMap out(image.height, image.width);
  for (std::size_t i = 0; i < out.size(); ++i) out.labels[i] = image.data[i];
  return out;
}

PnmImage labels_to_pgm(const LabelMap& labels) {
  PnmImage out{labels.width, labels.height, 1, 255, std::vector<std::uint8_t>(labels.size())};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = labels.labels[i];
    if (v < 0 || v > 255) throw std::out_of_range("labels_to_pgm: class id " + std::to_string(v) + " does not fit a byte");
    out.data[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

std::vector<DatasetItem> load_paired_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<DatasetItem> items;
  const fs::path images = dir / "images";
  if (!fs::is_directory(images)) return items;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });
  for (const auto& file : files) {
    DatasetItem item;
    item.stem = file.stem().string();
    const auto pnm = read_pnm(file);
    item.image = pnm_to_tensor(pnm);
    const fs::path label_path = dir / "labels" / (item.stem + ".pgm");
    if (fs::exists(label_path)) {
      auto label = pnm_to_labels(read_pnm(label_path), label_path);
      if (label.height != pnm.height || label.width != pnm.width) {
        throw FormatError("size mismatch between '" + file.string() + "' and '" + label_path.string() + "'");
      }
      item.label = std::move(label);
    }
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace elda::data
