#include "mrfp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mrfp/image_io.hpp"
#include "mrfp/rng.hpp"

namespace mrfp {

namespace {

constexpr std::uint64_t kTagSample = 0x736d70;
constexpr double kPi = 3.14159265358979323846;

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h -= std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0.0, g = 0.0, b = 0.0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

// scalar texture field in roughly [-1, 1]
std::vector<double> texture_field(const DomainSpec& spec, int h, int w, Rng& rng) {
  std::vector<double> t(static_cast<std::size_t>(h) * w, 0.0);
  switch (spec.texture_family) {
    case 0: {  // mixture of oriented sinusoids
      for (int s = 0; s < 4; ++s) {
        const double f = rng.uniform(spec.texture_freq_lo, spec.texture_freq_hi);
        const double th = rng.uniform(0.0, 2.0 * kPi);
        const double ph = rng.uniform(0.0, 2.0 * kPi);
        const double fx = f * std::cos(th), fy = f * std::sin(th);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            t[static_cast<std::size_t>(y) * w + x] +=
                0.25 * std::sin(2.0 * kPi * (fx * x / w + fy * y / h) + ph);
      }
      break;
    }
    case 1: {  // two-octave value noise
      for (int octave = 0; octave < 2; ++octave) {
        const double scale = octave == 0 ? 1.0 : 0.5;
        int cells = static_cast<int>(
            std::lround(rng.uniform(spec.texture_freq_lo, spec.texture_freq_hi)) *
            (octave + 1));
        if (cells < 1) cells = 1;
        std::vector<double> grid(static_cast<std::size_t>(cells + 1) * (cells + 1));
        for (auto& g : grid) g = rng.uniform(-1.0, 1.0);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const double gy = static_cast<double>(y) / h * cells;
            const double gx = static_cast<double>(x) / w * cells;
            const int y0 = static_cast<int>(gy), x0 = static_cast<int>(gx);
            const double fy = gy - y0, fx = gx - x0;
            const auto at = [&](int yy, int xx) {
              return grid[static_cast<std::size_t>(yy) * (cells + 1) + xx];
            };
            const double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                             fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
            t[static_cast<std::size_t>(y) * w + x] += scale * v / 1.5;
          }
      }
      break;
    }
    default: {  // oriented stripes
      const double f = rng.uniform(spec.texture_freq_lo, spec.texture_freq_hi);
      const double th = rng.uniform(0.0, kPi);
      const double ph = rng.uniform(0.0, 2.0 * kPi);
      const double inv = 1.0 / std::max(h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          t[static_cast<std::size_t>(y) * w + x] = std::sin(
              2.0 * kPi * f * (x * std::cos(th) + y * std::sin(th)) * inv + ph);
      break;
    }
  }
  return t;
}

// class hue anchors: disk, rectangle, triangle, stripes
constexpr double kClassHue[5] = {0.30, 0.02, 0.62, 0.12, 0.85};

// separable 5-tap binomial blur with clamped edges; a small camera-style
// point spread so composited scenes are band-limited like photographs
void psf_blur(Tensor& img) {
  const int h = img.h(), w = img.w();
  const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  std::vector<double> line(std::max(h, w));
  for (int c = 0; c < img.c(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) line[x] = img.at(0, c, y, x);
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int t = -2; t <= 2; ++t)
          acc += k[t + 2] * line[std::clamp(x + t, 0, w - 1)];
        img.at(0, c, y, x) = acc;
      }
    }
    for (int x = 0; x < w; ++x) {
      for (int y = 0; y < h; ++y) line[y] = img.at(0, c, y, x);
      for (int y = 0; y < h; ++y) {
        double acc = 0.0;
        for (int t = -2; t <= 2; ++t)
          acc += k[t + 2] * line[std::clamp(y + t, 0, h - 1)];
        img.at(0, c, y, x) = acc;
      }
    }
  }
}

Sample generate_sample(const DomainSpec& spec, std::int64_t index, int h, int w) {
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index), kTagSample));
  Sample s;
  s.image = Tensor(1, 3, h, w);
  s.mask = LabelMap(1, h, w);

  // background
  const double bg_hue = kClassHue[0] + spec.palette_shift + rng.uniform(-0.02, 0.02);
  const Rgb bg = hsv_to_rgb(bg_hue, rng.uniform(0.25, 0.45), rng.uniform(0.45, 0.65));
  const double wr = rng.uniform(0.8, 1.2), wg = rng.uniform(0.8, 1.2),
               wb = rng.uniform(0.8, 1.2);
  const std::vector<double> tex = texture_field(spec, h, w, rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double t = spec.texture_amp * tex[static_cast<std::size_t>(y) * w + x];
      s.image.at(0, 0, y, x) = bg.r + t * wr;
      s.image.at(0, 1, y, x) = bg.g + t * wg;
      s.image.at(0, 2, y, x) = bg.b + t * wb;
    }

  // objects, later ones painted over earlier ones
  const int min_side = std::min(h, w);
  const std::int64_t n_obj = rng.uniform_int(2, 5);
  for (std::int64_t o = 0; o < n_obj; ++o) {
    const int cls = static_cast<int>(rng.uniform_int(1, 4));
    const double hue = kClassHue[cls] + spec.palette_shift + rng.uniform(-0.03, 0.03);
    const double sat = rng.uniform(0.55, 0.90);
    const double val = rng.uniform(0.55, 0.95);
    const Rgb col = hsv_to_rgb(hue, sat, val);
    const double cx = rng.uniform(0.15, 0.85) * w;
    const double cy = rng.uniform(0.15, 0.85) * h;

    auto paint = [&](int y, int x, const Rgb& c) {
      const double t = 1.0 + 0.4 * spec.texture_amp * tex[static_cast<std::size_t>(y) * w + x];
      s.image.at(0, 0, y, x) = c.r * t;
      s.image.at(0, 1, y, x) = c.g * t;
      s.image.at(0, 2, y, x) = c.b * t;
      s.mask.at(0, y, x) = cls;
    };

    if (cls == 1) {  // disk
      const double r = rng.uniform(0.08, 0.20) * min_side;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) paint(y, x, col);
    } else if (cls == 2) {  // rotated rectangle
      const double hw = rng.uniform(0.08, 0.20) * min_side;
      const double hh = rng.uniform(0.08, 0.20) * min_side;
      const double th = rng.uniform(0.0, kPi);
      const double ct = std::cos(th), st = std::sin(th);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double u = (x - cx) * ct + (y - cy) * st;
          const double v = -(x - cx) * st + (y - cy) * ct;
          if (std::fabs(u) <= hw && std::fabs(v) <= hh) paint(y, x, col);
        }
    } else if (cls == 3) {  // triangle
      const double r = rng.uniform(0.10, 0.22) * min_side;
      const double th = rng.uniform(0.0, 2.0 * kPi);
      double vx[3], vy[3];
      for (int i = 0; i < 3; ++i) {
        vx[i] = cx + r * std::cos(th + 2.0 * kPi * i / 3.0);
        vy[i] = cy + r * std::sin(th + 2.0 * kPi * i / 3.0);
      }
      auto cross = [&](int i, int j, double px, double py) {
        return (vx[j] - vx[i]) * (py - vy[i]) - (vy[j] - vy[i]) * (px - vx[i]);
      };
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double c0 = cross(0, 1, x, y), c1 = cross(1, 2, x, y), c2 = cross(2, 0, x, y);
          if ((c0 >= 0 && c1 >= 0 && c2 >= 0) || (c0 <= 0 && c1 <= 0 && c2 <= 0))
            paint(y, x, col);
        }
    } else {  // stripe-filled region
      const double hw = rng.uniform(0.10, 0.22) * min_side;
      const double hh = rng.uniform(0.10, 0.22) * min_side;
      const double th = rng.uniform(0.0, kPi);
      const double ts = rng.uniform(0.0, kPi);
      const double period = rng.uniform(3.0, 6.0);
      const Rgb col2 = hsv_to_rgb(hue, sat, val * 0.45);
      const double ct = std::cos(th), st = std::sin(th);
      const double cs = std::cos(ts), ss = std::sin(ts);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double u = (x - cx) * ct + (y - cy) * st;
          const double v = -(x - cx) * st + (y - cy) * ct;
          if (std::fabs(u) > hw || std::fabs(v) > hh) continue;
          const double phase = std::floor((x * cs + y * ss) / period);
          paint(y, x, std::fmod(phase, 2.0) == 0.0 ? col : col2);
        }
    }
  }

  psf_blur(s.image);

  // channel statistics shift
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double v = 0.5 + (s.image.at(0, c, y, x) - 0.5) * spec.color_std_scale[c] +
                   spec.color_mean_shift[c];
        s.image.at(0, c, y, x) = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      }
  }

  // corruption, applied after composition; labels stay untouched
  if (spec.corruption == Corruption::kFogBlend && spec.corruption_strength > 0.0) {
    const double q = spec.corruption_strength;
    const Rgb fog{0.72, 0.72, 0.75};
    const double fv[3] = {fog.r, fog.g, fog.b};
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) mean += s.image.at(0, c, y, x);
      mean /= static_cast<double>(h) * w;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double contrast = mean + (s.image.at(0, c, y, x) - mean) * (1.0 - 0.5 * q);
          s.image.at(0, c, y, x) = (1.0 - q) * contrast + q * fv[c];
        }
    }
  } else if (spec.corruption == Corruption::kRainStreaks && spec.corruption_strength > 0.0) {
    const double q = spec.corruption_strength;
    const double base_angle = 0.3 + rng.uniform(-0.35, 0.35);
    const auto count = static_cast<std::int64_t>(std::lround(q * h * w / 56.0));
    for (std::int64_t i = 0; i < count; ++i) {
      const double x0 = rng.uniform(0.0, w);
      const double y0 = rng.uniform(0.0, h);
      const double angle = base_angle + rng.uniform(-0.05, 0.05);
      const double len = rng.uniform(0.12, 0.25) * h;
      const double bright = rng.uniform(0.20, 0.45);
      const double dy = std::cos(angle), dx = std::sin(angle);
      for (double t = 0.0; t < len; t += 1.0) {
        const int y = static_cast<int>(std::lround(y0 + t * dy));
        const int x = static_cast<int>(std::lround(x0 + t * dx));
        if (y < 0 || y >= h || x < 0 || x >= w - 1) continue;
        for (int c = 0; c < 3; ++c) {
          const double v = s.image.at(0, c, y, x) + bright;
          s.image.at(0, c, y, x) = v > 1.0 ? 1.0 : v;
          const double v2 = s.image.at(0, c, y, x + 1) + 0.5 * bright;
          s.image.at(0, c, y, x + 1) = v2 > 1.0 ? 1.0 : v2;
        }
      }
    }
  }
  return s;
}

}  // namespace

std::string to_string(Corruption c) {
  switch (c) {
    case Corruption::kNone: return "none";
    case Corruption::kFogBlend: return "fog";
    case Corruption::kRainStreaks: return "rain";
  }
  throw std::logic_error("to_string: bad corruption");
}

Corruption parse_corruption(const std::string& s) {
  if (s == "none") return Corruption::kNone;
  if (s == "fog") return Corruption::kFogBlend;
  if (s == "rain") return Corruption::kRainStreaks;
  throw std::invalid_argument("unknown corruption: " + s);
}

void DomainSpec::validate() const {
  if (texture_family < 0 || texture_family > 2)
    throw std::invalid_argument("DomainSpec: texture_family must be 0..2");
  if (!(texture_freq_lo > 0.0) || texture_freq_hi < texture_freq_lo)
    throw std::invalid_argument("DomainSpec: bad texture frequency range");
  if (!(texture_amp >= 0.0)) throw std::invalid_argument("DomainSpec: negative texture_amp");
  if (corruption_strength < 0.0 || corruption_strength > 1.0)
    throw std::invalid_argument("DomainSpec: corruption_strength must be in [0,1]");
}

std::vector<Sample> generate_dataset(const DomainSpec& spec, int count, int height,
                                     int width, std::int64_t index_offset) {
  spec.validate();
  if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
  if (height < 8 || width < 8)
    throw std::invalid_argument("generate_dataset: images smaller than 8x8");
  std::vector<Sample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i)
    out.push_back(generate_sample(spec, index_offset + i, height, width));
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_dataset(const std::string& dir, const DomainSpec& spec, int height, int width,
                  const std::vector<Sample>& samples) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");

  std::ofstream os(fs::path(dir) / "manifest.txt");
  if (!os) throw std::runtime_error("save_dataset: cannot write manifest in " + dir);
  os << "name = " << spec.name << '\n'
     << "texture_family = " << spec.texture_family << '\n'
     << "freq_lo = " << fmt_double(spec.texture_freq_lo) << '\n'
     << "freq_hi = " << fmt_double(spec.texture_freq_hi) << '\n'
     << "texture_amp = " << fmt_double(spec.texture_amp) << '\n'
     << "color_mean_shift = " << fmt_double(spec.color_mean_shift[0]) << ','
     << fmt_double(spec.color_mean_shift[1]) << ',' << fmt_double(spec.color_mean_shift[2])
     << '\n'
     << "color_std_scale = " << fmt_double(spec.color_std_scale[0]) << ','
     << fmt_double(spec.color_std_scale[1]) << ',' << fmt_double(spec.color_std_scale[2])
     << '\n'
     << "palette_shift = " << fmt_double(spec.palette_shift) << '\n'
     << "corruption = " << to_string(spec.corruption) << '\n'
     << "corruption_strength = " << fmt_double(spec.corruption_strength) << '\n'
     << "seed = " << spec.seed << '\n'
     << "count = " << samples.size() << '\n'
     << "height = " << height << '\n'
     << "width = " << width << '\n';

  char name[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(name, sizeof(name), "%05zu", i);
    write_ppm((fs::path(dir) / "images" / (std::string(name) + ".ppm")).string(),
              samples[i].image);
    write_pgm((fs::path(dir) / "masks" / (std::string(name) + ".pgm")).string(),
              samples[i].mask);
  }
}

DomainSpec read_manifest(const std::string& dir, int* count, int* height, int* width) {
  namespace fs = std::filesystem;
  std::ifstream is(fs::path(dir) / "manifest.txt");
  if (!is) throw std::runtime_error("read_manifest: cannot open manifest in " + dir);
  DomainSpec spec;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
    };
    trim(key);
    trim(val);
    if (key == "name") spec.name = val;
    else if (key == "texture_family") spec.texture_family = std::stoi(val);
    else if (key == "freq_lo") spec.texture_freq_lo = std::stod(val);
    else if (key == "freq_hi") spec.texture_freq_hi = std::stod(val);
    else if (key == "texture_amp") spec.texture_amp = std::stod(val);
    else if (key == "color_mean_shift" || key == "color_std_scale") {
      std::array<double, 3> a{};
      std::stringstream ss(val);
      std::string part;
      for (int i = 0; i < 3 && std::getline(ss, part, ','); ++i) a[i] = std::stod(part);
      if (key == "color_mean_shift") spec.color_mean_shift = a;
      else spec.color_std_scale = a;
    } else if (key == "palette_shift") spec.palette_shift = std::stod(val);
    else if (key == "corruption") spec.corruption = parse_corruption(val);
    else if (key == "corruption_strength") spec.corruption_strength = std::stod(val);
    else if (key == "seed") spec.seed = std::stoull(val);
    else if (key == "count" && count) *count = std::stoi(val);
    else if (key == "height" && height) *height = std::stoi(val);
    else if (key == "width" && width) *width = std::stoi(val);
  }
  return spec;
}

std::vector<Sample> load_dataset(const std::string& dir) {
  int count = 0, height = 0, width = 0;
  const DomainSpec spec = read_manifest(dir, &count, &height, &width);
  if (count < 1 || height < 1 || width < 1)
    throw std::runtime_error("load_dataset: manifest missing count/size in " + dir);
  return generate_dataset(spec, count, height, width);
}

}  // namespace mrfp
