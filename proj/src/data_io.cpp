#include "vasis/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace vasis {

namespace {

int to_byte(double v) {
  double mapped = (v + 1.0) * 0.5 * 255.0;
  return std::clamp(static_cast<int>(std::lround(mapped)), 0, 255);
}

double from_byte(int b) { return static_cast<double>(b) / 255.0 * 2.0 - 1.0; }

std::string family_name(SceneFamily f) {
  switch (f) {
    case SceneFamily::stripes: return "stripes";
    case SceneFamily::blobs: return "blobs";
    case SceneFamily::sky_road: return "sky_road";
    case SceneFamily::motif_grid: return "motif_grid";
  }
  return "?";
}

SceneFamily family_from_name(const std::string& s) {
  if (s == "stripes") return SceneFamily::stripes;
  if (s == "blobs") return SceneFamily::blobs;
  if (s == "sky_road") return SceneFamily::sky_road;
  if (s == "motif_grid") return SceneFamily::motif_grid;
  fail(ErrorCategory::config, "unknown scene family: " + s);
}

}  // namespace

void SyntheticSpec::validate() const {
  VASIS_CHECK(num_classes >= 1 && num_classes < 256, validation,
              "num_classes must be in [1,256) for the 8-bit label container");
  VASIS_CHECK(resolution >= 4, validation, "resolution must be >= 4");
  VASIS_CHECK(count >= 1, validation, "count must be >= 1");
  VASIS_CHECK(static_cast<int64_t>(colors.size()) == num_classes, validation,
              "need one base color per class: " << colors.size() << " vs " << num_classes);
  VASIS_CHECK(static_cast<int64_t>(amplitudes.size()) == num_classes, validation,
              "need one texture amplitude per class");
  for (double a : amplitudes)
    VASIS_CHECK(a >= 0.0, validation, "texture amplitude must be >= 0, got " << a);
  for (size_t i = 0; i < colors.size(); ++i)
    for (size_t j = i + 1; j < colors.size(); ++j)
      VASIS_CHECK(colors[i] != colors[j], validation,
                  "base color collision between classes " << i << " and " << j
                      << " (the palette segmenter needs distinct colors)");
  if (family == SceneFamily::sky_road || family == SceneFamily::motif_grid)
    VASIS_CHECK(num_classes == 2, validation,
                family_name(family) << " scenes use exactly 2 classes");
  if (family == SceneFamily::stripes || family == SceneFamily::blobs)
    VASIS_CHECK(count >= num_classes || family == SceneFamily::blobs, validation,
                "stripes needs count >= num_classes so every class appears");
}

Palette SyntheticSpec::palette() const {
  Palette p;
  for (int64_t c = 0; c < num_classes; ++c) {
    p.names.push_back("class" + std::to_string(c));
    p.colors.push_back(colors[static_cast<size_t>(c)]);
  }
  return p;
}

Tensor render_labels(const LabelMap& labels, const SyntheticSpec& spec, RngStream& rng) {
  Tensor img(Shape{labels.batch(), 3, labels.height(), labels.width()});
  for (int64_t b = 0; b < labels.batch(); ++b)
    for (int64_t h = 0; h < labels.height(); ++h)
      for (int64_t w = 0; w < labels.width(); ++w) {
        auto cls = static_cast<size_t>(labels.at(b, h, w));
        double a = spec.amplitudes[cls];
        for (int64_t ch = 0; ch < 3; ++ch) {
          double noise = a > 0.0 ? rng.uniform(-a, a) : 0.0;
          img.at(b, ch, h, w) =
              std::clamp(spec.colors[cls][static_cast<size_t>(ch)] + noise, -1.0, 1.0);
        }
      }
  return img;
}

namespace {

LabelMap make_labels(const SyntheticSpec& spec, int64_t index, RngStream& rng) {
  const int64_t H = spec.resolution, W = spec.resolution, N = spec.num_classes;
  LabelMap labels(1, H, W);
  switch (spec.family) {
    case SceneFamily::stripes: {
      int64_t stripes = std::min<int64_t>(2 + rng.uniform_int(5), W);
      std::vector<int64_t> cuts{0, W};
      while (static_cast<int64_t>(cuts.size()) < stripes + 1) {
        int64_t c = 1 + rng.uniform_int(W - 1);
        if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
      }
      std::sort(cuts.begin(), cuts.end());
      int64_t start = index % N;  // guarantees class (index mod N) appears
      for (size_t s = 0; s + 1 < cuts.size(); ++s) {
        auto cls = static_cast<int32_t>((start + static_cast<int64_t>(s)) % N);
        for (int64_t h = 0; h < H; ++h)
          for (int64_t w = cuts[s]; w < cuts[s + 1]; ++w) labels.at(0, h, w) = cls;
      }
      break;
    }
    case SceneFamily::blobs: {
      // Voronoi over one site per class (so every class appears) plus extras.
      int64_t extra = rng.uniform_int(N + 1);
      std::vector<std::array<int64_t, 2>> sites;
      std::vector<int32_t> site_class;
      for (int64_t c = 0; c < N + extra; ++c) {
        sites.push_back({rng.uniform_int(H), rng.uniform_int(W)});
        site_class.push_back(static_cast<int32_t>(c % N));
      }
      for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) {
          int64_t best = 0;
          int64_t best_d = -1;
          for (size_t s = 0; s < sites.size(); ++s) {
            int64_t dh = h - sites[s][0], dw = w - sites[s][1];
            int64_t d = dh * dh + dw * dw;
            if (best_d < 0 || d < best_d) {
              best_d = d;
              best = static_cast<int64_t>(s);
            }
          }
          labels.at(0, h, w) = site_class[static_cast<size_t>(best)];
        }
      break;
    }
    case SceneFamily::sky_road: {
      // Two horizontal bands split at a seeded height in the middle third.
      // The split snaps to the H/8 lattice so the boundary falls on cell
      // edges of every layout downsample with stride <= H/8 (the label
      // pyramid stays self-consistent across generator scales).
      int64_t step = std::max<int64_t>(1, H / 8);
      int64_t lo = std::max<int64_t>(1, (3 * H) / 10);
      int64_t hi = std::min<int64_t>(H - 1, (7 * H) / 10);
      int64_t first = ((lo + step - 1) / step) * step;
      int64_t choices = std::max<int64_t>(1, (hi - first) / step + 1);
      int64_t split = first + step * rng.uniform_int(choices);
      split = std::clamp<int64_t>(split, 1, H - 1);
      for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) labels.at(0, h, w) = h < split ? 0 : 1;
      break;
    }
    case SceneFamily::motif_grid: {
      // Identical square-in-field motifs at controlled offsets.
      const int64_t q = spec.resolution / 4;
      const std::array<std::pair<int64_t, int64_t>, 4> offsets{
          {{q, q}, {q, 2 * q}, {2 * q, q}, {2 * q, 2 * q}}};
      auto [oh, ow] = offsets[static_cast<size_t>(index % 4)];
      const int64_t m = spec.resolution / 4;  // motif side
      for (int64_t h = m / 4; h < (3 * m) / 4; ++h)
        for (int64_t w = m / 4; w < (3 * m) / 4; ++w)
          labels.at(0, oh + h, ow + w) = 1;
      break;
    }
  }
  return labels;
}

}  // namespace

std::vector<Sample> generate_dataset(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(spec.count));
  for (int64_t i = 0; i < spec.count; ++i) {
    RngStream rng = RngStream(spec.seed, streams::kData).child(static_cast<uint64_t>(i));
    Sample s;
    s.labels = make_labels(spec, i, rng);
    s.image = render_labels(s.labels, spec, rng);
    out.push_back(std::move(s));
  }
  // Contract: every requested class appears somewhere.
  std::vector<bool> seen(static_cast<size_t>(spec.num_classes), false);
  for (const Sample& s : out)
    for (int32_t v : s.labels.raw()) seen[static_cast<size_t>(v)] = true;
  for (int64_t c = 0; c < spec.num_classes; ++c)
    VASIS_CHECK(seen[static_cast<size_t>(c)], validation,
                "class " << c << " appears in no sample; increase count");
  return out;
}

void save_label_map(const LabelMap& labels, const std::string& path, const Palette& palette) {
  VASIS_CHECK(labels.batch() == 1, validation, "label map files hold a single sample");
  for (int32_t v : labels.raw())
    VASIS_CHECK(v >= 0 && v < 256, validation,
                "label " << v << " does not fit the 8-bit container");
  std::ofstream f(path, std::ios::binary);
  VASIS_CHECK(f.good(), io, "cannot write label map: " << path);
  f << "P5\n" << labels.width() << " " << labels.height() << "\n255\n";
  for (int32_t v : labels.raw()) f.put(static_cast<char>(v));
  VASIS_CHECK(f.good(), io, "write failed: " << path);
  f.close();

  std::ofstream s(path + ".palette.txt");
  VASIS_CHECK(s.good(), io, "cannot write palette sidecar: " << path << ".palette.txt");
  for (size_t c = 0; c < palette.colors.size(); ++c) {
    s << c << " " << palette.names[c] << " " << to_byte(palette.colors[c][0]) << " "
      << to_byte(palette.colors[c][1]) << " " << to_byte(palette.colors[c][2]) << "\n";
  }
}

namespace {

void read_pnm_header(std::ifstream& f, const std::string& path, const char* magic, int64_t& w,
                     int64_t& h) {
  std::string m;
  int maxval = 0;
  f >> m >> w >> h >> maxval;
  VASIS_CHECK(f.good() && m == magic && maxval == 255 && w >= 1 && h >= 1, io,
              "malformed " << magic << " header in " << path);
  f.get();  // single whitespace after maxval
}

}  // namespace

LabelMap load_label_map(const std::string& path, Palette* palette_out) {
  std::ifstream f(path, std::ios::binary);
  VASIS_CHECK(f.good(), io, "cannot open label map: " << path);
  int64_t w = 0, h = 0;
  read_pnm_header(f, path, "P5", w, h);
  LabelMap labels(1, h, w);
  for (int64_t i = 0; i < h * w; ++i) {
    int c = f.get();
    VASIS_CHECK(c != EOF, io, "truncated label map: " << path);
    labels.raw()[static_cast<size_t>(i)] = static_cast<int32_t>(c);
  }

  const std::string sidecar = path + ".palette.txt";
  std::ifstream s(sidecar);
  VASIS_CHECK(s.good(), io, "missing palette sidecar: expected " << sidecar);
  if (palette_out) {
    palette_out->names.clear();
    palette_out->colors.clear();
    size_t idx;
    std::string name;
    int r, g, b;
    while (s >> idx >> name >> r >> g >> b) {
      VASIS_CHECK(idx == palette_out->names.size(), io,
                  "malformed palette sidecar (bad index order): " << sidecar);
      palette_out->names.push_back(name);
      palette_out->colors.push_back({from_byte(r), from_byte(g), from_byte(b)});
    }
    VASIS_CHECK(!palette_out->names.empty(), io, "empty palette sidecar: " << sidecar);
  }
  return labels;
}

void save_image_ppm(const Tensor& image, const std::string& path) {
  const Shape s = image.shape();
  VASIS_CHECK(s.b == 1 && s.c == 3, validation,
              "save_image_ppm expects (1,3,H,W), got " << s.str());
  std::ofstream f(path, std::ios::binary);
  VASIS_CHECK(f.good(), io, "cannot write image: " << path);
  f << "P6\n" << s.w << " " << s.h << "\n255\n";
  for (int64_t h = 0; h < s.h; ++h)
    for (int64_t w = 0; w < s.w; ++w)
      for (int64_t c = 0; c < 3; ++c) f.put(static_cast<char>(to_byte(image.at(0, c, h, w))));
  VASIS_CHECK(f.good(), io, "write failed: " << path);
}

Tensor load_image_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  VASIS_CHECK(f.good(), io, "cannot open image: " << path);
  int64_t w = 0, h = 0;
  read_pnm_header(f, path, "P6", w, h);
  Tensor img(Shape{1, 3, h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        int b = f.get();
        VASIS_CHECK(b != EOF, io, "truncated image: " << path);
        img.at(0, c, y, x) = from_byte(b);
      }
  return img;
}

void save_image_grid(const std::vector<Tensor>& images, const std::string& path,
                     int64_t columns) {
  VASIS_CHECK(!images.empty(), validation, "save_image_grid needs >= 1 image");
  VASIS_CHECK(columns >= 1, validation, "columns must be >= 1");
  const Shape s = images.front().shape();
  for (const Tensor& t : images)
    VASIS_CHECK(t.shape() == s, validation, "grid images must share one shape");
  const int64_t n = static_cast<int64_t>(images.size());
  const int64_t cols = std::min(columns, n);
  const int64_t rows = (n + cols - 1) / cols;
  Tensor canvas(Shape{1, 3, rows * s.h, cols * s.w}, -1.0);
  for (int64_t i = 0; i < n; ++i) {
    const int64_t r = i / cols, col = i % cols;
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t h = 0; h < s.h; ++h)
        for (int64_t w = 0; w < s.w; ++w)
          canvas.at(0, c, r * s.h + h, col * s.w + w) = images[static_cast<size_t>(i)].at(0, c, h, w);
  }
  save_image_ppm(canvas, path);
}

namespace {

std::string sample_name(int64_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05lld", static_cast<long long>(i));
  return buf;
}

nlohmann::json spec_to_json(const SyntheticSpec& spec) {
  nlohmann::json j;
  j["family"] = family_name(spec.family);
  j["num_classes"] = spec.num_classes;
  j["resolution"] = spec.resolution;
  j["count"] = spec.count;
  j["seed"] = spec.seed;
  j["colors"] = spec.colors;
  j["amplitudes"] = spec.amplitudes;
  return j;
}

SyntheticSpec spec_from_json(const nlohmann::json& j) {
  SyntheticSpec spec;
  spec.family = family_from_name(j.at("family").get<std::string>());
  spec.num_classes = j.at("num_classes").get<int64_t>();
  spec.resolution = j.at("resolution").get<int64_t>();
  spec.count = j.at("count").get<int64_t>();
  spec.seed = j.at("seed").get<uint64_t>();
  spec.colors = j.at("colors").get<std::vector<std::array<double, 3>>>();
  spec.amplitudes = j.at("amplitudes").get<std::vector<double>>();
  return spec;
}

}  // namespace

void write_dataset(const SyntheticSpec& spec, const std::string& dir, bool force) {
  spec.validate();
  fs::path root(dir);
  if (fs::exists(root)) {
    VASIS_CHECK(force, io, "dataset directory exists (use --force to overwrite): " << dir);
    fs::remove_all(root);
  }
  fs::create_directories(root / "labels");
  fs::create_directories(root / "images");
  std::vector<Sample> samples = generate_dataset(spec);
  Palette pal = spec.palette();
  for (size_t i = 0; i < samples.size(); ++i) {
    std::string name = sample_name(static_cast<int64_t>(i));
    save_label_map(samples[i].labels, (root / "labels" / (name + ".pgm")).string(), pal);
    save_image_ppm(samples[i].image, (root / "images" / (name + ".ppm")).string());
  }
  std::ofstream m(root / "manifest.json");
  VASIS_CHECK(m.good(), io, "cannot write manifest in " << dir);
  m << spec_to_json(spec).dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  fs::path root(dir);
  std::ifstream m(root / "manifest.json");
  VASIS_CHECK(m.good(), io, "missing dataset manifest: " << (root / "manifest.json").string());
  nlohmann::json j;
  try {
    m >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::io, std::string("malformed manifest: ") + e.what());
  }
  Dataset ds;
  ds.spec = spec_from_json(j);
  for (int64_t i = 0; i < ds.spec.count; ++i) {
    std::string name = sample_name(i);
    Sample s;
    s.labels = load_label_map((root / "labels" / (name + ".pgm")).string());
    s.image = load_image_ppm((root / "images" / (name + ".ppm")).string());
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace vasis
