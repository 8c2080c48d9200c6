#include "lovme/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "lovme/errors.hpp"
#include "lovme/rng.hpp"
#include "lovme/util.hpp"

namespace lovme {

void validate(const Dataset& data) {
  if (data.samples.empty()) throw ParamError("dataset is empty");
  if (data.class_count < 2) throw ParamError("dataset class_count must be >= 2");
  const std::size_t d = data.samples.front().features.size();
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const Sample& s = data.samples[i];
    if (s.features.size() != d)
      throw ShapeError("sample " + std::to_string(i) +
                       ": feature dimension mismatch");
    if (s.label >= data.class_count)
      throw ParamError("sample " + std::to_string(i) + ": label out of range");
    for (double f : s.features)
      if (!std::isfinite(f))
        throw NumericError("sample " + std::to_string(i) +
                           ": non-finite feature");
  }
}

namespace {

double parse_double_field(const std::string& field, std::size_t line_no) {
  double v = 0.0;
  const char* b = field.data();
  const char* e = b + field.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e)
    throw FormatError("csv line " + std::to_string(line_no) +
                      ": bad numeric field '" + field + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

Dataset load_csv(const std::string& path, std::size_t class_count) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("csv has no header: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_csv_line(line);
  if (header.empty() || header[0] != "label")
    throw FormatError("csv header must start with 'label': " + path);
  const std::size_t dim = header.size() - 1;
  for (std::size_t i = 0; i < dim; ++i) {
    const std::string want = "f" + std::to_string(i);
    if (header[i + 1] != want)
      throw FormatError("csv header column " + std::to_string(i + 1) +
                        " is '" + header[i + 1] + "', expected '" + want + "'");
  }

  Dataset data;
  std::size_t max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != dim + 1)
      throw FormatError("csv line " + std::to_string(line_no) + ": expected " +
                        std::to_string(dim + 1) + " fields, got " +
                        std::to_string(fields.size()));
    Sample s;
    const double lab = parse_double_field(fields[0], line_no);
    if (lab < 0 || lab != std::floor(lab))
      throw FormatError("csv line " + std::to_string(line_no) +
                        ": label must be a nonnegative integer");
    s.label = static_cast<std::size_t>(lab);
    max_label = std::max(max_label, s.label);
    s.features.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i)
      s.features.push_back(parse_double_field(fields[i + 1], line_no));
    data.samples.push_back(std::move(s));
  }
  data.class_count = class_count ? class_count : max_label + 1;
  if (data.class_count < 2) data.class_count = 2;
  validate(data);
  return data;
}

void save_csv(const std::string& path, const Dataset& data) {
  validate(data);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write csv: " + path);
  out << "label";
  for (std::size_t i = 0; i < data.feature_dim(); ++i) out << ",f" << i;
  out << "\n";
  for (const Sample& s : data.samples) {
    out << s.label;
    for (double f : s.features) out << "," << format_double(f);
    out << "\n";
  }
}

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803u;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801u;

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path,
                          std::size_t offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4)
    throw FormatError("truncated idx file " + path + " at byte " +
                      std::to_string(offset));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("cannot open idx images: " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("cannot open idx labels: " + labels_path);

  const std::uint32_t img_magic = read_u32_be(img, images_path, 0);
  if (img_magic != kIdxImagesMagic)
    throw FormatError("bad idx image magic at byte 0 in " + images_path);
  const std::uint32_t n_img = read_u32_be(img, images_path, 4);
  const std::uint32_t rows = read_u32_be(img, images_path, 8);
  const std::uint32_t cols = read_u32_be(img, images_path, 12);
  if (rows == 0 || cols == 0)
    throw FormatError("zero image dims at byte 8 in " + images_path);

  const std::uint32_t lab_magic = read_u32_be(lab, labels_path, 0);
  if (lab_magic != kIdxLabelsMagic)
    throw FormatError("bad idx label magic at byte 0 in " + labels_path);
  const std::uint32_t n_lab = read_u32_be(lab, labels_path, 4);
  if (n_img != n_lab)
    throw FormatError("idx count mismatch: " + std::to_string(n_img) +
                      " images vs " + std::to_string(n_lab) + " labels");

  std::size_t n = n_img;
  if (limit > 0) n = std::min<std::size_t>(n, limit);
  const std::size_t pix = std::size_t(rows) * cols;

  Dataset data;
  data.samples.reserve(n);
  std::vector<unsigned char> buf(pix);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(pix));
    if (img.gcount() != static_cast<std::streamsize>(pix))
      throw FormatError("truncated idx image data at byte " +
                        std::to_string(16 + i * pix) + " in " + images_path);
    unsigned char y = 0;
    lab.read(reinterpret_cast<char*>(&y), 1);
    if (lab.gcount() != 1)
      throw FormatError("truncated idx label data at byte " +
                        std::to_string(8 + i) + " in " + labels_path);
    Sample s;
    s.features.resize(pix);
    for (std::size_t j = 0; j < pix; ++j) s.features[j] = buf[j] / 255.0;
    s.label = y;
    max_label = std::max<std::size_t>(max_label, y);
    data.samples.push_back(std::move(s));
  }
  data.class_count = std::max<std::size_t>(max_label + 1, 2);
  validate(data);
  return data;
}

BlobsResult synth_blobs(std::size_t n, std::size_t classes, double noise_sigma,
                        double label_noise_rate, std::uint64_t seed) {
  if (classes < 2) throw ParamError("synth_blobs needs at least 2 classes");
  if (n < classes) throw ParamError("synth_blobs needs n >= classes");
  if (!(noise_sigma >= 0.0)) throw ParamError("noise_sigma must be >= 0");
  if (!(label_noise_rate >= 0.0 && label_noise_rate <= 1.0))
    throw ParamError("label_noise_rate must be in [0, 1]");

  constexpr double kRadius = 3.0;
  std::vector<std::array<double, 2>> centers(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const double a = 2.0 * std::numbers::pi * double(c) / double(classes);
    centers[c] = {kRadius * std::cos(a), kRadius * std::sin(a)};
  }

  Rng rng(seed);
  BlobsResult out;
  out.data.class_count = classes;
  out.data.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;  // round-robin keeps classes balanced
    Sample s;
    s.features = {centers[c][0] + noise_sigma * rng.normal01(),
                  centers[c][1] + noise_sigma * rng.normal01()};
    s.label = c;
    out.data.samples.push_back(std::move(s));
  }
  if (label_noise_rate > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform01() < label_noise_rate) {
        const std::size_t shift = 1 + rng.uniform_below(classes - 1);
        out.data.samples[i].label =
            (out.data.samples[i].label + shift) % classes;
        out.noised_ids.push_back(i);
      }
    }
  }
  validate(out.data);
  return out;
}

namespace {

// Bilinear sample with edge clamping.
double sample_bilinear(const std::vector<double>& im, std::size_t side,
                       double r, double c) {
  const double rc = std::clamp(r, 0.0, double(side - 1));
  const double cc = std::clamp(c, 0.0, double(side - 1));
  const std::size_t r0 = static_cast<std::size_t>(std::floor(rc));
  const std::size_t c0 = static_cast<std::size_t>(std::floor(cc));
  const std::size_t r1 = std::min(r0 + 1, side - 1);
  const std::size_t c1 = std::min(c0 + 1, side - 1);
  const double fr = rc - double(r0);
  const double fc = cc - double(c0);
  const double top = im[r0 * side + c0] * (1 - fc) + im[r0 * side + c1] * fc;
  const double bot = im[r1 * side + c0] * (1 - fc) + im[r1 * side + c1] * fc;
  return top * (1 - fr) + bot * fr;
}

}  // namespace

PerturbResult perturb(const Dataset& data, double fraction,
                      double rotation_max_deg, double noise_sigma,
                      std::uint64_t seed) {
  validate(data);
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ParamError("perturb fraction must be in [0, 1]");
  const std::size_t dim = data.feature_dim();
  const std::size_t side = static_cast<std::size_t>(std::llround(std::sqrt(double(dim))));
  if (side * side != dim)
    throw ShapeError("perturb requires square image features, got dim " +
                     std::to_string(dim));

  PerturbResult out;
  out.data = data;
  const std::size_t n = data.size();
  const std::size_t k =
      static_cast<std::size_t>(std::floor(fraction * double(n) + 0.5));
  if (k == 0) return out;

  Rng rng(seed);
  // Partial Fisher-Yates to pick k distinct indices.
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_below(n - i);
    std::swap(idx[i], idx[j]);
  }
  out.perturbed_ids.assign(idx.begin(), idx.begin() + k);
  std::sort(out.perturbed_ids.begin(), out.perturbed_ids.end());

  const double center = (double(side) - 1.0) / 2.0;
  for (std::size_t id : out.perturbed_ids) {
    std::vector<double>& f = out.data.samples[id].features;
    const double deg =
        rotation_max_deg * (2.0 * rng.uniform01() - 1.0);
    if (deg != 0.0) {
      const double a = deg * std::numbers::pi / 180.0;
      const double ca = std::cos(a), sa = std::sin(a);
      std::vector<double> rotated(dim);
      for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
          // inverse map: output pixel pulled from rotated source location
          const double dr = double(r) - center;
          const double dc = double(c) - center;
          const double sr = center + ca * dr + sa * dc;
          const double sc = center - sa * dr + ca * dc;
          rotated[r * side + c] = sample_bilinear(f, side, sr, sc);
        }
      }
      f = std::move(rotated);
    }
    for (double& v : f) {
      v = std::clamp(v + noise_sigma * rng.normal01(), 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace lovme
