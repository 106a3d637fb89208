#include "measurenet/ingest.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace measurenet {

namespace {

constexpr std::uint32_t kImagesMagic = 2051;  // 0x00000803
constexpr std::uint32_t kLabelsMagic = 2049;  // 0x00000801

class GzReader {
 public:
  explicit GzReader(const std::string& path) : path_(path) {
    file_ = gzopen(path.c_str(), "rb");
    if (file_ == nullptr) throw IdxError("cannot open '" + path + "'");
  }
  ~GzReader() {
    if (file_ != nullptr) gzclose(file_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  void read_exact(void* dst, std::size_t n, const char* what) {
    std::size_t got = 0;
    auto* out = static_cast<unsigned char*>(dst);
    while (got < n) {
      const unsigned chunk = static_cast<unsigned>(
          std::min<std::size_t>(n - got, 1u << 24));
      const int r = gzread(file_, out + got, chunk);
      if (r < 0) throw IdxError("read error in '" + path_ + "'");
      if (r == 0) {
        throw IdxTruncated("'" + path_ + "' truncated at byte " +
                               std::to_string(offset_ + got) + " while reading " + what,
                           offset_ + got);
      }
      got += static_cast<std::size_t>(r);
    }
    offset_ += n;
  }

  std::uint32_t read_be_u32(const char* what) {
    unsigned char b[4];
    read_exact(b, 4, what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
  }

  bool at_end() {
    unsigned char probe;
    const int r = gzread(file_, &probe, 1);
    return r == 0;
  }

 private:
  std::string path_;
  gzFile file_ = nullptr;
  std::size_t offset_ = 0;
};

}  // namespace

IdxFile parse_idx(const std::string& path) {
  GzReader in(path);
  const std::uint32_t magic = in.read_be_u32("magic word");
  IdxFile out;
  if (magic == kImagesMagic) {
    out.kind = IdxKind::images;
    out.count = in.read_be_u32("image count");
    out.rows = in.read_be_u32("row count");
    out.cols = in.read_be_u32("column count");
    if (out.rows == 0 || out.cols == 0 || out.rows > 4096 || out.cols > 4096 ||
        out.count > 100000000)
      throw IdxDimensionMismatch("'" + path + "': implausible image dimensions " +
                                 std::to_string(out.count) + " x " +
                                 std::to_string(out.rows) + " x " +
                                 std::to_string(out.cols));
    out.bytes.resize(out.count * out.rows * out.cols);
    if (!out.bytes.empty()) in.read_exact(out.bytes.data(), out.bytes.size(), "pixel data");
  } else if (magic == kLabelsMagic) {
    out.kind = IdxKind::labels;
    out.count = in.read_be_u32("label count");
    if (out.count > 100000000)
      throw IdxDimensionMismatch("'" + path + "': implausible label count " +
                                 std::to_string(out.count));
    out.bytes.resize(out.count);
    if (!out.bytes.empty()) in.read_exact(out.bytes.data(), out.bytes.size(), "label data");
    for (std::size_t i = 0; i < out.bytes.size(); ++i)
      if (out.bytes[i] > 9)
        throw IdxError("'" + path + "': label value " + std::to_string(out.bytes[i]) +
                       " at index " + std::to_string(i) + " is out of range 0-9");
  } else {
    throw IdxBadMagic("'" + path + "': magic word " + std::to_string(magic) +
                      " is neither 2051 (images) nor 2049 (labels)");
  }
  if (!in.at_end())
    throw IdxDimensionMismatch("'" + path + "': trailing bytes after the declared payload");
  return out;
}

namespace {

void normalize_column(Matrix& pts, std::size_t col, CloudNorm norm) {
  const std::size_t m = pts.rows;
  if (norm == CloudNorm::standardize) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += pts(i, col);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = pts(i, col) - mean;
      var += d * d;
    }
    var /= static_cast<double>(m);
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < m; ++i) {
      const double centered = pts(i, col) - mean;
      pts(i, col) = sd > 0.0 ? centered / sd : 0.0;
    }
  } else {
    double lo = pts(0, col), hi = pts(0, col);
    for (std::size_t i = 1; i < m; ++i) {
      lo = std::min(lo, pts(i, col));
      hi = std::max(hi, pts(i, col));
    }
    const double span = hi - lo;
    for (std::size_t i = 0; i < m; ++i)
      pts(i, col) = span > 0.0 ? (pts(i, col) - lo) / span : 0.0;
  }
}

}  // namespace

PointCloud image_to_pointcloud(const std::uint8_t* pixels, std::size_t rows,
                               std::size_t cols, int label, Rng& rng,
                               double threshold, std::size_t max_points,
                               CloudNorm norm) {
  if (max_points == 0)
    throw std::invalid_argument("image_to_pointcloud: max_points must be >= 1");
  struct Pixel {
    double r, c, t;
    std::size_t raster;
  };
  std::vector<Pixel> alive;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double t = static_cast<double>(pixels[r * cols + c]) / 255.0;
      if (t > threshold)
        alive.push_back({static_cast<double>(r), static_cast<double>(c), t, r * cols + c});
    }
  if (alive.empty())
    throw std::domain_error("image_to_pointcloud: blank image, no pixel above threshold");

  PointCloud cloud;
  cloud.label = label;
  cloud.points = Matrix(max_points, 3);
  if (alive.size() >= max_points) {
    std::sort(alive.begin(), alive.end(), [](const Pixel& a, const Pixel& b) {
      if (a.t != b.t) return a.t > b.t;
      return a.raster < b.raster;
    });
    for (std::size_t i = 0; i < max_points; ++i) {
      cloud.points(i, 0) = alive[i].r;
      cloud.points(i, 1) = alive[i].c;
      cloud.points(i, 2) = alive[i].t;
    }
  } else {
    // Fewer survivors than requested: every output point is drawn uniformly
    // from the survivors, with repetition.
    for (std::size_t i = 0; i < max_points; ++i) {
      std::size_t pick = static_cast<std::size_t>(rng.uniform() *
                                                  static_cast<double>(alive.size()));
      if (pick >= alive.size()) pick = alive.size() - 1;
      cloud.points(i, 0) = alive[pick].r;
      cloud.points(i, 1) = alive[pick].c;
      cloud.points(i, 2) = alive[pick].t;
    }
  }
  normalize_column(cloud.points, 0, norm);
  normalize_column(cloud.points, 1, norm);
  return cloud;
}

}  // namespace measurenet
