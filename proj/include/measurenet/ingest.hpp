#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "measurenet/matrix.hpp"
#include "measurenet/rng.hpp"

namespace measurenet {

struct IdxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Magic word is not 2051 (images) or 2049 (labels).
struct IdxBadMagic : IdxError {
  using IdxError::IdxError;
};
// File ended early; `offset` is the byte position where data ran out.
struct IdxTruncated : IdxError {
  std::size_t offset;
  IdxTruncated(const std::string& msg, std::size_t off) : IdxError(msg), offset(off) {}
};
// Header dimensions disagree with the payload (or are implausible).
struct IdxDimensionMismatch : IdxError {
  using IdxError::IdxError;
};

enum class IdxKind { images, labels };

struct IdxFile {
  IdxKind kind = IdxKind::labels;
  std::size_t count = 0;
  std::size_t rows = 0;  // images only
  std::size_t cols = 0;  // images only
  std::vector<std::uint8_t> bytes;  // count*rows*cols pixels, or count labels

  const std::uint8_t* image(std::size_t i) const { return bytes.data() + i * rows * cols; }
};

// Reads an IDX file of unsigned bytes, big-endian header, transparently
// gunzipping if compressed. Validates the magic word, the dimension counts
// and the payload length, each failure with its own exception type.
IdxFile parse_idx(const std::string& path);

enum class CloudNorm {
  standardize,  // per-cloud, per-coordinate: subtract mean, divide by std
  minmax,       // per-cloud, per-coordinate: map onto [0, 1]
};

struct PointCloud {
  Matrix points;   // max_points x 3 rows of (row, col, intensity)
  int label = -1;  // 0-9 when built from a labeled file
};

// Thresholds the image at intensity > threshold (pixels scaled to [0, 1]),
// keeps the top max_points intensities (ties broken by raster order), and if
// fewer pixels survive draws every output point uniformly from the survivors
// with repetition, so the cloud always has exactly max_points points. Row
// and column coordinates are then normalized per `norm` over the finished
// cloud; intensities are kept as-is. A blank image (no survivor) is a domain
// error.
PointCloud image_to_pointcloud(const std::uint8_t* pixels, std::size_t rows,
                               std::size_t cols, int label, Rng& rng,
                               double threshold = 0.5, std::size_t max_points = 200,
                               CloudNorm norm = CloudNorm::standardize);

}  // namespace measurenet
