#include "measurenet/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace measurenet {

const char* class_name(ModelClass c) {
  switch (c) {
    case ModelClass::s1: return "S1";
    case ModelClass::s2: return "S2";
    case ModelClass::s3: return "S3";
    case ModelClass::deepsets_unnormalized: return "DeepSetsUnnormalized";
  }
  throw std::invalid_argument("class_name: bad enum value");
}

ModelClass class_from_name(const std::string& name) {
  if (name == "S1") return ModelClass::s1;
  if (name == "S2") return ModelClass::s2;
  if (name == "S3") return ModelClass::s3;
  if (name == "DeepSetsUnnormalized") return ModelClass::deepsets_unnormalized;
  throw std::invalid_argument("unknown model class '" + name +
                              "' (expected S1, S2, S3 or DeepSetsUnnormalized)");
}

Widths default_widths(ModelClass c) {
  switch (c) {
    case ModelClass::s1: return {100, 100};
    case ModelClass::s2: return {100, 1000};
    case ModelClass::s3: return {1000, 1000};
    case ModelClass::deepsets_unnormalized: return {100, 100};
  }
  throw std::invalid_argument("default_widths: bad enum value");
}

double default_aug(std::size_t d, double half_width) {
  return half_width * std::sqrt(static_cast<double>(d));
}

void fill_kaiming_uniform(Matrix& w, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw std::invalid_argument("fill_kaiming_uniform: fan_in is 0");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : w.data) v = rng.uniform(-bound, bound);
}

void fill_gaussian_mixture(Matrix& w, double sigma, Rng& rng) {
  for (double& v : w.data) {
    const double center = rng.uniform() < 0.5 ? 1.0 : -1.0;
    v = rng.normal(center, sigma);
  }
}

void normalize_rows(Matrix& w) {
  for (std::size_t i = 0; i < w.rows; ++i) {
    double* r = w.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) s += r[j] * r[j];
    const double norm = std::sqrt(s);
    if (norm == 0.0) {
      throw std::domain_error("normalize_rows: row " + std::to_string(i) + " is zero");
    }
    for (std::size_t j = 0; j < w.cols; ++j) r[j] /= norm;
  }
}

MeasureNet init_model(ModelClass cls, std::size_t d, std::size_t h1, std::size_t h2,
                      std::size_t out, Act act1, Act act2, double aug, Rng& rng) {
  if (d == 0 || h1 == 0 || h2 == 0 || out == 0) {
    throw std::invalid_argument("init_model: all dimensions must be positive");
  }
  MeasureNet net;
  net.cls = cls;
  net.act1 = act1;
  net.act2 = act2;
  net.aug = aug;
  net.w1 = Matrix(h1, d + 1);
  net.w2 = Matrix(h2, h1);
  net.w3 = Matrix(out, h2);
  fill_kaiming_uniform(net.w1, d + 1, rng);
  fill_kaiming_uniform(net.w2, h1, rng);
  fill_kaiming_uniform(net.w3, h2, rng);
  if (!net.trains_w1()) normalize_rows(net.w1);
  if (!net.trains_w2()) normalize_rows(net.w2);
  return net;
}

std::vector<double> forward(const MeasureNet& net, const Matrix& points,
                            ForwardCache* cache) {
  if (points.rows == 0) throw std::invalid_argument("forward: empty point set");
  if (points.cols != net.input_dim()) {
    throw std::invalid_argument("forward: point dimension " + std::to_string(points.cols) +
                                " does not match model input " +
                                std::to_string(net.input_dim()));
  }
  const std::size_t n = points.rows, d = points.cols;
  const std::size_t h1 = net.h1(), h2 = net.h2(), o = net.out_dim();

  Matrix xaug(n, d + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = points.row(i);
    double* dst = xaug.row(i);
    std::memcpy(dst, src, d * sizeof(double));
    dst[d] = net.aug;
  }

  // z1 = w1 * xaug^T, one column per point.
  Matrix z1 = matmul(net.w1, transpose(xaug));

  // Running sum in caller order, then the 1/N for the measure classes.
  std::vector<double> pooled(h1, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 0; h < h1; ++h) pooled[h] += activate(net.act1, z1(h, i));
  if (net.average_pooling()) {
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : pooled) v *= inv;
  }

  std::vector<double> z2(h2, 0.0), a2(h2, 0.0);
  for (std::size_t j = 0; j < h2; ++j) {
    const double* wrow = net.w2.row(j);
    double s = 0.0;
    for (std::size_t h = 0; h < h1; ++h) s += wrow[h] * pooled[h];
    z2[j] = s;
    a2[j] = activate(net.act2, s);
  }

  std::vector<double> out(o, 0.0);
  for (std::size_t r = 0; r < o; ++r) {
    const double* wrow = net.w3.row(r);
    double s = 0.0;
    for (std::size_t j = 0; j < h2; ++j) s += wrow[j] * a2[j];
    out[r] = s;
  }

  if (cache) {
    cache->xaug = std::move(xaug);
    cache->z1 = std::move(z1);
    cache->pooled = std::move(pooled);
    cache->z2 = std::move(z2);
    cache->a2 = std::move(a2);
  }
  return out;
}

void backward(const MeasureNet& net, const ForwardCache& cache,
              const std::vector<double>& dout, Gradients& grads) {
  const std::size_t n = cache.xaug.rows;
  const std::size_t h1 = net.h1(), h2 = net.h2(), o = net.out_dim();
  if (dout.size() != o) throw std::invalid_argument("backward: dout size mismatch");

  // w3 grad and the pull-back onto a2.
  std::vector<double> da2(h2, 0.0);
  for (std::size_t r = 0; r < o; ++r) {
    const double g = dout[r];
    double* grow = grads.w3.row(r);
    const double* wrow = net.w3.row(r);
    for (std::size_t j = 0; j < h2; ++j) {
      grow[j] += g * cache.a2[j];
      da2[j] += g * wrow[j];
    }
  }

  std::vector<double> dz2(h2);
  for (std::size_t j = 0; j < h2; ++j)
    dz2[j] = da2[j] * activate_grad(net.act2, cache.z2[j]);

  if (net.trains_w2()) {
    for (std::size_t j = 0; j < h2; ++j) {
      const double g = dz2[j];
      if (g == 0.0) continue;
      double* grow = grads.w2.row(j);
      for (std::size_t h = 0; h < h1; ++h) grow[h] += g * cache.pooled[h];
    }
  }

  if (!net.trains_w1()) return;

  std::vector<double> dpooled(h1, 0.0);
  for (std::size_t j = 0; j < h2; ++j) {
    const double g = dz2[j];
    if (g == 0.0) continue;
    const double* wrow = net.w2.row(j);
    for (std::size_t h = 0; h < h1; ++h) dpooled[h] += g * wrow[h];
  }
  const double scale = net.average_pooling() ? 1.0 / static_cast<double>(n) : 1.0;

  Matrix dz1(h1, n);
  for (std::size_t h = 0; h < h1; ++h) {
    const double g = dpooled[h] * scale;
    for (std::size_t i = 0; i < n; ++i)
      dz1(h, i) = g * activate_grad(net.act1, cache.z1(h, i));
  }
  matmul_acc(dz1, cache.xaug, grads.w1);
}

double path_norm(const MeasureNet& net) {
  const std::size_t h1 = net.h1(), h2 = net.h2(), o = net.out_dim();
  switch (net.cls) {
    case ModelClass::s1:
    case ModelClass::deepsets_unnormalized: {
      const std::vector<double> k1 = row_sq_norms(net.w1);
      double total = 0.0;
      for (std::size_t r = 0; r < o; ++r) {
        const double* w3r = net.w3.row(r);
        double s = 0.0;
        for (std::size_t j = 0; j < h2; ++j) {
          const double* w2r = net.w2.row(j);
          double u = 0.0;
          for (std::size_t h = 0; h < h1; ++h) u += std::fabs(w2r[h]) * k1[h];
          s += std::fabs(w3r[j]) * u;
        }
        total += s;
      }
      return total;
    }
    case ModelClass::s2: {
      const std::vector<double> k2 = row_sq_norms(net.w2);
      double total = 0.0;
      for (std::size_t r = 0; r < o; ++r) {
        const double* w3r = net.w3.row(r);
        for (std::size_t j = 0; j < h2; ++j) total += std::fabs(w3r[j]) * k2[j];
      }
      return total;
    }
    case ModelClass::s3: {
      double total = 0.0;
      for (std::size_t r = 0; r < o; ++r) {
        const double* w3r = net.w3.row(r);
        double s = 0.0;
        for (std::size_t j = 0; j < h2; ++j) s += w3r[j] * w3r[j];
        total += std::sqrt(s);
      }
      return total;
    }
  }
  throw std::invalid_argument("path_norm: bad enum value");
}

namespace {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void path_norm_grad(const MeasureNet& net, double coef, Gradients& grads) {
  const std::size_t h1 = net.h1(), h2 = net.h2(), o = net.out_dim();
  switch (net.cls) {
    case ModelClass::s1:
    case ModelClass::deepsets_unnormalized: {
      const std::vector<double> k1 = row_sq_norms(net.w1);
      // u[j] = |w2 row j| . k1 feeds the w3 grad; column sums of |w3| feed
      // the lower layers.
      std::vector<double> u(h2, 0.0), col3(h2, 0.0);
      for (std::size_t j = 0; j < h2; ++j) {
        const double* w2r = net.w2.row(j);
        double s = 0.0;
        for (std::size_t h = 0; h < h1; ++h) s += std::fabs(w2r[h]) * k1[h];
        u[j] = s;
      }
      for (std::size_t r = 0; r < o; ++r) {
        const double* w3r = net.w3.row(r);
        double* g3 = grads.w3.row(r);
        for (std::size_t j = 0; j < h2; ++j) {
          g3[j] += coef * sgn(w3r[j]) * u[j];
          col3[j] += std::fabs(w3r[j]);
        }
      }
      std::vector<double> w2colabs(h1, 0.0);
      for (std::size_t j = 0; j < h2; ++j) {
        const double* w2r = net.w2.row(j);
        double* g2 = grads.w2.row(j);
        for (std::size_t h = 0; h < h1; ++h) {
          g2[h] += coef * col3[j] * sgn(w2r[h]) * k1[h];
          w2colabs[h] += col3[j] * std::fabs(w2r[h]);
        }
      }
      for (std::size_t h = 0; h < h1; ++h) {
        const double* w1r = net.w1.row(h);
        double* g1 = grads.w1.row(h);
        for (std::size_t l = 0; l < net.w1.cols; ++l)
          g1[l] += coef * w2colabs[h] * 2.0 * w1r[l];
      }
      return;
    }
    case ModelClass::s2: {
      const std::vector<double> k2 = row_sq_norms(net.w2);
      std::vector<double> col3(h2, 0.0);
      for (std::size_t r = 0; r < o; ++r) {
        const double* w3r = net.w3.row(r);
        double* g3 = grads.w3.row(r);
        for (std::size_t j = 0; j < h2; ++j) {
          g3[j] += coef * sgn(w3r[j]) * k2[j];
          col3[j] += std::fabs(w3r[j]);
        }
      }
      for (std::size_t j = 0; j < h2; ++j) {
        const double* w2r = net.w2.row(j);
        double* g2 = grads.w2.row(j);
        for (std::size_t h = 0; h < h1; ++h) g2[h] += coef * col3[j] * 2.0 * w2r[h];
      }
      return;
    }
    case ModelClass::s3: {
      for (std::size_t r = 0; r < o; ++r) {
        const double* w3r = net.w3.row(r);
        double s = 0.0;
        for (std::size_t j = 0; j < h2; ++j) s += w3r[j] * w3r[j];
        const double norm = std::sqrt(s);
        if (norm == 0.0) continue;  // subgradient 0 at the origin
        double* g3 = grads.w3.row(r);
        for (std::size_t j = 0; j < h2; ++j) g3[j] += coef * w3r[j] / norm;
      }
      return;
    }
  }
  throw std::invalid_argument("path_norm_grad: bad enum value");
}

void share_first_layer(MeasureNet& dst, const MeasureNet& src) {
  if (dst.w1.rows != src.w1.rows || dst.w1.cols != src.w1.cols) {
    throw std::invalid_argument("share_first_layer: first-layer shapes differ (" +
                                std::to_string(dst.w1.rows) + "x" +
                                std::to_string(dst.w1.cols) + " vs " +
                                std::to_string(src.w1.rows) + "x" +
                                std::to_string(src.w1.cols) + ")");
  }
  dst.w1 = src.w1;
  if (!dst.trains_w1()) normalize_rows(dst.w1);
}

namespace {

constexpr char kMagic[] = "MEASURENET/1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

void write_u32(std::ofstream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ofstream& f, std::uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ofstream& f, double v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& f, const char* what) {
  std::uint32_t v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error(std::string("checkpoint truncated reading ") + what);
  return v;
}
std::uint64_t read_u64(std::ifstream& f, const char* what) {
  std::uint64_t v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error(std::string("checkpoint truncated reading ") + what);
  return v;
}
double read_f64(std::ifstream& f, const char* what) {
  double v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error(std::string("checkpoint truncated reading ") + what);
  return v;
}

void write_matrix(std::ofstream& f, const Matrix& m) {
  write_u64(f, m.rows);
  write_u64(f, m.cols);
  f.write(reinterpret_cast<const char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

Matrix read_matrix(std::ifstream& f, const char* what) {
  const std::uint64_t r = read_u64(f, what), c = read_u64(f, what);
  if (r == 0 || c == 0 || r > (1u << 24) || c > (1u << 24))
    throw std::runtime_error(std::string("checkpoint has implausible shape for ") + what);
  Matrix m(r, c);
  if (!f.read(reinterpret_cast<char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(double))))
    throw std::runtime_error(std::string("checkpoint truncated reading ") + what);
  return m;
}

}  // namespace

void save_model(const MeasureNet& net, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  f.write(kMagic, static_cast<std::streamsize>(kMagicLen));
  write_u32(f, static_cast<std::uint32_t>(net.cls));
  write_u32(f, net.act1 == Act::relu ? 1u : 2u);
  write_u32(f, net.act2 == Act::relu ? 1u : 2u);
  write_u32(f, 0u);  // reserved
  write_f64(f, net.aug);
  write_matrix(f, net.w1);
  write_matrix(f, net.w2);
  write_matrix(f, net.w3);
  if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

MeasureNet load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  char magic[kMagicLen];
  if (!f.read(magic, static_cast<std::streamsize>(kMagicLen)) ||
      std::memcmp(magic, kMagic, kMagicLen) != 0) {
    throw std::runtime_error("'" + path.string() + "' is not a model checkpoint (bad magic)");
  }
  MeasureNet net;
  const std::uint32_t cls = read_u32(f, "class");
  if (cls < 1 || cls > 4) throw std::runtime_error("checkpoint has unknown class code");
  net.cls = static_cast<ModelClass>(cls);
  const std::uint32_t a1 = read_u32(f, "act1"), a2 = read_u32(f, "act2");
  if ((a1 != 1 && a1 != 2) || (a2 != 1 && a2 != 2))
    throw std::runtime_error("checkpoint has unknown activation code");
  net.act1 = a1 == 1 ? Act::relu : Act::relu_squared;
  net.act2 = a2 == 1 ? Act::relu : Act::relu_squared;
  read_u32(f, "reserved");
  net.aug = read_f64(f, "aug");
  net.w1 = read_matrix(f, "w1");
  net.w2 = read_matrix(f, "w2");
  net.w3 = read_matrix(f, "w3");
  if (net.w2.cols != net.w1.rows || net.w3.cols != net.w2.rows)
    throw std::runtime_error("checkpoint layer shapes are inconsistent");
  return net;
}

}  // namespace measurenet
