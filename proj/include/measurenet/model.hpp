#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "measurenet/activation.hpp"
#include "measurenet/matrix.hpp"
#include "measurenet/rng.hpp"

namespace measurenet {

// Which layers train is a property of the class, not a per-run switch:
//   S1                    trains w1, w2, w3
//   S2                    freezes w1 (rows normalized to unit length)
//   S3                    freezes w1 and w2 (rows normalized)
//   DeepSetsUnnormalized  trains everything like S1 but pools by sum
// Average pooling is what makes the first three classes functions of the
// empirical measure; the unnormalized variant exists as the baseline that
// is not.
enum class ModelClass : std::uint32_t {
  s1 = 1,
  s2 = 2,
  s3 = 3,
  deepsets_unnormalized = 4,
};

const char* class_name(ModelClass c);
ModelClass class_from_name(const std::string& name);

struct Widths {
  std::size_t h1 = 0;
  std::size_t h2 = 0;
};

// Hidden widths used when a caller does not override them. S2 and S3 get
// wider layers where their weights are frozen, so the trainable span is
// comparable across classes.
Widths default_widths(ModelClass c);

// Two-hidden-layer network over point sets:
//   out = w3 * act2( w2 * pool_i act1( w1 * [x_i, aug] ) )
// pool is the running average over points in caller order (sum for the
// unnormalized class). aug is a constant appended coordinate standing in
// for a bias that survives the normalization of frozen first-layer rows.
struct MeasureNet {
  ModelClass cls = ModelClass::s1;
  Act act1 = Act::relu;
  Act act2 = Act::relu;
  double aug = 0.0;
  Matrix w1;  // h1 x (d+1)
  Matrix w2;  // h2 x h1
  Matrix w3;  // o  x h2

  std::size_t input_dim() const { return w1.cols - 1; }
  std::size_t h1() const { return w1.rows; }
  std::size_t h2() const { return w2.rows; }
  std::size_t out_dim() const { return w3.rows; }

  bool trains_w1() const {
    return cls == ModelClass::s1 || cls == ModelClass::deepsets_unnormalized;
  }
  bool trains_w2() const { return cls != ModelClass::s3; }
  bool average_pooling() const { return cls != ModelClass::deepsets_unnormalized; }
};

// Default appended-coordinate value for inputs living in [-hw, hw]^d: the
// Euclidean radius of that cube, so the extra coordinate dominates no point
// yet keeps the augmented vectors away from the origin.
double default_aug(std::size_t d, double half_width = 3.0);

void fill_kaiming_uniform(Matrix& w, std::size_t fan_in, Rng& rng);

// Elementwise draw from the even mixture 0.5 N(+1, sigma^2) + 0.5 N(-1, sigma^2).
void fill_gaussian_mixture(Matrix& w, double sigma, Rng& rng);

// Scales every row of w to unit Euclidean norm. Throws std::domain_error on
// an exactly-zero row.
void normalize_rows(Matrix& w);

// Kaiming-uniform initialization of all three layers (draw order w1, w2, w3,
// row-major within each), then row normalization of whichever layers the
// class freezes.
MeasureNet init_model(ModelClass cls, std::size_t d, std::size_t h1, std::size_t h2,
                      std::size_t out, Act act1, Act act2, double aug, Rng& rng);

struct ForwardCache {
  Matrix xaug;                 // N x (d+1)
  Matrix z1;                   // h1 x N pre-activations
  std::vector<double> pooled;  // h1
  std::vector<double> z2;      // h2 pre-activations
  std::vector<double> a2;      // h2
};

// Evaluates the network on one point set (rows of `points` are points).
// Pass a cache to keep the intermediates backward() needs.
std::vector<double> forward(const MeasureNet& net, const Matrix& points,
                            ForwardCache* cache = nullptr);

struct Gradients {
  Matrix w1, w2, w3;
  explicit Gradients(const MeasureNet& net)
      : w1(net.w1.rows, net.w1.cols),
        w2(net.w2.rows, net.w2.cols),
        w3(net.w3.rows, net.w3.cols) {}
  void set_zero() {
    w1.set_zero();
    w2.set_zero();
    w3.set_zero();
  }
};

// Accumulates d(loss)/d(weights) into `grads` given d(loss)/d(out). Frozen
// layers are skipped and their slots left untouched.
void backward(const MeasureNet& net, const ForwardCache& cache,
              const std::vector<double>& dout, Gradients& grads);

// Class-specific complexity measure, summed over output rows. With K(.) the
// vector of per-row *squared* norms:
//   S1 / unnormalized: |w3| . (|w2| K(w1))
//   S2:                |w3| . K(w2)
//   S3:                sum of Euclidean norms of w3 rows
double path_norm(const MeasureNet& net);

// Adds coef * d(path_norm)/d(weights) to the trainable slots of `grads`,
// with sign(0) taken as 0 on the absolute values.
void path_norm_grad(const MeasureNet& net, double coef, Gradients& grads);

// Copies src's first layer into dst (shapes must match), then re-applies
// dst's freeze normalization. Because the activations are positively
// homogeneous, the normalization only rescales features, so any function
// expressible on src's first layer stays expressible through dst's
// trainable upper layers. Idempotent.
void share_first_layer(MeasureNet& dst, const MeasureNet& src);

// Binary checkpoint, magic "MEASURENET/1", little-endian fields.
void save_model(const MeasureNet& net, const std::filesystem::path& path);
MeasureNet load_model(const std::filesystem::path& path);

}  // namespace measurenet
