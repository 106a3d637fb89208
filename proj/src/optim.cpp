#include "measurenet/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace measurenet {

void adam_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
               AdamState& state) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: params/grads count mismatch");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.emplace_back(p->rows, p->cols);
      state.v.emplace_back(p->rows, p->cols);
    }
  } else if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state was built for a different parameter list");
  }
  state.t += 1;
  state.beta1_pow *= state.beta1;
  state.beta2_pow *= state.beta2;
  const double bc1 = 1.0 - state.beta1_pow;
  const double bc2 = 1.0 - state.beta2_pow;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Matrix& p = *params[pi];
    const Matrix& g = *grads[pi];
    Matrix& m = state.m[pi];
    Matrix& v = state.v[pi];
    if (!p.same_shape(g) || !p.same_shape(m))
      throw std::invalid_argument("adam_step: shape mismatch in parameter " + std::to_string(pi));
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double gi = g.data[i];
      if (!std::isfinite(gi))
        throw std::runtime_error("adam_step: non-finite gradient at step " +
                                 std::to_string(state.t));
      const double mi = state.beta1 * m.data[i] + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * v.data[i] + (1.0 - state.beta2) * gi * gi;
      m.data[i] = mi;
      v.data[i] = vi;
      p.data[i] -= state.lr * (mi / bc1) / (std::sqrt(vi / bc2) + state.eps);
    }
  }
}

namespace {

// Rows of every set stacked into one tall matrix of augmented points, with
// per-set row offsets. Built once per run: the training batch is fixed.
struct StackedBatch {
  Matrix xaug;                       // T x (d+1)
  std::vector<std::size_t> offset;   // count+1
};

StackedBatch stack_batch(const MeasureNet& net, const SetBatch& batch) {
  const std::size_t d = net.input_dim();
  std::size_t total = 0;
  for (const Matrix& s : batch.sets) {
    if (s.rows == 0) throw std::invalid_argument("train: batch contains an empty set");
    if (s.cols != d)
      throw std::invalid_argument("train: set dimension " + std::to_string(s.cols) +
                                  " does not match model input " + std::to_string(d));
    total += s.rows;
  }
  StackedBatch out;
  out.xaug = Matrix(total, d + 1);
  out.offset.resize(batch.count() + 1);
  std::size_t row = 0;
  for (std::size_t b = 0; b < batch.count(); ++b) {
    out.offset[b] = row;
    const Matrix& s = batch.sets[b];
    for (std::size_t i = 0; i < s.rows; ++i, ++row) {
      double* dst = out.xaug.row(row);
      const double* src = s.row(i);
      for (std::size_t c = 0; c < d; ++c) dst[c] = src[c];
      dst[d] = net.aug;
    }
  }
  out.offset[batch.count()] = row;
  return out;
}

// Chunk size for the stacked layer-1 pass, in doubles of z1 buffer. Keeps
// the working set cache-friendly and bounds memory at MNIST scale.
constexpr std::size_t kChunkBudget = 1u << 19;

// Pooled first-layer features, one row per set. Matches forward() bit for
// bit: same kernel, same accumulation order over points.
void layer1_pool(const MeasureNet& net, const StackedBatch& sb, const Matrix& w1t,
                 Matrix& pooled, Matrix& z1buf) {
  const std::size_t count = sb.offset.size() - 1;
  const std::size_t h1 = net.h1(), dp1 = net.w1.cols;
  pooled.set_zero();
  std::size_t b0 = 0;
  while (b0 < count) {
    // whole sets per chunk so pooling never straddles a boundary
    std::size_t b1 = b0;
    std::size_t rows = 0;
    while (b1 < count) {
      const std::size_t add = sb.offset[b1 + 1] - sb.offset[b1];
      if (rows > 0 && (rows + add) * h1 > kChunkBudget) break;
      rows += add;
      ++b1;
    }
    const std::size_t r0 = sb.offset[b0];
    z1buf.rows = rows;
    z1buf.cols = h1;
    z1buf.data.assign(rows * h1, 0.0);
    gemm_acc(sb.xaug.row(r0), rows, dp1, w1t.data.data(), h1, z1buf.data.data());
    for (std::size_t b = b0; b < b1; ++b) {
      double* prow = pooled.row(b);
      for (std::size_t r = sb.offset[b]; r < sb.offset[b + 1]; ++r) {
        const double* zrow = z1buf.row(r - r0);
        for (std::size_t h = 0; h < h1; ++h) prow[h] += activate(net.act1, zrow[h]);
      }
    }
    b0 = b1;
  }
  if (net.average_pooling()) {
    for (std::size_t b = 0; b < count; ++b) {
      const double inv = 1.0 / static_cast<double>(sb.offset[b + 1] - sb.offset[b]);
      double* prow = pooled.row(b);
      for (std::size_t h = 0; h < h1; ++h) prow[h] *= inv;
    }
  }
}

// dW1 += sum over points of d(z1)^T xaug, recomputing z1 chunk by chunk
// instead of holding it for the whole batch.
void layer1_backward(const MeasureNet& net, const StackedBatch& sb, const Matrix& w1t,
                     const Matrix& dpooled, Matrix& gw1, Matrix& z1buf, Matrix& dz1t) {
  const std::size_t count = sb.offset.size() - 1;
  const std::size_t h1 = net.h1(), dp1 = net.w1.cols;
  std::size_t b0 = 0;
  while (b0 < count) {
    std::size_t b1 = b0;
    std::size_t rows = 0;
    while (b1 < count) {
      const std::size_t add = sb.offset[b1 + 1] - sb.offset[b1];
      if (rows > 0 && (rows + add) * h1 > kChunkBudget) break;
      rows += add;
      ++b1;
    }
    const std::size_t r0 = sb.offset[b0];
    z1buf.rows = rows;
    z1buf.cols = h1;
    z1buf.data.assign(rows * h1, 0.0);
    gemm_acc(sb.xaug.row(r0), rows, dp1, w1t.data.data(), h1, z1buf.data.data());
    // dz1 built transposed (h1 x rows) so the weight-gradient product is a
    // plain row-major gemm into gw1.
    dz1t.rows = h1;
    dz1t.cols = rows;
    dz1t.data.resize(h1 * rows);
    for (std::size_t b = b0; b < b1; ++b) {
      const double scale =
          net.average_pooling() ? 1.0 / static_cast<double>(sb.offset[b + 1] - sb.offset[b])
                                : 1.0;
      const double* drow = dpooled.row(b);
      for (std::size_t r = sb.offset[b]; r < sb.offset[b + 1]; ++r) {
        const double* zrow = z1buf.row(r - r0);
        const std::size_t col = r - r0;
        for (std::size_t h = 0; h < h1; ++h)
          dz1t.data[h * rows + col] = scale * drow[h] * activate_grad(net.act1, zrow[h]);
      }
    }
    gemm_acc(dz1t.data.data(), h1, rows, sb.xaug.row(r0), dp1, gw1.data.data());
    b0 = b1;
  }
}

double loss_and_dout(const Matrix& out, const SetBatch& batch, Loss loss, Matrix& dout) {
  const std::size_t count = out.rows, o = out.cols;
  const double invb = 1.0 / static_cast<double>(count);
  double total = 0.0;
  if (loss == Loss::mse) {
    const double invo = 1.0 / static_cast<double>(o);
    for (std::size_t b = 0; b < count; ++b) {
      const double* orow = out.row(b);
      const double* yrow = batch.targets.row(b);
      double* drow = dout.row(b);
      double s = 0.0;
      for (std::size_t r = 0; r < o; ++r) {
        const double err = orow[r] - yrow[r];
        s += err * err;
        drow[r] = 2.0 * err * invo * invb;
      }
      total += s * invo;
    }
    return total * invb;
  }
  for (std::size_t b = 0; b < count; ++b) {
    const double* orow = out.row(b);
    double* drow = dout.row(b);
    const int label = batch.labels[b];
    double m = orow[0];
    for (std::size_t r = 1; r < o; ++r) m = std::max(m, orow[r]);
    double z = 0.0;
    for (std::size_t r = 0; r < o; ++r) z += std::exp(orow[r] - m);
    const double lse = m + std::log(z);
    total += lse - orow[static_cast<std::size_t>(label)];
    for (std::size_t r = 0; r < o; ++r) {
      const double p = std::exp(orow[r] - lse);
      drow[r] = (p - (static_cast<int>(r) == label ? 1.0 : 0.0)) * invb;
    }
  }
  return total * invb;
}

void validate_supervision(const MeasureNet& net, const SetBatch& batch, Loss loss) {
  if (batch.count() == 0) throw std::invalid_argument("train: empty batch");
  if (loss == Loss::mse) {
    if (batch.targets.rows != batch.count() || batch.targets.cols != net.out_dim())
      throw std::invalid_argument("train: mse needs a targets matrix of shape count x out_dim");
  } else {
    if (batch.labels.size() != batch.count())
      throw std::invalid_argument("train: cross_entropy needs one label per set");
    if (net.out_dim() < 2)
      throw std::invalid_argument("train: cross_entropy needs at least 2 logits");
    for (int l : batch.labels)
      if (l < 0 || static_cast<std::size_t>(l) >= net.out_dim())
        throw std::invalid_argument("train: label " + std::to_string(l) +
                                    " outside logit range");
  }
}

}  // namespace

TrainResult train(MeasureNet net, const SetBatch& batch, const TrainConfig& cfg) {
  validate_supervision(net, batch, cfg.loss);
  const StackedBatch sb = stack_batch(net, batch);
  const std::size_t count = batch.count();
  const std::size_t h1 = net.h1(), h2 = net.h2(), o = net.out_dim();
  const bool tw1 = net.trains_w1(), tw2 = net.trains_w2();

  Matrix pooled(count, h1);
  Matrix z1buf, dz1t;  // chunk workspaces
  Matrix w1t, w2t, w3t;
  if (!tw1) {
    transpose_into(net.w1, w1t);
    layer1_pool(net, sb, w1t, pooled, z1buf);  // frozen: features never change
  }

  Matrix z2(count, h2), a2(count, h2);
  Matrix a2fix;  // S3: frozen head features
  if (!tw1 && !tw2) {
    transpose_into(net.w2, w2t);
    z2.set_zero();
    matmul_acc(pooled, w2t, z2);
    a2fix = Matrix(count, h2);
    for (std::size_t i = 0; i < z2.data.size(); ++i)
      a2fix.data[i] = activate(net.act2, z2.data[i]);
  }

  Matrix out(count, o), dout(count, o), doutt, dz2t;
  Matrix da2, dpooled;

  Gradients grads(net);
  AdamState adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
  std::vector<Matrix*> params;
  std::vector<const Matrix*> gptrs;
  if (tw1) {
    params.push_back(&net.w1);
    gptrs.push_back(&grads.w1);
  }
  if (tw2) {
    params.push_back(&net.w2);
    gptrs.push_back(&grads.w2);
  }
  params.push_back(&net.w3);
  gptrs.push_back(&grads.w3);

  TrainResult result;
  result.history.reserve(cfg.iterations);

  auto forward_batch = [&]() -> const Matrix& {
    if (tw1) {
      transpose_into(net.w1, w1t);
      layer1_pool(net, sb, w1t, pooled, z1buf);
    }
    const Matrix* a2use = &a2fix;
    if (tw2) {
      transpose_into(net.w2, w2t);
      z2.set_zero();
      matmul_acc(pooled, w2t, z2);
      for (std::size_t i = 0; i < z2.data.size(); ++i)
        a2.data[i] = activate(net.act2, z2.data[i]);
      a2use = &a2;
    }
    transpose_into(net.w3, w3t);
    out.set_zero();
    matmul_acc(*a2use, w3t, out);
    return *a2use;
  };

  for (std::size_t iter = 1; iter <= cfg.iterations; ++iter) {
    const Matrix& a2use = forward_batch();
    const double data_loss = loss_and_dout(out, batch, cfg.loss, dout);
    const double penalty = cfg.lambda * path_norm(net);
    if (!std::isfinite(data_loss) || data_loss > cfg.divergence_limit) {
      throw std::runtime_error("train: loss diverged at iteration " + std::to_string(iter) +
                               " (data loss " + std::to_string(data_loss) + ")");
    }
    result.history.push_back({iter, data_loss, penalty});

    grads.set_zero();
    transpose_into(dout, doutt);
    matmul_acc(doutt, a2use, grads.w3);
    if (tw2) {
      da2.rows = count;
      da2.cols = h2;
      da2.data.assign(count * h2, 0.0);
      matmul_acc(dout, net.w3, da2);
      for (std::size_t i = 0; i < da2.data.size(); ++i)
        da2.data[i] *= activate_grad(net.act2, z2.data[i]);
      transpose_into(da2, dz2t);  // da2 now holds dz2
      matmul_acc(dz2t, pooled, grads.w2);
      if (tw1) {
        dpooled.rows = count;
        dpooled.cols = h1;
        dpooled.data.assign(count * h1, 0.0);
        matmul_acc(da2, net.w2, dpooled);
        layer1_backward(net, sb, w1t, dpooled, grads.w1, z1buf, dz1t);
      }
    }
    if (cfg.lambda != 0.0) path_norm_grad(net, cfg.lambda, grads);
    adam_step(params, gptrs, adam);
  }

  forward_batch();
  Matrix scratch(count, o);
  result.final_data_loss = loss_and_dout(out, batch, cfg.loss, scratch);
  result.final_penalty = cfg.lambda * path_norm(net);
  result.net = std::move(net);
  return result;
}

double mse_eval(const MeasureNet& net, const SetBatch& batch) {
  if (batch.targets.rows != batch.count() || batch.targets.cols != net.out_dim())
    throw std::invalid_argument("mse_eval: targets shape mismatch");
  if (batch.count() == 0) throw std::invalid_argument("mse_eval: empty batch");
  const std::size_t o = net.out_dim();
  double total = 0.0;
  for (std::size_t b = 0; b < batch.count(); ++b) {
    const std::vector<double> out = forward(net, batch.sets[b]);
    const double* yrow = batch.targets.row(b);
    double s = 0.0;
    for (std::size_t r = 0; r < o; ++r) {
      const double err = out[r] - yrow[r];
      s += err * err;
    }
    total += s / static_cast<double>(o);
  }
  return total / static_cast<double>(batch.count());
}

double error_rate_eval(const MeasureNet& net, const SetBatch& batch) {
  if (batch.labels.size() != batch.count())
    throw std::invalid_argument("error_rate_eval: needs one label per set");
  if (batch.count() == 0) throw std::invalid_argument("error_rate_eval: empty batch");
  std::size_t wrong = 0;
  for (std::size_t b = 0; b < batch.count(); ++b) {
    const std::vector<double> out = forward(net, batch.sets[b]);
    std::size_t best = 0;
    for (std::size_t r = 1; r < out.size(); ++r)
      if (out[r] > out[best]) best = r;
    if (static_cast<int>(best) != batch.labels[b]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(batch.count());
}

double cross_entropy_eval(const MeasureNet& net, const SetBatch& batch) {
  if (batch.labels.size() != batch.count())
    throw std::invalid_argument("cross_entropy_eval: needs one label per set");
  if (batch.count() == 0) throw std::invalid_argument("cross_entropy_eval: empty batch");
  double total = 0.0;
  for (std::size_t b = 0; b < batch.count(); ++b) {
    const std::vector<double> out = forward(net, batch.sets[b]);
    double m = out[0];
    for (double v : out) m = std::max(m, v);
    double z = 0.0;
    for (double v : out) z += std::exp(v - m);
    total += m + std::log(z) - out[static_cast<std::size_t>(batch.labels[b])];
  }
  return total / static_cast<double>(batch.count());
}

}  // namespace measurenet
