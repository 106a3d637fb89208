#pragma once

#include <cstddef>
#include <vector>

#include "measurenet/data.hpp"
#include "measurenet/model.hpp"

namespace measurenet {

enum class Loss { mse, cross_entropy };

struct TrainConfig {
  double lr = 5e-4;
  std::size_t iterations = 5000;
  double lambda = 0.0;  // path-norm coefficient
  Loss loss = Loss::mse;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double divergence_limit = 1e12;  // data loss above this aborts the run
};

// Adam with bias correction. One state object per training run; the moment
// buffers are laid out parallel to the parameter list passed to adam_step.
struct AdamState {
  double lr, beta1, beta2, eps;
  std::size_t t = 0;
  double beta1_pow = 1.0;  // running beta1^t for bias correction
  double beta2_pow = 1.0;
  std::vector<Matrix> m, v;

  AdamState(double lr_, double beta1_, double beta2_, double eps_)
      : lr(lr_), beta1(beta1_), beta2(beta2_), eps(eps_) {}
};

// In-place update of `params` from `grads`. Moment buffers are allocated on
// first use and must keep matching shapes afterwards. A non-finite gradient
// entry aborts with std::runtime_error rather than poisoning the weights.
void adam_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
               AdamState& state);

struct HistoryRow {
  std::size_t iteration;  // 1-based; the loss is measured before the step
  double data_loss;
  double penalty;  // lambda * path_norm
};

struct TrainResult {
  MeasureNet net;
  std::vector<HistoryRow> history;
  double final_data_loss = 0.0;  // evaluated after the last step
  double final_penalty = 0.0;
};

// Full-batch training: the given batch is reused every iteration (the
// experiments train against a fixed sample, not a stream). The run is
// single-threaded and bit-deterministic given (net, batch, cfg).
//
// For classes with frozen layers the per-set features those layers produce
// are computed once and reused; a consistency test pins this fast path to
// forward()/backward() semantics.
TrainResult train(MeasureNet net, const SetBatch& batch, const TrainConfig& cfg);

// Mean over sets of the per-set squared error averaged across output
// coordinates (plain squared error for scalar outputs).
double mse_eval(const MeasureNet& net, const SetBatch& batch);

// Fraction of sets whose argmax logit misses the label (ties resolve to the
// lowest index).
double error_rate_eval(const MeasureNet& net, const SetBatch& batch);

// Cross-entropy of softmax(logits) against the labels, averaged over sets.
double cross_entropy_eval(const MeasureNet& net, const SetBatch& batch);

}  // namespace measurenet
