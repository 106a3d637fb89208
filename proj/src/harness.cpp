#include "measurenet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <thread>

#include "measurenet/diagnostics.hpp"
#include "measurenet/estimators.hpp"
#include "measurenet/ingest.hpp"

namespace measurenet {

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t stream_seed(std::uint64_t base, const std::string& name) {
  return hash_combine(base, fnv1a64(name));
}

// Runs every task exactly once on up to `threads` workers. Tasks must not
// throw (each one is expected to record its own failure); output ordering is
// the caller's business via pre-assigned result slots.
void run_pool(std::size_t threads, std::vector<std::function<void()>>& tasks) {
  if (tasks.empty()) return;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, tasks.size());
  if (threads <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w)
    workers.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        tasks[i]();
      }
    });
  for (auto& w : workers) w.join();
}

constexpr const char* kTagSynthetic = "syn";
constexpr const char* kTagCompare = "cmp";
constexpr const char* kTagRobust = "rob";
constexpr const char* kTagMnist = "mnist";
constexpr const char* kMnistTarget = "digits";

const std::vector<std::string>& baseline_names() {
  static const std::vector<std::string> names = {"SampleMean", "GeometricMedian",
                                                 "FilterMean"};
  return names;
}

bool class_trains_first_layer(ModelClass cls) {
  return cls == ModelClass::s1 || cls == ModelClass::deepsets_unnormalized;
}

TargetSpec make_cell_target(const SuiteConfig& cfg, TargetKind kind) {
  if (kind == TargetKind::neuron || kind == TargetKind::smooth_neuron) {
    const std::uint64_t seed =
        stream_seed(cfg.base_seed, std::string("planted|") + target_name(kind));
    return make_planted_neuron(kind, cfg.d, seed);
  }
  TargetSpec spec;
  spec.kind = kind;
  spec.lambda = cfg.softmax_lambda;
  return spec;
}

MeasureNet make_cell_model(ModelClass cls, const TargetSpec& target,
                           const SuiteConfig& cfg, std::size_t out, Rng& rng) {
  const Widths def = default_widths(cls);
  std::size_t h1 = cfg.h1 != 0 ? cfg.h1 : def.h1;
  const std::size_t h2 = cfg.h2 != 0 ? cfg.h2 : def.h2;
  const bool share = target.kind == TargetKind::smooth_neuron && target.planted &&
                     !class_trains_first_layer(cls);
  if (share) h1 = target.planted->h1();
  MeasureNet net = init_model(cls, cfg.d, h1, h2, out, Act::relu, Act::relu,
                              default_aug(cfg.d, cfg.half_width), rng);
  if (share) {
    share_first_layer(net, *target.planted);
    net.aug = target.planted->aug;  // the shared features include the constant coordinate
  }
  return net;
}

SetBatch make_synthetic_batch(std::size_t count, std::size_t n, const SuiteConfig& cfg,
                              const TargetSpec& target, Rng& rng) {
  SetBatch b = sample_uniform_cube_sets(count, n, cfg.d, cfg.half_width, rng);
  b.targets = Matrix(count, 1);
  for (std::size_t i = 0; i < count; ++i) b.targets(i, 0) = eval_target(target, b.sets[i]);
  return b;
}

SetBatch synthetic_test_batch(const SuiteConfig& cfg, const TargetSpec& target,
                              const std::string& tname, std::size_t test_n,
                              std::size_t seed_index) {
  Rng rng(stream_seed(cfg.base_seed, "syn-test|" + tname + "|N" + std::to_string(test_n) +
                                         "|s" + std::to_string(seed_index)));
  return make_synthetic_batch(cfg.test_sets, test_n, cfg, target, rng);
}

SetBatch robust_test_batch(const SuiteConfig& cfg, std::size_t test_n,
                           std::size_t seed_index) {
  Rng rng(stream_seed(cfg.base_seed, "rob-test|N" + std::to_string(test_n) + "|s" +
                                         std::to_string(seed_index)));
  return sample_robust_sets(cfg.robust_test_sets, test_n, cfg.robust, rng).batch;
}

CellOutcome synthetic_cell(const std::string& tag, ModelClass cls,
                           const TargetSpec& target, const std::string& tname,
                           double lambda, std::size_t seed_index,
                           const SuiteConfig& cfg) {
  const std::string cname = class_name(cls);
  Rng rng(cell_seed(cfg.base_seed, cname, tname, lambda, seed_index));
  Rng data_rng = rng.derive(1);
  const SetBatch train_batch =
      make_synthetic_batch(cfg.train_sets, cfg.train_n, cfg, target, data_rng);
  Rng init_rng = rng.derive(2);
  MeasureNet net = make_cell_model(cls, target, cfg, 1, init_rng);
  TrainConfig tc;
  tc.lr = cfg.lr;
  tc.iterations = cfg.iterations;
  tc.lambda = lambda;
  tc.loss = Loss::mse;
  CellOutcome out;
  out.trained = train(std::move(net), train_batch, tc);
  const std::string rid = make_run_id(tag, cname, tname, lambda, cfg.train_n, seed_index);
  for (std::size_t tn : cfg.test_n_grid) {
    const SetBatch test_batch = synthetic_test_batch(cfg, target, tname, tn, seed_index);
    out.rows.push_back({rid, cname, tname, lambda, static_cast<int>(cfg.train_n),
                        static_cast<int>(tn), seed_index, "mse",
                        mse_eval(out.trained.net, test_batch)});
  }
  return out;
}

CellOutcome robust_cell(ModelClass cls, double lambda, std::size_t seed_index,
                        const SuiteConfig& cfg) {
  const std::string cname = class_name(cls);
  const std::string tname = target_name(TargetKind::robust_mean_truth);
  Rng rng(cell_seed(cfg.base_seed, cname, tname, lambda, seed_index));
  Rng data_rng = rng.derive(1);
  const SetBatch train_batch =
      sample_robust_sets(cfg.robust_train_sets, cfg.robust_train_n, cfg.robust, data_rng)
          .batch;
  Rng init_rng = rng.derive(2);
  TargetSpec spec;
  spec.kind = TargetKind::robust_mean_truth;
  MeasureNet net = make_cell_model(cls, spec, cfg, cfg.robust.d, init_rng);
  TrainConfig tc;
  tc.lr = cfg.robust_lr;
  tc.iterations = cfg.robust_iterations;
  tc.lambda = lambda;
  tc.loss = Loss::mse;
  CellOutcome out;
  out.trained = train(std::move(net), train_batch, tc);
  const std::string rid =
      make_run_id(kTagRobust, cname, tname, lambda, cfg.robust_train_n, seed_index);
  for (std::size_t tn : cfg.robust_test_n_grid) {
    const SetBatch test_batch = robust_test_batch(cfg, tn, seed_index);
    out.rows.push_back({rid, cname, tname, lambda, static_cast<int>(cfg.robust_train_n),
                        static_cast<int>(tn), seed_index, "mse",
                        mse_eval(out.trained.net, test_batch)});
  }
  return out;
}

std::vector<EvalRow> robust_baseline_rows(const std::string& name,
                                          std::size_t seed_index,
                                          const SuiteConfig& cfg) {
  const std::string tname = target_name(TargetKind::robust_mean_truth);
  const std::string rid =
      make_run_id(kTagRobust, name, tname, 0.0, cfg.robust_train_n, seed_index);
  std::vector<EvalRow> rows;
  for (std::size_t tn : cfg.robust_test_n_grid) {
    const SetBatch batch = robust_test_batch(cfg, tn, seed_index);
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.count(); ++i) {
      std::vector<double> est;
      if (name == "SampleMean")
        est = sample_mean(batch.sets[i]);
      else if (name == "GeometricMedian")
        est = geometric_median(batch.sets[i]).point;
      else if (name == "FilterMean")
        est = filter_mean(batch.sets[i], cfg.robust_filter_tau, cfg.robust_filter_cher)
                  .point;
      else
        throw std::invalid_argument("unknown baseline estimator '" + name + "'");
      double err = 0.0;
      for (std::size_t j = 0; j < est.size(); ++j) {
        const double diff = est[j] - batch.targets(i, j);
        err += diff * diff;
      }
      acc += err / static_cast<double>(est.size());
    }
    rows.push_back({rid, name, tname, 0.0, static_cast<int>(cfg.robust_train_n),
                    static_cast<int>(tn), seed_index, "mse",
                    acc / static_cast<double>(batch.count())});
  }
  return rows;
}

struct MnistData {
  SetBatch train;
  std::vector<std::pair<std::size_t, SetBatch>> test;  // per test point budget
};

MnistData build_mnist(const SuiteConfig& cfg) {
  if (cfg.mnist_images.empty() || cfg.mnist_labels.empty())
    throw std::invalid_argument(
        "the mnist experiment needs the mnist_images and mnist_labels config keys");
  const IdxFile images = parse_idx(cfg.mnist_images);
  const IdxFile labels = parse_idx(cfg.mnist_labels);
  if (images.kind != IdxKind::images)
    throw IdxError("'" + cfg.mnist_images + "' does not hold images");
  if (labels.kind != IdxKind::labels)
    throw IdxError("'" + cfg.mnist_labels + "' does not hold labels");
  if (images.count != labels.count)
    throw IdxError("image count " + std::to_string(images.count) +
                   " != label count " + std::to_string(labels.count));
  const std::size_t subset = std::min(cfg.mnist_subset, images.count);
  if (cfg.mnist_train == 0 || cfg.mnist_train >= subset)
    throw std::invalid_argument("mnist_train must split the subset: have train " +
                                std::to_string(cfg.mnist_train) + " of " +
                                std::to_string(subset));
  auto cloud = [&](std::size_t idx, std::size_t max_points) {
    Rng rng(stream_seed(cfg.base_seed, "cloud|" + std::to_string(idx) + "|" +
                                           std::to_string(max_points)));
    return image_to_pointcloud(images.image(idx), images.rows, images.cols,
                               labels.bytes[idx], rng, cfg.mnist_threshold, max_points);
  };
  MnistData data;
  for (std::size_t i = 0; i < cfg.mnist_train; ++i) {
    PointCloud pc = cloud(i, cfg.mnist_max_points);
    data.train.sets.push_back(std::move(pc.points));
    data.train.labels.push_back(pc.label);
  }
  for (std::size_t budget : cfg.mnist_test_points) {
    SetBatch batch;
    for (std::size_t i = cfg.mnist_train; i < subset; ++i) {
      PointCloud pc = cloud(i, budget);
      batch.sets.push_back(std::move(pc.points));
      batch.labels.push_back(pc.label);
    }
    data.test.emplace_back(budget, std::move(batch));
  }
  return data;
}

CellOutcome mnist_cell(ModelClass cls, double lambda, std::size_t seed_index,
                       const SuiteConfig& cfg, const MnistData& data) {
  const std::string cname = class_name(cls);
  Rng rng(cell_seed(cfg.base_seed, cname, kMnistTarget, lambda, seed_index));
  Rng init_rng = rng.derive(2);
  MeasureNet net = init_model(cls, 3, cfg.mnist_h1, cfg.mnist_h2, 10, Act::relu,
                              Act::relu, default_aug(3, cfg.half_width), init_rng);
  TrainConfig tc;
  tc.lr = cfg.mnist_lr;
  tc.iterations = cfg.mnist_iterations;
  tc.lambda = lambda;
  tc.loss = Loss::cross_entropy;
  CellOutcome out;
  out.trained = train(std::move(net), data.train, tc);
  const std::string rid =
      make_run_id(kTagMnist, cname, kMnistTarget, lambda, cfg.mnist_max_points, seed_index);
  for (const auto& [budget, batch] : data.test) {
    out.rows.push_back({rid, cname, kMnistTarget, lambda,
                        static_cast<int>(cfg.mnist_max_points), static_cast<int>(budget),
                        seed_index, "error_rate", error_rate_eval(out.trained.net, batch)});
  }
  return out;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t base_seed, const std::string& cls,
                        const std::string& target, double lambda,
                        std::size_t seed_index) {
  return stream_seed(base_seed, "cell|" + cls + "|" + target + "|" +
                                    format_double(lambda) + "|" +
                                    std::to_string(seed_index));
}

std::string make_run_id(const std::string& experiment_tag, const std::string& cls,
                        const std::string& target, double lambda,
                        std::size_t train_n, std::size_t seed_index) {
  return experiment_tag + ":" + cls + ":" + target + ":L" + format_double(lambda) +
         ":N" + std::to_string(train_n) + ":s" + std::to_string(seed_index);
}

double cross_validate_lambda(ModelClass cls, const TargetSpec& target,
                             const SuiteConfig& cfg, const std::vector<double>& grid,
                             Rng& rng) {
  if (grid.empty())
    throw std::invalid_argument("cross_validate_lambda: empty lambda grid");
  std::vector<double> g = grid;
  std::sort(g.begin(), g.end());
  if (g.size() == 1) return g[0];

  const bool robust = target.kind == TargetKind::robust_mean_truth;
  const std::size_t out_dim = robust ? cfg.robust.d : 1;
  Rng val_rng = rng.derive(0);
  const SetBatch validation =
      robust ? sample_robust_sets(cfg.cv_sets, cfg.robust_train_n, cfg.robust, val_rng)
                   .batch
             : make_synthetic_batch(cfg.cv_sets, cfg.train_n, cfg, target, val_rng);

  double best_lambda = g[0];
  double best_err = 0.0;
  bool have = false;
  for (std::size_t j = 0; j < g.size(); ++j) {
    double err;
    try {
      Rng train_rng = rng.derive(1 + 2 * j);
      const SetBatch batch =
          robust ? sample_robust_sets(cfg.robust_train_sets, cfg.robust_train_n,
                                      cfg.robust, train_rng)
                       .batch
                 : make_synthetic_batch(cfg.train_sets, cfg.train_n, cfg, target,
                                        train_rng);
      Rng init_rng = rng.derive(2 + 2 * j);
      MeasureNet net = make_cell_model(cls, target, cfg, out_dim, init_rng);
      TrainConfig tc;
      tc.lr = robust ? cfg.robust_lr : cfg.lr;
      tc.iterations = robust ? cfg.robust_iterations : cfg.iterations;
      tc.lambda = g[j];
      tc.loss = Loss::mse;
      const TrainResult tr = train(std::move(net), batch, tc);
      err = mse_eval(tr.net, validation);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("cross-validation ") + class_name(cls) + "/" +
                               target_name(target.kind) + " lambda=" +
                               format_double(g[j]) + ": " + e.what());
    }
    // Near-ties go to the larger lambda; the grid is ascending, so a later
    // candidate takes over unless it is worse beyond tolerance.
    const double tol = 1e-9 * std::max(std::fabs(err), std::fabs(best_err)) + 1e-15;
    if (!have || err < best_err || err - best_err <= tol) {
      have = true;
      best_err = err;
      best_lambda = g[j];
    }
  }
  return best_lambda;
}

namespace {

EvalReport training_suite(const std::string& tag, const std::vector<ModelClass>& classes,
                          const std::vector<std::string>& target_names,
                          const SuiteConfig& cfg) {
  struct Cell {
    ModelClass cls;
    TargetSpec target;
    std::string tname;
  };
  std::vector<Cell> cells;
  for (ModelClass cls : classes)
    for (const std::string& tn : target_names) {
      const TargetKind kind = target_from_name(tn);
      if (kind == TargetKind::robust_mean_truth)
        throw std::invalid_argument("target '" + tn + "' belongs to the robust suite");
      cells.push_back({cls, make_cell_target(cfg, kind), tn});
    }

  // Phase 1: pick lambda per (class, target).
  std::vector<double> chosen(cells.size(), 0.0);
  std::vector<std::optional<std::string>> cv_failure(cells.size());
  {
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < cells.size(); ++i)
      tasks.emplace_back([&, i]() {
        try {
          Rng rng(stream_seed(cfg.base_seed, "cv|" + tag + "|" +
                                                 class_name(cells[i].cls) + "|" +
                                                 cells[i].tname));
          chosen[i] =
              cross_validate_lambda(cells[i].cls, cells[i].target, cfg, cfg.lambda_grid, rng);
        } catch (const std::exception& e) {
          cv_failure[i] = e.what();
        }
      });
    run_pool(cfg.threads, tasks);
  }

  // Phase 2: train/evaluate each surviving cell across seeds.
  const std::size_t seeds = cfg.seeds;
  std::vector<std::vector<EvalRow>> row_slots(cells.size() * seeds);
  std::vector<std::optional<std::string>> fail_slots(cells.size() * seeds);
  {
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cv_failure[i]) continue;
      for (std::size_t s = 0; s < seeds; ++s)
        tasks.emplace_back([&, i, s]() {
          try {
            row_slots[i * seeds + s] =
                synthetic_cell(tag, cells[i].cls, cells[i].target, cells[i].tname,
                               chosen[i], s, cfg)
                    .rows;
          } catch (const std::exception& e) {
            fail_slots[i * seeds + s] = e.what();
          }
        });
    }
    run_pool(cfg.threads, tasks);
  }

  EvalReport report;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string cname = class_name(cells[i].cls);
    if (cv_failure[i]) {
      report.failures.push_back({tag + ":" + cname + ":" + cells[i].tname + ":cv",
                                 *cv_failure[i]});
      continue;
    }
    for (std::size_t s = 0; s < seeds; ++s) {
      const std::size_t slot = i * seeds + s;
      if (fail_slots[slot]) {
        report.failures.push_back(
            {make_run_id(tag, cname, cells[i].tname, chosen[i], cfg.train_n, s),
             *fail_slots[slot]});
      } else {
        report.rows.insert(report.rows.end(), row_slots[slot].begin(),
                           row_slots[slot].end());
      }
    }
  }
  return report;
}

EvalReport robust_suite(const SuiteConfig& cfg) {
  const std::vector<ModelClass> classes = {ModelClass::s1, ModelClass::s2,
                                           ModelClass::s3};
  const std::string tname = target_name(TargetKind::robust_mean_truth);
  TargetSpec spec;
  spec.kind = TargetKind::robust_mean_truth;

  std::vector<double> chosen(classes.size(), 0.0);
  std::vector<std::optional<std::string>> cv_failure(classes.size());
  {
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < classes.size(); ++i)
      tasks.emplace_back([&, i]() {
        try {
          Rng rng(stream_seed(cfg.base_seed, std::string("cv|rob|") +
                                                 class_name(classes[i]) + "|" + tname));
          chosen[i] = cross_validate_lambda(classes[i], spec, cfg,
                                            cfg.robust_lambda_grid, rng);
        } catch (const std::exception& e) {
          cv_failure[i] = e.what();
        }
      });
    run_pool(cfg.threads, tasks);
  }

  const std::size_t seeds = cfg.seeds;
  const std::size_t model_slots = classes.size() * seeds;
  const std::size_t baseline_slots = baseline_names().size() * seeds;
  std::vector<std::vector<EvalRow>> row_slots(model_slots + baseline_slots);
  std::vector<std::optional<std::string>> fail_slots(model_slots + baseline_slots);
  {
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (cv_failure[i]) continue;
      for (std::size_t s = 0; s < seeds; ++s)
        tasks.emplace_back([&, i, s]() {
          try {
            row_slots[i * seeds + s] = robust_cell(classes[i], chosen[i], s, cfg).rows;
          } catch (const std::exception& e) {
            fail_slots[i * seeds + s] = e.what();
          }
        });
    }
    for (std::size_t b = 0; b < baseline_names().size(); ++b)
      for (std::size_t s = 0; s < seeds; ++s)
        tasks.emplace_back([&, b, s]() {
          const std::size_t slot = model_slots + b * seeds + s;
          try {
            row_slots[slot] = robust_baseline_rows(baseline_names()[b], s, cfg);
          } catch (const std::exception& e) {
            fail_slots[slot] = e.what();
          }
        });
    run_pool(cfg.threads, tasks);
  }

  EvalReport report;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string cname = class_name(classes[i]);
    if (cv_failure[i]) {
      report.failures.push_back({std::string("rob:") + cname + ":" + tname + ":cv",
                                 *cv_failure[i]});
      continue;
    }
    for (std::size_t s = 0; s < seeds; ++s) {
      const std::size_t slot = i * seeds + s;
      if (fail_slots[slot])
        report.failures.push_back(
            {make_run_id(kTagRobust, cname, tname, chosen[i], cfg.robust_train_n, s),
             *fail_slots[slot]});
      else
        report.rows.insert(report.rows.end(), row_slots[slot].begin(),
                           row_slots[slot].end());
    }
  }
  for (std::size_t b = 0; b < baseline_names().size(); ++b)
    for (std::size_t s = 0; s < seeds; ++s) {
      const std::size_t slot = model_slots + b * seeds + s;
      if (fail_slots[slot])
        report.failures.push_back(
            {make_run_id(kTagRobust, baseline_names()[b], tname, 0.0,
                         cfg.robust_train_n, s),
             *fail_slots[slot]});
      else
        report.rows.insert(report.rows.end(), row_slots[slot].begin(),
                           row_slots[slot].end());
    }
  return report;
}

EvalReport mnist_suite(const SuiteConfig& cfg) {
  const MnistData data = build_mnist(cfg);
  const std::vector<ModelClass> classes = {ModelClass::s1, ModelClass::s2,
                                           ModelClass::s3};
  const std::size_t seeds = cfg.mnist_seeds;
  std::vector<std::vector<EvalRow>> row_slots(classes.size() * seeds);
  std::vector<std::optional<std::string>> fail_slots(classes.size() * seeds);
  std::vector<std::function<void()>> tasks;
  for (std::size_t i = 0; i < classes.size(); ++i)
    for (std::size_t s = 0; s < seeds; ++s)
      tasks.emplace_back([&, i, s]() {
        try {
          row_slots[i * seeds + s] =
              mnist_cell(classes[i], cfg.mnist_lambda, s, cfg, data).rows;
        } catch (const std::exception& e) {
          fail_slots[i * seeds + s] = e.what();
        }
      });
  run_pool(cfg.threads, tasks);

  EvalReport report;
  for (std::size_t i = 0; i < classes.size(); ++i)
    for (std::size_t s = 0; s < seeds; ++s) {
      const std::size_t slot = i * seeds + s;
      if (fail_slots[slot])
        report.failures.push_back(
            {make_run_id(kTagMnist, class_name(classes[i]), kMnistTarget,
                         cfg.mnist_lambda, cfg.mnist_max_points, s),
             *fail_slots[slot]});
      else
        report.rows.insert(report.rows.end(), row_slots[slot].begin(),
                           row_slots[slot].end());
    }
  return report;
}

EvalReport diagnostics_suite(const SuiteConfig& cfg) {
  EvalReport report;
  for (const DiagnosticRow& row : run_diagnostics(cfg)) {
    if (!row.ok)
      report.failures.push_back(
          {"diag:" + row.check + ":" + row.parameter,
           "value " + format_double(row.value) + " violates bound " +
               format_double(row.bound)});
  }
  return report;
}

}  // namespace

EvalReport run_suite(const std::string& experiment, const SuiteConfig& cfg) {
  if (experiment == "synthetic")
    return training_suite(kTagSynthetic,
                          {ModelClass::s1, ModelClass::s2, ModelClass::s3},
                          cfg.synthetic_targets, cfg);
  if (experiment == "deepsets_compare")
    return training_suite(kTagCompare,
                          {ModelClass::s1, ModelClass::deepsets_unnormalized},
                          cfg.compare_targets, cfg);
  if (experiment == "robust") return robust_suite(cfg);
  if (experiment == "mnist") return mnist_suite(cfg);
  if (experiment == "diagnostics") return diagnostics_suite(cfg);
  throw std::invalid_argument(
      "unknown experiment '" + experiment +
      "' (expected synthetic, deepsets_compare, robust, mnist or diagnostics)");
}

namespace {

struct ParsedRunId {
  std::string tag, cls, target;
  double lambda = 0.0;
  std::size_t train_n = 0;
  std::size_t seed_index = 0;
};

ParsedRunId parse_run_id(const std::string& run_id) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = run_id.find(':', start);
    if (pos == std::string::npos) {
      parts.push_back(run_id.substr(start));
      break;
    }
    parts.push_back(run_id.substr(start, pos - start));
    start = pos + 1;
  }
  if (parts.size() != 6)
    throw std::invalid_argument("run_id '" + run_id +
                                "' is not exp:class:target:L<lambda>:N<n>:s<seed>");
  auto field = [&](std::size_t i, char prefix) {
    if (parts[i].size() < 2 || parts[i][0] != prefix)
      throw std::invalid_argument("run_id '" + run_id + "': field " +
                                  std::to_string(i) + " must start with '" + prefix +
                                  "'");
    return parts[i].substr(1);
  };
  ParsedRunId p;
  p.tag = parts[0];
  p.cls = parts[1];
  p.target = parts[2];
  {
    const std::string text = field(3, 'L');
    char* end = nullptr;
    p.lambda = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
      throw std::invalid_argument("run_id '" + run_id + "': bad lambda '" + text + "'");
  }
  for (auto [idx, prefix, dst] :
       {std::tuple<std::size_t, char, std::size_t*>{4, 'N', &p.train_n},
        std::tuple<std::size_t, char, std::size_t*>{5, 's', &p.seed_index}}) {
    const std::string text = field(idx, prefix);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0')
      throw std::invalid_argument("run_id '" + run_id + "': bad number '" + text + "'");
    *dst = static_cast<std::size_t>(v);
  }
  return p;
}

void check_train_n(const ParsedRunId& p, std::size_t configured) {
  if (p.train_n != configured)
    throw std::invalid_argument("run_id '" + p.tag + ":...' was produced at train_n=" +
                                std::to_string(p.train_n) +
                                " but the config says " + std::to_string(configured));
}

}  // namespace

std::vector<EvalRow> replay(const std::string& run_id, const SuiteConfig& cfg) {
  const ParsedRunId p = parse_run_id(run_id);
  if (p.tag == kTagSynthetic || p.tag == kTagCompare) {
    check_train_n(p, cfg.train_n);
    const ModelClass cls = class_from_name(p.cls);
    const TargetSpec spec = make_cell_target(cfg, target_from_name(p.target));
    return synthetic_cell(p.tag, cls, spec, p.target, p.lambda, p.seed_index, cfg).rows;
  }
  if (p.tag == kTagRobust) {
    check_train_n(p, cfg.robust_train_n);
    const auto& bl = baseline_names();
    if (std::find(bl.begin(), bl.end(), p.cls) != bl.end())
      return robust_baseline_rows(p.cls, p.seed_index, cfg);
    return robust_cell(class_from_name(p.cls), p.lambda, p.seed_index, cfg).rows;
  }
  if (p.tag == kTagMnist) {
    check_train_n(p, cfg.mnist_max_points);
    const MnistData data = build_mnist(cfg);
    return mnist_cell(class_from_name(p.cls), p.lambda, p.seed_index, cfg, data).rows;
  }
  throw std::invalid_argument("run_id '" + run_id + "': unknown experiment tag '" +
                              p.tag + "'");
}

CellOutcome run_training_cell(const std::string& experiment, ModelClass cls,
                              const std::string& target_name_, double lambda,
                              std::size_t seed_index, const SuiteConfig& cfg) {
  std::string tag;
  if (experiment == "synthetic" || experiment == kTagSynthetic)
    tag = kTagSynthetic;
  else if (experiment == "deepsets_compare" || experiment == kTagCompare)
    tag = kTagCompare;
  else if (experiment == "robust" || experiment == kTagRobust)
    tag = kTagRobust;
  else if (experiment == "mnist" || experiment == kTagMnist)
    tag = kTagMnist;
  else
    throw std::invalid_argument("unknown experiment '" + experiment + "'");
  if (tag == kTagRobust) {
    if (target_name_ != target_name(TargetKind::robust_mean_truth))
      throw std::invalid_argument("the robust experiment trains on target '" +
                                  std::string(target_name(TargetKind::robust_mean_truth)) +
                                  "', not '" + target_name_ + "'");
    return robust_cell(cls, lambda, seed_index, cfg);
  }
  if (tag == kTagMnist) {
    const MnistData data = build_mnist(cfg);
    return mnist_cell(cls, lambda, seed_index, cfg, data);
  }
  const TargetSpec spec = make_cell_target(cfg, target_from_name(target_name_));
  return synthetic_cell(tag, cls, spec, target_name_, lambda, seed_index, cfg);
}

std::vector<SummaryRow> summarize(const std::vector<EvalRow>& rows) {
  std::vector<SummaryRow> out;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<double>> values;
  for (const EvalRow& r : rows) {
    const std::string key =
        r.cls + "\n" + r.target + "\n" + r.metric + "\n" + std::to_string(r.test_n);
    auto [it, fresh] = index.emplace(key, out.size());
    if (fresh) {
      out.push_back({r.cls, r.target, r.metric, r.test_n, 0, 0.0, 0.0});
      values.emplace_back();
    }
    values[it->second].push_back(r.value);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::vector<double>& v = values[i];
    out[i].seeds = v.size();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    out[i].mean = mean;
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      out[i].stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
  }
  return out;
}

std::vector<DiagnosticRow> run_diagnostics(const SuiteConfig& cfg) {
  std::vector<DiagnosticRow> rows;
  Rng root(stream_seed(cfg.base_seed, "diagnostics"));

  // Duplication gaps: exactly zero for the measure-extendable targets, and
  // strictly positive for second-largest.
  {
    Rng rng = root.derive(1);
    std::vector<std::pair<std::string, ValueFn>> funcs;
    TargetSpec s;
    s.kind = TargetKind::mean_inv;
    funcs.emplace_back("mean", value_function(s));
    s.kind = TargetKind::max_inv;
    funcs.emplace_back("max", value_function(s));
    s.kind = TargetKind::median_inv;
    funcs.emplace_back("median", value_function(s));
    funcs.emplace_back("logmeanexp",
                       [](const std::vector<double>& v) { return value_logmeanexp(v, 1.0); });
    std::vector<std::vector<double>> sets;
    for (std::size_t i = 0; i < 50; ++i) {
      const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 15.0);
      std::vector<double> v(n);
      for (double& x : v) x = rng.uniform(-3.0, 3.0);
      sets.push_back(std::move(v));
    }
    for (const auto& [name, fn] : funcs) {
      double worst = 0.0;
      for (const auto& v : sets)
        for (std::size_t k : {2, 3})
          worst = std::max(worst, duplication_check(fn, v, k));
      rows.push_back({"duplication_gap", name, worst, 0.0, worst == 0.0});
    }
    const double gap = duplication_check(
        [](const std::vector<double>& v) { return value_second_largest(v); },
        {1.0, 2.0}, 2);
    rows.push_back({"duplication_gap_positive", "second_largest", gap, 0.0, gap > 0.0});
  }

  // Smooth-max bound: worst margin gap - log(N)/lambda over random sets.
  {
    Rng rng = root.derive(2);
    for (double lambda : {0.1, 1.0, 10.0}) {
      double worst = -INFINITY;
      for (std::size_t i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 64.0);
        std::vector<double> v(n);
        for (double& x : v) x = rng.uniform(-5.0, 5.0);
        const SoftmaxBound b = softmax_bound_check(v, lambda);
        worst = std::max(worst, b.gap - b.bound);
      }
      rows.push_back({"softmax_bound_margin", "lambda=" + format_double(lambda), worst,
                      0.0, worst <= 0.0});
    }
  }

  // Continuity: the hard max blows up like N on the adversarial family, the
  // mean stays 1-Lipschitz.
  {
    Rng rng = root.derive(3);
    auto sampler = [](Rng& r) {
      const std::size_t n = 2 + static_cast<std::size_t>(r.uniform() * 31.0);
      std::vector<double> v(n);
      for (double& x : v) x = r.uniform(-3.0, 3.0);
      return v;
    };
    TargetSpec s;
    s.kind = TargetKind::max_inv;
    Rng rng_max = rng.derive(0);
    const ContinuityReport max_rep =
        continuity_modulus(s, sampler, cfg.diag_pairs, {2, 4, 8, 16}, rng_max);
    for (const auto& [n, ratio] : max_rep.adversarial)
      rows.push_back({"continuity_max_adversarial", "N=" + std::to_string(n), ratio,
                      static_cast<double>(n), ratio == static_cast<double>(n)});
    s.kind = TargetKind::mean_inv;
    Rng rng_mean = rng.derive(1);
    const ContinuityReport mean_rep =
        continuity_modulus(s, sampler, cfg.diag_pairs, {2, 4, 8, 16}, rng_mean);
    rows.push_back({"continuity_mean_max_ratio",
                    "pairs=" + std::to_string(mean_rep.pairs), mean_rep.max_ratio,
                    1.0 + 1e-9, mean_rep.max_ratio <= 1.0 + 1e-9});
  }

  // Empirical-measure concentration for uniform [0,1]: monotone decrease and
  // the 1-D N^{-1/2} log-log slope.
  {
    Rng rng = root.derive(4);
    const std::vector<std::size_t> grid = {8, 32, 128, 512};
    const auto table = empirical_concentration(
        [](Rng& r) { return r.uniform(); }, grid, cfg.diag_trials, rng,
        cfg.diag_reference);
    double prev = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
      const bool ok = i == 0 || table[i].mean_w1 < prev;
      rows.push_back({"concentration_w1", "N=" + std::to_string(table[i].n),
                      table[i].mean_w1, i == 0 ? table[i].mean_w1 : prev, ok});
      prev = table[i].mean_w1;
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& row : table) {
      const double x = std::log(static_cast<double>(row.n));
      const double y = std::log(row.mean_w1);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double n = static_cast<double>(table.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rows.push_back({"concentration_slope", "uniform01", slope, -0.5,
                    std::fabs(slope + 0.5) <= 0.15});
  }
  return rows;
}

void write_diagnostics(const std::filesystem::path& path,
                       const std::vector<DiagnosticRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "check,parameter,value,bound,ok\n";
  for (const DiagnosticRow& r : rows) {
    if (r.check.find(',') != std::string::npos ||
        r.parameter.find(',') != std::string::npos)
      throw std::invalid_argument("diagnostic field contains the delimiter: " + r.check +
                                  " / " + r.parameter);
    out << r.check << ',' << r.parameter << ',' << format_double(r.value) << ','
        << format_double(r.bound) << ',' << (r.ok ? 1 : 0) << '\n';
  }
  if (!out.good())
    throw std::runtime_error("write to '" + path.string() + "' failed");
}

const std::vector<std::string>& SuiteConfig::allowed_keys() {
  static const std::vector<std::string> keys = {
      "seeds", "threads", "d", "half_width", "h1", "h2", "train_n", "train_sets",
      "iterations", "lr", "test_sets", "cv_sets", "test_n_grid", "lambda_grid",
      "targets", "compare_targets", "softmax_lambda",
      "robust_d", "robust_sigma_m", "robust_sigma_mprime", "robust_sigma_p",
      "robust_sigma_q", "robust_epsilon", "robust_train_n", "robust_train_sets",
      "robust_iterations", "robust_lr", "robust_test_sets", "robust_test_n_grid",
      "robust_lambda_grid", "robust_filter_tau", "robust_filter_cher",
      "mnist_images", "mnist_labels", "mnist_subset", "mnist_train",
      "mnist_max_points", "mnist_test_points", "mnist_iterations", "mnist_lr",
      "mnist_h1", "mnist_h2", "mnist_seeds", "mnist_threshold", "mnist_lambda",
      "diag_pairs", "diag_trials", "diag_reference"};
  return keys;
}

namespace {

std::size_t config_size(const ConfigMap& cfg, const std::string& key,
                        std::size_t fallback, bool allow_zero = false) {
  const std::int64_t v = config_int(cfg, key, static_cast<std::int64_t>(fallback));
  if (v < 0 || (!allow_zero && v == 0))
    throw std::invalid_argument("config key '" + key + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> config_size_grid(const ConfigMap& cfg, const std::string& key,
                                          const std::vector<std::size_t>& fallback) {
  std::vector<std::int64_t> def(fallback.begin(), fallback.end());
  const std::vector<std::int64_t> got = config_int_list(cfg, key, def);
  std::vector<std::size_t> out;
  for (std::int64_t v : got) {
    if (v <= 0)
      throw std::invalid_argument("config key '" + key + "' must list positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty())
    throw std::invalid_argument("config key '" + key + "' must not be empty");
  return out;
}

}  // namespace

SuiteConfig SuiteConfig::from_config(const ConfigMap& cfg) {
  SuiteConfig out;
  out.seeds = config_size(cfg, "seeds", out.seeds);
  out.threads = config_size(cfg, "threads", out.threads, /*allow_zero=*/true);
  out.d = config_size(cfg, "d", out.d);
  out.half_width = config_double(cfg, "half_width", out.half_width);
  out.h1 = config_size(cfg, "h1", out.h1, /*allow_zero=*/true);
  out.h2 = config_size(cfg, "h2", out.h2, /*allow_zero=*/true);
  out.train_n = config_size(cfg, "train_n", out.train_n);
  out.train_sets = config_size(cfg, "train_sets", out.train_sets);
  out.iterations = config_size(cfg, "iterations", out.iterations);
  out.lr = config_double(cfg, "lr", out.lr);
  out.test_sets = config_size(cfg, "test_sets", out.test_sets);
  out.cv_sets = config_size(cfg, "cv_sets", out.cv_sets);
  out.test_n_grid = config_size_grid(cfg, "test_n_grid", out.test_n_grid);
  out.lambda_grid = config_double_list(cfg, "lambda_grid", out.lambda_grid);
  out.synthetic_targets = config_string_list(cfg, "targets", out.synthetic_targets);
  out.compare_targets = config_string_list(cfg, "compare_targets", out.compare_targets);
  out.softmax_lambda = config_double(cfg, "softmax_lambda", out.softmax_lambda);

  out.robust.d = config_size(cfg, "robust_d", out.robust.d);
  out.robust.sigma_m = config_double(cfg, "robust_sigma_m", out.robust.sigma_m);
  out.robust.sigma_mprime =
      config_double(cfg, "robust_sigma_mprime", out.robust.sigma_mprime);
  out.robust.sigma_p = config_double(cfg, "robust_sigma_p", out.robust.sigma_p);
  out.robust.sigma_q = config_double(cfg, "robust_sigma_q", out.robust.sigma_q);
  out.robust.epsilon = config_double(cfg, "robust_epsilon", out.robust.epsilon);
  out.robust_train_n = config_size(cfg, "robust_train_n", out.robust_train_n);
  out.robust_train_sets = config_size(cfg, "robust_train_sets", out.robust_train_sets);
  out.robust_iterations = config_size(cfg, "robust_iterations", out.robust_iterations);
  out.robust_lr = config_double(cfg, "robust_lr", out.robust_lr);
  out.robust_test_sets = config_size(cfg, "robust_test_sets", out.robust_test_sets);
  out.robust_test_n_grid =
      config_size_grid(cfg, "robust_test_n_grid", out.robust_test_n_grid);
  out.robust_lambda_grid =
      config_double_list(cfg, "robust_lambda_grid", out.robust_lambda_grid);
  out.robust_filter_tau = config_double(cfg, "robust_filter_tau", out.robust_filter_tau);
  out.robust_filter_cher =
      config_double(cfg, "robust_filter_cher", out.robust_filter_cher);

  out.mnist_images = config_string(cfg, "mnist_images", out.mnist_images);
  out.mnist_labels = config_string(cfg, "mnist_labels", out.mnist_labels);
  out.mnist_subset = config_size(cfg, "mnist_subset", out.mnist_subset);
  out.mnist_train = config_size(cfg, "mnist_train", out.mnist_train);
  out.mnist_max_points = config_size(cfg, "mnist_max_points", out.mnist_max_points);
  out.mnist_test_points =
      config_size_grid(cfg, "mnist_test_points", out.mnist_test_points);
  out.mnist_iterations = config_size(cfg, "mnist_iterations", out.mnist_iterations);
  out.mnist_lr = config_double(cfg, "mnist_lr", out.mnist_lr);
  out.mnist_h1 = config_size(cfg, "mnist_h1", out.mnist_h1);
  out.mnist_h2 = config_size(cfg, "mnist_h2", out.mnist_h2);
  out.mnist_seeds = config_size(cfg, "mnist_seeds", out.mnist_seeds);
  out.mnist_threshold = config_double(cfg, "mnist_threshold", out.mnist_threshold);
  out.mnist_lambda = config_double(cfg, "mnist_lambda", out.mnist_lambda);

  out.diag_pairs = config_size(cfg, "diag_pairs", out.diag_pairs);
  out.diag_trials = config_size(cfg, "diag_trials", out.diag_trials);
  out.diag_reference = config_size(cfg, "diag_reference", out.diag_reference);

  if (out.lambda_grid.empty())
    throw std::invalid_argument("config key 'lambda_grid' must not be empty");
  for (double l : out.lambda_grid)
    if (l < 0.0) throw std::invalid_argument("lambda_grid entries must be >= 0");
  return out;
}

void SuiteConfig::apply_desk() {
  robust_train_sets = 500;
  robust_iterations = 5000;
}

}  // namespace measurenet
