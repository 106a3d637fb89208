#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "measurenet/data.hpp"
#include "measurenet/harness.hpp"
#include "measurenet/model.hpp"

namespace {

using namespace measurenet;

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 0;
  bool desk = false;
};

void add_common(CLI::App* sub, CommonArgs& c) {
  sub->add_option("--config", c.config, "config file with key = value lines");
  sub->add_option("--seed", c.seed, "base seed (default 0)");
  sub->add_flag("--desk", c.desk,
                "desk-scale robust protocol: 500 training sets, 5000 iterations");
}

SuiteConfig load_config(const CommonArgs& c) {
  ConfigMap map;
  if (!c.config.empty()) map = parse_config(c.config, SuiteConfig::allowed_keys());
  SuiteConfig cfg = SuiteConfig::from_config(map);
  cfg.base_seed = c.seed;
  if (c.desk) cfg.apply_desk();
  return cfg;
}

void print_rows(const std::vector<EvalRow>& rows) {
  std::printf("%s\n", kResultsHeader);
  for (const EvalRow& r : rows)
    std::printf("%s,%s,%s,%s,%d,%d,%llu,%s,%s\n", r.run_id.c_str(), r.cls.c_str(),
                r.target.c_str(), format_double(r.lambda).c_str(), r.train_n, r.test_n,
                static_cast<unsigned long long>(r.seed), r.metric.c_str(),
                format_double(r.value).c_str());
}

void print_summary(const std::vector<EvalRow>& rows) {
  const std::vector<SummaryRow> summary = summarize(rows);
  if (summary.empty()) return;
  std::printf("\n%-22s %-18s %-12s %8s %6s %14s %14s\n", "class", "target", "metric",
              "test_n", "runs", "mean", "std");
  for (const SummaryRow& s : summary)
    std::printf("%-22s %-18s %-12s %8d %6zu %14.6g %14.6g\n", s.cls.c_str(),
                s.target.c_str(), s.metric.c_str(), s.test_n, s.seeds, s.mean,
                s.stddev);
}

int finish_suite(const EvalReport& report, const std::string& out_path,
                 bool write_rows) {
  if (write_rows) {
    write_results(out_path, report.rows);
    std::printf("wrote %zu rows to %s\n", report.rows.size(), out_path.c_str());
  }
  print_summary(report.rows);
  for (const CellFailure& f : report.failures)
    std::fprintf(stderr, "FAILED %s: %s\n", f.run_id.c_str(), f.message.c_str());
  return report.failures.empty() ? 0 : 1;
}

void write_history(const std::string& path, const TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "iteration,data_loss,penalty,total\n";
  for (const HistoryRow& h : result.history)
    out << h.iteration << ',' << format_double(h.data_loss) << ','
        << format_double(h.penalty) << ','
        << format_double(h.data_loss + h.penalty) << '\n';
  if (!out.good()) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Point-set learning benchmark: nested model classes over empirical "
      "measures, robust-mean experiments, point-cloud digits, and "
      "measure-continuity diagnostics"};
  app.require_subcommand(1);

  // train: one (class, target, lambda, seed) cell
  auto* train_cmd = app.add_subcommand("train", "train a single cell and print its rows");
  CommonArgs train_common;
  add_common(train_cmd, train_common);
  std::string train_experiment = "synthetic";
  std::string train_class = "S1";
  std::string train_target = "mean_inv";
  double train_lambda = 0.0;
  std::uint64_t train_seed_index = 0;
  std::string train_history, train_save;
  train_cmd->add_option("--experiment", train_experiment,
                        "synthetic, deepsets_compare, robust or mnist");
  train_cmd->add_option("--class", train_class, "S1, S2, S3 or DeepSetsUnnormalized");
  train_cmd->add_option("--target", train_target,
                        "target name (robust_mean_truth for robust, digits for mnist)");
  train_cmd->add_option("--lambda", train_lambda, "path-norm coefficient");
  train_cmd->add_option("--seed-index", train_seed_index, "seed index within the cell");
  train_cmd->add_option("--out", train_history,
                        "write the loss history CSV (iteration,data_loss,penalty,total)");
  train_cmd->add_option("--save", train_save, "write the trained model checkpoint");

  // sweep: the synthetic suite (or the normalized-vs-unnormalized comparison)
  auto* sweep_cmd = app.add_subcommand("sweep", "run the synthetic benchmark suite");
  CommonArgs sweep_common;
  add_common(sweep_cmd, sweep_common);
  std::string sweep_out = "results.csv";
  bool sweep_compare = false;
  sweep_cmd->add_option("--out", sweep_out, "results CSV path");
  sweep_cmd->add_flag("--compare", sweep_compare,
                      "run the DeepSetsUnnormalized comparison instead");

  auto* robust_cmd = app.add_subcommand("robust", "run the robust-mean suite");
  CommonArgs robust_common;
  add_common(robust_cmd, robust_common);
  std::string robust_out = "robust.csv";
  robust_cmd->add_option("--out", robust_out, "results CSV path");

  auto* mnist_cmd = app.add_subcommand("mnist", "run the point-cloud digits suite");
  CommonArgs mnist_common;
  add_common(mnist_cmd, mnist_common);
  std::string mnist_out = "mnist.csv";
  std::string mnist_images, mnist_labels;
  std::uint64_t mnist_max_points = 0, mnist_subset = 0;
  mnist_cmd->add_option("--out", mnist_out, "results CSV path");
  mnist_cmd->add_option("--images", mnist_images, "IDX image file (optionally .gz)");
  mnist_cmd->add_option("--labels", mnist_labels, "IDX label file (optionally .gz)");
  mnist_cmd->add_option("--max-points", mnist_max_points, "points per training cloud");
  mnist_cmd->add_option("--subset", mnist_subset, "number of images to use");

  auto* diagnose_cmd =
      app.add_subcommand("diagnose", "run the measure-continuity diagnostics");
  CommonArgs diagnose_common;
  add_common(diagnose_cmd, diagnose_common);
  std::string diagnose_out = "diagnostics.csv";
  diagnose_cmd->add_option("--out", diagnose_out, "diagnostics CSV path");

  auto* replay_cmd = app.add_subcommand("replay", "recompute the rows of one run_id");
  CommonArgs replay_common;
  add_common(replay_cmd, replay_common);
  std::string replay_id;
  std::string replay_out;
  replay_cmd->add_option("run_id", replay_id, "row identifier from a results CSV")
      ->required();
  replay_cmd->add_option("--out", replay_out, "also write the rows as a results CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const SuiteConfig cfg = load_config(train_common);
      const CellOutcome outcome =
          run_training_cell(train_experiment, class_from_name(train_class),
                            train_target, train_lambda,
                            static_cast<std::size_t>(train_seed_index), cfg);
      std::printf("final data loss %s, penalty %s\n",
                  format_double(outcome.trained.final_data_loss).c_str(),
                  format_double(outcome.trained.final_penalty).c_str());
      if (!train_history.empty()) write_history(train_history, outcome.trained);
      if (!train_save.empty()) save_model(outcome.trained.net, train_save);
      print_rows(outcome.rows);
      return 0;
    }
    if (*sweep_cmd) {
      const SuiteConfig cfg = load_config(sweep_common);
      const std::string experiment = sweep_compare ? "deepsets_compare" : "synthetic";
      return finish_suite(run_suite(experiment, cfg), sweep_out, true);
    }
    if (*robust_cmd) {
      const SuiteConfig cfg = load_config(robust_common);
      return finish_suite(run_suite("robust", cfg), robust_out, true);
    }
    if (*mnist_cmd) {
      SuiteConfig cfg = load_config(mnist_common);
      if (!mnist_images.empty()) cfg.mnist_images = mnist_images;
      if (!mnist_labels.empty()) cfg.mnist_labels = mnist_labels;
      if (mnist_max_points != 0)
        cfg.mnist_max_points = static_cast<std::size_t>(mnist_max_points);
      if (mnist_subset != 0) cfg.mnist_subset = static_cast<std::size_t>(mnist_subset);
      return finish_suite(run_suite("mnist", cfg), mnist_out, true);
    }
    if (*diagnose_cmd) {
      const SuiteConfig cfg = load_config(diagnose_common);
      const std::vector<DiagnosticRow> rows = run_diagnostics(cfg);
      write_diagnostics(diagnose_out, rows);
      std::size_t bad = 0;
      for (const DiagnosticRow& r : rows) {
        std::printf("%-28s %-16s value=%-22s bound=%-22s %s\n", r.check.c_str(),
                    r.parameter.c_str(), format_double(r.value).c_str(),
                    format_double(r.bound).c_str(), r.ok ? "ok" : "VIOLATED");
        if (!r.ok) ++bad;
      }
      std::printf("wrote %zu checks to %s\n", rows.size(), diagnose_out.c_str());
      return bad == 0 ? 0 : 1;
    }
    if (*replay_cmd) {
      const SuiteConfig cfg = load_config(replay_common);
      const std::vector<EvalRow> rows = replay(replay_id, cfg);
      print_rows(rows);
      if (!replay_out.empty()) write_results(replay_out, rows);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
