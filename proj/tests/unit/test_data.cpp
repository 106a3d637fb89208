#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "measurenet/data.hpp"

using namespace measurenet;

TEST_SUITE("data") {
  TEST_CASE("cube sampler respects shape, range and determinism") {
    Rng a(9), b(9);
    const SetBatch x = sample_uniform_cube_sets(4, 6, 3, 3.0, a);
    const SetBatch y = sample_uniform_cube_sets(4, 6, 3, 3.0, b);
    REQUIRE(x.count() == 4);
    for (std::size_t s = 0; s < 4; ++s) {
      REQUIRE(x.sets[s].rows == 6);
      REQUIRE(x.sets[s].cols == 3);
      CHECK(x.sets[s].data == y.sets[s].data);
      for (double v : x.sets[s].data) {
        CHECK(v >= -3.0);
        CHECK(v < 3.0);
      }
    }
    CHECK_THROWS_AS(sample_uniform_cube_sets(1, 0, 2, 3.0, a), std::invalid_argument);
    CHECK_THROWS_AS(sample_uniform_cube_sets(1, 2, 2, -1.0, a), std::invalid_argument);
  }

  TEST_CASE("robust sampler: epsilon 0 marks nothing as contaminated") {
    Rng rng(10);
    RobustParams params;
    params.d = 3;
    params.epsilon = 0.0;
    const RobustBatch rb = sample_robust_sets(5, 8, params, rng);
    for (const auto& flags : rb.from_q)
      for (auto f : flags) CHECK(f == 0);
    REQUIRE(rb.batch.targets.rows == 5);
    REQUIRE(rb.batch.targets.cols == 3);
  }

  TEST_CASE("robust sampler: contamination frequency matches epsilon") {
    Rng rng(11);
    RobustParams params;
    params.d = 2;
    params.epsilon = 0.2;
    const RobustBatch rb = sample_robust_sets(400, 20, params, rng);
    std::size_t q = 0, total = 0;
    for (const auto& flags : rb.from_q)
      for (auto f : flags) {
        q += f;
        ++total;
      }
    const double rate = static_cast<double>(q) / static_cast<double>(total);
    CHECK(std::fabs(rate - 0.2) < 0.02);
  }

  TEST_CASE("robust sampler: points scatter around the latent mean") {
    Rng rng(12);
    RobustParams params;
    params.d = 4;
    params.epsilon = 0.0;
    params.sigma_p = 0.01;  // nearly collapse the inlier cloud onto m
    const RobustBatch rb = sample_robust_sets(3, 50, params, rng);
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t c = 0; c < 4; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 50; ++i) mean += rb.batch.sets[s](i, c);
        mean /= 50.0;
        CHECK(std::fabs(mean - rb.batch.targets(s, c)) < 0.01);
      }
    }
    params.epsilon = 1.0;
    CHECK_THROWS_AS(sample_robust_sets(1, 2, params, rng), std::invalid_argument);
  }

  TEST_CASE("format_double round trips exactly") {
    for (double v : {0.0, -0.0, 1.0 / 3.0, 5e-324, 1.7976931348623157e308, -123.456,
                     3.0000000000000004}) {
      const std::string s = format_double(v);
      CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
  }

  TEST_CASE("results CSV round trips bit for bit") {
    std::vector<EvalRow> rows;
    EvalRow r;
    r.run_id = "syn:S1:mean_inv:L0.001:N4:s3";
    r.cls = "S1";
    r.target = "mean_inv";
    r.lambda = 1e-3;
    r.train_n = 4;
    r.test_n = 32;
    r.seed = 3;
    r.metric = "mse";
    r.value = 1.0 / 3.0;
    rows.push_back(r);
    r.value = 5e-324;
    r.seed = 18446744073709551615ull;
    rows.push_back(r);
    const auto path = std::filesystem::temp_directory_path() / "measurenet_results_test.csv";
    write_results(path, rows);
    const auto back = read_results(path);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(back[i].run_id == rows[i].run_id);
      CHECK(back[i].lambda == rows[i].lambda);
      CHECK(back[i].train_n == rows[i].train_n);
      CHECK(back[i].test_n == rows[i].test_n);
      CHECK(back[i].seed == rows[i].seed);
      CHECK(back[i].metric == rows[i].metric);
      CHECK(back[i].value == rows[i].value);
    }
    std::filesystem::remove(path);
  }

  TEST_CASE("results writer refuses fields containing the delimiter") {
    EvalRow r;
    r.run_id = "bad,id";
    r.cls = "S1";
    r.target = "mean_inv";
    r.metric = "mse";
    const auto path = std::filesystem::temp_directory_path() / "measurenet_badfield.csv";
    CHECK_THROWS_AS(write_results(path, {r}), std::invalid_argument);
    std::filesystem::remove(path);
  }

  TEST_CASE("results reader validates header and row shape") {
    const auto path = std::filesystem::temp_directory_path() / "measurenet_badcsv.csv";
    {
      std::ofstream f(path);
      f << "wrong,header\n";
    }
    CHECK_THROWS_WITH_AS(read_results(path), doctest::Contains("unexpected header"),
                         std::runtime_error);
    {
      std::ofstream f(path);
      f << kResultsHeader << "\n";
      f << "id,S1,mean_inv,0,4\n";  // too few columns
    }
    CHECK_THROWS_WITH_AS(read_results(path), doctest::Contains("expected 9 columns"),
                         std::runtime_error);
    {
      std::ofstream f(path);
      f << kResultsHeader << "\n";
      f << "id,S1,mean_inv,zero,4,8,0,mse,0.5\n";
    }
    CHECK_THROWS_WITH_AS(read_results(path), doctest::Contains("bad lambda"),
                         std::runtime_error);
    std::filesystem::remove(path);
  }

  TEST_CASE("config parser: comments, trimming, typed access") {
    const std::string text =
        "# a comment\n"
        "\n"
        "alpha = 2.5   # trailing comment\n"
        "count = 7\n"
        "name = hello\n"
        "grid = 1, 2, 3\n"
        "lams = 0.1,0.2\n";
    const ConfigMap cfg =
        parse_config_text(text, {"alpha", "count", "name", "grid", "lams"});
    CHECK(config_double(cfg, "alpha", 0.0) == 2.5);
    CHECK(config_int(cfg, "count", 0) == 7);
    CHECK(config_string(cfg, "name", "") == "hello");
    CHECK(config_int(cfg, "missing", 42) == 42);
    const auto grid = config_int_list(cfg, "grid", {});
    REQUIRE(grid.size() == 3);
    CHECK(grid[2] == 3);
    const auto lams = config_double_list(cfg, "lams", {});
    REQUIRE(lams.size() == 2);
    CHECK(lams[1] == 0.2);
    const auto fallback = config_double_list(cfg, "missing", {9.0});
    CHECK(fallback[0] == 9.0);
  }

  TEST_CASE("config parser errors name the offending line") {
    CHECK_THROWS_WITH_AS(parse_config_text("alpha = 1\nbogus = 2\n", {"alpha"}),
                         doctest::Contains("line 2: unknown key 'bogus'"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_text("alpha = 1\nalpha = 2\n", {"alpha"}),
                         doctest::Contains("duplicate key"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_text("just words\n", {"alpha"}),
                         doctest::Contains("expected 'key = value'"), std::invalid_argument);
    const ConfigMap cfg = parse_config_text("alpha = abc\n", {"alpha"});
    CHECK_THROWS_WITH_AS(config_double(cfg, "alpha", 0.0),
                         doctest::Contains("expects a number"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(config_int(cfg, "alpha", 0),
                         doctest::Contains("expects an integer"), std::invalid_argument);
  }

  TEST_CASE("config file reader reports a missing file") {
    CHECK_THROWS_WITH_AS(parse_config("/nonexistent/measurenet.cfg", {"a"}),
                         doctest::Contains("cannot open config"), std::runtime_error);
  }
}
