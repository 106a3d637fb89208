#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "doctest.h"
#include "measurenet/model.hpp"
#include "measurenet/rng.hpp"

using namespace measurenet;

namespace {

// tiny hand-settable network: h1 x (d+1), h2 x h1, o x h2
MeasureNet tiny_net(ModelClass cls, Act a1, Act a2, double aug) {
  MeasureNet net;
  net.cls = cls;
  net.act1 = a1;
  net.act2 = a2;
  net.aug = aug;
  net.w1 = Matrix(1, 2);
  net.w1.data = {1.0, 1.0};
  net.w2 = Matrix(1, 1);
  net.w2.data = {2.0};
  net.w3 = Matrix(1, 1);
  net.w3.data = {1.0};
  return net;
}

Matrix two_points() {
  Matrix p(2, 1);
  p(0, 0) = 0.5;
  p(1, 0) = -0.5;
  return p;
}

double scalar_loss(const MeasureNet& net, const Matrix& points,
                   const std::vector<double>& dout) {
  const std::vector<double> out = forward(net, points);
  double s = 0.0;
  for (std::size_t r = 0; r < out.size(); ++r) s += dout[r] * out[r];
  return s;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("forward matches a hand computation, averaged pooling") {
    // points {0.5, -0.5}, aug 1: relu(w1.[x,1]) = {1.5, 0.5}, average 1.0,
    // z2 = 2, out = 2.
    const MeasureNet net = tiny_net(ModelClass::s1, Act::relu, Act::relu, 1.0);
    const auto out = forward(net, two_points());
    REQUIRE(out.size() == 1);
    CHECK(out[0] == 2.0);
  }

  TEST_CASE("forward matches a hand computation, sum pooling") {
    const MeasureNet net =
        tiny_net(ModelClass::deepsets_unnormalized, Act::relu, Act::relu, 1.0);
    const auto out = forward(net, two_points());
    CHECK(out[0] == 4.0);  // pooled sum 2.0 instead of average 1.0
  }

  TEST_CASE("forward matches a hand computation, squared relu") {
    // relu2 features {2.25, 0.25}, average 1.25, z2 = 2.5, relu2 -> 6.25
    const MeasureNet net = tiny_net(ModelClass::s1, Act::relu_squared, Act::relu_squared, 1.0);
    const auto out = forward(net, two_points());
    CHECK(out[0] == 6.25);
  }

  TEST_CASE("doubling the set leaves averaged classes alone, doubles summed z") {
    Matrix once(2, 1), twice(4, 1);
    once(0, 0) = 0.5; once(1, 0) = -0.5;
    twice(0, 0) = 0.5; twice(1, 0) = -0.5; twice(2, 0) = 0.5; twice(3, 0) = -0.5;
    const MeasureNet avg = tiny_net(ModelClass::s1, Act::relu, Act::relu, 1.0);
    CHECK(forward(avg, once)[0] == forward(avg, twice)[0]);
    const MeasureNet summed =
        tiny_net(ModelClass::deepsets_unnormalized, Act::relu, Act::relu, 1.0);
    CHECK(forward(summed, twice)[0] == 2.0 * forward(summed, once)[0]);
  }

  TEST_CASE("forward is permutation invariant up to roundoff") {
    Rng rng(17);
    MeasureNet net = init_model(ModelClass::s1, 3, 8, 8, 2, Act::relu, Act::relu,
                                default_aug(3), rng);
    Matrix p(6, 3);
    for (double& v : p.data) v = rng.uniform(-3.0, 3.0);
    const auto base = forward(net, p);
    Matrix q(6, 3);
    const std::size_t perm[6] = {4, 2, 0, 5, 1, 3};
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t c = 0; c < 3; ++c) q(i, c) = p(perm[i], c);
    const auto permuted = forward(net, q);
    for (std::size_t r = 0; r < base.size(); ++r)
      CHECK(std::fabs(base[r] - permuted[r]) <= 1e-12 * std::max(1.0, std::fabs(base[r])));
  }

  TEST_CASE("forward validates shapes") {
    const MeasureNet net = tiny_net(ModelClass::s1, Act::relu, Act::relu, 1.0);
    Matrix wrong(2, 3);
    CHECK_THROWS_AS(forward(net, wrong), std::invalid_argument);
    Matrix empty(0, 1);
    CHECK_THROWS_AS(forward(net, empty), std::invalid_argument);
  }

  TEST_CASE("default_aug is the radius of the input cube") {
    CHECK(default_aug(1) == 3.0);
    CHECK(default_aug(4) == 6.0);
    CHECK(default_aug(10) == doctest::Approx(3.0 * std::sqrt(10.0)).epsilon(1e-15));
    CHECK(default_aug(10, 1.0) == doctest::Approx(std::sqrt(10.0)).epsilon(1e-15));
  }

  TEST_CASE("init_model is deterministic and normalizes frozen layers") {
    Rng a(5), b(5);
    const MeasureNet m1 = init_model(ModelClass::s2, 4, 6, 10, 1, Act::relu, Act::relu, 6.0, a);
    const MeasureNet m2 = init_model(ModelClass::s2, 4, 6, 10, 1, Act::relu, Act::relu, 6.0, b);
    CHECK(m1.w1.data == m2.w1.data);
    CHECK(m1.w2.data == m2.w2.data);
    CHECK(m1.w3.data == m2.w3.data);
    for (std::size_t i = 0; i < m1.w1.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m1.w1.cols; ++j) s += m1.w1(i, j) * m1.w1(i, j);
      CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-12));
    }
    Rng c(5);
    const MeasureNet m3 = init_model(ModelClass::s3, 4, 6, 10, 1, Act::relu, Act::relu, 6.0, c);
    for (std::size_t i = 0; i < m3.w2.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m3.w2.cols; ++j) s += m3.w2(i, j) * m3.w2(i, j);
      CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("class freeze table") {
    CHECK(class_from_name("S1") == ModelClass::s1);
    CHECK(class_from_name("DeepSetsUnnormalized") == ModelClass::deepsets_unnormalized);
    CHECK_THROWS_AS(class_from_name("S4"), std::invalid_argument);
    MeasureNet net;
    net.cls = ModelClass::s1;
    CHECK(net.trains_w1());
    CHECK(net.trains_w2());
    net.cls = ModelClass::s2;
    CHECK_FALSE(net.trains_w1());
    CHECK(net.trains_w2());
    net.cls = ModelClass::s3;
    CHECK_FALSE(net.trains_w1());
    CHECK_FALSE(net.trains_w2());
    net.cls = ModelClass::deepsets_unnormalized;
    CHECK(net.trains_w1());
    CHECK_FALSE(net.average_pooling());
    CHECK(default_widths(ModelClass::s2).h2 == 1000);
    CHECK(default_widths(ModelClass::s3).h1 == 1000);
  }

  TEST_CASE("backward matches central finite differences on trainable layers") {
    Rng rng(23);
    for (ModelClass cls : {ModelClass::s1, ModelClass::s2, ModelClass::s3,
                           ModelClass::deepsets_unnormalized}) {
      MeasureNet net = init_model(cls, 2, 3, 4, 2, Act::relu, Act::relu_squared,
                                  default_aug(2), rng);
      Matrix p(3, 2);
      for (double& v : p.data) v = rng.uniform(-3.0, 3.0);
      const std::vector<double> dout = {0.7, -1.3};

      ForwardCache cache;
      forward(net, p, &cache);
      Gradients grads(net);
      grads.set_zero();
      backward(net, cache, dout, grads);

      auto fd_check = [&](Matrix& w, const Matrix& g) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double keep = w.data[i];
          const double h = 1e-6 * std::max(1.0, std::fabs(keep));
          w.data[i] = keep + h;
          const double up = scalar_loss(net, p, dout);
          w.data[i] = keep - h;
          const double dn = scalar_loss(net, p, dout);
          w.data[i] = keep;
          const double fd = (up - dn) / (2.0 * h);
          CHECK(std::fabs(fd - g.data[i]) <=
                1e-5 * std::max({std::fabs(fd), std::fabs(g.data[i]), 1e-6}));
        }
      };
      if (net.trains_w1()) fd_check(net.w1, grads.w1);
      if (net.trains_w2()) fd_check(net.w2, grads.w2);
      fd_check(net.w3, grads.w3);
    }
  }

  TEST_CASE("backward leaves frozen slots untouched") {
    Rng rng(29);
    MeasureNet net = init_model(ModelClass::s3, 2, 3, 4, 1, Act::relu, Act::relu,
                                default_aug(2), rng);
    Matrix p(2, 2);
    for (double& v : p.data) v = rng.uniform(-1.0, 1.0);
    ForwardCache cache;
    forward(net, p, &cache);
    Gradients grads(net);
    grads.set_zero();
    backward(net, cache, {1.0}, grads);
    for (double v : grads.w1.data) CHECK(v == 0.0);
    for (double v : grads.w2.data) CHECK(v == 0.0);
    double g3 = 0.0;
    for (double v : grads.w3.data) g3 += std::fabs(v);
    CHECK(g3 > 0.0);
  }

  TEST_CASE("path_norm hand values per class") {
    // w1 = [1, 1] so K(w1) = {2}; w2 = [2] so K(w2) = {4}; w3 = [1].
    MeasureNet net = tiny_net(ModelClass::s1, Act::relu, Act::relu, 1.0);
    CHECK(path_norm(net) == 4.0);  // |1| * (|2| * 2)
    net.cls = ModelClass::deepsets_unnormalized;
    CHECK(path_norm(net) == 4.0);
    net.cls = ModelClass::s2;
    CHECK(path_norm(net) == 4.0);  // |1| * 4
    net.cls = ModelClass::s3;
    CHECK(path_norm(net) == 1.0);  // ||w3 row||
    net.w3.data = {-3.0};
    net.cls = ModelClass::s2;
    CHECK(path_norm(net) == 12.0);
  }

  TEST_CASE("path_norm_grad matches finite differences away from kinks") {
    Rng rng(41);
    for (ModelClass cls : {ModelClass::s1, ModelClass::s2, ModelClass::s3}) {
      MeasureNet net = init_model(cls, 2, 3, 4, 2, Act::relu, Act::relu,
                                  default_aug(2), rng);
      Gradients grads(net);
      grads.set_zero();
      path_norm_grad(net, 0.5, grads);
      auto fd_check = [&](Matrix& w, const Matrix& g) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double keep = w.data[i];
          const double h = 1e-7 * std::max(1.0, std::fabs(keep));
          w.data[i] = keep + h;
          const double up = path_norm(net);
          w.data[i] = keep - h;
          const double dn = path_norm(net);
          w.data[i] = keep;
          const double fd = 0.5 * (up - dn) / (2.0 * h);
          CHECK(std::fabs(fd - g.data[i]) <=
                1e-4 * std::max({std::fabs(fd), std::fabs(g.data[i]), 1e-8}));
        }
      };
      if (net.trains_w1()) fd_check(net.w1, grads.w1);
      if (net.trains_w2()) fd_check(net.w2, grads.w2);
      fd_check(net.w3, grads.w3);
    }
  }

  TEST_CASE("path_norm_grad only touches trainable slots") {
    Rng rng(43);
    MeasureNet net = init_model(ModelClass::s2, 2, 3, 4, 1, Act::relu, Act::relu, 3.0, rng);
    Gradients grads(net);
    grads.set_zero();
    path_norm_grad(net, 1.0, grads);
    for (double v : grads.w1.data) CHECK(v == 0.0);
  }

  TEST_CASE("normalize_rows rejects a zero row") {
    Matrix w(2, 2);
    w.data = {1.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(normalize_rows(w), std::domain_error);
  }

  TEST_CASE("share_first_layer preserves the represented function class") {
    Rng rng(59);
    const MeasureNet src = init_model(ModelClass::s1, 3, 5, 4, 1, Act::relu, Act::relu,
                                      default_aug(3), rng);
    MeasureNet dst = init_model(ModelClass::s2, 3, 5, 4, 1, Act::relu, Act::relu,
                                default_aug(3), rng);
    share_first_layer(dst, src);
    // dst's rows are the normalized src rows; undo the scaling through w2 so
    // the composite function is identical.
    dst.w2 = src.w2;
    dst.w3 = src.w3;
    for (std::size_t h = 0; h < src.w1.rows; ++h) {
      double s = 0.0;
      for (std::size_t j = 0; j < src.w1.cols; ++j) s += src.w1(h, j) * src.w1(h, j);
      const double norm = std::sqrt(s);
      for (std::size_t j = 0; j < dst.w2.rows; ++j) dst.w2(j, h) *= norm;
    }
    Matrix p(4, 3);
    for (double& v : p.data) v = rng.uniform(-3.0, 3.0);
    const double a = forward(src, p)[0];
    const double b = forward(dst, p)[0];
    CHECK(std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(a)));

    // idempotent: sharing again changes nothing
    const Matrix before = dst.w1;
    share_first_layer(dst, src);
    CHECK(dst.w1.data == before.data);

    MeasureNet wrong = init_model(ModelClass::s2, 3, 6, 4, 1, Act::relu, Act::relu, 3.0, rng);
    CHECK_THROWS_AS(share_first_layer(wrong, src), std::invalid_argument);
  }

  TEST_CASE("checkpoint round trip is exact") {
    Rng rng(61);
    const MeasureNet net = init_model(ModelClass::s3, 4, 5, 6, 3, Act::relu_squared,
                                      Act::relu, 1.25, rng);
    const auto path = std::filesystem::temp_directory_path() / "measurenet_ckpt_test.bin";
    save_model(net, path);
    const MeasureNet back = load_model(path);
    CHECK(back.cls == net.cls);
    CHECK(back.act1 == net.act1);
    CHECK(back.act2 == net.act2);
    CHECK(back.aug == net.aug);
    CHECK(back.w1.data == net.w1.data);
    CHECK(back.w2.data == net.w2.data);
    CHECK(back.w3.data == net.w3.data);
    std::filesystem::remove(path);
  }

  TEST_CASE("loading a non-checkpoint fails with a clear error") {
    const auto path = std::filesystem::temp_directory_path() / "measurenet_not_ckpt.bin";
    {
      std::FILE* f = std::fopen(path.string().c_str(), "wb");
      REQUIRE(f != nullptr);
      std::fputs("just some text", f);
      std::fclose(f);
    }
    CHECK_THROWS_WITH_AS(load_model(path),
                         doctest::Contains("bad magic"), std::runtime_error);
    std::filesystem::remove(path);
  }
}
