#pragma once

#include <stdexcept>
#include <string>

namespace measurenet {

// Hidden-layer nonlinearities. Both are positively homogeneous, which the
// frozen-layer row normalization relies on: rescaling a first-layer row only
// rescales its feature, so a trainable next layer can absorb it.
enum class Act { relu, relu_squared };

inline double activate(Act a, double x) {
  const double r = x > 0.0 ? x : 0.0;
  return a == Act::relu ? r : r * r;
}

// One-sided derivative with value 0 at the kink.
inline double activate_grad(Act a, double x) {
  if (x <= 0.0) return 0.0;
  return a == Act::relu ? 1.0 : 2.0 * x;
}

inline const char* act_name(Act a) {
  return a == Act::relu ? "relu" : "relu2";
}

inline Act act_from_name(const std::string& name) {
  if (name == "relu") return Act::relu;
  if (name == "relu2") return Act::relu_squared;
  throw std::invalid_argument("unknown activation '" + name + "' (expected relu or relu2)");
}

}  // namespace measurenet
