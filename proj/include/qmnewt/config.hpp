#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string_view>

#include <fmt/format.h>

#include "qmnewt/core_state.hpp"
#include "qmnewt/errors.hpp"
#include "qmnewt/model_full.hpp"

namespace qmnewt {

enum class ModelVariant { full, simplified };
enum class StepVariant { newton_direct, sr1, bfgs };
enum class Safeguard { pure, backtrack };
/// `damped` runs the Cholesky damping ladder, `pure` a plain LU solve G\g.
enum class NewtonMode { damped, pure };

inline std::string_view to_string(ModelVariant v) {
  return v == ModelVariant::full ? "full" : "simplified";
}
inline std::string_view to_string(StepVariant v) {
  switch (v) {
    case StepVariant::newton_direct: return "newton";
    case StepVariant::sr1: return "sr1";
    case StepVariant::bfgs: return "bfgs";
  }
  return "unknown";
}
inline std::string_view to_string(Safeguard s) { return s == Safeguard::pure ? "pure" : "backtrack"; }
inline std::string_view to_string(NewtonMode m) { return m == NewtonMode::pure ? "pure" : "damped"; }

inline ModelVariant parse_model_variant(std::string_view s) {
  if (s == "full") return ModelVariant::full;
  if (s == "simplified") return ModelVariant::simplified;
  throw ConfigError(fmt::format("unknown model variant '{}'", s));
}
inline StepVariant parse_step_variant(std::string_view s) {
  if (s == "newton" || s == "newton_direct") return StepVariant::newton_direct;
  if (s == "sr1") return StepVariant::sr1;
  if (s == "bfgs") return StepVariant::bfgs;
  throw ConfigError(fmt::format("unknown step variant '{}'", s));
}
inline Safeguard parse_safeguard(std::string_view s) {
  if (s == "pure") return Safeguard::pure;
  if (s == "backtrack") return Safeguard::backtrack;
  throw ConfigError(fmt::format("unknown safeguard '{}'", s));
}
inline KktCoupling parse_kkt_coupling(std::string_view s) {
  if (s == "printed") return KktCoupling::printed;
  if (s == "full") return KktCoupling::full;
  throw ConfigError(fmt::format("unknown kkt coupling '{}'", s));
}
inline NewtonMode parse_newton_mode(std::string_view s) {
  if (s == "damped") return NewtonMode::damped;
  if (s == "pure") return NewtonMode::pure;
  throw ConfigError(fmt::format("unknown newton mode '{}'", s));
}

struct SolverConfig {
  double epsilon = 1e-8;
  int max_iter = 2000;
  ModelVariant model_variant = ModelVariant::simplified;
  StepVariant step_variant = StepVariant::newton_direct;
  Safeguard safeguard = Safeguard::backtrack;
  /// Radius of the initial point cloud; defaults to 1e−2·max(1, ‖x0‖).
  std::optional<double> init_spread;
  std::uint64_t seed = 0;
  KktCoupling kkt_coupling = KktCoupling::printed;
  NewtonMode newton = NewtonMode::damped;
  double gmres_tol = 1e-10;
  int gmres_max_iter = 200;

  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
    if (init_spread && !(*init_spread > 0.0)) throw ConfigError("init_spread must be positive");
    if (!(gmres_tol > 0.0)) throw ConfigError("gmres_tol must be positive");
    if (gmres_max_iter < 1) throw ConfigError("gmres_max_iter must be at least 1");
  }

  double spread_for(const Point& x) const {
    return init_spread.value_or(1e-2 * std::max(1.0, x.norm()));
  }
};

}  // namespace qmnewt
