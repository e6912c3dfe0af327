#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "error.hpp"
#include "rng.hpp"

namespace moldalloc {

// Inherent job size distributions, all with unit mean.
enum class ServiceKind { Exponential, Deterministic, MixedErlang, Pareto };

struct ServiceDist {
  ServiceKind kind = ServiceKind::Exponential;

  // Mixed-Erlang: Erlang-1 with probability mix_first, Erlang-2 otherwise,
  // common phase rate chosen for unit mean: (q + 2(1-q)) / rate = 1.
  double mix_first = 0.4;
  // Pareto: P(Y > y) = (scale / y)^shape for y >= scale; unit mean requires
  // scale = (shape - 1) / shape.
  double pareto_shape = 1.5;

  double phase_rate() const noexcept { return mix_first + 2.0 * (1.0 - mix_first); }
  double pareto_scale() const noexcept { return (pareto_shape - 1.0) / pareto_shape; }

  double mean() const noexcept {
    switch (kind) {
      case ServiceKind::MixedErlang:
        return (mix_first + 2.0 * (1.0 - mix_first)) / phase_rate();
      case ServiceKind::Pareto:
        return pareto_shape * pareto_scale() / (pareto_shape - 1.0);
      default:
        return 1.0;
    }
  }
};

constexpr std::string_view to_string(ServiceKind kind) noexcept {
  switch (kind) {
    case ServiceKind::Exponential:   return "exp";
    case ServiceKind::Deterministic: return "det";
    case ServiceKind::MixedErlang:   return "mixed_erlang";
    case ServiceKind::Pareto:        return "pareto";
  }
  return "?";
}

inline ServiceDist parse_service(std::string_view name) {
  if (name == "exp" || name == "exponential") return {ServiceKind::Exponential};
  if (name == "det" || name == "deterministic") return {ServiceKind::Deterministic};
  if (name == "mixed_erlang" || name == "mixed-erlang") return {ServiceKind::MixedErlang};
  if (name == "pareto") return {ServiceKind::Pareto};
  throw Error(Errc::ConfigInvalid, "unknown service distribution '" + std::string(name) + "'");
}

// Pareto inverse CDF at u in (0, 1]: y = scale · u^(-1/shape). u = 1 gives the
// minimum of the support.
inline double pareto_quantile(const ServiceDist& dist, double u) noexcept {
  return dist.pareto_scale() * std::pow(u, -1.0 / dist.pareto_shape);
}

inline double sample_service(const ServiceDist& dist, StreamRng& rng) noexcept {
  switch (dist.kind) {
    case ServiceKind::Exponential:
      return rng.exponential(1.0);
    case ServiceKind::Deterministic:
      return 1.0;
    case ServiceKind::MixedErlang: {
      const double rate = dist.phase_rate();
      double size = rng.exponential(rate);
      if (rng.uniform() >= dist.mix_first) size += rng.exponential(rate);
      return size;
    }
    case ServiceKind::Pareto:
      return pareto_quantile(dist, rng.uniform_open_zero());
  }
  return 1.0;
}

}  // namespace moldalloc
