#include "trslab/tensor.hpp"

namespace trslab {

NoiseSchedule::NoiseSchedule(std::vector<double> sigmas) : sigmas_(std::move(sigmas)) {
  require(sigmas_.size() >= 2, "schedule needs at least one step");
  require(sigmas_.back() == 0.0, "schedule must end at sigma = 0");
  for (std::size_t j = 0; j + 1 < sigmas_.size(); ++j) {
    require(std::isfinite(sigmas_[j]) && sigmas_[j] > 0.0, "schedule sigmas must be positive before the end");
    require(sigmas_[j] > sigmas_[j + 1], "schedule must be strictly decreasing");
  }
}

double NoiseSchedule::sigma(int t) const {
  require(t >= 0 && t <= steps(), "schedule step out of range");
  return sigmas_[static_cast<std::size_t>(steps() - t)];
}

NoiseSchedule build_schedule(int steps, double sigma_min, double sigma_max, double rho) {
  require(steps >= 1, "schedule needs T >= 1");
  require(sigma_min > 0.0 && sigma_min < sigma_max, "schedule needs 0 < sigma_min < sigma_max");
  require(rho > 0.0, "schedule needs rho > 0");

  std::vector<double> sigmas;
  sigmas.reserve(static_cast<std::size_t>(steps) + 1);
  if (steps == 1) {
    sigmas = {sigma_max, 0.0};
    return NoiseSchedule(std::move(sigmas));
  }
  const double hi = std::pow(sigma_max, 1.0 / rho);
  const double lo = std::pow(sigma_min, 1.0 / rho);
  for (int j = 0; j < steps; ++j) {
    const double frac = static_cast<double>(j) / static_cast<double>(steps - 1);
    sigmas.push_back(std::pow(hi + frac * (lo - hi), rho));
  }
  // pow round-trips can miss the endpoints by an ulp
  sigmas.front() = sigma_max;
  sigmas.back() = sigma_min;
  sigmas.push_back(0.0);
  return NoiseSchedule(std::move(sigmas));
}

}  // namespace trslab
