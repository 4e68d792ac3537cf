#include "trslab/rng.hpp"

#include <cmath>
#include <numbers>

namespace trslab {
namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace

RngStream RngStream::derive(std::uint64_t seed, std::uint64_t index) {
  return RngStream(mix64(seed ^ mix64(index + kGolden)));
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(seed_ + counter_ * kGolden);
}

double RngStream::uniform() {
  // 53 random bits, shifted off zero
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

FrameMatrix<double> RngStream::normal_matrix(Index rows, Index cols) {
  FrameMatrix<double> out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = normal();
  return out;
}

}  // namespace trslab
