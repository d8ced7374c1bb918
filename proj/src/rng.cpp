#include "abp/rng.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "abp/error.hpp"

namespace abp {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {
  std::uint64_t x = seed;
  const std::uint64_t mixed = splitmix64(x) ^ (stream_id * 0xD1B54A32D192ED03ULL);
  std::uint64_t y = mixed ^ std::rotl(stream_id, 17);
  for (auto& word : s_) word = splitmix64(y);
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

std::uint64_t Rng::next_u64() noexcept {
  const std::uint64_t result = std::rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = std::rotl(s_[3], 45);
  return result;
}

double Rng::uniform() noexcept {
  // 53 random bits, shifted by half an ulp so 0 is never returned.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

__extension__ using u128 = unsigned __int128;

std::uint64_t Rng::uniform_index(std::uint64_t n) noexcept {
  // Lemire's nearly-divisionless bounded integer.
  if (n == 0) return 0;
  u128 m = static_cast<u128>(next_u64()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<u128>(next_u64()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  has_spare_ = true;
  return u * f;
}

double Rng::gamma_unit(double shape) noexcept {
  // Marsaglia & Tsang (2000); shapes below one are boosted by U^(1/shape).
  if (shape < 1.0) {
    const double g = gamma_unit(shape + 1.0);
    return g * std::pow(uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0 && std::isfinite(shape)))
    fail(Errc::InvalidParameter,
         "gamma shape must be positive, got " + std::to_string(shape));
  if (!(rate > 0.0 && std::isfinite(rate)))
    fail(Errc::InvalidParameter,
         "gamma rate must be positive, got " + std::to_string(rate));
  return gamma_unit(shape) / rate;
}

double Rng::chi_squared(double df) { return gamma(0.5 * df, 0.5); }

Rng Rng::fork(std::uint64_t child_id) const noexcept {
  std::uint64_t x = stream_ ^ 0xA0761D6478BD642FULL;
  const std::uint64_t derived = splitmix64(x) ^ (child_id * 0xE7037ED1A0B428DBULL) ^ std::rotl(child_id, 29);
  return Rng(seed_, derived);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << "xoshiro256ss " << seed_ << ' ' << stream_;
  for (auto w : s_) os << ' ' << w;
  os << ' ' << (has_spare_ ? 1 : 0) << ' ' << std::bit_cast<std::uint64_t>(spare_normal_);
  return os.str();
}

Rng Rng::deserialize(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string tag;
  Rng r;
  int spare = 0;
  std::uint64_t spare_bits = 0;
  is >> tag >> r.seed_ >> r.stream_ >> r.s_[0] >> r.s_[1] >> r.s_[2] >> r.s_[3] >> spare >> spare_bits;
  require(!is.fail() && tag == "xoshiro256ss", Errc::FormatError, "malformed generator state");
  r.has_spare_ = spare != 0;
  r.spare_normal_ = std::bit_cast<double>(spare_bits);
  return r;
}

}  // namespace abp
