#include "fwda/rng.hpp"

#include <cmath>

#include "fwda/errors.hpp"

namespace fwda {
namespace {

// Multipliers and Weyl key increments from the Philox reference
// implementation (Random123).
constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;  // golden ratio
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;  // sqrt(3) - 1

inline void philox_round(std::uint32_t c[4], const std::uint32_t k[2]) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t n0 = hi1 ^ c[1] ^ k[0];
    const std::uint32_t n2 = hi0 ^ c[3] ^ k[1];
    c[0] = n0;
    c[1] = lo1;
    c[2] = n2;
    c[3] = lo0;
}

inline std::array<std::uint32_t, 4> philox_block(const std::uint32_t ctr[4],
                                                 const std::uint32_t key[2]) {
    std::uint32_t c[4] = {ctr[0], ctr[1], ctr[2], ctr[3]};
    std::uint32_t k[2] = {key[0], key[1]};
    for (int round = 0; round < 10; ++round) {
        philox_round(c, k);
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return {c[0], c[1], c[2], c[3]};
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

Philox::Philox(std::uint64_t seed, std::uint64_t stream) {
    key_[0] = static_cast<std::uint32_t>(seed);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    ctr_[0] = 0;
    ctr_[1] = 0;
    ctr_[2] = static_cast<std::uint32_t>(stream);
    ctr_[3] = static_cast<std::uint32_t>(stream >> 32);
}

void Philox::refill() {
    block_ = philox_block(ctr_, key_);
    if (++ctr_[0] == 0) ++ctr_[1];
    block_pos_ = 0;
}

std::uint64_t Philox::next_u64() {
    if (block_pos_ >= 4) refill();
    const std::uint64_t lo = block_[block_pos_];
    const std::uint64_t hi = block_[block_pos_ + 1];
    block_pos_ += 2;
    return lo | (hi << 32);
}

double Philox::uniform() {
    const std::uint64_t bits = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Philox::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = kTwoPi * u2;
    cached_normal_ = r * std::sin(a);
    has_cached_normal_ = true;
    return r * std::cos(a);
}

double Philox::gamma(double shape) {
    if (!(shape > 0.0)) throw InvalidParameter("gamma shape must be positive");
    if (shape < 1.0) {
        // Boost: Gamma(a) = Gamma(a+1) * U^(1/a).
        const double g = gamma(shape + 1.0);
        return g * std::pow(uniform(), 1.0 / shape);
    }
    // Marsaglia & Tsang (2000).
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
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

double Philox::chi_square(double dof) {
    if (!(dof > 0.0)) throw InvalidParameter("chi_square dof must be positive");
    return 2.0 * gamma(0.5 * dof);
}

std::uint64_t Philox::bounded(std::uint64_t n) {
    if (n == 0) throw InvalidParameter("bounded needs n >= 1");
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    const std::uint32_t key[2] = {static_cast<std::uint32_t>(master),
                                  static_cast<std::uint32_t>(master >> 32)};
    const std::uint32_t ctr[4] = {
        static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
        static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    const auto out = philox_block(ctr, key);
    return std::uint64_t{out[0]} | (std::uint64_t{out[1]} << 32);
}

}  // namespace fwda
