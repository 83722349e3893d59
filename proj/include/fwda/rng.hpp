#pragma once

#include <array>
#include <cstdint>

namespace fwda {

// Counter-based generator: Philox4x32-10 (Salmon, Moraes, Dror, Shaw,
// "Parallel random numbers: as easy as 1, 2, 3", SC'11).
//
// Outputs are a pure function of (key, counter), so the stream for any
// (seed, stream) pair can be generated independently, in any order, on any
// thread, and two distinct stream ids never share state. This is what makes
// ensembles reproducible draw-by-draw regardless of scheduling.
//
// Counter layout: words 0..1 hold the within-stream block counter, words
// 2..3 hold the 64-bit stream id. The key is the 64-bit user seed.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream);

    // Raw 64-bit output (two 32-bit words per call).
    std::uint64_t next_u64();

    // Uniform on the open interval (0,1): 53 high bits, offset by half an ulp
    // so 0 and 1 are unreachable.
    double uniform();

    // Standard normal via Box-Muller on two uniforms; the paired value is
    // cached, so normals are consumed two uniforms per two outputs.
    double normal();

    // Gamma(shape, 1), shape > 0: Marsaglia-Tsang squeeze for shape >= 1,
    // boosted by U^(1/shape) below 1.
    double gamma(double shape);

    // Chi-square with dof > 0 degrees of freedom (= 2 * Gamma(dof/2, 1)).
    double chi_square(double dof);

    // Unbiased integer in [0, n), n >= 1, by rejection.
    std::uint64_t bounded(std::uint64_t n);

private:
    void refill();

    std::array<std::uint32_t, 4> block_{};
    std::uint32_t key_[2];
    std::uint32_t ctr_[4];
    int block_pos_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// One Philox block folded to 64 bits. Used to derive independent job-level
// seeds (per repeat, per grid cell, per prediction input) from a master seed
// without any shared state.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

}  // namespace fwda
