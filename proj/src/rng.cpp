#include "ssrlab/rng.hpp"

#include "ssrlab/math_core.hpp"

namespace ssrlab {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::uint32_t x[4], std::uint32_t k0, std::uint32_t k1) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * x[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * x[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    x[0] = hi1 ^ x[1] ^ k0;
    x[1] = lo1;
    x[2] = hi0 ^ x[3] ^ k1;
    x[3] = lo0;
}

}  // namespace

void PhiloxStream::refill() noexcept {
    std::uint32_t x[4] = {static_cast<std::uint32_t>(block_),
                          static_cast<std::uint32_t>(block_ >> 32), stream_lo_,
                          stream_hi_};
    std::uint32_t k0 = key0_;
    std::uint32_t k1 = key1_;
    for (int r = 0; r < 10; ++r) {
        philox_round(x, k0, k1);
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    buf_[0] = x[0];
    buf_[1] = x[1];
    buf_[2] = x[2];
    buf_[3] = x[3];
    have_ = 4;
    ++block_;
}

std::uint64_t PhiloxStream::next_u64() noexcept {
    if (have_ < 2) refill();
    const std::uint32_t lo = buf_[4 - have_];
    const std::uint32_t hi = buf_[4 - have_ + 1];
    have_ -= 2;
    return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

double PhiloxStream::next_normal() { return inverse_normal_cdf(next_uniform()); }

void PhiloxStream::fill_normals(std::span<double> out) {
    for (double& v : out) v = next_normal();
}

}  // namespace ssrlab
