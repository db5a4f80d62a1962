#pragma once

#include <cstdint>
#include <span>

namespace ssrlab {

/// Counter-based generator: Philox4x32-10 keyed by the master seed, with the
/// stream index in the high counter words. The stream for (seed, i) is a
/// fixed function of its inputs, independent of worker assignment, draw
/// order elsewhere, or total path count.
class PhiloxStream {
  public:
    PhiloxStream(std::uint64_t master_seed, std::uint64_t stream_index) noexcept
        : key0_(static_cast<std::uint32_t>(master_seed)),
          key1_(static_cast<std::uint32_t>(master_seed >> 32)),
          stream_lo_(static_cast<std::uint32_t>(stream_index)),
          stream_hi_(static_cast<std::uint32_t>(stream_index >> 32)) {}

    /// Next 64 uniform random bits.
    std::uint64_t next_u64() noexcept;

    /// Uniform on the open interval (0,1), symmetric about 1/2.
    double next_uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via inverse-CDF of next_uniform().
    double next_normal();

    void fill_normals(std::span<double> out);

  private:
    void refill() noexcept;

    std::uint32_t key0_, key1_;
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t block_ = 0;
    std::uint32_t buf_[4] = {0, 0, 0, 0};
    int have_ = 0;
};

}  // namespace ssrlab
