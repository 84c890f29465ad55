#pragma once

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace psae {

inline constexpr const char* kVersion = "1.0.0";

// All recoverable failures (bad shapes, bad configs, bad files) throw this.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Builds an error/message string from parts: concat("got ", n, " frames").
template <typename... Parts>
std::string concat(Parts&&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    return os.str();
}

// Counter-based splitmix64 generator. One u64 of state, so it is trivial to
// serialize into checkpoints and cheap to fork into independent streams.
// Bit-exact across platforms (no distribution objects from <random>).
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], both inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (hi < lo) throw Error(concat("uniform_int: empty range [", lo, ", ", hi, "]"));
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        // Unbiased enough for augmentation draws: 64x64-bit multiply-shift.
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * span;
        return lo + static_cast<int64_t>(static_cast<uint64_t>(m >> 64));
    }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

private:
    uint64_t state_;
};

// Derives the seed of an independent stream from (root seed, stream index).
// Used to give every training sample its own generator so that resume and
// replay are exact regardless of batch boundaries.
uint64_t derive_stream(uint64_t seed, uint64_t index);

// CRC32 (IEEE, reflected) over a byte range; pass the previous return value
// as `seed` to continue a running checksum. Used by the checkpoint format.
uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

// FNV-1a 64-bit hash; used for config and file fingerprints in reports.
uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 14695981039346656037ull);
uint64_t fnv1a64(const std::string& s);

// Shortest decimal form that round-trips (std::to_chars); used for CSV and
// report output so identical runs produce identical bytes.
std::string format_number(double v);
std::string format_number(float v);

}  // namespace psae
