#pragma once

// Portable, bit-reproducible random number generation.
//
// Streams are derived from a 64-bit user seed plus a stream id through
// splitmix64, then fed into xoshiro256** (Blackman & Vigna). Both generators
// are fully specified by their reference implementations, so runs are
// reproducible across platforms and compilers. Doubles are produced as
// (x >> 11) * 2^-53, uniform on [0, 1).

#include <array>
#include <cstdint>
#include <vector>

namespace hedge {

struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

class Xoshiro256ss {
public:
    // stream 0 is the scenario-draw stream; workers use 1 + worker_id.
    Xoshiro256ss(std::uint64_t seed, std::uint64_t stream = 0) {
        SplitMix64 sm(seed ^ (0x6a09e667f3bcc909ULL * (stream + 1)));
        for (auto& w : s_) w = sm.next();
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // integer in [0, bound)
    std::uint64_t next_below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(next_double() * static_cast<double>(bound));
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> s_;
};

// Inverse-CDF sampler over a finite distribution. The cumulative table is
// precomputed; lookup uses strict upper comparison, so a draw u lands on the
// first index with u < cum[i].
class DiscreteSampler {
public:
    explicit DiscreteSampler(const std::vector<double>& weights) {
        cum_.reserve(weights.size());
        double acc = 0.0;
        for (double w : weights) {
            acc += w;
            cum_.push_back(acc);
        }
        if (!cum_.empty()) cum_.back() = 1.0;
    }

    int draw(Xoshiro256ss& rng) const {
        const double u = rng.next_double();
        int lo = 0, hi = static_cast<int>(cum_.size()) - 1;
        while (lo < hi) {
            int mid = (lo + hi) / 2;
            if (u < cum_[mid]) hi = mid; else lo = mid + 1;
        }
        return lo;
    }

private:
    std::vector<double> cum_;
};

}  // namespace hedge
