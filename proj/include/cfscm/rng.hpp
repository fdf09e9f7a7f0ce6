#pragma once

#include <cstdint>
#include <random>

namespace cfscm {

// splitmix64, used to derive child seeds so parallel streams stay independent
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed), seed_(seed) {}

    double uniform() { return unif_(gen_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unif_(gen_); }
    double normal() { return norm_(gen_); }
    double normal(double mean, double sd) { return mean + sd * norm_(gen_); }
    std::uint64_t next_u64() { return gen_(); }
    std::size_t index(std::size_t n) {
        std::uniform_int_distribution<std::size_t> d(0, n - 1);
        return d(gen_);
    }

    Rng child(std::uint64_t tag) const { return Rng(split_seed(seed_, tag)); }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    std::uint64_t seed_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace cfscm
