#pragma once

#include <cstdint>
#include <random>

#include "cpdm/tensor.hpp"

namespace cpdm {

/// Seeded random source. Every consumer receives an Rng explicitly; there is
/// no global generator. Streams for independent roles (data order, timestep
/// draws, noise draws, ...) are derived with `stream`, which mixes the base
/// seed with a role id and a step index so that resuming a run at step k
/// reproduces exactly the draws of an unbroken run.
class Rng {
public:
    enum class Role : uint64_t {
        Init = 1,
        DataOrder = 2,
        Timesteps = 3,
        TrainNoise = 4,
        SampleNoise = 5,
        Synth = 6,
    };

    explicit Rng(uint64_t seed) : eng_(mix(seed, 0x9e3779b97f4a7c15ull)) {}

    static Rng stream(uint64_t seed, Role role, uint64_t step = 0) {
        uint64_t s = mix(seed, static_cast<uint64_t>(role));
        s = mix(s, step + 0x1234567);
        return Rng(s);
    }

    double normal() { return normal_(eng_); }
    double uniform() { return unif_(eng_); }

    /// Uniform integer in [lo, hi], inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return std::uniform_int_distribution<int64_t>(lo, hi)(eng_);
    }

    template <class S>
    void fill_normal(TensorT<S>& t, double stddev = 1.0) {
        for (auto& x : t.v) x = static_cast<S>(normal() * stddev);
    }

    template <class S>
    TensorT<S> normal_like(const TensorT<S>& shape_of) {
        TensorT<S> out(shape_of.b, shape_of.c, shape_of.h, shape_of.w);
        fill_normal(out);
        return out;
    }

    std::mt19937_64& engine() { return eng_; }

private:
    // splitmix64 finalizer; decorrelates nearby seeds.
    static uint64_t mix(uint64_t z, uint64_t salt) {
        z += 0x9e3779b97f4a7c15ull + salt * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 eng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

}  // namespace cpdm
