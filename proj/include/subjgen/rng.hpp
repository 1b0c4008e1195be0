#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace subjgen {

// Deterministic splitmix64 stream. Self-contained so results are
// bit-identical across platforms and standard library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // uniform integer in [0, n), n >= 1
    int next_int(int n) {
        return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
    }

    // index sampled from an (unnormalized is fine) nonnegative weight vector
    int sample(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = next_double() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_u64() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream; does not advance this stream.
    Rng split(const std::string& tag) const {
        uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the tag
        for (unsigned char c : tag) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        Rng child(state_ ^ h);
        child.next_u64();  // decorrelate nearby seeds
        return child;
    }

private:
    uint64_t state_;
};

}  // namespace subjgen
