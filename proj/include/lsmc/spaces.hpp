#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lsmc/rng.hpp"

namespace lsmc {

// Solutions are real vectors; the built-in spaces only ever hold exact 0.0/1.0
// entries, so equality and hashing stay exact.
using SolutionVector = std::vector<double>;

constexpr std::uint64_t kDefaultEnumerationCap = 1ull << 20;

// Binary solution space: either the full hypercube {0,1}^d or its slice with
// exactly k ones (fixed-cardinality selections).
struct Space {
    enum class Kind { hypercube, topk };

    Kind kind = Kind::hypercube;
    int dim = 0;
    int ones = 0;  // k for topk; unused for hypercube

    static Space hypercube(int d);
    static Space topk(int d, int k);

    std::uint64_t cardinality() const;  // 2^d or C(d, k); throws past 64-bit range
    bool contains(const SolutionVector& y) const;
};

// Move structure on a space. Hamming ball/shell apply to the hypercube,
// swap applies to fixed-ones spaces (exchange s ones with s zeros).
struct Neighborhood {
    enum class Kind { hamming_ball, hamming_shell, swap };

    Kind kind = Kind::hamming_ball;
    int radius = 1;  // r for ball/shell, s for swap

    static Neighborhood hamming_ball(int r);
    static Neighborhood hamming_shell(int r);
    static Neighborhood swap(int s);
};

// Throws std::invalid_argument when the system's parameters are out of range
// for the space (ball: 1<=r<=d-1, shell: 1<=r<=d, swap: 1<=s<=min(k, d-k))
// or the kinds are incompatible.
void validate(const Space& space, const Neighborhood& nbhd);

// All solutions in lexicographic coordinate order. Throws std::length_error
// ("space too large to enumerate") past the cap.
std::vector<SolutionVector> enumerate_space(const Space& space,
                                            std::uint64_t cap = kDefaultEnumerationCap);

// Visits every neighbor of y exactly once (self excluded). Generation is lazy:
// nothing is materialized beyond the visited vector.
void for_each_neighbor(const Space& space, const Neighborhood& nbhd, const SolutionVector& y,
                       const std::function<void(const SolutionVector&)>& fn);

std::vector<SolutionVector> neighbors(const Space& space, const Neighborhood& nbhd,
                                      const SolutionVector& y);

// Closed-form neighbor count; these systems are regular so y only matters for
// validation. ball: sum_{i=1..r} C(d,i); shell: C(d,r); swap: C(k,s)*C(d-k,s).
std::uint64_t degree(const Space& space, const Neighborhood& nbhd);

// Uniform draw from the neighbor set of y.
SolutionVector random_neighbor(const Space& space, const Neighborhood& nbhd,
                               const SolutionVector& y, Rng& rng);

// True when the union of the given systems connects the whole (enumerable) space.
bool is_connected(const Space& space, const std::vector<Neighborhood>& systems,
                  std::uint64_t cap = kDefaultEnumerationCap);

// Hamming distance between exact binary vectors.
int hamming_distance(const SolutionVector& a, const SolutionVector& b);

}  // namespace lsmc
