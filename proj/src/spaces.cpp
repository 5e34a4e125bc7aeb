#include "lsmc/spaces.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>
#include <unordered_map>

#include "lsmc/util.hpp"

namespace lsmc {
namespace {

// key with coordinate 0 as the most significant bit, so increasing key order
// is lexicographic order on the coordinate vector
std::uint64_t key_of(const SolutionVector& y) {
    std::uint64_t k = 0;
    for (double v : y) k = (k << 1) | (v == 1.0 ? 1u : 0u);
    return k;
}

SolutionVector vector_of(std::uint64_t key, int d) {
    SolutionVector y(static_cast<std::size_t>(d), 0.0);
    for (int j = d - 1; j >= 0; --j) {
        y[static_cast<std::size_t>(j)] = static_cast<double>(key & 1u);
        key >>= 1;
    }
    return y;
}

// iterates over all k-subsets of {0..n-1} in lexicographic index order
void for_each_combination(int n, int k, const std::function<void(const std::vector<int>&)>& fn) {
    if (k > n || k <= 0) return;
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
        fn(idx);
        int i = k - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
        if (i < 0) return;
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j)
            idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
}

// uniform k-subset of the given pool, returned in draw order
std::vector<int> sample_subset(const std::vector<int>& pool, int k, Rng& rng) {
    std::vector<int> p = pool;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const int j = i + rng.index(static_cast<int>(p.size()) - i);
        std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
        out.push_back(p[static_cast<std::size_t>(i)]);
    }
    return out;
}

void check_membership(const Space& space, const SolutionVector& y) {
    if (!space.contains(y)) throw std::invalid_argument("solution is not a member of the space");
}

}  // namespace

Space Space::hypercube(int d) {
    if (d < 1) throw std::invalid_argument("Space::hypercube: dim must be >= 1");
    return Space{Kind::hypercube, d, 0};
}

Space Space::topk(int d, int k) {
    if (d < 1) throw std::invalid_argument("Space::topk: dim must be >= 1");
    if (k < 1 || k >= d) throw std::invalid_argument("Space::topk: need 1 <= k < d");
    return Space{Kind::topk, d, k};
}

std::uint64_t Space::cardinality() const {
    if (kind == Kind::hypercube) {
        if (dim >= 64) throw std::overflow_error("cardinality exceeds 64-bit range");
        return 1ull << dim;
    }
    return binom(dim, ones);
}

bool Space::contains(const SolutionVector& y) const {
    if (static_cast<int>(y.size()) != dim) return false;
    int s = 0;
    for (double v : y) {
        if (v != 0.0 && v != 1.0) return false;
        s += (v == 1.0);
    }
    return kind == Kind::hypercube || s == ones;
}

Neighborhood Neighborhood::hamming_ball(int r) {
    if (r < 1) throw std::invalid_argument("hamming_ball: radius must be >= 1");
    return Neighborhood{Kind::hamming_ball, r};
}

Neighborhood Neighborhood::hamming_shell(int r) {
    if (r < 1) throw std::invalid_argument("hamming_shell: radius must be >= 1");
    return Neighborhood{Kind::hamming_shell, r};
}

Neighborhood Neighborhood::swap(int s) {
    if (s < 1) throw std::invalid_argument("swap: size must be >= 1");
    return Neighborhood{Kind::swap, s};
}

void validate(const Space& space, const Neighborhood& nbhd) {
    switch (nbhd.kind) {
        case Neighborhood::Kind::hamming_ball:
            if (space.kind != Space::Kind::hypercube)
                throw std::invalid_argument("hamming_ball requires a hypercube space");
            if (nbhd.radius < 1 || nbhd.radius > space.dim - 1)
                throw std::invalid_argument("hamming_ball: radius out of range [1, d-1]");
            break;
        case Neighborhood::Kind::hamming_shell:
            if (space.kind != Space::Kind::hypercube)
                throw std::invalid_argument("hamming_shell requires a hypercube space");
            if (nbhd.radius < 1 || nbhd.radius > space.dim)
                throw std::invalid_argument("hamming_shell: radius out of range [1, d]");
            break;
        case Neighborhood::Kind::swap:
            if (space.kind != Space::Kind::topk)
                throw std::invalid_argument("swap requires a fixed-ones space");
            if (nbhd.radius < 1 || nbhd.radius > std::min(space.ones, space.dim - space.ones))
                throw std::invalid_argument("swap: size out of range [1, min(k, d-k)]");
            break;
    }
}

std::vector<SolutionVector> enumerate_space(const Space& space, std::uint64_t cap) {
    const std::uint64_t n = space.cardinality();
    if (n > cap) throw std::length_error("space too large to enumerate");
    std::vector<SolutionVector> out;
    out.reserve(n);
    if (space.kind == Space::Kind::hypercube) {
        for (std::uint64_t key = 0; key < n; ++key) out.push_back(vector_of(key, space.dim));
        return out;
    }
    // fixed popcount keys in increasing order (Gosper's hack)
    const std::uint64_t end = 1ull << space.dim;
    std::uint64_t key = (1ull << space.ones) - 1;
    while (key < end) {
        out.push_back(vector_of(key, space.dim));
        const std::uint64_t c = key & (~key + 1);
        const std::uint64_t r = key + c;
        key = (((r ^ key) >> 2) / c) | r;
        if (c == 0) break;
    }
    return out;
}

void for_each_neighbor(const Space& space, const Neighborhood& nbhd, const SolutionVector& y,
                       const std::function<void(const SolutionVector&)>& fn) {
    validate(space, nbhd);
    check_membership(space, y);
    SolutionVector scratch = y;
    const auto flip = [&scratch](const std::vector<int>& pos) {
        for (int p : pos) scratch[static_cast<std::size_t>(p)] = 1.0 - scratch[static_cast<std::size_t>(p)];
    };
    switch (nbhd.kind) {
        case Neighborhood::Kind::hamming_ball:
            for (int i = 1; i <= nbhd.radius; ++i) {
                for_each_combination(space.dim, i, [&](const std::vector<int>& pos) {
                    flip(pos);
                    fn(scratch);
                    flip(pos);
                });
            }
            break;
        case Neighborhood::Kind::hamming_shell:
            for_each_combination(space.dim, nbhd.radius, [&](const std::vector<int>& pos) {
                flip(pos);
                fn(scratch);
                flip(pos);
            });
            break;
        case Neighborhood::Kind::swap: {
            std::vector<int> on, off;
            for (int j = 0; j < space.dim; ++j)
                (y[static_cast<std::size_t>(j)] == 1.0 ? on : off).push_back(j);
            for_each_combination(static_cast<int>(on.size()), nbhd.radius,
                                 [&](const std::vector<int>& oi) {
                std::vector<int> drop;
                drop.reserve(oi.size());
                for (int q : oi) drop.push_back(on[static_cast<std::size_t>(q)]);
                for_each_combination(static_cast<int>(off.size()), nbhd.radius,
                                     [&](const std::vector<int>& zi) {
                    std::vector<int> add;
                    add.reserve(zi.size());
                    for (int q : zi) add.push_back(off[static_cast<std::size_t>(q)]);
                    flip(drop);
                    flip(add);
                    fn(scratch);
                    flip(add);
                    flip(drop);
                });
            });
            break;
        }
    }
}

std::vector<SolutionVector> neighbors(const Space& space, const Neighborhood& nbhd,
                                      const SolutionVector& y) {
    std::vector<SolutionVector> out;
    for_each_neighbor(space, nbhd, y, [&out](const SolutionVector& n) { out.push_back(n); });
    return out;
}

std::uint64_t degree(const Space& space, const Neighborhood& nbhd) {
    validate(space, nbhd);
    switch (nbhd.kind) {
        case Neighborhood::Kind::hamming_ball: {
            std::uint64_t s = 0;
            for (int i = 1; i <= nbhd.radius; ++i) s += binom(space.dim, i);
            return s;
        }
        case Neighborhood::Kind::hamming_shell:
            return binom(space.dim, nbhd.radius);
        case Neighborhood::Kind::swap:
            return binom(space.ones, nbhd.radius) * binom(space.dim - space.ones, nbhd.radius);
    }
    return 0;
}

SolutionVector random_neighbor(const Space& space, const Neighborhood& nbhd,
                               const SolutionVector& y, Rng& rng) {
    validate(space, nbhd);
    check_membership(space, y);
    SolutionVector out = y;
    const auto flip_at = [&out](int p) { out[static_cast<std::size_t>(p)] = 1.0 - out[static_cast<std::size_t>(p)]; };
    std::vector<int> all(static_cast<std::size_t>(space.dim));
    for (int j = 0; j < space.dim; ++j) all[static_cast<std::size_t>(j)] = j;
    switch (nbhd.kind) {
        case Neighborhood::Kind::hamming_ball: {
            // radius i with probability C(d,i) / sum_j C(d,j): uniform over the ball
            std::uint64_t total = 0;
            for (int i = 1; i <= nbhd.radius; ++i) total += binom(space.dim, i);
            std::uint64_t u = rng.below(total);
            int radius = nbhd.radius;
            for (int i = 1; i <= nbhd.radius; ++i) {
                const std::uint64_t c = binom(space.dim, i);
                if (u < c) {
                    radius = i;
                    break;
                }
                u -= c;
            }
            for (int p : sample_subset(all, radius, rng)) flip_at(p);
            break;
        }
        case Neighborhood::Kind::hamming_shell:
            for (int p : sample_subset(all, nbhd.radius, rng)) flip_at(p);
            break;
        case Neighborhood::Kind::swap: {
            std::vector<int> on, off;
            for (int j = 0; j < space.dim; ++j)
                (y[static_cast<std::size_t>(j)] == 1.0 ? on : off).push_back(j);
            for (int p : sample_subset(on, nbhd.radius, rng)) flip_at(p);
            for (int p : sample_subset(off, nbhd.radius, rng)) flip_at(p);
            break;
        }
    }
    return out;
}

bool is_connected(const Space& space, const std::vector<Neighborhood>& systems,
                  std::uint64_t cap) {
    if (systems.empty()) throw std::invalid_argument("is_connected: need at least one system");
    const auto all = enumerate_space(space, cap);
    std::unordered_map<std::uint64_t, std::size_t> index;
    index.reserve(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) index.emplace(key_of(all[i]), i);
    std::vector<char> seen(all.size(), 0);
    std::queue<std::size_t> frontier;
    seen[0] = 1;
    frontier.push(0);
    std::size_t visited = 1;
    while (!frontier.empty()) {
        const std::size_t cur = frontier.front();
        frontier.pop();
        for (const auto& nb : systems) {
            for_each_neighbor(space, nb, all[cur], [&](const SolutionVector& n) {
                const auto it = index.find(key_of(n));
                if (it != index.end() && !seen[it->second]) {
                    seen[it->second] = 1;
                    ++visited;
                    frontier.push(it->second);
                }
            });
        }
    }
    return visited == all.size();
}

int hamming_distance(const SolutionVector& a, const SolutionVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: dimension mismatch");
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
    return d;
}

}  // namespace lsmc
