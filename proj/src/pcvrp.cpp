#include "lsmc/pcvrp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lsmc/gibbs.hpp"

namespace lsmc {

namespace {

double euclid(double ax, double ay, double bx, double by) {
    return std::hypot(ax - bx, ay - by);
}

void validate_square(const Matrix& m, std::size_t n, const char* name) {
    if (m.rows() != n || m.cols() != n)
        throw std::invalid_argument(std::string(name) + ": expected " + std::to_string(n) + "x" +
                                    std::to_string(n));
    for (double v : m.data())
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(name) + ": entries must be finite and >= 0");
}

}  // namespace

std::vector<double> PcvrpInstance::prizes() const {
    std::vector<double> p(requests.size());
    for (std::size_t i = 0; i < requests.size(); ++i) p[i] = requests[i].prize;
    return p;
}

PcvrpInstance make_instance(double depot_x, double depot_y, TimeWindow depot_window,
                            double capacity, std::vector<RoutingRequest> requests, int fleet,
                            std::optional<Matrix> cost, std::optional<Matrix> travel) {
    PcvrpInstance inst;
    inst.depot_x = depot_x;
    inst.depot_y = depot_y;
    inst.depot_window = depot_window;
    inst.capacity = capacity;
    inst.requests = std::move(requests);
    const std::size_t n = inst.requests.size();
    inst.fleet = fleet > 0 ? fleet : static_cast<int>(std::max<std::size_t>(n, 1));

    if (!(capacity > 0.0)) throw std::invalid_argument("pcvrp: capacity must be positive");
    if (depot_window.open > depot_window.close)
        throw std::invalid_argument("pcvrp: depot window is inverted");
    for (const auto& r : inst.requests) {
        if (!std::isfinite(r.x) || !std::isfinite(r.y))
            throw std::invalid_argument("pcvrp: request coordinates must be finite");
        if (r.window.open > r.window.close)
            throw std::invalid_argument("pcvrp: request window is inverted");
        if (r.service < 0.0 || r.demand < 0.0)
            throw std::invalid_argument("pcvrp: service and demand must be >= 0");
    }

    auto node_x = [&](std::size_t a) { return a == 0 ? inst.depot_x : inst.requests[a - 1].x; };
    auto node_y = [&](std::size_t a) { return a == 0 ? inst.depot_y : inst.requests[a - 1].y; };
    Matrix euclidean(n + 1, n + 1, 0.0);
    for (std::size_t a = 0; a <= n; ++a)
        for (std::size_t b = 0; b <= n; ++b)
            euclidean(a, b) = euclid(node_x(a), node_y(a), node_x(b), node_y(b));

    inst.travel = travel ? std::move(*travel) : euclidean;
    inst.cost = cost ? std::move(*cost) : euclidean;
    validate_square(inst.travel, n + 1, "pcvrp travel matrix");
    validate_square(inst.cost, n + 1, "pcvrp cost matrix");

    // symmetric proximity: mean travel plus one-sided wait penalties in both
    // directions (how long the later window forces the earlier one to idle)
    inst.proximity = Matrix(n, n, 0.0);
    auto pen = [&](std::size_t a, std::size_t b) {
        const auto& ra = inst.requests[a];
        const auto& rb = inst.requests[b];
        return std::max(0.0, rb.window.open -
                                 (ra.window.close + ra.service + inst.travel(a + 1, b + 1)));
    };
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            if (a == b) continue;
            inst.proximity(a, b) = 0.5 * (inst.travel(a + 1, b + 1) + inst.travel(b + 1, a + 1)) +
                                   pen(a, b) + pen(b, a);
        }
    return inst;
}

PcvrpInstance instance_from_json(const std::string& text) {
    using nlohmann::json;
    try {
        const json j = json::parse(text);
        TimeWindow dw{j.at("depot").at("window").at(0).get<double>(),
                      j.at("depot").at("window").at(1).get<double>()};
        std::vector<RoutingRequest> reqs;
        for (const auto& r : j.at("requests")) {
            RoutingRequest q;
            q.x = r.at("x").get<double>();
            q.y = r.at("y").get<double>();
            q.window = {r.at("window").at(0).get<double>(), r.at("window").at(1).get<double>()};
            q.service = r.value("service", 0.0);
            q.demand = r.value("demand", 0.0);
            q.prize = r.value("prize", 0.0);
            q.must_dispatch = r.value("must_dispatch", false);
            reqs.push_back(q);
        }
        const std::size_t n = reqs.size();
        auto read_matrix = [&](const char* key) -> std::optional<Matrix> {
            if (!j.contains(key)) return std::nullopt;
            Matrix m(n + 1, n + 1, 0.0);
            const auto& rows = j.at(key);
            if (rows.size() != n + 1) throw std::invalid_argument("pcvrp: bad matrix row count");
            for (std::size_t a = 0; a <= n; ++a) {
                if (rows.at(a).size() != n + 1)
                    throw std::invalid_argument("pcvrp: bad matrix column count");
                for (std::size_t b = 0; b <= n; ++b) m(a, b) = rows.at(a).at(b).get<double>();
            }
            return m;
        };
        return make_instance(j.at("depot").at("x").get<double>(),
                             j.at("depot").at("y").get<double>(), dw,
                             j.at("capacity").get<double>(), std::move(reqs), j.value("fleet", 0),
                             read_matrix("cost_matrix"), read_matrix("travel_matrix"));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("pcvrp instance json: ") + e.what());
    }
}

PcvrpInstance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("pcvrp: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return instance_from_json(buf.str());
}

std::vector<int> solution_key(const RoutingSolution& y) {
    std::vector<int> key;
    for (const auto& route : y.routes) {
        key.insert(key.end(), route.begin(), route.end());
        key.push_back(-1);
    }
    return key;
}

FeasibilityReport feasibility_check(const PcvrpInstance& inst, const RoutingSolution& y) {
    const int n = inst.size();
    char buf[96];
    std::vector<char> seen(static_cast<std::size_t>(n) + 1, 0);
    for (const auto& route : y.routes) {
        if (route.empty())
            return {false, RoutingViolation::structure, "empty route slot"};
        for (int id : route) {
            if (id < 1 || id > n) {
                std::snprintf(buf, sizeof(buf), "unknown request id %d", id);
                return {false, RoutingViolation::structure, buf};
            }
            if (seen[static_cast<std::size_t>(id)]) {
                std::snprintf(buf, sizeof(buf), "request %d dispatched twice", id);
                return {false, RoutingViolation::structure, buf};
            }
            seen[static_cast<std::size_t>(id)] = 1;
        }
    }
    if (static_cast<int>(y.routes.size()) > inst.fleet) {
        std::snprintf(buf, sizeof(buf), "%zu routes exceed fleet %d", y.routes.size(), inst.fleet);
        return {false, RoutingViolation::fleet, buf};
    }
    for (std::size_t s = 0; s < y.routes.size(); ++s) {
        const auto& route = y.routes[s];
        double demand = 0.0;
        for (int id : route) demand += inst.requests[static_cast<std::size_t>(id - 1)].demand;
        if (demand > inst.capacity) {
            std::snprintf(buf, sizeof(buf), "route %zu demand %.6g exceeds capacity %.6g", s,
                          demand, inst.capacity);
            return {false, RoutingViolation::capacity, buf};
        }
        double time = inst.depot_window.open;
        int prev = 0;
        for (int id : route) {
            const auto& r = inst.requests[static_cast<std::size_t>(id - 1)];
            const double arrive = time + inst.travel(static_cast<std::size_t>(prev),
                                                     static_cast<std::size_t>(id));
            const double start = std::max(arrive, r.window.open);
            if (start > r.window.close) {
                std::snprintf(buf, sizeof(buf), "request %d misses window [%.6g, %.6g]", id,
                              r.window.open, r.window.close);
                return {false, RoutingViolation::time_window, buf};
            }
            time = start + r.service;
            prev = id;
        }
        if (time + inst.travel(static_cast<std::size_t>(prev), 0) > inst.depot_window.close) {
            std::snprintf(buf, sizeof(buf), "route %zu returns after depot close", s);
            return {false, RoutingViolation::time_window, buf};
        }
    }
    for (int id = 1; id <= n; ++id)
        if (inst.requests[static_cast<std::size_t>(id - 1)].must_dispatch &&
            !seen[static_cast<std::size_t>(id)]) {
            std::snprintf(buf, sizeof(buf), "must-dispatch request %d not served", id);
            return {false, RoutingViolation::must_dispatch, buf};
        }
    return {true, RoutingViolation::none, ""};
}

double route_cost(const PcvrpInstance& inst, const std::vector<int>& route) {
    if (route.empty()) return 0.0;
    KahanSum total;
    int prev = 0;
    for (int id : route) {
        total.add(inst.cost(static_cast<std::size_t>(prev), static_cast<std::size_t>(id)));
        prev = id;
    }
    total.add(inst.cost(static_cast<std::size_t>(prev), 0));
    return total.value();
}

double routing_score(const PcvrpInstance& inst, const std::vector<double>& theta,
                     const RoutingSolution& y) {
    if (theta.size() != static_cast<std::size_t>(inst.size()))
        throw std::invalid_argument("routing_score: theta size mismatch");
    KahanSum total;
    for (const auto& route : y.routes) {
        for (int id : route) total.add(theta[static_cast<std::size_t>(id - 1)]);
        total.add(-route_cost(inst, route));
    }
    return total.value();
}

double objective(const PcvrpInstance& inst, const RoutingSolution& y) {
    return routing_score(inst, inst.prizes(), y);
}

double incremental_delta(const PcvrpInstance& inst, const std::vector<double>& theta,
                         const RoutingSolution& from, const RoutingSolution& to) {
    const std::size_t slots = std::max(from.routes.size(), to.routes.size());
    static const std::vector<int> kEmpty;
    KahanSum delta;
    for (std::size_t s = 0; s < slots; ++s) {
        const auto& a = s < from.routes.size() ? from.routes[s] : kEmpty;
        const auto& b = s < to.routes.size() ? to.routes[s] : kEmpty;
        if (a == b) continue;
        for (int id : a) delta.add(-theta[static_cast<std::size_t>(id - 1)]);
        for (int id : b) delta.add(theta[static_cast<std::size_t>(id - 1)]);
        delta.add(route_cost(inst, a));
        delta.add(-route_cost(inst, b));
    }
    return delta.value();
}

SolutionVector incidence_vector(const PcvrpInstance& inst, const RoutingSolution& y) {
    const std::size_t m = static_cast<std::size_t>(inst.size()) + 1;
    SolutionVector v(m * m, 0.0);
    for (const auto& route : y.routes) {
        std::size_t prev = 0;
        for (int id : route) {
            v[prev * m + static_cast<std::size_t>(id)] = 1.0;
            prev = static_cast<std::size_t>(id);
        }
        v[prev * m] = 1.0;
    }
    return v;
}

std::string solution_to_json(const PcvrpInstance& inst, const RoutingSolution& y) {
    std::ostringstream out;
    out << "{\"routes\":[";
    for (std::size_t s = 0; s < y.routes.size(); ++s) {
        if (s) out << ",";
        out << "[";
        for (std::size_t k = 0; k < y.routes[s].size(); ++k) {
            if (k) out << ",";
            out << y.routes[s][k];
        }
        out << "]";
    }
    out << "],\"incidence\":[";
    bool first = true;
    for (const auto& route : y.routes) {
        int prev = 0;
        for (std::size_t k = 0; k <= route.size(); ++k) {
            const int cur = k < route.size() ? route[k] : 0;
            if (!first) out << ",";
            first = false;
            out << "[" << prev << "," << cur << ",1]";
            prev = cur;
        }
    }
    out << "]}";
    (void)inst;
    return out.str();
}

const char* move_name(MoveType move) {
    switch (move) {
        case MoveType::relocate: return "relocate";
        case MoveType::relocate_pair: return "relocate-pair";
        case MoveType::swap: return "swap";
        case MoveType::swap_pair: return "swap-pair";
        case MoveType::two_opt: return "two-opt";
        case MoveType::serve_remove: return "serve-remove";
    }
    return "?";
}

namespace {

struct Pos {
    int slot = -1;
    int idx = -1;
};

// positions[id] for dispatched ids, slot/idx = -1 otherwise
std::vector<Pos> positions_of(const PcvrpInstance& inst, const RoutingSolution& y) {
    std::vector<Pos> pos(static_cast<std::size_t>(inst.size()) + 1);
    for (std::size_t s = 0; s < y.routes.size(); ++s)
        for (std::size_t k = 0; k < y.routes[s].size(); ++k)
            pos[static_cast<std::size_t>(y.routes[s][k])] = {static_cast<int>(s),
                                                             static_cast<int>(k)};
    return pos;
}

std::vector<int> dispatched_clients(const RoutingSolution& y) {
    std::vector<int> out;
    for (const auto& route : y.routes) out.insert(out.end(), route.begin(), route.end());
    return out;
}

int route_len(const RoutingSolution& y, const Pos& p) {
    return static_cast<int>(y.routes[static_cast<std::size_t>(p.slot)].size());
}

bool is_last_in_route(const RoutingSolution& y, const Pos& p) {
    return p.idx + 1 == route_len(y, p);
}

int next_in_route(const RoutingSolution& y, const Pos& p) {
    return y.routes[static_cast<std::size_t>(p.slot)][static_cast<std::size_t>(p.idx) + 1];
}

int prev_in_route(const RoutingSolution& y, const Pos& p) {
    return p.idx > 0 ? y.routes[static_cast<std::size_t>(p.slot)][static_cast<std::size_t>(p.idx) - 1]
                     : 0;
}

// softmax over candidates after per-anchor max-normalization of distances;
// candidate id 0 stands for the new-route slot and uses the mean distance to
// dispatched clients
struct SoftmaxLaw {
    std::vector<int> ids;
    std::vector<double> weights;
    double total = 0.0;
};

double depot_pseudo_distance(const PcvrpInstance& inst, int i, const std::vector<int>& dispatched) {
    if (dispatched.empty()) return 0.0;
    KahanSum sum;
    for (int k : dispatched)
        sum.add(inst.proximity(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(k - 1)));
    return sum.value() / static_cast<double>(dispatched.size());
}

SoftmaxLaw softmax_law(const PcvrpInstance& inst, int i, std::vector<int> candidates, double beta,
                       double depot_distance = 0.0) {
    SoftmaxLaw law;
    law.ids = std::move(candidates);
    law.weights.resize(law.ids.size());
    double dmax = 0.0;
    auto dist = [&](int j) {
        return j == 0 ? depot_distance
                      : inst.proximity(static_cast<std::size_t>(i - 1),
                                       static_cast<std::size_t>(j - 1));
    };
    for (int j : law.ids) dmax = std::max(dmax, dist(j));
    if (dmax <= 0.0) dmax = 1.0;
    KahanSum total;
    for (std::size_t k = 0; k < law.ids.size(); ++k) {
        law.weights[k] = std::exp(-dist(law.ids[k]) / dmax / beta);
        total.add(law.weights[k]);
    }
    law.total = total.value();
    return law;
}

int draw_from_law(const SoftmaxLaw& law, Rng& rng) {
    const double u = rng.uniform() * law.total;
    double acc = 0.0;
    for (std::size_t k = 0; k < law.ids.size(); ++k) {
        acc += law.weights[k];
        if (u < acc) return law.ids[k];
    }
    return law.ids.back();
}

RoutingSolution apply_relocate(const RoutingSolution& y, const std::vector<Pos>& pos, int i, int j,
                               bool before) {
    RoutingSolution out = y;
    const Pos pi = pos[static_cast<std::size_t>(i)];
    auto& src = out.routes[static_cast<std::size_t>(pi.slot)];
    src.erase(src.begin() + pi.idx);
    for (auto& route : out.routes)
        for (std::size_t k = 0; k < route.size(); ++k)
            if (route[k] == j) {
                route.insert(route.begin() + static_cast<std::ptrdiff_t>(k) + (before ? 0 : 1), i);
                return out;
            }
    throw std::logic_error("relocate: insertion anchor vanished");
}

RoutingSolution apply_relocate_pair(const RoutingSolution& y, const std::vector<Pos>& pos, int i,
                                    int inext, int j, bool before) {
    RoutingSolution out = y;
    const Pos pi = pos[static_cast<std::size_t>(i)];
    auto& src = out.routes[static_cast<std::size_t>(pi.slot)];
    src.erase(src.begin() + pi.idx, src.begin() + pi.idx + 2);
    for (auto& route : out.routes)
        for (std::size_t k = 0; k < route.size(); ++k)
            if (route[k] == j) {
                const auto at = route.begin() + static_cast<std::ptrdiff_t>(k) + (before ? 0 : 1);
                route.insert(at, {i, inext});
                return out;
            }
    throw std::logic_error("relocate pair: insertion anchor vanished");
}

RoutingSolution apply_swap(const RoutingSolution& y, const std::vector<Pos>& pos, int i, int j) {
    RoutingSolution out = y;
    const Pos pi = pos[static_cast<std::size_t>(i)];
    const Pos pj = pos[static_cast<std::size_t>(j)];
    out.routes[static_cast<std::size_t>(pi.slot)][static_cast<std::size_t>(pi.idx)] = j;
    out.routes[static_cast<std::size_t>(pj.slot)][static_cast<std::size_t>(pj.idx)] = i;
    return out;
}

RoutingSolution apply_swap_pair(const RoutingSolution& y, const std::vector<Pos>& pos, int i,
                                int j) {
    RoutingSolution out = y;
    const Pos pi = pos[static_cast<std::size_t>(i)];
    const Pos pj = pos[static_cast<std::size_t>(j)];
    const int bi0 = i, bi1 = next_in_route(y, pi);
    const int bj0 = j, bj1 = next_in_route(y, pj);
    auto& ri = out.routes[static_cast<std::size_t>(pi.slot)];
    auto& rj = out.routes[static_cast<std::size_t>(pj.slot)];
    ri[static_cast<std::size_t>(pi.idx)] = bj0;
    ri[static_cast<std::size_t>(pi.idx) + 1] = bj1;
    rj[static_cast<std::size_t>(pj.idx)] = bi0;
    rj[static_cast<std::size_t>(pj.idx) + 1] = bi1;
    return out;
}

RoutingSolution apply_two_opt(const RoutingSolution& y, const std::vector<Pos>& pos, int i,
                              int j) {
    RoutingSolution out = y;
    const Pos pi = pos[static_cast<std::size_t>(i)];
    const Pos pj = pos[static_cast<std::size_t>(j)];
    auto& route = out.routes[static_cast<std::size_t>(pi.slot)];
    const auto a = std::min(pi.idx, pj.idx);
    const auto b = std::max(pi.idx, pj.idx);
    std::reverse(route.begin() + a, route.begin() + b + 1);
    return out;
}

RoutingSolution apply_serve(const RoutingSolution& y, int i, int j, bool before) {
    RoutingSolution out = y;
    if (j == 0) {
        out.routes.push_back({i});
        return out;
    }
    for (auto& route : out.routes)
        for (std::size_t k = 0; k < route.size(); ++k)
            if (route[k] == j) {
                route.insert(route.begin() + static_cast<std::ptrdiff_t>(k) + (before ? 0 : 1), i);
                return out;
            }
    throw std::logic_error("serve: insertion anchor vanished");
}

RoutingSolution apply_remove(const RoutingSolution& y, const std::vector<Pos>& pos, int i) {
    RoutingSolution out = y;
    const Pos pi = pos[static_cast<std::size_t>(i)];
    auto& route = out.routes[static_cast<std::size_t>(pi.slot)];
    route.erase(route.begin() + pi.idx);
    if (route.empty()) out.routes.erase(out.routes.begin() + pi.slot);
    return out;
}

}  // namespace

AnchorSets valid_sets(const PcvrpInstance& inst, const RoutingSolution& y, MoveType move) {
    if (move == MoveType::serve_remove)
        throw std::invalid_argument("valid_sets: serve/remove has its own set shape");
    const auto pos = positions_of(inst, y);
    const auto dispatched = dispatched_clients(y);
    AnchorSets sets;
    auto push_anchor = [&](int i, std::vector<int> v2) {
        // anchors that leave no second-client choice are no valid choice at all
        if (v2.empty()) return;
        sets.v1.push_back(i);
        sets.v2.push_back(std::move(v2));
    };
    switch (move) {
        case MoveType::relocate:
            for (int i : dispatched) {
                if (route_len(y, pos[static_cast<std::size_t>(i)]) < 2) continue;
                std::vector<int> v2;
                for (int j : dispatched)
                    if (j != i) v2.push_back(j);
                push_anchor(i, std::move(v2));
            }
            break;
        case MoveType::relocate_pair:
            for (int i : dispatched) {
                const Pos p = pos[static_cast<std::size_t>(i)];
                if (route_len(y, p) < 3 || is_last_in_route(y, p)) continue;
                const int inext = next_in_route(y, p);
                std::vector<int> v2;
                for (int j : dispatched)
                    if (j != i && j != inext) v2.push_back(j);
                push_anchor(i, std::move(v2));
            }
            break;
        case MoveType::swap:
            for (int i : dispatched) {
                std::vector<int> v2;
                for (int j : dispatched)
                    if (j != i) v2.push_back(j);
                push_anchor(i, std::move(v2));
            }
            break;
        case MoveType::swap_pair:
            for (int i : dispatched) {
                const Pos p = pos[static_cast<std::size_t>(i)];
                if (is_last_in_route(y, p)) continue;
                const int inext = next_in_route(y, p);
                const int iprev = prev_in_route(y, p);
                std::vector<int> v2;
                for (int j : dispatched) {
                    if (j == i || j == inext || j == iprev) continue;
                    if (is_last_in_route(y, pos[static_cast<std::size_t>(j)])) continue;
                    v2.push_back(j);
                }
                push_anchor(i, std::move(v2));
            }
            break;
        case MoveType::two_opt:
            for (int i : dispatched) {
                if (route_len(y, pos[static_cast<std::size_t>(i)]) < 3) continue;
                std::vector<int> v2;
                for (int j : dispatched)
                    if (j != i && route_len(y, pos[static_cast<std::size_t>(j)]) >= 3)
                        v2.push_back(j);
                push_anchor(i, std::move(v2));
            }
            break;
        case MoveType::serve_remove:
            break;
    }
    return sets;
}

ServeRemoveSets serve_remove_sets(const PcvrpInstance& inst, const RoutingSolution& y) {
    ServeRemoveSets sets;
    const auto pos = positions_of(inst, y);
    const int last_singleton =
        !y.routes.empty() && y.routes.back().size() == 1 ? y.routes.back()[0] : 0;
    for (const auto& route : y.routes)
        for (int id : route)
            if (route.size() >= 2 || id == last_singleton) sets.removable.push_back(id);
    for (int id = 1; id <= inst.size(); ++id)
        if (pos[static_cast<std::size_t>(id)].slot < 0) sets.servable.push_back(id);
    sets.new_route_slot = static_cast<int>(y.routes.size()) < inst.fleet;
    return sets;
}

bool move_applicable(const PcvrpInstance& inst, const RoutingSolution& y, MoveType move) {
    if (move == MoveType::serve_remove) {
        const auto sets = serve_remove_sets(inst, y);
        return !sets.removable.empty() || !sets.servable.empty();
    }
    return !valid_sets(inst, y, move).v1.empty();
}

std::vector<MoveType> applicable_moves(const PcvrpInstance& inst, const RoutingSolution& y,
                                       const std::vector<MoveType>& members) {
    std::vector<MoveType> out;
    for (MoveType m : members)
        if (move_applicable(inst, y, m)) out.push_back(m);
    return out;
}

namespace {

// walks every raw draw of one move: fn(probability, candidate or nullptr for a
// structurally undefined draw)
template <typename Fn>
void for_each_draw(const PcvrpInstance& inst, const RoutingSolution& y, MoveType move,
                   const RoutingProposalParams& params, Fn&& fn) {
    const auto pos = positions_of(inst, y);
    if (move == MoveType::serve_remove) {
        const auto sets = serve_remove_sets(inst, y);
        const double r = static_cast<double>(sets.removable.size());
        const double s = static_cast<double>(sets.servable.size());
        if (r + s == 0.0) return;
        const double p_remove = r / (r + s);
        for (int i : sets.removable) {
            RoutingSolution cand = apply_remove(y, pos, i);
            fn(p_remove / r, &cand);
        }
        if (s > 0.0) {
            const auto dispatched = dispatched_clients(y);
            for (int i : sets.servable) {
                std::vector<int> candidates = dispatched;
                if (sets.new_route_slot) candidates.push_back(0);
                const auto law = softmax_law(inst, i, std::move(candidates), params.beta,
                                             depot_pseudo_distance(inst, i, dispatched));
                for (std::size_t k = 0; k < law.ids.size(); ++k) {
                    const double pj = ((1.0 - p_remove) / s) * (law.weights[k] / law.total);
                    if (law.ids[k] == 0) {
                        RoutingSolution cand = apply_serve(y, i, 0, false);
                        fn(pj, &cand);
                    } else {
                        for (bool before : {false, true}) {
                            RoutingSolution cand = apply_serve(y, i, law.ids[k], before);
                            fn(0.5 * pj, &cand);
                        }
                    }
                }
            }
        }
        return;
    }
    const auto sets = valid_sets(inst, y, move);
    if (sets.v1.empty()) return;
    const double pi = 1.0 / static_cast<double>(sets.v1.size());
    for (std::size_t a = 0; a < sets.v1.size(); ++a) {
        const int i = sets.v1[a];
        const auto law = softmax_law(inst, i, sets.v2[a], params.beta);
        for (std::size_t k = 0; k < law.ids.size(); ++k) {
            const int j = law.ids[k];
            const double pj = pi * (law.weights[k] / law.total);
            switch (move) {
                case MoveType::relocate:
                    for (bool before : {false, true}) {
                        RoutingSolution cand = apply_relocate(y, pos, i, j, before);
                        fn(0.5 * pj, &cand);
                    }
                    break;
                case MoveType::relocate_pair: {
                    const int inext = next_in_route(y, pos[static_cast<std::size_t>(i)]);
                    for (bool before : {false, true}) {
                        RoutingSolution cand = apply_relocate_pair(y, pos, i, inext, j, before);
                        fn(0.5 * pj, &cand);
                    }
                    break;
                }
                case MoveType::swap: {
                    RoutingSolution cand = apply_swap(y, pos, i, j);
                    fn(pj, &cand);
                    break;
                }
                case MoveType::swap_pair: {
                    RoutingSolution cand = apply_swap_pair(y, pos, i, j);
                    fn(pj, &cand);
                    break;
                }
                case MoveType::two_opt: {
                    if (pos[static_cast<std::size_t>(i)].slot !=
                        pos[static_cast<std::size_t>(j)].slot) {
                        fn(pj, static_cast<RoutingSolution*>(nullptr));
                        break;
                    }
                    RoutingSolution cand = apply_two_opt(y, pos, i, j);
                    fn(pj, &cand);
                    break;
                }
                case MoveType::serve_remove:
                    break;
            }
        }
    }
}

}  // namespace

MoveScan scan_move(const PcvrpInstance& inst, const RoutingSolution& y, MoveType move,
                   const RoutingProposalParams& params) {
    MoveScan scan;
    for_each_draw(inst, y, move, params, [&](double p, const RoutingSolution* cand) {
        if (cand == nullptr || !feasibility_check(inst, *cand).feasible)
            scan.invalid_mass += p;
        else
            scan.mass[solution_key(*cand)] += p;
    });
    return scan;
}

double resample_factor(double invalid_mass, int max_attempts) {
    double factor = 0.0;
    double pow = 1.0;
    for (int m = 0; m < max_attempts; ++m) {
        factor += pow;
        pow *= invalid_mass;
    }
    return factor;
}

namespace {

// one raw draw with the same sequential law the scan integrates over;
// returns false for a structurally undefined or infeasible candidate
bool draw_once(const PcvrpInstance& inst, const RoutingSolution& y, MoveType move,
               const RoutingProposalParams& params, Rng& rng, RoutingSolution& out) {
    const auto pos = positions_of(inst, y);
    if (move == MoveType::serve_remove) {
        const auto sets = serve_remove_sets(inst, y);
        const double r = static_cast<double>(sets.removable.size());
        const double s = static_cast<double>(sets.servable.size());
        if (r + s == 0.0) throw std::logic_error("draw: serve/remove inapplicable");
        bool do_remove;
        if (r > 0.0 && s > 0.0)
            do_remove = rng.bernoulli(r / (r + s));
        else
            do_remove = r > 0.0;
        if (do_remove) {
            const int i = sets.removable[static_cast<std::size_t>(
                rng.index(static_cast<int>(sets.removable.size())))];
            out = apply_remove(y, pos, i);
        } else {
            const int i = sets.servable[static_cast<std::size_t>(
                rng.index(static_cast<int>(sets.servable.size())))];
            const auto dispatched = dispatched_clients(y);
            std::vector<int> candidates = dispatched;
            if (sets.new_route_slot) candidates.push_back(0);
            const auto law = softmax_law(inst, i, std::move(candidates), params.beta,
                                         depot_pseudo_distance(inst, i, dispatched));
            const int j = draw_from_law(law, rng);
            const bool before = j == 0 ? false : rng.bernoulli(0.5);
            out = apply_serve(y, i, j, before);
        }
        return feasibility_check(inst, out).feasible;
    }
    const auto sets = valid_sets(inst, y, move);
    if (sets.v1.empty()) throw std::logic_error("draw: move inapplicable");
    const std::size_t a = static_cast<std::size_t>(rng.index(static_cast<int>(sets.v1.size())));
    const int i = sets.v1[a];
    const auto law = softmax_law(inst, i, sets.v2[a], params.beta);
    const int j = draw_from_law(law, rng);
    switch (move) {
        case MoveType::relocate:
            out = apply_relocate(y, pos, i, j, rng.bernoulli(0.5));
            break;
        case MoveType::relocate_pair:
            out = apply_relocate_pair(y, pos, i,
                                      next_in_route(y, pos[static_cast<std::size_t>(i)]), j,
                                      rng.bernoulli(0.5));
            break;
        case MoveType::swap:
            out = apply_swap(y, pos, i, j);
            break;
        case MoveType::swap_pair:
            out = apply_swap_pair(y, pos, i, j);
            break;
        case MoveType::two_opt:
            if (pos[static_cast<std::size_t>(i)].slot != pos[static_cast<std::size_t>(j)].slot)
                return false;  // segment undefined across routes
            out = apply_two_opt(y, pos, i, j);
            break;
        case MoveType::serve_remove:
            break;
    }
    return feasibility_check(inst, out).feasible;
}

}  // namespace

RoutingProposal propose(const PcvrpInstance& inst, const RoutingSolution& y, MoveType move,
                        const RoutingProposalParams& params, Rng& rng) {
    RoutingProposal prop;
    prop.candidate = y;
    bool valid = false;
    for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
        ++prop.attempts;
        RoutingSolution cand;
        if (draw_once(inst, y, move, params, rng, cand)) {
            prop.candidate = std::move(cand);
            valid = true;
            break;
        }
    }
    if (!valid) {
        prop.exhausted = true;
        return prop;
    }
    const auto scan_y = scan_move(inst, y, move, params);
    const auto key_c = solution_key(prop.candidate);
    const auto fwd_it = scan_y.mass.find(key_c);
    if (fwd_it == scan_y.mass.end())
        throw std::logic_error("propose: drawn candidate missing from its own scan");
    prop.forward_density = fwd_it->second * resample_factor(scan_y.invalid_mass,
                                                            params.max_attempts);
    if (prop.candidate == y) {
        prop.reverse_density = prop.forward_density;
        return prop;
    }
    const auto scan_c = scan_move(inst, prop.candidate, move, params);
    const auto rev_it = scan_c.mass.find(solution_key(y));
    if (rev_it == scan_c.mass.end())
        throw std::logic_error("propose: reverse support missing, neighborhood not symmetric");
    prop.reverse_density = rev_it->second * resample_factor(scan_c.invalid_mass,
                                                            params.max_attempts);
    return prop;
}

RoutingChainResult sample_routing_chain(const PcvrpInstance& inst,
                                        const std::vector<double>& theta,
                                        const RoutingChainConfig& config,
                                        const RoutingSolution& init, Rng& rng) {
    if (theta.size() != static_cast<std::size_t>(inst.size()))
        throw std::invalid_argument("sample_routing_chain: theta size mismatch");
    if (!(config.t > 0.0)) throw std::invalid_argument("sample_routing_chain: t must be > 0");
    if (config.iterations < 0 || config.burn_in < 0 || config.burn_in > config.iterations)
        throw std::invalid_argument("sample_routing_chain: bad iteration counts");
    if (config.members.empty())
        throw std::invalid_argument("sample_routing_chain: no mixture members");
    const auto init_report = feasibility_check(inst, init);
    if (!init_report.feasible)
        throw std::invalid_argument("sample_routing_chain: infeasible init: " +
                                    init_report.detail);

    const std::size_t dim = (static_cast<std::size_t>(inst.size()) + 1) *
                            (static_cast<std::size_t>(inst.size()) + 1);
    std::vector<KahanSum> mean(dim);
    long long samples = 0;
    long long accepted = 0;
    RoutingSolution y = init;
    for (long long k = 1; k <= config.iterations; ++k) {
        bool acc = false;
        const auto q_here = applicable_moves(inst, y, config.members);
        if (!q_here.empty()) {
            const MoveType s =
                q_here[static_cast<std::size_t>(rng.index(static_cast<int>(q_here.size())))];
            const auto prop = propose(inst, y, s, config.params, rng);
            if (!prop.exhausted) {
                const double delta = incremental_delta(inst, theta, y, prop.candidate);
                const auto q_there = applicable_moves(inst, prop.candidate, config.members);
                const double alpha = (static_cast<double>(q_here.size()) /
                                      static_cast<double>(q_there.size())) *
                                     (prop.reverse_density / prop.forward_density);
                const double p = acceptance_probability(alpha, delta, config.t);
                if (rng.uniform() <= p) {
                    y = prop.candidate;
                    acc = true;
                }
            }
        }
        accepted += acc ? 1 : 0;
        if (config.observer) config.observer(k, y, acc);
        if (k > config.burn_in) {
            const auto inc = incidence_vector(inst, y);
            for (std::size_t c = 0; c < dim; ++c) mean[c].add(inc[c]);
            ++samples;
        }
    }

    RoutingChainResult result;
    result.final_state = y;
    result.transitions = config.iterations;
    result.acceptance_rate = config.iterations > 0
                                 ? static_cast<double>(accepted) /
                                       static_cast<double>(config.iterations)
                                 : 0.0;
    if (samples > 0) {
        result.mean_incidence.resize(dim);
        for (std::size_t c = 0; c < dim; ++c)
            result.mean_incidence[c] = mean[c].value() / static_cast<double>(samples);
    } else {
        result.mean_incidence = incidence_vector(inst, y);
    }
    return result;
}

std::vector<RoutingSolution> enumerate_feasible(const PcvrpInstance& inst) {
    const int n = inst.size();
    if (n > 4)
        throw std::length_error("enumerate_feasible: instance too large to enumerate");
    std::vector<RoutingSolution> out;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<int> subset;
        for (int id = 1; id <= n; ++id)
            if (mask & (1u << (id - 1))) subset.push_back(id);
        if (subset.empty()) {
            RoutingSolution empty;
            if (feasibility_check(inst, empty).feasible) out.push_back(empty);
            continue;
        }
        std::vector<int> perm = subset;
        do {
            const unsigned gaps = static_cast<unsigned>(perm.size()) - 1;
            for (unsigned split = 0; split < (1u << gaps); ++split) {
                RoutingSolution sol;
                sol.routes.push_back({perm[0]});
                for (unsigned g = 0; g < gaps; ++g) {
                    if (split & (1u << g))
                        sol.routes.push_back({perm[g + 1]});
                    else
                        sol.routes.back().push_back(perm[g + 1]);
                }
                if (static_cast<int>(sol.routes.size()) > inst.fleet) continue;
                if (feasibility_check(inst, sol).feasible) out.push_back(sol);
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
    return out;
}

std::vector<double> routing_gibbs(const PcvrpInstance& inst, const std::vector<double>& theta,
                                  double t, const std::vector<RoutingSolution>& states) {
    if (!(t > 0.0)) throw std::invalid_argument("routing_gibbs: t must be > 0");
    std::vector<double> logits(states.size());
    for (std::size_t i = 0; i < states.size(); ++i)
        logits[i] = routing_score(inst, theta, states[i]) / t;
    const double log_z = log_sum_exp(logits);
    std::vector<double> probs(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) probs[i] = std::exp(logits[i] - log_z);
    return probs;
}

Matrix routing_kernel_matrix(const PcvrpInstance& inst, const std::vector<double>& theta,
                             double t, const std::vector<RoutingSolution>& states,
                             const std::vector<MoveType>& members,
                             const RoutingProposalParams& params) {
    if (!(t > 0.0)) throw std::invalid_argument("routing_kernel_matrix: t must be > 0");
    const std::size_t m = states.size();
    std::map<std::vector<int>, std::size_t> index;
    for (std::size_t i = 0; i < m; ++i) index[solution_key(states[i])] = i;

    std::vector<std::map<MoveType, MoveScan>> scans(m);
    auto scan_of = [&](std::size_t i, MoveType move) -> const MoveScan& {
        auto it = scans[i].find(move);
        if (it == scans[i].end())
            it = scans[i].emplace(move, scan_move(inst, states[i], move, params)).first;
        return it->second;
    };

    std::vector<double> score(m);
    std::vector<std::vector<MoveType>> applicable(m);
    for (std::size_t i = 0; i < m; ++i) {
        score[i] = routing_score(inst, theta, states[i]);
        applicable[i] = applicable_moves(inst, states[i], members);
    }

    Matrix p(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (applicable[i].empty()) {
            p(i, i) = 1.0;
            continue;
        }
        const double member_prob = 1.0 / static_cast<double>(applicable[i].size());
        double off_diag = 0.0;
        for (MoveType s : applicable[i]) {
            const auto& scan = scan_of(i, s);
            const double factor = resample_factor(scan.invalid_mass, params.max_attempts);
            for (const auto& [key, raw] : scan.mass) {
                const auto it = index.find(key);
                if (it == index.end())
                    throw std::logic_error("routing_kernel_matrix: candidate outside state list");
                const std::size_t c = it->second;
                if (c == i) continue;  // self-draws land in the diagonal residual
                const double fwd = raw * factor;
                const auto& back = scan_of(c, s);
                const auto rev_it = back.mass.find(solution_key(states[i]));
                if (rev_it == back.mass.end())
                    throw std::logic_error("routing_kernel_matrix: asymmetric move support");
                const double rev =
                    rev_it->second * resample_factor(back.invalid_mass, params.max_attempts);
                const double alpha = (static_cast<double>(applicable[i].size()) /
                                      static_cast<double>(applicable[c].size())) *
                                     (rev / fwd);
                const double accept =
                    std::min(1.0, acceptance_probability(alpha, score[c] - score[i], t));
                p(i, c) += member_prob * fwd * accept;
                off_diag += member_prob * fwd * accept;
            }
        }
        p(i, i) = 1.0 - off_diag;
    }
    return p;
}

PcvrpInstance random_instance(int n, Rng& rng, const RandomInstanceOptions& opts) {
    if (n < 0) throw std::invalid_argument("random_instance: n must be >= 0");
    const double horizon = opts.loose ? 1e6 : 3.0 * opts.area;
    std::vector<RoutingRequest> reqs;
    double total_demand = 0.0;
    for (int i = 0; i < n; ++i) {
        RoutingRequest r;
        r.x = rng.uniform() * opts.area;
        r.y = rng.uniform() * opts.area;
        if (opts.loose) {
            r.window = {0.0, horizon};
        } else {
            const double open = rng.uniform() * 0.7 * horizon;
            r.window = {open, open + opts.window_width * (0.5 + rng.uniform())};
        }
        r.service = 1.0 + 4.0 * rng.uniform();
        r.demand = 1.0 + (opts.demand_max - 1.0) * rng.uniform();
        r.prize = 5.0 + 10.0 * rng.uniform();
        total_demand += r.demand;
        reqs.push_back(r);
    }
    const double capacity = opts.loose
                                ? 1e9
                                : std::max(opts.demand_max,
                                           opts.capacity_slack * total_demand /
                                               std::max(1.0, static_cast<double>(n) / 2.0));
    return make_instance(opts.area / 2.0, opts.area / 2.0, {0.0, horizon}, capacity,
                         std::move(reqs));
}

}  // namespace lsmc
