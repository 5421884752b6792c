#pragma once

// Bandit instances: arm set, query set, ground-truth model and best arm.
// Instance files are JSON:
//
//   {
//     "format_version": 1,
//     "dimension": d,
//     "arms": [[...], ...],                    row-major, one row per arm
//     "queries": [[i, j], [k, null], ...],     arm index pairs; null is the zero arm
//     "params": {"theta_star": [...], "barrier_a": a, "t_nondec": t},
//     "best_arm": index
//   }
//
// Query vectors are rebuilt from their arm pairs on load.

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rtpref/core.hpp"
#include "rtpref/diffusion_model.hpp"

namespace rtpref {

inline constexpr int kInstanceFormatVersion = 1;

/// Query vector x = arms[first] - arms[second], or arms[first] when second is empty.
struct Query {
    Vector x;
    std::size_t first = 0;
    std::optional<std::size_t> second;
};

enum class QueryKind { all_pairs, reference };

inline std::string_view to_string(QueryKind k) {
    return k == QueryKind::all_pairs ? "all_pairs" : "reference";
}

inline QueryKind parse_query_kind(std::string_view s) {
    if (s == "all_pairs") return QueryKind::all_pairs;
    if (s == "reference") return QueryKind::reference;
    throw InvalidArgument("unknown query kind '" + std::string(s) + "'");
}

/// Gap below which two arm utilities count as tied.
inline constexpr double kBestArmTieTolerance = 1e-12;

struct BanditInstance {
    std::vector<Vector> arms;
    std::vector<Query> queries;
    DiffusionParams params;
    std::size_t best_arm = 0;

    std::size_t num_arms() const { return arms.size(); }
    Eigen::Index dimension() const { return params.dimension(); }

    std::vector<Vector> query_vectors() const {
        std::vector<Vector> out;
        out.reserve(queries.size());
        for (const auto& q : queries) {
            out.push_back(q.x);
        }
        return out;
    }

    /// Throws ValidationError on any broken invariant.
    void validate() const {
        try {
            params.validate();
        } catch (const InvalidArgument& e) {
            throw ValidationError(std::string("params: ") + e.what());
        }
        const auto d = params.dimension();
        if (arms.empty()) {
            throw ValidationError("instance has no arms");
        }
        for (std::size_t i = 0; i < arms.size(); ++i) {
            if (arms[i].size() != d || !arms[i].allFinite()) {
                throw ValidationError("arm " + std::to_string(i) +
                                      " has wrong dimension or non-finite entries");
            }
        }
        for (std::size_t i = 0; i < queries.size(); ++i) {
            const Query& q = queries[i];
            if (q.first >= arms.size() || (q.second && *q.second >= arms.size())) {
                throw ValidationError("query " + std::to_string(i) + " references a missing arm");
            }
            const Vector expect = q.second ? Vector(arms[q.first] - arms[*q.second])
                                           : arms[q.first];
            if (q.x.size() != d || q.x != expect) {
                throw ValidationError("query " + std::to_string(i) +
                                      " is not the difference of its source arms");
            }
        }
        if (best_arm >= arms.size()) {
            throw ValidationError("best_arm out of range");
        }
        const double best = arms[best_arm].dot(params.theta_star);
        for (std::size_t i = 0; i < arms.size(); ++i) {
            if (i == best_arm) continue;
            const double v = arms[i].dot(params.theta_star);
            if (v > best) {
                throw ValidationError("declared best_arm " + std::to_string(best_arm) +
                                      " is beaten by arm " + std::to_string(i));
            }
            if (best - v <= kBestArmTieTolerance) {
                throw ValidationError("best arm is not unique (arm " + std::to_string(i) +
                                      " ties arm " + std::to_string(best_arm) + ")");
            }
        }
    }
};

inline bool operator==(const Query& l, const Query& r) {
    return l.first == r.first && l.second == r.second && l.x == r.x;
}

inline bool operator==(const BanditInstance& l, const BanditInstance& r) {
    return l.arms == r.arms && l.queries == r.queries && l.best_arm == r.best_arm &&
           l.params.theta_star == r.params.theta_star &&
           l.params.barrier_a == r.params.barrier_a && l.params.t_nondec == r.params.t_nondec;
}

inline std::vector<Query> build_queries(const std::vector<Vector>& arms, QueryKind kind) {
    std::vector<Query> out;
    if (kind == QueryKind::reference) {
        if (arms.empty()) {
            throw InvalidArgument("reference queries need at least one arm");
        }
        for (std::size_t i = 0; i < arms.size(); ++i) {
            out.push_back({arms[i], i, std::nullopt});
        }
        return out;
    }
    if (arms.size() < 2) {
        throw InvalidArgument("pairwise queries need at least two arms");
    }
    out.reserve(arms.size() * (arms.size() - 1));
    for (std::size_t i = 0; i < arms.size(); ++i) {
        for (std::size_t j = 0; j < arms.size(); ++j) {
            if (i != j) {
                out.push_back({arms[i] - arms[j], i, j});
            }
        }
    }
    return out;
}

/// Index of the largest z . theta, or nullopt when the top two are within the tie tolerance.
inline std::optional<std::size_t> unique_best_arm(const std::vector<Vector>& arms,
                                                  const Vector& theta) {
    std::size_t best = 0;
    double best_v = -kInf;
    double second_v = -kInf;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        const double v = arms[i].dot(theta);
        if (v > best_v) {
            second_v = best_v;
            best_v = v;
            best = i;
        } else if (v > second_v) {
            second_v = v;
        }
    }
    if (best_v - second_v <= kBestArmTieTolerance) {
        return std::nullopt;
    }
    return best;
}

struct SphereOptions {
    Eigen::Index dimension = 5;
    std::size_t num_arms = 10;
    double scale = 1.0;  // c_Z
    double barrier_a = 1.0;
    double t_nondec = 0.0;
    QueryKind query_kind = QueryKind::all_pairs;
};

/// Arms uniform on the unit sphere; theta* = z + 0.01 (z' - z) for the pair
/// (z, z') with the largest inner product, so z is the best arm. Arms are then
/// scaled by c_Z while theta* stays unscaled.
inline BanditInstance gen_sphere_instance(const SphereOptions& opts, Rng& rng) {
    if (opts.dimension < 2 || opts.num_arms < 2) {
        throw InvalidArgument("sphere instance needs d >= 2 and k >= 2");
    }
    if (!(opts.scale > 0.0) || !std::isfinite(opts.scale)) {
        throw InvalidArgument("arm scale c_Z must be positive");
    }
    std::normal_distribution<double> normal;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<Vector> unit(opts.num_arms, Vector(opts.dimension));
        bool degenerate = false;
        for (auto& z : unit) {
            for (Eigen::Index j = 0; j < opts.dimension; ++j) {
                z(j) = normal(rng);
            }
            const double nrm = z.norm();
            if (!(nrm > 0.0)) {
                degenerate = true;
                break;
            }
            z /= nrm;
        }
        if (degenerate) continue;
        std::size_t bi = 0;
        std::size_t bj = 1;
        double best_ip = -kInf;
        for (std::size_t i = 0; i < unit.size(); ++i) {
            for (std::size_t j = i + 1; j < unit.size(); ++j) {
                const double ip = unit[i].dot(unit[j]);
                if (ip > best_ip) {
                    best_ip = ip;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (best_ip >= 1.0 - 1e-12) continue;  // identical arms
        const Vector theta = unit[bi] + 0.01 * (unit[bj] - unit[bi]);
        std::vector<Vector> arms;
        arms.reserve(unit.size());
        for (const auto& z : unit) {
            arms.push_back(opts.scale * z);
        }
        const auto best = unique_best_arm(arms, theta);
        if (!best || *best != bi) continue;
        BanditInstance inst;
        inst.params = DiffusionParams(theta, opts.barrier_a, opts.t_nondec);
        inst.queries = build_queries(arms, opts.query_kind);
        inst.arms = std::move(arms);
        inst.best_arm = bi;
        return inst;
    }
    throw Error("sphere generator failed to draw a non-degenerate instance");
}

inline nlohmann::json instance_to_json(const BanditInstance& inst) {
    nlohmann::json arms = nlohmann::json::array();
    for (const auto& z : inst.arms) {
        arms.push_back(std::vector<double>(z.begin(), z.end()));
    }
    nlohmann::json queries = nlohmann::json::array();
    for (const auto& q : inst.queries) {
        queries.push_back(nlohmann::json::array(
            {q.first, q.second ? nlohmann::json(*q.second) : nlohmann::json(nullptr)}));
    }
    const auto& p = inst.params;
    return {{"format_version", kInstanceFormatVersion},
            {"dimension", inst.dimension()},
            {"arms", std::move(arms)},
            {"queries", std::move(queries)},
            {"params",
             {{"theta_star", std::vector<double>(p.theta_star.begin(), p.theta_star.end())},
              {"barrier_a", p.barrier_a},
              {"t_nondec", p.t_nondec}}},
            {"best_arm", inst.best_arm}};
}

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& obj, const char* key,
                                         const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw ParseError(where + ": missing field '" + key + "'");
    }
    return obj.at(key);
}

inline Vector parse_vector(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array()) {
        throw ParseError(where + ": expected an array of numbers");
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw ParseError(where + "[" + std::to_string(i) + "]: expected a number");
        }
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline std::size_t parse_index(const nlohmann::json& j, const std::string& where) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
        throw ParseError(where + ": expected a non-negative integer");
    }
    return j.get<std::size_t>();
}

inline double parse_real(const nlohmann::json& j, const std::string& where) {
    if (!j.is_number()) {
        throw ParseError(where + ": expected a number");
    }
    return j.get<double>();
}

}  // namespace detail

/// Parses and validates; ParseError for malformed content, ValidationError for broken invariants.
inline BanditInstance instance_from_json(const nlohmann::json& j) {
    using detail::require_key;
    if (!j.is_object()) {
        throw ParseError("instance: top level must be an object");
    }
    const auto version = detail::parse_index(require_key(j, "format_version", "instance"),
                                             "instance.format_version");
    if (version != kInstanceFormatVersion) {
        throw ParseError("instance.format_version: unsupported version " + std::to_string(version));
    }
    const auto d = static_cast<Eigen::Index>(
        detail::parse_index(require_key(j, "dimension", "instance"), "instance.dimension"));
    BanditInstance inst;
    const auto& arms = require_key(j, "arms", "instance");
    if (!arms.is_array()) {
        throw ParseError("instance.arms: expected an array");
    }
    for (std::size_t i = 0; i < arms.size(); ++i) {
        const std::string where = "instance.arms[" + std::to_string(i) + "]";
        Vector z = detail::parse_vector(arms[i], where);
        if (z.size() != d) {
            throw ParseError(where + ": expected " + std::to_string(d) + " entries");
        }
        inst.arms.push_back(std::move(z));
    }
    const auto& params = require_key(j, "params", "instance");
    inst.params.theta_star =
        detail::parse_vector(require_key(params, "theta_star", "instance.params"),
                             "instance.params.theta_star");
    if (inst.params.theta_star.size() != d) {
        throw ParseError("instance.params.theta_star: expected " + std::to_string(d) + " entries");
    }
    inst.params.barrier_a = detail::parse_real(require_key(params, "barrier_a", "instance.params"),
                                               "instance.params.barrier_a");
    inst.params.t_nondec = detail::parse_real(require_key(params, "t_nondec", "instance.params"),
                                              "instance.params.t_nondec");
    const auto& queries = require_key(j, "queries", "instance");
    if (!queries.is_array()) {
        throw ParseError("instance.queries: expected an array");
    }
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const std::string where = "instance.queries[" + std::to_string(i) + "]";
        const auto& q = queries[i];
        if (!q.is_array() || q.size() != 2) {
            throw ParseError(where + ": expected [arm, arm] or [arm, null]");
        }
        Query out;
        out.first = detail::parse_index(q[0], where + "[0]");
        if (!q[1].is_null()) {
            out.second = detail::parse_index(q[1], where + "[1]");
        }
        if (out.first >= inst.arms.size() || (out.second && *out.second >= inst.arms.size())) {
            throw ParseError(where + ": arm index out of range");
        }
        out.x = out.second ? Vector(inst.arms[out.first] - inst.arms[*out.second])
                           : inst.arms[out.first];
        inst.queries.push_back(std::move(out));
    }
    inst.best_arm = detail::parse_index(require_key(j, "best_arm", "instance"), "instance.best_arm");
    inst.validate();
    return inst;
}

inline void save_instance(const BanditInstance& inst, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot open " + path + " for writing");
    }
    out << instance_to_json(inst).dump(2) << '\n';
}

inline BanditInstance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    try {
        return instance_from_json(j);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

}  // namespace rtpref
