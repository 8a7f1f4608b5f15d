#ifndef STCPG_CORE_HPP
#define STCPG_CORE_HPP

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stcpg {

// Distance assigned to semantically disjoint types. Finite so energies stay
// comparable, large enough that no merge threshold ever admits it.
inline constexpr double kDisjointDistance = 1e6;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error("parse error: " + what) {}
};

class CycleError : public Error {
public:
    explicit CycleError(const std::string& what) : Error("cycle: " + what) {}
};

class MissingCoreRelation : public Error {
public:
    explicit MissingCoreRelation(const std::string& what)
        : Error("missing core relation: " + what) {}
};

class UnknownConcept : public Error {
public:
    explicit UnknownConcept(const std::string& what) : Error("unknown concept: " + what) {}
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(const std::string& what) : Error("duplicate id: " + what) {}
};

class DanglingEdge : public Error {
public:
    explicit DanglingEdge(const std::string& what) : Error("dangling edge: " + what) {}
};

class DisjointTypes : public Error {
public:
    explicit DisjointTypes(const std::string& what) : Error("disjoint types: " + what) {}
};

class ThresholdExceeded : public Error {
public:
    explicit ThresholdExceeded(const std::string& what)
        : Error("threshold exceeded: " + what) {}
};

class CyclicGrammar : public Error {
public:
    explicit CyclicGrammar(const std::string& what) : Error("cyclic grammar: " + what) {}
};

class InvalidParse : public Error {
public:
    explicit InvalidParse(const std::string& what) : Error("invalid parse: " + what) {}
};

class InconsistentCorrespondence : public Error {
public:
    explicit InconsistentCorrespondence(const std::string& what)
        : Error("inconsistent correspondence: " + what) {}
};

class NoViolation : public Error {
public:
    explicit NoViolation(const std::string& what) : Error("no violation: " + what) {}
};

class QuerySyntaxError : public Error {
public:
    explicit QuerySyntaxError(const std::string& what) : Error("query syntax: " + what) {}
};

// Origin of a parse-graph element.
enum class Provenance { video, text, deduced, merged };

inline const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::video: return "video";
        case Provenance::text: return "text";
        case Provenance::deduced: return "deduced";
        case Provenance::merged: return "merged";
    }
    return "video";
}

inline Provenance provenance_from_string(const std::string& s) {
    if (s == "video") return Provenance::video;
    if (s == "text") return Provenance::text;
    if (s == "deduced") return Provenance::deduced;
    if (s == "merged") return Provenance::merged;
    throw ParseError("unknown provenance tag '" + s + "'");
}

// Optional time interval and planar position attached to an entity.
struct SpatioTemporal {
    std::optional<double> t0;
    std::optional<double> t1;
    std::optional<double> x;
    std::optional<double> y;

    bool has_time() const { return t0.has_value() || t1.has_value(); }
    bool has_space() const { return x.has_value() && y.has_value(); }
    bool empty() const { return !t0 && !t1 && !x && !y; }

    // Midpoint of the time range; t1 falls back to t0 and vice versa.
    double time_mid() const {
        double a = t0 ? *t0 : *t1;
        double b = t1 ? *t1 : *t0;
        return 0.5 * (a + b);
    }

    void validate() const {
        if (t0 && t1 && *t0 > *t1 + 1e-12)
            throw ParseError("annotation has t0 > t1");
    }
};

inline bool operator==(const SpatioTemporal& a, const SpatioTemporal& b) {
    return a.t0 == b.t0 && a.t1 == b.t1 && a.x == b.x && a.y == b.y;
}

// "0:46" / "0:46-0:51" style rendering of second offsets.
inline std::string format_mmss(double seconds) {
    long total = static_cast<long>(std::floor(seconds + 0.5));
    long m = total / 60;
    long s = total % 60;
    std::ostringstream os;
    os << m << ':' << (s < 10 ? "0" : "") << s;
    return os.str();
}

inline std::string format_time_range(const SpatioTemporal& at) {
    if (!at.has_time()) return "?";
    double a = at.t0 ? *at.t0 : *at.t1;
    double b = at.t1 ? *at.t1 : *at.t0;
    if (std::fabs(a - b) < 0.5) return format_mmss(a);
    return format_mmss(a) + "-" + format_mmss(b);
}

namespace log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline Level threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("STC_LOG");
        if (!env) return Level::warn;
        std::string s(env);
        if (s == "debug") return Level::debug;
        if (s == "info") return Level::info;
        if (s == "warn") return Level::warn;
        if (s == "error") return Level::error;
        if (s == "off") return Level::off;
        return Level::warn;
    }();
    return lvl;
}

inline void emit(Level lvl, const std::string& msg) {
    static const char* names[] = {"debug", "info", "warn", "error"};
    if (lvl >= threshold() && lvl != Level::off)
        std::cerr << "[stc:" << names[static_cast<int>(lvl)] << "] " << msg << "\n";
}

inline void debug(const std::string& m) { emit(Level::debug, m); }
inline void info(const std::string& m) { emit(Level::info, m); }
inline void warn(const std::string& m) { emit(Level::warn, m); }

}  // namespace log

// Deterministic 64-bit generator (splitmix64). Used everywhere randomness is
// needed so results are reproducible across platforms and standard-library
// versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Index drawn proportionally to the given nonnegative weights.
    std::size_t pick_weighted(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double r = next_double() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            r -= weights[i];
            if (r <= 0.0) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    // Derive an independent stream, e.g. one per trial.
    Rng fork(std::uint64_t salt) {
        return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL + 0x1234567ULL));
    }

private:
    std::uint64_t state_;
};

}  // namespace stcpg

#endif  // STCPG_CORE_HPP
