#pragma once

// One-dimensional Skorohod map on right-continuous piecewise-constant paths.
// For such paths the map is exact at the grid points:
//   Gamma(f)(t_k) = f(t_k) - min(0, min_{i<=k} f(t_i)).

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ccnet/errors.hpp"
#include "ccnet/kv_config.hpp"

namespace ccnet {

struct DiscretePath {
    std::vector<double> times;
    std::vector<double> values;

    std::size_t size() const noexcept { return times.size(); }

    // Throws if the grid is not strictly increasing or a value is not finite.
    void validate() const {
        if (times.size() != values.size())
            throw ConfigError("InvalidPath", "times and values differ in length");
        if (times.empty()) throw ConfigError("InvalidPath", "empty path");
        for (std::size_t k = 1; k < times.size(); ++k)
            if (!(times[k] > times[k - 1])) throw ConfigError("InvalidPath", "times not strictly increasing");
        for (double v : values)
            if (!std::isfinite(v)) throw ConfigError("InvalidPath", "non-finite value");
    }
};

// Incremental form of the map: feed f(t_0), f(t_1), ... in order.
class SkorohodStepper {
public:
    // Returns Gamma(f)(t_k) for the next value f(t_k).
    double push(double f) noexcept {
        inf_ = std::min(inf_, f);
        return f - inf_;
    }
    // Regulator y(t_k) = -min(0, running min).
    double regulator() const noexcept { return -inf_; }

private:
    double inf_ = 0.0;
};

namespace detail {
inline void require_start(const DiscretePath& f) {
    f.validate();
    if (f.values.front() < 0.0) throw ConfigError("NegativeStart", "Skorohod input must start >= 0");
}
}  // namespace detail

inline DiscretePath gamma(const DiscretePath& f) {
    detail::require_start(f);
    DiscretePath z{f.times, std::vector<double>(f.size())};
    SkorohodStepper s;
    for (std::size_t k = 0; k < f.size(); ++k) z.values[k] = s.push(f.values[k]);
    return z;
}

inline DiscretePath regulator(const DiscretePath& f) {
    detail::require_start(f);
    DiscretePath y{f.times, std::vector<double>(f.size())};
    SkorohodStepper s;
    for (std::size_t k = 0; k < f.size(); ++k) {
        s.push(f.values[k]);
        y.values[k] = s.regulator();
    }
    return y;
}

// Span form of the reflection in G = {w1 >= psi(w2)} on a shared grid.
// w2 = Gamma(b2) first, then w1 = Gamma(b1 - psi(w2)) + psi(w2), one pass in
// time order: w2 at t_k is final before psi is evaluated there.
template <class Boundary>
void reflect_in_G(std::span<const double> b1, std::span<const double> b2, const Boundary& psi,
                  std::span<double> w1, std::span<double> w2, std::span<double> i1,
                  std::span<double> i2) {
    SkorohodStepper s1, s2;
    for (std::size_t k = 0; k < b1.size(); ++k) {
        w2[k] = s2.push(b2[k]);
        i2[k] = s2.regulator();
        const double edge = psi(w2[k]);
        w1[k] = s1.push(b1[k] - edge) + edge;
        i1[k] = s1.regulator();
    }
}

struct ReflectedPaths {
    DiscretePath w1, w2, i1, i2;
};

template <class Boundary>
ReflectedPaths reflect_in_G(const DiscretePath& b1, const DiscretePath& b2, const Boundary& psi) {
    b1.validate();
    b2.validate();
    if (b1.times != b2.times) throw ConfigError("GridMismatch", "b1 and b2 must share a time grid");
    if (b1.values.front() != 0.0 || b2.values.front() != 0.0)
        throw ConfigError("NonzeroStart", "reflect_in_G needs b1(0) = b2(0) = 0");
    const std::size_t m = b1.size();
    ReflectedPaths out{{b1.times, std::vector<double>(m)},
                       {b1.times, std::vector<double>(m)},
                       {b1.times, std::vector<double>(m)},
                       {b1.times, std::vector<double>(m)}};
    reflect_in_G(std::span<const double>(b1.values), std::span<const double>(b2.values), psi,
                 std::span<double>(out.w1.values), std::span<double>(out.w2.values),
                 std::span<double>(out.i1.values), std::span<double>(out.i2.values));
    return out;
}

// Two-column CSV: header `time,value`.
inline void write_path_csv(std::ostream& out, const DiscretePath& p) {
    out << "time,value\n";
    for (std::size_t k = 0; k < p.size(); ++k)
        out << format_double(p.times[k]) << ',' << format_double(p.values[k]) << '\n';
}

inline DiscretePath read_path_csv(std::istream& in) {
    DiscretePath p;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("ParseError", "empty path CSV");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError("ParseError", "path CSV row needs two columns");
        p.times.push_back(parse_double(std::string_view(line).substr(0, comma), "time"));
        p.values.push_back(parse_double(std::string_view(line).substr(comma + 1), "value"));
    }
    p.validate();
    return p;
}

}  // namespace ccnet
