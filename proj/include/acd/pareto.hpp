#pragma once

// Objective-space mathematics. Maximisation convention throughout.

#include <acd/common.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace acd::pareto {

struct ParetoPoint {
    std::vector<double> f;
    std::string tag;
};

struct FrontEstimate {
    std::vector<ParetoPoint> points;
};

/// Non-negative weights normalised to sum to one.
class WeightVector {
  public:
    WeightVector() = default;
    explicit WeightVector(std::vector<double> w) : w_(std::move(w)) {
        if (w_.empty()) throw ConfigError("weight vector is empty");
        double sum = 0.0;
        for (double x : w_) {
            if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("weights must be finite and non-negative");
            sum += x;
        }
        if (sum <= 0.0) throw ConfigError("weights must not all be zero");
        for (double& x : w_) x /= sum;
    }

    std::size_t size() const { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }
    const std::vector<double>& values() const { return w_; }

  private:
    std::vector<double> w_;
};

struct UtopianPoint {
    std::vector<double> z_star;
};

inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                             std::to_string(b) + ")");
    }
}

inline bool dominates(std::span<const double> a, std::span<const double> b) {
    require_same_length(a.size(), b.size(), "dominates");
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return false;
        if (a[i] > b[i]) strict = true;
    }
    return strict;
}

inline bool dominates(const ParetoPoint& a, const ParetoPoint& b) { return dominates(a.f, b.f); }

/// Non-dominated subset, sorted by objectives ascending (lexicographic, so
/// first objective first); exact duplicates collapse to the first seen.
inline FrontEstimate pareto_prune(std::span<const ParetoPoint> points) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    FrontEstimate out;
    const bool two_d = std::all_of(points.begin(), points.end(), [](const auto& p) { return p.f.size() == 2; });
    if (two_d) {
        // Sweep from the largest first objective down; a point survives iff it
        // beats every second objective seen so far.
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return points[a].f > points[b].f; });
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k : order) {
            if (points[k].f[1] > best) {
                out.points.push_back(points[k]);
                best = points[k].f[1];
            }
        }
        std::reverse(out.points.begin(), out.points.end());
        return out;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return points[a].f < points[b].f; });
    for (std::size_t k = 0; k < order.size(); ++k) {
        const ParetoPoint& p = points[order[k]];
        if (k > 0 && points[order[k - 1]].f == p.f) continue;
        bool dominated = false;
        for (const ParetoPoint& q : points) {
            if (dominates(q, p)) {
                dominated = true;
                break;
            }
        }
        if (!dominated) out.points.push_back(p);
    }
    return out;
}

inline FrontEstimate pareto_prune(const FrontEstimate& front) { return pareto_prune(front.points); }

/// Exact 2-D hypervolume by a sorted sweep. Points that do not strictly
/// dominate the reference contribute nothing.
inline double hypervolume_2d(std::span<const ParetoPoint> front, std::span<const double> ref) {
    if (ref.size() != 2) throw DimensionError("hypervolume_2d supports exactly 2 objectives");
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : front) {
        if (p.f.size() != 2) throw DimensionError("hypervolume_2d supports exactly 2 objectives");
        if (p.f[0] > ref[0] && p.f[1] > ref[1]) pts.emplace_back(p.f[0], p.f[1]);
    }
    std::sort(pts.begin(), pts.end(), [](auto a, auto b) { return a.first > b.first; });
    double area = 0.0;
    double covered = ref[1];
    for (auto [x, y] : pts) {
        if (y > covered) {
            area += (x - ref[0]) * (y - covered);
            covered = y;
        }
    }
    return area;
}

inline double hypervolume_2d(const FrontEstimate& front, std::span<const double> ref) {
    return hypervolume_2d(std::span<const ParetoPoint>(front.points), ref);
}

/// NSGA-II style crowding distance over objective vectors.
inline std::vector<double> crowding_distances(std::span<const std::vector<double>> f) {
    const std::size_t n = f.size();
    std::vector<double> dist(n, 0.0);
    if (n == 0) return dist;
    if (n <= 2) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        return dist;
    }
    const std::size_t m = f[0].size();
    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < m; ++j) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return f[a][j] < f[b][j]; });
        const double range = f[order.back()][j] - f[order.front()][j];
        if (range <= 0.0) continue;
        dist[order.front()] = std::numeric_limits<double>::infinity();
        dist[order.back()] = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k + 1 < n; ++k) {
            dist[order[k]] += (f[order[k + 1]][j] - f[order[k - 1]][j]) / range;
        }
    }
    return dist;
}

inline std::vector<double> crowding_distances(std::span<const ParetoPoint> points) {
    std::vector<std::vector<double>> f;
    f.reserve(points.size());
    for (const auto& p : points) f.push_back(p.f);
    return crowding_distances(std::span<const std::vector<double>>(f));
}

inline double scalarize_linear(std::span<const double> v, const WeightVector& w) {
    require_same_length(v.size(), w.size(), "scalarize_linear");
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * v[i];
    return s;
}

/// Negated weighted Chebyshev distance to the utopian point: 0 is best.
inline double scalarize_chebyshev(std::span<const double> v, const WeightVector& w, const UtopianPoint& z) {
    require_same_length(v.size(), w.size(), "scalarize_chebyshev");
    require_same_length(v.size(), z.z_star.size(), "scalarize_chebyshev");
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, w[i] * std::abs(z.z_star[i] - v[i]));
    return -worst;
}

// ---- CSV: obj0,obj1,...,tag ------------------------------------------------

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c != '"') out += c;
    }
    return out + "\"";
}

inline void write_front_csv(std::ostream& os, std::span<const ParetoPoint> points) {
    const std::size_t m = points.empty() ? 2 : points.front().f.size();
    for (std::size_t j = 0; j < m; ++j) os << "obj" << j << ',';
    os << "tag\n";
    for (const auto& p : points) {
        for (double x : p.f) os << fmt6(x) << ',';
        os << csv_escape(p.tag) << '\n';
    }
}

inline void write_front_csv(const std::string& path, std::span<const ParetoPoint> points) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_front_csv(os, points);
    if (!os) throw IoError("write failed for '" + path + "'");
}

/// Reads `obj0,obj1,...,tag`. Sweep summaries (`obj0_mean,...`) are accepted
/// too: their mean columns become the point and `tag` is kept.
inline std::vector<ParetoPoint> read_front_csv(std::istream& is, const std::string& origin = "<stream>") {
    std::string line;
    if (!std::getline(is, line)) throw IoError(origin + ": empty CSV");
    const auto header = split_csv_line(line);
    std::vector<std::size_t> obj_cols;
    std::size_t tag_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "tag") tag_col = i;
    }
    for (std::size_t j = 0;; ++j) {
        const std::string plain = "obj" + std::to_string(j);
        auto it = std::find(header.begin(), header.end(), plain);
        if (it == header.end()) it = std::find(header.begin(), header.end(), plain + "_mean");
        if (it == header.end()) break;
        obj_cols.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    if (obj_cols.empty()) throw IoError(origin + ": no obj0 column in header");
    std::vector<ParetoPoint> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        ParetoPoint p;
        for (std::size_t c : obj_cols) {
            if (c >= cells.size()) throw IoError(origin + ":" + std::to_string(lineno) + ": missing column");
            try {
                std::size_t used = 0;
                p.f.push_back(std::stod(cells[c], &used));
            } catch (const std::exception&) {
                throw IoError(origin + ":" + std::to_string(lineno) + ": bad number '" + cells[c] + "'");
            }
        }
        if (tag_col < cells.size()) p.tag = cells[tag_col];
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<ParetoPoint> read_front_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    return read_front_csv(is, path);
}

}  // namespace acd::pareto
