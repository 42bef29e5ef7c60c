#include "sinkr/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace sinkr {

namespace {

double strict_greater_fraction(const std::vector<double>& sorted, double threshold) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), threshold);
    return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

void require_key(const nlohmann::json& j, const char* key) {
    if (!j.contains(key))
        throw std::runtime_error(std::string("profile JSON missing key \"") + key + "\"");
}

}  // namespace

ThresholdProfile ThresholdProfile::constant(double tau) {
    ThresholdProfile p;
    p.coeffs = {0.0, 0.0, 0.0, tau};
    p.clamp_lo = std::min(tau, 0.0);
    p.clamp_hi = std::max(tau, 1.0);
    return p;
}

std::vector<double> ScorePopulation::scores() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.score);
    return out;
}

std::vector<std::pair<double, double>> sweep(const ScorePopulation& pop,
                                             std::span<const double> thresholds) {
    if (pop.empty()) throw std::invalid_argument("sweep over empty score population");
    std::vector<double> sorted = pop.scores();
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<double, double>> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) out.emplace_back(t, strict_greater_fraction(sorted, t));
    return out;
}

double skip_ratio_at(const ScorePopulation& pop, double threshold) {
    if (pop.empty()) throw std::invalid_argument("skip ratio over empty score population");
    std::vector<double> sorted = pop.scores();
    std::sort(sorted.begin(), sorted.end());
    return strict_greater_fraction(sorted, threshold);
}

double solve_threshold(const ScorePopulation& pop, double target_skip) {
    if (pop.empty()) throw std::invalid_argument("solve_threshold over empty score population");
    if (target_skip < 0.0 || target_skip >= 1.0)
        throw std::invalid_argument("target_skip must be in [0, 1)");
    std::vector<double> sorted = pop.scores();
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    // floor((1 - target) * n), clamped to [1, n]; index k-1 is the lower
    // empirical quantile under strict-greater skipping.
    std::size_t k = static_cast<std::size_t>(
        std::floor((1.0 - target_skip) * static_cast<double>(n) + 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    return sorted[k - 1];
}

CubicFit fit_cubic(std::span<const std::pair<double, double>> points) {
    std::set<double> distinct;
    for (const auto& [x, y] : points) distinct.insert(x);
    if (points.size() < 4 || distinct.size() < 4)
        throw std::invalid_argument("cubic fit needs at least 4 points with 4 distinct x values");

    // Normal equations over the basis {x^3, x^2, x, 1}.
    double a[4][4] = {};
    double b[4] = {};
    for (const auto& [x, y] : points) {
        const double basis[4] = {x * x * x, x * x, x, 1.0};
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) a[i][j] += basis[i] * basis[j];
            b[i] += basis[i] * y;
        }
    }

    // Gaussian elimination with partial pivoting.
    int perm[4] = {0, 1, 2, 3};
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::fabs(a[perm[r]][col]) > std::fabs(a[perm[pivot]][col])) pivot = r;
        std::swap(perm[col], perm[pivot]);
        const double diag = a[perm[col]][col];
        if (std::fabs(diag) < 1e-30)
            throw std::invalid_argument("cubic fit design matrix is rank deficient");
        for (int r = col + 1; r < 4; ++r) {
            const double f = a[perm[r]][col] / diag;
            for (int c = col; c < 4; ++c) a[perm[r]][c] -= f * a[perm[col]][c];
            b[perm[r]] -= f * b[perm[col]];
        }
    }
    CubicFit fit;
    for (int row = 3; row >= 0; --row) {
        double s = b[perm[row]];
        for (int c = row + 1; c < 4; ++c) s -= a[perm[row]][c] * fit.coeffs[c];
        fit.coeffs[row] = s / a[perm[row]][row];
    }

    for (const auto& [x, y] : points) {
        const double pred = ((fit.coeffs[0] * x + fit.coeffs[1]) * x + fit.coeffs[2]) * x +
                            fit.coeffs[3];
        fit.residual += (y - pred) * (y - pred);
    }
    return fit;
}

ThresholdProfile calibrate(const ScoreCollector& collect,
                           std::span<const std::size_t> lengths,
                           double target_skip,
                           double gamma,
                           const std::vector<std::size_t>& excluded_layers) {
    std::set<std::size_t> distinct(lengths.begin(), lengths.end());
    if (distinct.size() < 4)
        throw std::invalid_argument("calibration needs at least 4 distinct lengths");

    const std::size_t normalizer = *std::max_element(lengths.begin(), lengths.end());

    ThresholdProfile profile;
    profile.target_skip = target_skip;
    profile.gamma = gamma;
    profile.excluded_layers = excluded_layers;
    profile.length_normalizer = static_cast<double>(normalizer);

    std::vector<std::pair<double, double>> fit_points;
    for (std::size_t length : distinct) {
        ScorePopulation pop = collect(length);
        ScorePopulation routable;
        for (const auto& s : pop.samples) {
            if (std::find(excluded_layers.begin(), excluded_layers.end(), s.layer) ==
                excluded_layers.end())
                routable.samples.push_back(s);
        }
        if (routable.empty())
            throw std::runtime_error("calibration population is empty after layer exclusion");
        const double tau = solve_threshold(routable, target_skip);
        const double realized = skip_ratio_at(routable, tau);
        profile.points.push_back({length, tau, realized});
        fit_points.emplace_back(static_cast<double>(length) / profile.length_normalizer, tau);
    }

    const CubicFit fit = fit_cubic(fit_points);
    profile.coeffs = fit.coeffs;

    double tau_min = profile.points.front().tau, tau_max = tau_min;
    for (const auto& p : profile.points) {
        tau_min = std::min(tau_min, p.tau);
        tau_max = std::max(tau_max, p.tau);
    }
    // Leave clamp headroom around the solved range so the fitted curve is not
    // cut off between calibration points.
    profile.clamp_lo = std::max(-1.0, tau_min - 0.1);
    profile.clamp_hi = std::min(1.0, tau_max + 0.1);
    return profile;
}

void save_profile(const std::filesystem::path& path, const ThresholdProfile& profile) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["gamma"] = profile.gamma;
    j["target_skip"] = profile.target_skip;
    j["length_normalizer"] = profile.length_normalizer;
    j["coefficients"] = profile.coeffs;
    j["clamp"] = {profile.clamp_lo, profile.clamp_hi};
    j["excluded_layers"] = profile.excluded_layers;
    j["calibration_points"] = nlohmann::ordered_json::array();
    for (const auto& p : profile.points) {
        j["calibration_points"].push_back(
            {{"length", p.length}, {"tau", p.tau}, {"skip", p.skip}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

ThresholdProfile load_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("profile JSON parse error in '" + path.string() +
                                 "': " + e.what());
    }

    static const std::set<std::string> known = {
        "version",        "gamma", "target_skip",     "length_normalizer",
        "coefficients",   "clamp", "excluded_layers", "calibration_points"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key))
            std::cerr << "profile: ignoring unknown key \"" << key << "\"\n";
    }

    for (const char* key :
         {"version", "gamma", "target_skip", "length_normalizer", "coefficients", "clamp",
          "excluded_layers", "calibration_points"})
        require_key(j, key);
    if (j["version"].get<int>() != 1)
        throw std::runtime_error("unsupported profile version " + j["version"].dump());

    ThresholdProfile profile;
    profile.gamma = j["gamma"].get<double>();
    profile.target_skip = j["target_skip"].get<double>();
    profile.length_normalizer = j["length_normalizer"].get<double>();
    const auto& coeffs = j["coefficients"];
    if (!coeffs.is_array() || coeffs.size() != 4)
        throw std::runtime_error("profile JSON key \"coefficients\" must be a 4-element array");
    for (std::size_t i = 0; i < 4; ++i) profile.coeffs[i] = coeffs[i].get<double>();
    const auto& clamp = j["clamp"];
    if (!clamp.is_array() || clamp.size() != 2)
        throw std::runtime_error("profile JSON key \"clamp\" must be a 2-element array");
    profile.clamp_lo = clamp[0].get<double>();
    profile.clamp_hi = clamp[1].get<double>();
    profile.excluded_layers = j["excluded_layers"].get<std::vector<std::size_t>>();
    profile.points.clear();
    for (const auto& p : j["calibration_points"]) {
        require_key(p, "length");
        require_key(p, "tau");
        require_key(p, "skip");
        profile.points.push_back({p["length"].get<std::size_t>(), p["tau"].get<double>(),
                                  p["skip"].get<double>()});
    }
    return profile;
}

}  // namespace sinkr
