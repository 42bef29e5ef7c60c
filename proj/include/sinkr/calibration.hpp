#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace sinkr {

struct CalibrationPoint {
    std::size_t length = 0;
    double tau = 0.0;   // solved threshold at this length
    double skip = 0.0;  // realized skip ratio at the solved threshold
};

// Length-adaptive routing threshold tau(x) = a x^3 + b x^2 + c x + d over
// x = L / length_normalizer, clamped to [clamp_lo, clamp_hi].
struct ThresholdProfile {
    std::array<double, 4> coeffs{0.0, 0.0, 0.0, 0.0};  // a, b, c, d
    double length_normalizer = 1.0;
    double clamp_lo = 0.0;
    double clamp_hi = 1.0;
    double target_skip = 0.60;
    double gamma = 0.65;
    std::vector<std::size_t> excluded_layers{0, 1};
    std::vector<CalibrationPoint> points;

    // Constant-threshold profile with clamp bounds wide enough to honor tau
    // outside [0, 1]; used for routing-disabled / full-skip configurations.
    static ThresholdProfile constant(double tau);
};

struct ScoreSample {
    double score = 0.0;
    std::size_t layer = 0;
    std::size_t length = 0;
};

// Group scores collected from calibration decode steps.
struct ScorePopulation {
    std::vector<ScoreSample> samples;

    void add(double score, std::size_t layer, std::size_t length) {
        samples.push_back({score, layer, length});
    }
    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    std::vector<double> scores() const;
};

// Fraction of scores strictly greater than each threshold; non-increasing in
// the threshold.
std::vector<std::pair<double, double>> sweep(const ScorePopulation& pop,
                                             std::span<const double> thresholds);

double skip_ratio_at(const ScorePopulation& pop, double threshold);

// Lower (1 - target_skip) empirical quantile, so strict-greater skipping
// realizes the target as closely as the discrete population allows.
double solve_threshold(const ScorePopulation& pop, double target_skip);

struct CubicFit {
    std::array<double, 4> coeffs{0.0, 0.0, 0.0, 0.0};  // a, b, c, d
    double residual = 0.0;                             // sum of squared residuals
};

// Ordinary least squares through the 4x4 normal equations (partial-pivot
// Gaussian elimination). Needs at least 4 distinct x values.
CubicFit fit_cubic(std::span<const std::pair<double, double>> points);

// Produces the per-length score population for one calibration length, with
// skipping disabled so the population is unbiased by routing.
using ScoreCollector = std::function<ScorePopulation(std::size_t length)>;

// Appendix-style calibration: per length, solve the threshold hitting the
// target skip ratio over routable layers, then fit tau as a cubic in
// x = L / max(lengths).
ThresholdProfile calibrate(const ScoreCollector& collect,
                           std::span<const std::size_t> lengths,
                           double target_skip,
                           double gamma,
                           const std::vector<std::size_t>& excluded_layers = {0, 1});

void save_profile(const std::filesystem::path& path, const ThresholdProfile& profile);
ThresholdProfile load_profile(const std::filesystem::path& path);

}  // namespace sinkr
