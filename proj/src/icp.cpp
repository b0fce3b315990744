#include "vaereg/icp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "vaereg/errors.hpp"

namespace vaereg::icp {

CalibrationSet::CalibrationSet(std::vector<double> scores) : scores_(std::move(scores)) {
    if (scores_.empty()) throw ValidationError("calibration set must be non-empty");
    for (const double s : scores_) {
        if (!std::isfinite(s) || s < 0.0)
            throw ValidationError("calibration scores must be finite and non-negative");
    }
    std::sort(scores_.begin(), scores_.end());
}

double nonconformity(const Tensor& x, const Tensor& x_hat) {
    if (x.numel() != x_hat.numel())
        throw ValidationError("nonconformity: dimension mismatch");
    double sum = 0.0;
    for (std::size_t d = 0; d < x.numel(); ++d) {
        const double diff = x.data[d] - x_hat.data[d];
        sum += diff * diff;
    }
    return sum;
}

double p_value(double alpha_prime, const CalibrationSet& calib, double p_floor) {
    const auto& scores = calib.scores();
    // Scores >= alpha' form the tail starting at lower_bound.
    const auto it = std::lower_bound(scores.begin(), scores.end(), alpha_prime);
    const auto tail = static_cast<double>(scores.end() - it);
    const double raw = tail / static_cast<double>(scores.size());
    return std::max(raw, p_floor);
}

double p_value(double alpha_prime, const CalibrationSet& calib) {
    return p_value(alpha_prime, calib, calib.default_p_floor());
}

MartingaleLog log_martingale(const std::vector<double>& p_values, std::size_t nodes) {
    if (p_values.empty())
        throw ValidationError("log_martingale: need at least one p-value");
    if (nodes < 3 || nodes % 2 == 0)
        throw ValidationError("log_martingale: node count must be odd and >= 3");

    double log_sum = 0.0;  // S = sum ln p_i
    for (const double p : p_values) {
        if (!(p > 0.0) || p > 1.0)
            throw ValidationError("log_martingale: p-values must lie in (0, 1]");
        log_sum += std::log(p);
    }
    const double n = static_cast<double>(p_values.size());

    // Composite Simpson over [0,1] on g(eps) = N ln eps + (eps-1) S, combined
    // as log( h/3 * sum w_j exp(g_j) ) via log-sum-exp.
    const double h = 1.0 / static_cast<double>(nodes - 1);
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
        const double eps = static_cast<double>(j) * h;
        const double g = (j == 0) ? -std::numeric_limits<double>::infinity()
                                  : n * std::log(eps) + (eps - 1.0) * log_sum;
        const double w = (j == 0 || j + 1 == nodes) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
        const double term = g + std::log(w);
        terms[j] = term;
        max_term = std::max(max_term, term);
    }
    double acc = 0.0;
    for (const double t : terms)
        if (std::isfinite(t)) acc += std::exp(t - max_term);
    return MartingaleLog{max_term + std::log(acc) + std::log(h / 3.0)};
}

void DetectorConfig::validate() const {
    if (sample_count < 1) throw ValidationError("detector: N must be >= 1");
    if (!(delta > 0.0)) throw ValidationError("detector: delta must be > 0");
    if (!(tau > 0.0)) throw ValidationError("detector: tau must be > 0");
    if (p_floor < 0.0 || p_floor > 1.0)
        throw ValidationError("detector: p_floor must lie in [0, 1]");
    if (quadrature_nodes < 3 || quadrature_nodes % 2 == 0)
        throw ValidationError("detector: quadrature nodes must be odd and >= 3");
}

DetectorState cusum_update(const DetectorState& state, const MartingaleLog& log_m) {
    DetectorState next = state;
    next.s = std::max(0.0, state.s + log_m.log_m - state.config.delta);
    return next;
}

bool alarm(const DetectorState& state) { return state.s > state.config.tau; }

bool threshold_detect(double p, double epsilon_thr) {
    if (!(epsilon_thr > 0.0) || !(epsilon_thr < 1.0))
        throw ValidationError("threshold_detect: epsilon must lie in (0, 1)");
    return p < epsilon_thr;
}

void save_calibration(const std::string& path, const CalibrationSet& calib) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    char buf[64];
    for (const double s : calib.scores()) {
        std::snprintf(buf, sizeof buf, "%.17g\n", s);
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
}

CalibrationSet load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<double> scores;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(line.c_str(), &end);
        if (end == line.c_str())
            throw IoError(path + ":" + std::to_string(lineno) + ": not a number");
        if (!scores.empty() && v < scores.back())
            throw IoError(path + ":" + std::to_string(lineno) + ": scores not ascending");
        scores.push_back(v);
    }
    return CalibrationSet(std::move(scores));
}

}  // namespace vaereg::icp
