#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vaereg/tensor.hpp"

namespace vaereg::icp {

// Sorted nonconformity scores from the calibration split. Immutable after
// construction; shareable across detection streams.
class CalibrationSet {
  public:
    explicit CalibrationSet(std::vector<double> scores);

    std::size_t count() const { return scores_.size(); }
    const std::vector<double>& scores() const { return scores_; }
    double default_p_floor() const { return 1.0 / static_cast<double>(scores_.size()); }

  private:
    std::vector<double> scores_;
};

// Squared reconstruction error sum_d (x_d - x_hat_d)^2.
double nonconformity(const Tensor& x, const Tensor& x_hat);

// Fraction of calibration scores >= alpha_prime, floored at p_floor so the
// martingale integrand stays integrable when the raw fraction is 0.
double p_value(double alpha_prime, const CalibrationSet& calib, double p_floor);
double p_value(double alpha_prime, const CalibrationSet& calib);

struct MartingaleLog {
    double log_m = 0.0;
};

// log of the simple mixture martingale
//   M = integral_0^1 prod_i eps * p_i^(eps-1) d eps
// evaluated as log integral_0^1 exp(N ln eps + (eps-1) S) d eps with
// S = sum ln p_i, composite Simpson over `nodes` points combined in the
// log domain. nodes must be odd and >= 3.
MartingaleLog log_martingale(const std::vector<double>& p_values, std::size_t nodes);

struct DetectorConfig {
    std::size_t sample_count = 10;  // N
    double delta = 12.0;
    double tau = 80.0;
    double p_floor = 0.0;  // 0 means "use 1/count of the calibration set"
    std::size_t quadrature_nodes = 1001;

    void validate() const;
};

struct DetectorState {
    double s = 0.0;  // CUSUM statistic, always >= 0
    DetectorConfig config;
};

// S' = max(0, S + log M - delta). Callers reset S after an alarm.
DetectorState cusum_update(const DetectorState& state, const MartingaleLog& log_m);

// Strict threshold crossing: S > tau.
bool alarm(const DetectorState& state);

// Single-p-value conformal anomaly flag (p < epsilon_thr). Oversensitive;
// kept for comparison with the martingale detector.
bool threshold_detect(double p, double epsilon_thr);

// Text persistence: one score per line, 17 significant digits, ascending.
void save_calibration(const std::string& path, const CalibrationSet& calib);
CalibrationSet load_calibration(const std::string& path);

}  // namespace vaereg::icp
