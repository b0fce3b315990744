#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "vaereg/errors.hpp"
#include "vaereg/icp.hpp"
#include "vaereg/rng.hpp"

using namespace vaereg;

namespace {

// Closed-form single-factor martingale: integral_0^1 eps p^(eps-1) d eps.
double single_factor_martingale(double p) {
    if (p == 1.0) return 0.5;
    const double lp = std::log(p);
    return (p * (lp - 1.0) + 1.0) / (p * lp * lp);
}

double ks_distance_to_uniform(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = samples[i];
        ks = std::max(ks, std::abs((i + 1) / n - cdf));
        ks = std::max(ks, std::abs(i / n - cdf));
    }
    return ks;
}

}  // namespace

TEST_CASE("nonconformity: zero for identical inputs, direct sums otherwise") {
    const Tensor x{{2}, {1.0, 0.0}};
    CHECK(icp::nonconformity(x, x) == 0.0);
    CHECK(icp::nonconformity(x, Tensor{{2}, {0.0, 1.0}}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(icp::nonconformity(x, Tensor::zeros({3})), ValidationError);
}

TEST_CASE("nonconformity matches an elementwise-loop oracle") {
    Rng rng(42);
    Tensor x = Tensor::zeros({100});
    Tensor y = Tensor::zeros({100});
    for (std::size_t i = 0; i < 100; ++i) {
        x.data[i] = rng.uniform();
        y.data[i] = rng.uniform();
    }
    double expected = 0.0;
    for (std::size_t i = 0; i < 100; ++i)
        expected += (x.data[i] - y.data[i]) * (x.data[i] - y.data[i]);
    CHECK(icp::nonconformity(x, y) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("p_value on a small calibration set") {
    const icp::CalibrationSet calib({1.0, 2.0, 3.0, 4.0});
    CHECK(icp::p_value(0.5, calib) == doctest::Approx(1.0));
    CHECK(icp::p_value(1.0, calib) == doctest::Approx(1.0));  // ties count
    CHECK(icp::p_value(2.5, calib) == doctest::Approx(0.5));
    CHECK(icp::p_value(9.0, calib) == doctest::Approx(0.25));  // floored at 1/4
    CHECK(icp::p_value(9.0, calib, 0.01) == doctest::Approx(0.01));
}

TEST_CASE("p_value is monotone non-increasing in alpha") {
    Rng rng(7);
    std::vector<double> scores;
    for (int i = 0; i < 257; ++i) scores.push_back(rng.uniform() * 10.0);
    const icp::CalibrationSet calib(scores);
    double prev = 2.0;
    for (double a = -1.0; a < 12.0; a += 0.05) {
        const double p = icp::p_value(a, calib);
        CHECK(p <= prev + 1e-15);
        prev = p;
    }
}

TEST_CASE("conformal validity: p-values of exchangeable scores are uniform") {
    Rng rng(2024);
    const std::size_t trials = 20000;
    const std::size_t calib_size = 400;
    std::vector<double> pvals;
    pvals.reserve(trials);
    std::vector<double> scores(calib_size);
    for (std::size_t t = 0; t < trials; ++t) {
        for (double& s : scores) s = -std::log(1.0 - rng.uniform());
        const double test_score = -std::log(1.0 - rng.uniform());
        const icp::CalibrationSet calib(scores);
        pvals.push_back(icp::p_value(test_score, calib));
    }
    CHECK(ks_distance_to_uniform(std::move(pvals)) < 0.02);
}

TEST_CASE("martingale betting function has mean one under uniform p") {
    Rng rng(5);
    for (const double eps : {0.6, 0.8, 1.0}) {
        double acc = 0.0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const double p = rng.uniform();
            acc += eps * std::pow(p, eps - 1.0);
        }
        CHECK(std::abs(acc / n - 1.0) < 0.05);
    }
}

TEST_CASE("log_martingale: all p = 1 integrates eps^N exactly") {
    for (const std::size_t n : {1u, 5u, 10u}) {
        const std::vector<double> p(n, 1.0);
        const double lm = icp::log_martingale(p, 1001).log_m;
        CHECK(lm == doctest::Approx(std::log(1.0 / (n + 1.0))).epsilon(1e-10));
    }
}

TEST_CASE("log_martingale matches the single-factor closed form") {
    CHECK(icp::log_martingale({0.5}, 1001).log_m ==
          doctest::Approx(std::log(0.6387)).epsilon(1e-4));
    for (const double p : {0.01, 0.1, 0.5, 0.9, 1.0}) {
        const double lm = icp::log_martingale({p}, 1001).log_m;
        const double oracle = std::log(single_factor_martingale(p));
        CHECK(std::abs(lm - oracle) < 1e-6);
    }
}

TEST_CASE("log_martingale grows with many small p-values") {
    const double small = icp::log_martingale(std::vector<double>(10, 0.01), 1001).log_m;
    const double ones = icp::log_martingale(std::vector<double>(10, 1.0), 1001).log_m;
    CHECK(small > ones);
    CHECK(small > 0.0);
}

TEST_CASE("log_martingale: 1001 nodes agree with 10001 nodes") {
    Rng rng(17);
    for (const std::size_t n : {5u, 10u, 20u}) {
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> p(n);
            for (double& v : p) v = std::max(0.0025, rng.uniform());
            const double coarse = icp::log_martingale(p, 1001).log_m;
            const double fine = icp::log_martingale(p, 10001).log_m;
            CHECK(std::abs(coarse - fine) < 1e-6);
        }
    }
}

TEST_CASE("log_martingale input validation") {
    CHECK_THROWS_AS(icp::log_martingale({}, 1001), ValidationError);
    CHECK_THROWS_AS(icp::log_martingale({0.5}, 1000), ValidationError);
    CHECK_THROWS_AS(icp::log_martingale({0.0}, 1001), ValidationError);
    CHECK_THROWS_AS(icp::log_martingale({1.5}, 1001), ValidationError);
}

TEST_CASE("cusum_update follows max(0, s + log_m - delta)") {
    icp::DetectorConfig cfg;
    cfg.delta = 12.0;
    CHECK(icp::cusum_update({0.0, cfg}, {12.0}).s == doctest::Approx(0.0));
    CHECK(icp::cusum_update({5.0, cfg}, {10.0}).s == doctest::Approx(3.0));

    icp::DetectorState state{0.0, cfg};
    for (int i = 0; i < 100; ++i) state = icp::cusum_update(state, {11.9});
    CHECK(state.s == 0.0);
}

TEST_CASE("cusum stays non-negative and gains at most log_m - delta") {
    Rng rng(9);
    icp::DetectorConfig cfg;
    cfg.delta = 2.0;
    icp::DetectorState state{0.0, cfg};
    for (int i = 0; i < 1000; ++i) {
        const double lm = rng.uniform(-5.0, 5.0);
        const icp::DetectorState next = icp::cusum_update(state, {lm});
        CHECK(next.s >= 0.0);
        CHECK(next.s == std::max(0.0, state.s + lm - cfg.delta));
        CHECK(next.s - state.s <= std::max(0.0, lm - cfg.delta) + 1e-12);
        state = next;
    }
}

TEST_CASE("alarm is a strict comparison") {
    icp::DetectorConfig cfg;
    cfg.tau = 80.0;
    CHECK_FALSE(icp::alarm({80.0, cfg}));
    CHECK(icp::alarm({80.01, cfg}));
    CHECK_FALSE(icp::alarm({0.0, cfg}));
}

TEST_CASE("threshold_detect is strict") {
    CHECK_FALSE(icp::threshold_detect(0.5, 0.05));
    CHECK(icp::threshold_detect(0.01, 0.05));
    CHECK_FALSE(icp::threshold_detect(0.05, 0.05));
}

TEST_CASE("calibration persistence round trip and ordering check") {
    const auto path = std::filesystem::temp_directory_path() / "vaereg_calib_test.txt";
    Rng rng(3);
    std::vector<double> scores;
    for (int i = 0; i < 50; ++i) scores.push_back(rng.uniform() * 7.0);
    const icp::CalibrationSet calib(scores);
    icp::save_calibration(path.string(), calib);
    const icp::CalibrationSet loaded = icp::load_calibration(path.string());
    REQUIRE(loaded.count() == calib.count());
    for (std::size_t i = 0; i < calib.count(); ++i)
        CHECK(loaded.scores()[i] == calib.scores()[i]);

    {
        std::ofstream bad(path, std::ios::trunc);
        bad << "2.0\n1.0\n";
    }
    CHECK_THROWS_AS(icp::load_calibration(path.string()), IoError);
    std::filesystem::remove(path);
}

TEST_CASE("calibration set validation") {
    CHECK_THROWS_AS(icp::CalibrationSet({}), ValidationError);
    CHECK_THROWS_AS(icp::CalibrationSet({-1.0}), ValidationError);
}
