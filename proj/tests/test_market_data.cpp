#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pamm/market_data.hpp"

using namespace pamm;

namespace {

PriceSeries parse(const std::string& text, bool price = false) {
    std::istringstream in(text);
    return parse_csv(in, price, "fixture.csv");
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(NormalizePrice, Examples) {
    EXPECT_DOUBLE_EQ(normalize_price(1.0).value(), 0.5);
    EXPECT_DOUBLE_EQ(normalize_price(4.0).value(), 0.8);
    EXPECT_NEAR(normalize_price(4.0).relative_price(), 4.0, 1e-12);
    EXPECT_THROW(normalize_price(0.0), std::domain_error);
    EXPECT_THROW(normalize_price(-3.0), std::domain_error);
}

TEST(LoadCsv, WellFormed) {
    const auto s = parse("t,v_obs,tau\n0,0.5,0.1\n1,0.51,-0.2\n2,0.49,1\n");
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[2].t, 2);
    EXPECT_DOUBLE_EQ(s[1].v_obs, 0.51);
    EXPECT_DOUBLE_EQ(s[1].tau, -0.2);
}

TEST(LoadCsv, PriceColumn) {
    const auto s = parse("t,price,tau\n0,1,0\n1,4,0\n", true);
    EXPECT_DOUBLE_EQ(s[0].v_obs, 0.5);
    EXPECT_DOUBLE_EQ(s[1].v_obs, 0.8);
}

TEST(LoadCsv, RejectsMalformedFixtures) {
    EXPECT_NE(error_of("t,v_obs,tau\n0,0.5,0\n1,1.2,0\n").find("fixture.csv:3"), std::string::npos);
    EXPECT_NE(error_of("t,v_obs,tau\n0,0.5,0\n0,0.5,0\n").find("not strictly increasing"), std::string::npos);
    EXPECT_NE(error_of("t,v_obs,tau\n0,0.5,0\n2,0.5,0\n").find("gap"), std::string::npos);
    EXPECT_NE(error_of("t,v_obs,tau\n0,0.5,1.5\n").find("tau"), std::string::npos);
    EXPECT_NE(error_of("t,v_obs,tau\n0,abc,0\n").find("fixture.csv:2"), std::string::npos);
    EXPECT_NE(error_of("t,v_obs,tau\n0,0.5\n").find("expected 3 fields"), std::string::npos);
    EXPECT_NE(error_of("time,v,tau\n0,0.5,0\n").find("header"), std::string::npos);
    EXPECT_NE(error_of("t,v_obs,tau\n").find("no data"), std::string::npos);
    EXPECT_NE(error_of("t,v_obs,tau\n0.5,0.5,0\n").find("integer"), std::string::npos);
    EXPECT_NE(error_of("t,v_obs,tau\n0,0,0\n").find("v_obs"), std::string::npos);
    EXPECT_THROW(load_csv("/nonexistent/file.csv"), DataError);
}

TEST(LoadCsv, RoundTrip) {
    const auto s = synth_gbm(5, 50, 0.0, 0.02, 1.5);
    std::stringstream io;
    write_csv(io, s);
    const auto back = parse_csv(io);
    ASSERT_EQ(back.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(back[i].v_obs, s[i].v_obs);
        EXPECT_EQ(back[i].tau, s[i].tau);
    }
}

TEST(SynthGbm, ZeroSigmaIsExponentialDrift) {
    const auto s = synth_gbm(1, 20, 0.01, 0.0, 2.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double p = 2.0 * std::exp(0.01 * static_cast<double>(i));
        EXPECT_NEAR(s[i].v_obs, p / (1.0 + p), 1e-12);
    }
}

TEST(SynthGbm, Deterministic) {
    const auto a = synth_gbm(77, 500, 0.0, 0.01, 1.0);
    const auto b = synth_gbm(77, 500, 0.0, 0.01, 1.0);
    const auto c = synth_gbm(78, 500, 0.0, 0.01, 1.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a[i].v_obs, b[i].v_obs);
        ASSERT_EQ(a[i].tau, b[i].tau);
    }
    EXPECT_NE(a[100].v_obs, c[100].v_obs);
}

TEST(SynthGbm, LogReturnVolatility) {
    const auto s = synth_gbm(2024, 10000, 0.0, 0.01, 1.0);
    std::vector<double> r;
    for (std::size_t i = 1; i < s.size(); ++i) {
        r.push_back(std::log(s[i].v_obs / (1.0 - s[i].v_obs)) - std::log(s[i - 1].v_obs / (1.0 - s[i - 1].v_obs)));
    }
    double mean = 0.0;
    for (double x : r) mean += x;
    mean /= static_cast<double>(r.size());
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(r.size() - 1));
    EXPECT_NEAR(sd, 0.01, 0.001);
}

TEST(SynthGbm, TicksSatisfyInvariants) {
    const auto s = synth_gbm(3, 2000, 0.001, 0.05, 0.3);
    EXPECT_NO_THROW(validate_series(s));
    EXPECT_THROW(synth_gbm(3, 1, 0.0, 0.01, 1.0), std::invalid_argument);
    EXPECT_THROW(synth_gbm(3, 10, 0.0, -0.01, 1.0), std::invalid_argument);
    EXPECT_THROW(synth_gbm(3, 10, 0.0, 0.01, 0.0), std::invalid_argument);
}

TEST(SynthSine, Examples) {
    const auto s = synth_sine(401, 200.0, 0.1, 0.5);
    EXPECT_DOUBLE_EQ(s[0].v_obs, 0.5);
    EXPECT_NEAR(s[50].v_obs, 0.6, 1e-12);
    EXPECT_NEAR(s[200].v_obs, 0.5, 1e-12);
    EXPECT_NEAR(s[400].v_obs, 0.5, 1e-12);
    EXPECT_THROW(synth_sine(10, 200.0, 0.5, 0.5), std::domain_error);
    EXPECT_NO_THROW(validate_series(s));
}

TEST(RollingStd, SampleStatistic) {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    EXPECT_NEAR(rolling_std(v, 3, 4), std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_NEAR(rolling_std(v, 3, 2), std::sqrt(0.5), 1e-15);
    EXPECT_EQ(rolling_std(v, 0, 10), 0.0);
}
