#include "gapalign/monitor.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace gapalign;

TEST(RelativeChange, HandValues) {
    EXPECT_EQ(relative_change(0.5, 0.5), 0.0);
    EXPECT_NEAR(relative_change(0.5, 0.56), 0.12, 1e-12);
    EXPECT_NEAR(relative_change(0.2, 0.17), 0.15, 1e-12);
    EXPECT_NEAR(relative_change(-0.2, -0.17), 0.15, 1e-12);
    try {
        relative_change(0.0, 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::degenerate);
    }
    EXPECT_THROW(relative_change(1e-10, 0.1), Error);
}

TEST(Profiles, Thetas) {
    EXPECT_EQ(profile_theta(MonitorProfile::citation), 0.10);
    EXPECT_EQ(profile_theta(MonitorProfile::social), 0.12);
}

TEST(GapRate, HandDifferences) {
    const std::vector<double> g = {0.10, 0.15, 0.14};
    const auto r = gap_rate(g);
    ASSERT_EQ(r.rhos.size(), 2u);
    EXPECT_NEAR(r.rhos[0], 0.05, 1e-15);
    EXPECT_NEAR(r.rhos[1], -0.01, 1e-15);
    EXPECT_NEAR(r.at(1), 0.05, 1e-15);
    ASSERT_TRUE(r.transition_epoch.has_value());
    EXPECT_EQ(*r.transition_epoch, 2);
}

TEST(GapRate, NoTransition) {
    EXPECT_FALSE(gap_rate(std::vector<double>{0.2, 0.2, 0.2}).transition_epoch);
    for (double r : gap_rate(std::vector<double>{0.2, 0.2, 0.2}).rhos) EXPECT_EQ(r, 0.0);
    EXPECT_FALSE(gap_rate(std::vector<double>{0.1, 0.2, 0.3, 0.5}).transition_epoch);
    EXPECT_FALSE(gap_rate(std::vector<double>{0.5, 0.4, 0.3}).transition_epoch);
    EXPECT_THROW(gap_rate(std::vector<double>{0.1}), Error);
}

TEST(GapRate, SmoothedVariant) {
    // raw sign flips at epoch 2, the smoothed rate stays positive
    const std::vector<double> g = {0.10, 0.15, 0.14};
    EXPECT_FALSE(gap_rate(g, 0.9).transition_epoch);
    const std::vector<double> g2 = {0.0, 0.1, 0.0, -0.5};
    EXPECT_EQ(*gap_rate(g2, 0.5).transition_epoch, 3);
}

TEST(Baseline, Cases) {
    GapMonitor m(0.1);
    try {
        m.establish_baseline(Matrix::Identity(2, 2), Matrix::Identity(2, 2), std::vector<ClassId>{0, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::degenerate);
    }
    GapMonitor same(0.1);
    EXPECT_NEAR(same.establish_baseline(Matrix::Ones(3, 2), Matrix::Ones(2, 2), std::vector<ClassId>{0, 1, 0}), 1.0,
                1e-15);
    EXPECT_THROW(same.establish_baseline(Matrix::Ones(3, 2), Matrix::Ones(2, 2), std::vector<ClassId>{0, 1, 0}),
                 Error);

    oracle::Gen gen(3);
    const Matrix h = gen.gaussian(7, 3), t = gen.gaussian(3, 3);
    const auto y = gen.labels(7, 3);
    GapMonitor r(0.1);
    EXPECT_NEAR(r.establish_baseline(h, t, y), oracle::gap(oracle::to_mat(h), oracle::to_mat(t), y).neg, 1e-12);
    GapMonitor e(0.1);
    EXPECT_THROW(e.establish_baseline(Matrix(0, 3), t, std::vector<ClassId>{}), Error);
}

TEST(ShouldStop, HandExamples) {
    GapMonitor a(0.10, 0.9);
    a.set_baseline(0.5);
    EXPECT_TRUE(a.should_stop(0.56));  // first observation initializes the EMA: delta 0.12
    EXPECT_NEAR(*a.last_delta(), 0.12, 1e-12);
    EXPECT_EQ(*a.stopped_at(), 1);

    GapMonitor b(0.10, 0.9);
    b.set_baseline(0.5);
    EXPECT_FALSE(b.should_stop(0.54));
    EXPECT_NEAR(*b.last_delta(), 0.08, 1e-12);

    GapMonitor c(0.10);
    c.set_baseline(0.5);
    for (int i = 0; i < 500; ++i) ASSERT_FALSE(c.should_stop(0.5));
    EXPECT_FALSE(c.stopped_at());
}

TEST(ShouldStop, BaselineMissing) {
    GapMonitor m(0.1);
    EXPECT_THROW(m.should_stop(0.2), Error);
    EXPECT_THROW(GapMonitor(0.0), Error);
    EXPECT_THROW(m.set_baseline(0.0), Error);
}

TEST(ShouldStop, StickyAfterStop) {
    GapMonitor m(0.1);
    m.set_baseline(0.5);
    ASSERT_TRUE(m.should_stop(0.7));
    const auto ema = *m.smoothed();
    const auto d = *m.last_delta();
    EXPECT_TRUE(m.should_stop(0.5));
    EXPECT_TRUE(m.should_stop(-3.0));
    EXPECT_EQ(*m.smoothed(), ema);
    EXPECT_EQ(*m.last_delta(), d);
    EXPECT_EQ(*m.stopped_at(), 1);
}

TEST(ShouldStop, MonotoneInDeviation) {
    for (int len = 1; len <= 5; ++len) {
        auto first_stop = [&](double x) -> int {
            GapMonitor m(0.1);
            m.set_baseline(0.4);
            for (int k = 1; k <= len; ++k)
                if (m.should_stop(0.4 + x)) return k;
            return 0;
        };
        bool stopped = false;
        for (double x = 0.0; x < 0.2; x += 0.001) {
            const bool now = first_stop(x) != 0;
            if (stopped) {
                EXPECT_TRUE(now) << x;
            }
            stopped = stopped || now;
        }
        EXPECT_TRUE(stopped);
    }
}

TEST(Observe, RecordsAndOrder) {
    GapMonitor m(0.1);
    m.set_baseline(0.5);
    const auto r1 = m.observe(1, 0.2, 0.5);
    EXPECT_FALSE(r1.rho);
    EXPECT_FALSE(r1.stopped);
    const auto r2 = m.observe(2, 0.3, 0.5);
    EXPECT_NEAR(*r2.rho, 0.1, 1e-15);
    EXPECT_THROW(m.observe(5, 0.3, 0.5), Error);
    const auto r3 = m.observe(3, 0.25, 2.0);  // ema 0.65 -> delta 0.3
    EXPECT_TRUE(r3.stopped);
    EXPECT_EQ(*m.stopped_at(), 3);
    EXPECT_EQ(m.history().size(), 3u);
}
