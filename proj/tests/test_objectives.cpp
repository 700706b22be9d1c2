#include "gapalign/objectives.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gapalign;

TEST(ContrastiveLoss, UniformTwoClasses) {
    Matrix h(1, 2), t(2, 2);
    h << 1, 0;
    t << 0, 1, 0, -1;
    const auto l = contrastive_loss(h, t, std::vector<ClassId>{0}, 0.2);
    EXPECT_NEAR(l.total, std::log(2.0), 1e-15);
}

TEST(ContrastiveLoss, AlignedOrthogonalHandValue) {
    Matrix h(1, 2), t(2, 2);
    h << 1, 0;
    t << 1, 0, 0, 1;
    const auto l = contrastive_loss(h, t, std::vector<ClassId>{0}, 0.2);
    EXPECT_NEAR(l.total, std::log1p(std::exp(-5.0)), 1e-15);
    EXPECT_NEAR(l.total, 0.0067153, 1e-7);
}

TEST(ContrastiveLoss, MatchesBruteForce) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        oracle::Gen gen(seed);
        const int b = gen.integer(1, 6), c = gen.integer(2, 5), d = gen.integer(2, 6);
        const Matrix h = gen.unit_rows(b, d), t = gen.unit_rows(c, d);
        const auto y = gen.labels(b, c);
        const double tau = gen.uniform(0.1, 1.0);
        const auto l = contrastive_loss(h, t, y, tau);
        EXPECT_NEAR(l.total, oracle::contrastive(oracle::to_mat(h), oracle::to_mat(t), y, tau), 1e-10);
        double mean = 0;
        for (double v : l.per_node) mean += v / b;
        EXPECT_NEAR(mean, l.total, 1e-14);
        EXPECT_GE(l.neg_share, 0.0);
        EXPECT_LE(l.neg_share, 1.0);
    }
}

TEST(ContrastiveLoss, StableAtTinyTau) {
    Matrix h(1, 2), t(2, 2);
    h << 1, 0;
    t << 1, 0, 0, 1;
    const auto l = contrastive_loss(h, t, std::vector<ClassId>{1}, 1e-3);
    EXPECT_TRUE(std::isfinite(l.total));
    EXPECT_NEAR(l.total, 1000.0, 1e-9);
}

TEST(ContrastiveLoss, Errors) {
    Matrix h = Matrix::Identity(1, 2), t = Matrix::Identity(2, 2);
    EXPECT_THROW(contrastive_loss(h, t, std::vector<ClassId>{0}, 0.0), Error);
    EXPECT_THROW(contrastive_loss(h, t, std::vector<ClassId>{2}, 0.2), Error);
    EXPECT_THROW(contrastive_loss(h, t, std::vector<ClassId>{0, 1}, 0.2), Error);
    EXPECT_THROW(contrastive_loss(h, Matrix::Identity(2, 3), std::vector<ClassId>{0}, 0.2), Error);
}

TEST(ContrastiveLoss, ShiftInvariance) {
    // a shared per-row logit shift leaves the loss unchanged
    oracle::Gen gen(4);
    const Matrix h = gen.unit_rows(3, 4), t = gen.unit_rows(3, 4);
    const auto y = gen.labels(3, 3);
    const Matrix logits = h * t.transpose() / 0.2;
    const Matrix shifted = logits.array() + 37.5;
    EXPECT_NEAR(cross_entropy(logits, y).loss.total, cross_entropy(shifted, y).loss.total, 1e-10);
    EXPECT_NEAR(contrastive_loss(h, t, y, 0.2).total, cross_entropy(shifted, y).loss.total, 1e-10);
}

TEST(ContrastiveGrad, SaturatedIsNearZero) {
    Matrix h(1, 2), t(2, 2);
    h << 1, 0;
    t << 1, 0, -1, 0;
    const auto g = contrastive_grad(h, t, std::vector<ClassId>{0}, 0.01);
    EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ContrastiveGrad, FiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        oracle::Gen gen(seed);
        const int b = gen.integer(1, 5), c = gen.integer(2, 4), d = gen.integer(2, 5);
        Matrix h = gen.unit_rows(b, d);
        const Matrix t = gen.unit_rows(c, d);
        const auto y = gen.labels(b, c);
        for (double tau : {0.2, 0.1}) {
            const Matrix an = contrastive_grad(h, t, y, tau);
            const Matrix fd = oracle::fd_gradient(h, [&] { return contrastive_loss(h, t, y, tau).total; });
            EXPECT_LT(oracle::rel_error(an, fd), 1e-4) << "seed " << seed << " tau " << tau;
        }
    }
}

TEST(ContrastiveGrad, ClosedForm) {
    oracle::Gen gen(9);
    const Matrix h = gen.unit_rows(3, 4), t = gen.unit_rows(3, 4);
    const std::vector<ClassId> y = {0, 2, 1};
    const double tau = 0.2;
    const Matrix g = contrastive_grad(h, t, y, tau);
    for (int i = 0; i < 3; ++i) {
        oracle::Vec z(3);
        for (int j = 0; j < 3; ++j) z[j] = h.row(i).dot(t.row(j)) / tau;
        const auto p = oracle::softmax(z);
        Eigen::RowVectorXd ref = Eigen::RowVectorXd::Zero(4);
        for (int j = 0; j < 3; ++j) ref += (p[j] - (j == y[i])) * t.row(j);
        ref /= 3 * tau;
        EXPECT_LT((g.row(i) - ref).cwiseAbs().maxCoeff(), 1e-14);
    }
    const auto both = contrastive_loss_and_grad(h, t, y, tau);
    EXPECT_TRUE(both.grad == g);
    EXPECT_EQ(both.loss.total, contrastive_loss(h, t, y, tau).total);
}

TEST(ContrastiveGrad, SmallStepDecreasesLoss) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        oracle::Gen gen(seed);
        const Matrix h = gen.unit_rows(4, 3), t = gen.unit_rows(3, 3);
        const auto y = gen.labels(4, 3);
        const double l0 = contrastive_loss(h, t, y, 0.2).total;
        const Matrix g = contrastive_grad(h, t, y, 0.2);
        double step = 1e-3;
        bool dec = false;
        for (int k = 0; k <= 20 && !dec; ++k, step /= 2)
            dec = contrastive_loss(h - step * g, t, y, 0.2).total < l0;
        EXPECT_TRUE(dec);
    }
}

TEST(NegDomination, HandValues) {
    Matrix h(1, 3), t(3, 3);
    h << 1, 0, 0;
    t << 1, 0, 0, 0, 1, 0, 0, 0, 1;
    EXPECT_NEAR(neg_domination(3, h, t, std::vector<ClassId>{0}, 1.0), 2.0 / 3.0 * std::log(2.0), 1e-15);
    EXPECT_NEAR(neg_domination(3, h, t, std::vector<ClassId>{0}, 1.0), 0.462098, 1e-6);
    Matrix t2(2, 3);
    t2 << 1, 0, 0, 0, 1, 0;
    // C=2: a single negative, so the value is 0.5 * its logit
    Matrix h2(1, 3);
    h2 << 0, 1, 0;
    EXPECT_NEAR(neg_domination(2, h2, t2, std::vector<ClassId>{1}, 0.5), 0.5 * 0.0, 1e-15);
    EXPECT_NEAR(neg_domination(2, h2, t2, std::vector<ClassId>{0}, 0.5), 0.5 * 2.0, 1e-15);
}

TEST(NegDomination, NonDecreasingInC) {
    // all similarities fixed at s for every negative
    double prev = -1e300;
    for (int c = 2; c <= 10; ++c) {
        Matrix t = Matrix::Zero(c, c + 1), h = Matrix::Zero(1, c + 1);
        h(0, c) = 1.0;
        for (int j = 0; j < c; ++j) {
            t(j, j) = std::sqrt(1 - 0.09);
            t(j, c) = 0.3;
        }
        const double v = neg_domination(c, h, t, std::vector<ClassId>{0}, 0.2);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(NegDomination, Errors) {
    Matrix h = Matrix::Identity(1, 2), t = Matrix::Identity(1, 2);
    EXPECT_THROW(neg_domination(1, h, t, std::vector<ClassId>{0}, 0.2), Error);
    EXPECT_THROW(neg_domination(3, h, Matrix::Identity(2, 2), std::vector<ClassId>{0}, 0.2), Error);
}

TEST(CrossEntropy, Uniform) {
    const auto ce = cross_entropy(Matrix::Zero(2, 4), std::vector<ClassId>{1, 3});
    EXPECT_NEAR(ce.loss.total, std::log(4.0), 1e-15);
}

TEST(CrossEntropy, Saturated) {
    Matrix z = Matrix::Zero(1, 3);
    z(0, 2) = 100;
    const auto ce = cross_entropy(z, std::vector<ClassId>{2});
    EXPECT_GE(ce.loss.total, 0.0);
    EXPECT_LT(ce.loss.total, 1e-40);
}

TEST(CrossEntropy, MatchesBruteForceAndGradient) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        oracle::Gen gen(seed);
        Matrix z = gen.gaussian(3, 3) * 2.0;
        const auto y = gen.labels(3, 3);
        const auto ce = cross_entropy(z, y);
        EXPECT_NEAR(ce.loss.total, oracle::softmax_ce(oracle::to_mat(z), y), 1e-10);
        EXPECT_GE(ce.loss.total, 0.0);
        const Matrix fd = oracle::fd_gradient(z, [&] { return cross_entropy(z, y).loss.total; });
        EXPECT_LT(oracle::rel_error(ce.grad, fd), 1e-4);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(ce.grad.row(i).sum(), 0.0, 1e-15);
    }
}

TEST(CrossEntropy, Errors) {
    EXPECT_THROW(cross_entropy(Matrix::Zero(1, 2), std::vector<ClassId>{2}), Error);
    Matrix z = Matrix::Zero(1, 2);
    z(0, 0) = std::nan("");
    EXPECT_THROW(cross_entropy(z, std::vector<ClassId>{0}), Error);
}
