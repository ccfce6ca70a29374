#include <gtest/gtest.h>

#include "rfr/flowcore.hpp"
#include "rfr/rng.hpp"
#include "rfr/selfcheck.hpp"

using namespace rfr;
using flow::TSamplerConfig;
using flow::TStrategy;

namespace {

TensorD filled(int c, int h, int w, double v) {
    TensorD t(c, h, w);
    t.fill(v);
    return t;
}

}  // namespace

TEST(SampleT, BetaInverseCdf) {
    TSamplerConfig cfg;  // beta, p=1, t_min=1e-3
    EXPECT_DOUBLE_EQ(flow::sample_t(cfg, 0.25), 0.5);  // 0.25^{1/2}
    EXPECT_DOUBLE_EQ(flow::sample_t(cfg, 1e-8), 1e-3);  // clamped
    cfg.p = 2;  // Beta(3,1): u^{1/3}
    EXPECT_NEAR(flow::sample_t(cfg, 0.008), 0.2, 1e-15);
}

TEST(SampleT, UniformAndLogitNormal) {
    TSamplerConfig cfg;
    cfg.strategy = TStrategy::uniform;
    EXPECT_DOUBLE_EQ(flow::sample_t(cfg, 0.7), 0.7);
    EXPECT_DOUBLE_EQ(flow::sample_t(cfg, 0.0), 1e-3);

    cfg.strategy = TStrategy::logit_normal;
    EXPECT_DOUBLE_EQ(flow::sample_t(cfg, 0.0), 0.5);  // sigmoid(0)
    EXPECT_NEAR(flow::sample_t(cfg, 1.0), flow::sigmoid(1.0), 1e-15);
}

TEST(SampleT, RejectsBadConfig) {
    TSamplerConfig cfg;
    cfg.p = 0;
    EXPECT_THROW(flow::sample_t(cfg, 0.5), std::invalid_argument);
    cfg = TSamplerConfig{};
    cfg.t_min = 0.0;
    EXPECT_THROW(flow::sample_t(cfg, 0.5), std::invalid_argument);
    cfg.t_min = 1.0;
    EXPECT_THROW(flow::sample_t(cfg, 0.5), std::invalid_argument);
}

TEST(MakeState, Endpoints) {
    Rng rng(1);
    TensorD y = gaussian_tensor<double>(3, 8, 8, rng);
    TensorD eps = gaussian_tensor<double>(3, 8, 8, rng);
    EXPECT_EQ(flow::make_state(y, eps, 1.0).data, eps.data);  // exactly eps at t=1

    TensorD mid = flow::make_state(filled(1, 2, 2, 0.5), filled(1, 2, 2, 0.0), 1e-3);
    EXPECT_NEAR(mid.data[0], 0.4995, 1e-12);

    TensorD half = flow::make_state(filled(1, 2, 2, 0.0), filled(1, 2, 2, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(half.data[0], 0.5);

    TensorD bad(2, 8, 8);
    EXPECT_THROW(flow::make_state(y, bad, 0.5), std::invalid_argument);
}

TEST(MakeBridgeState, Endpoints) {
    Rng rng(2);
    TensorD y = gaussian_tensor<double>(3, 8, 8, rng);
    TensorD x = gaussian_tensor<double>(3, 8, 8, rng);
    EXPECT_EQ(flow::make_bridge_state(y, x, 1.0).data, x.data);
    EXPECT_LT(max_abs_diff(flow::make_bridge_state(y, x, 1e-3), y),
              1e-3 * max_abs_diff(x, y) * (1 + 1e-12));
    TensorD mid = flow::make_bridge_state(filled(1, 2, 2, 0.2), filled(1, 2, 2, 0.8), 0.5);
    EXPECT_DOUBLE_EQ(mid.data[0], 0.5);
    TensorD bad(1, 8, 8);
    EXPECT_THROW(flow::make_bridge_state(y, bad, 0.5), std::invalid_argument);
}

TEST(FlowSample, FactoryMatchesPathConstruction) {
    Rng rng(77);
    TensorD x = gaussian_tensor<double>(3, 6, 6, rng);
    TensorD y = gaussian_tensor<double>(3, 6, 6, rng);
    TensorD eps = gaussian_tensor<double>(3, 6, 6, rng);
    auto s = flow::make_flow_sample(x, y, eps, 0.3);
    EXPECT_EQ(s.state_yt.data, flow::make_state(y, eps, 0.3).data);
    EXPECT_EQ(s.condition_x.data, x.data);
    EXPECT_DOUBLE_EQ(s.t, 0.3);
    auto br = flow::make_flow_sample(x, y, eps, 0.3, true);
    EXPECT_EQ(br.state_yt.data, flow::make_bridge_state(y, x, 0.3).data);
}

TEST(InducedVelocity, FixedPointAndArithmetic) {
    Rng rng(3);
    TensorD y_t = gaussian_tensor<double>(3, 8, 8, rng);
    TensorD v = flow::induced_velocity(y_t, y_t, 0.5);
    for (double x : v.data) EXPECT_DOUBLE_EQ(x, 0.0);

    TensorD one = flow::induced_velocity(filled(1, 1, 1, 0.6), filled(1, 1, 1, 0.2), 0.5);
    EXPECT_DOUBLE_EQ(one.data[0], 0.8);

    EXPECT_THROW(flow::induced_velocity(y_t, y_t, 1e-4), std::invalid_argument);
}

// On the straight path, a perfect x0 predictor induces the constant velocity
// eps - y at every t.
TEST(InducedVelocity, PerfectPredictorGivesConstantVelocity) {
    Rng rng(4);
    for (int k = 0; k < 20; ++k) {
        TensorD y = gaussian_tensor<double>(2, 6, 6, rng);
        TensorD eps = gaussian_tensor<double>(2, 6, 6, rng);
        double t = 1e-3 + 0.999 * rng.uniform();
        TensorD y_t = flow::make_state(y, eps, t);
        TensorD v = flow::induced_velocity(y_t, y, t);
        for (size_t i = 0; i < v.size(); ++i)
            EXPECT_NEAR(v.data[i], eps.data[i] - y.data[i], 1e-9);
    }
}

TEST(RfrLoss, BasicValues) {
    Rng rng(5);
    TensorD y = gaussian_tensor<double>(3, 8, 8, rng);
    EXPECT_DOUBLE_EQ(flow::rfr_loss(y, y, 0.5, 1), 0.0);
    EXPECT_DOUBLE_EQ(flow::rfr_loss(filled(1, 1, 1, 1.0), filled(1, 1, 1, 0.0), 0.5, 1), 2.0);
    EXPECT_DOUBLE_EQ(flow::rfr_loss(filled(1, 1, 1, 1.0), filled(1, 1, 1, 0.0), 0.5, 2), 4.0);
    EXPECT_THROW(flow::rfr_loss(y, y, 0.5, 3), std::invalid_argument);
}

// The t-reweighted pixel loss equals the induced-velocity residual.
TEST(RfrLoss, EquivalenceIdentity) {
    auto r = check::check_loss_equivalence();
    EXPECT_TRUE(r.pass) << r.detail;
}

TEST(VelocityLoss, BasicAndTimeReversal) {
    Rng rng(6);
    TensorD y = gaussian_tensor<double>(3, 6, 6, rng);
    TensorD eps = gaussian_tensor<double>(3, 6, 6, rng);
    TensorD perfect(3, 6, 6);
    for (size_t i = 0; i < perfect.size(); ++i) perfect.data[i] = eps.data[i] - y.data[i];
    EXPECT_DOUBLE_EQ(flow::velocity_loss(y, eps, perfect), 0.0);

    EXPECT_DOUBLE_EQ(
        flow::velocity_loss(filled(1, 1, 1, 0.0), filled(1, 1, 1, 0.0), filled(1, 1, 1, 0.3)),
        0.3);

    // swapping endpoints with a negated prediction leaves the loss unchanged
    for (int k = 0; k < 50; ++k) {
        TensorD a = gaussian_tensor<double>(2, 5, 5, rng);
        TensorD b = gaussian_tensor<double>(2, 5, 5, rng);
        TensorD g = gaussian_tensor<double>(2, 5, 5, rng);
        TensorD neg = g;
        for (auto& v : neg.data) v = -v;
        EXPECT_DOUBLE_EQ(flow::velocity_loss(a, b, g), flow::velocity_loss(b, a, neg));
    }
}

TEST(EulerStep, CollapsesToPredictionWhenDtEqualsT) {
    Rng rng(7);
    TensorD y_t = gaussian_tensor<double>(3, 8, 8, rng);
    TensorD f = gaussian_tensor<double>(3, 8, 8, rng);
    EXPECT_EQ(flow::euler_step(y_t, f, 1.0, 1.0).data, f.data);   // single-step inference
    EXPECT_EQ(flow::euler_step(y_t, y_t, 0.7, 0.2).data, y_t.data);  // fixed point
    EXPECT_THROW(flow::euler_step(y_t, f, 0.1, 0.5), std::invalid_argument);
}

// The update equals y + dt (f - y)/t to 1e-6 relative (the two algebraic
// routes of the same step).
TEST(EulerStep, TowardPredictionIdentity) {
    Rng rng(8);
    for (int k = 0; k < 20; ++k) {
        TensorD y_t = gaussian_tensor<double>(2, 6, 6, rng);
        TensorD f = gaussian_tensor<double>(2, 6, 6, rng);
        double t = 0.05 + 0.95 * rng.uniform();
        double dt = t * (0.1 + 0.8 * rng.uniform());
        TensorD stepped = flow::euler_step(y_t, f, t, dt);
        for (size_t i = 0; i < stepped.size(); ++i) {
            double alt = y_t.data[i] + dt * (f.data[i] - y_t.data[i]) / t;
            double denom = std::max({std::abs(stepped.data[i]), std::abs(alt), 1e-9});
            EXPECT_LT(std::abs(stepped.data[i] - alt) / denom, 1e-6);
        }
    }
}

// Straight-line transport: starting from eps with the perfect predictor, the
// state passes exactly through the path and returns y.
TEST(EulerStep, ExactOracleTransport) {
    auto r = check::check_exact_transport();
    EXPECT_TRUE(r.pass) << r.detail;
}

TEST(EffectiveWeight, FlatForBetaInverseForUniform) {
    TSamplerConfig beta;  // p=1
    EXPECT_NEAR(flow::effective_weight(beta, 0.3), 2.0, 1e-12);
    EXPECT_NEAR(flow::effective_weight(beta, 0.9), 2.0, 1e-12);
    TSamplerConfig uni;
    uni.strategy = TStrategy::uniform;
    EXPECT_NEAR(flow::effective_weight(uni, 0.1), 10.0, 1e-12);
}

TEST(EffectiveWeight, BetaSamplerDistribution) {
    auto r = check::check_beta_sampler();
    EXPECT_TRUE(r.pass) << r.detail;
}

TEST(PathEndpoints, Invariant) {
    auto r = check::check_path_endpoints();
    EXPECT_TRUE(r.pass) << r.detail;
}

// ---------------------------------------------------------------------------
// Gradient variants: finite-difference oracles on the loss functions
// ---------------------------------------------------------------------------

TEST(LossGradients, MatchFiniteDifferences) {
    Rng rng(9);
    TensorD y = gaussian_tensor<double>(2, 5, 5, rng);
    TensorD eps = gaussian_tensor<double>(2, 5, 5, rng);
    TensorD f = gaussian_tensor<double>(2, 5, 5, rng);
    const double t = 0.37, h = 1e-6;

    for (int p : {1, 2}) {
        TensorD grad;
        flow::rfr_loss_grad(y, f, t, p, nullptr, grad);
        for (size_t i = 0; i < f.size(); i += 7) {
            TensorD fp = f, fm = f;
            fp.data[i] += h;
            fm.data[i] -= h;
            double fd = (flow::rfr_loss(y, fp, t, p) - flow::rfr_loss(y, fm, t, p)) / (2 * h);
            EXPECT_NEAR(grad.data[i], fd, 1e-6) << "p=" << p;
        }
    }
    {
        TensorD grad;
        flow::velocity_loss_grad(y, eps, f, nullptr, grad);
        for (size_t i = 0; i < f.size(); i += 7) {
            TensorD fp = f, fm = f;
            fp.data[i] += h;
            fm.data[i] -= h;
            double fd =
                (flow::velocity_loss(y, eps, fp) - flow::velocity_loss(y, eps, fm)) / (2 * h);
            EXPECT_NEAR(grad.data[i], fd, 1e-6);
        }
    }
}

TEST(LossGradients, MaskRestrictsSupport) {
    Rng rng(10);
    TensorD y = gaussian_tensor<double>(3, 6, 6, rng);
    TensorD f = gaussian_tensor<double>(3, 6, 6, rng);
    TensorD mask(1, 6, 6);
    for (int i = 0; i < 18; ++i) mask.data[i] = 1.0;  // top half contributes
    TensorD grad;
    double loss = flow::rfr_loss_grad(y, f, 0.5, 1, &mask, grad);
    EXPECT_GT(loss, 0.0);
    for (int c = 0; c < 3; ++c)
        for (int i = 18; i < 36; ++i) EXPECT_DOUBLE_EQ(grad.plane(c)[i], 0.0);
}

TEST(CompositeHook, ReducesAndVanishes) {
    Rng rng(11);
    TensorD y = gaussian_tensor<double>(3, 8, 8, rng);
    TensorD f = gaussian_tensor<double>(3, 8, 8, rng);
    double pixel = flow::rfr_loss(y, f, 0.5, 1);

    flow::CompositeWeights w;
    w.lambda_grad = 0.0;
    EXPECT_DOUBLE_EQ(flow::composite_loss_hook(pixel, y, f, w), pixel);

    w.lambda_grad = 0.1;
    EXPECT_DOUBLE_EQ(flow::composite_loss_hook(0.0, y, y, w), 0.0);

    // constant images with differing offsets: gradient term zero, pixel term positive
    TensorD a = filled(1, 8, 8, 0.2), b = filled(1, 8, 8, 0.7);
    double pix = flow::rfr_loss(a, b, 1.0, 1);
    EXPECT_GT(pix, 0.0);
    EXPECT_DOUBLE_EQ(flow::composite_loss_hook(pix, a, b, w), pix);

    w.lambda_grad = -1.0;
    EXPECT_THROW(flow::composite_loss_hook(pixel, y, f, w), std::invalid_argument);
}

TEST(CompositeHook, GradDiffMatchesFiniteDifferences) {
    Rng rng(12);
    TensorD y = gaussian_tensor<double>(2, 5, 5, rng);
    TensorD f = gaussian_tensor<double>(2, 5, 5, rng);
    const double lambda = 0.3, h = 1e-6;
    TensorD grad(2, 5, 5);
    double base = flow::grad_diff_loss_grad(y, f, lambda, nullptr, grad);
    for (size_t i = 0; i < f.size(); i += 3) {
        TensorD fp = f, fm = f;
        fp.data[i] += h;
        fm.data[i] -= h;
        TensorD scratch(2, 5, 5);
        double lp = flow::grad_diff_loss_grad(y, fp, lambda, nullptr, scratch);
        scratch.fill(0);
        double lm = flow::grad_diff_loss_grad(y, fm, lambda, nullptr, scratch);
        EXPECT_NEAR(grad.data[i], lambda * (lp - lm) / (2 * h), 1e-6);
    }
    EXPECT_GT(base, 0.0);
}
