#include <gtest/gtest.h>

#include "rfr/metrics.hpp"
#include "rfr/synthdata.hpp"

using namespace rfr;
using synth::DegradeSpec;
using synth::TaskKind;

TEST(GenImage, DeterministicInRangeAndStructured) {
    TensorF a = synth::gen_image(42, 64);
    TensorF b = synth::gen_image(42, 64);
    EXPECT_EQ(a.data, b.data);
    EXPECT_THROW(synth::gen_image(1, 8), std::invalid_argument);

    double mean_sum = 0;
    int wide_range = 0;
    const int n = 100;
    for (int i = 0; i < n; ++i) {
        TensorF img = synth::gen_image(1000 + i, 48);
        double mn = 1, mx = 0, mean = 0;
        for (float v : img.data) {
            ASSERT_GE(v, 0.0f);
            ASSERT_LE(v, 1.0f);
            mn = std::min<double>(mn, v);
            mx = std::max<double>(mx, v);
            mean += v;
        }
        mean_sum += mean / double(img.size());
        if (mx - mn > 0.3) ++wide_range;
    }
    double pop_mean = mean_sum / n;
    EXPECT_GT(pop_mean, 0.3);
    EXPECT_LT(pop_mean, 0.7);
    EXPECT_GE(wide_range, 95);
}

TEST(Degrade, IdentityIsExact) {
    TensorF y = synth::gen_image(7, 32);
    DegradeSpec spec;
    TensorF x = synth::degrade(y, TaskKind::identity, spec);
    EXPECT_EQ(x.data, y.data);
}

TEST(Degrade, BlurPreservesDc) {
    TensorF flat(3, 32, 32);
    flat.fill(0.37f);
    DegradeSpec spec;
    spec.noise_sigma = 0.0;
    TensorF x = synth::degrade(flat, TaskKind::deblur, spec);
    for (float v : x.data) EXPECT_NEAR(v, 0.37f, 1e-5f);
}

TEST(Degrade, LowlightGammaArithmetic) {
    TensorF half(3, 16, 16);
    half.fill(0.5f);
    DegradeSpec spec;
    spec.noise_sigma = 0.0;
    TensorF x = synth::degrade(half, TaskKind::lowlight, spec);
    EXPECT_NEAR(x.data[0], std::pow(0.5, 2.5), 1e-6);  // ~0.17678
}

TEST(Degrade, ColorcastAppliesMatrix) {
    TensorF y(3, 16, 16);
    y.fill(1.0f);
    DegradeSpec spec;
    spec.noise_sigma = 0.0;
    TensorF x = synth::degrade(y, TaskKind::colorcast, spec);
    EXPECT_NEAR(x.plane(0)[0], 0.5, 1e-6);
    EXPECT_NEAR(x.plane(1)[0], 0.8, 1e-6);
    EXPECT_NEAR(x.plane(2)[0], 1.0, 1e-6);
}

TEST(Degrade, Sr2xBoxFilter) {
    TensorF y(3, 4, 4);
    for (size_t i = 0; i < y.size(); ++i) y.data[i] = float(i % 7) / 7.0f;
    DegradeSpec spec;
    TensorF x = synth::degrade(y, TaskKind::sr2x, spec);
    EXPECT_EQ(x.height, 2);
    EXPECT_EQ(x.width, 2);
    float expect = (y.at(0, 0, 0) + y.at(0, 0, 1) + y.at(0, 1, 0) + y.at(0, 1, 1)) / 4.0f;
    EXPECT_NEAR(x.at(0, 0, 0), expect, 1e-7);
}

TEST(Degrade, InpaintMaskGeometry) {
    TensorF y = synth::gen_image(9, 32);
    DegradeSpec spec;
    spec.seed = 5;
    TensorF x = synth::degrade(y, TaskKind::inpaint, spec);
    ASSERT_EQ(x.channels, 4);
    int hole = 0;
    for (int i = 0; i < x.plane_size(); ++i) {
        float m = x.plane(3)[i];
        ASSERT_TRUE(m == 0.0f || m == 1.0f);
        if (m == 0.0f) {
            ++hole;
            for (int c = 0; c < 3; ++c) EXPECT_EQ(x.plane(c)[i], 0.0f);
        } else {
            for (int c = 0; c < 3; ++c) EXPECT_EQ(x.plane(c)[i], y.plane(c)[i]);
        }
    }
    EXPECT_NEAR(double(hole) / x.plane_size(), 0.25, 0.08);
}

TEST(Degrade, ColorizeIsLuma) {
    TensorF y = synth::gen_image(11, 32);
    DegradeSpec spec;
    TensorF x = synth::degrade(y, TaskKind::colorize, spec);
    ASSERT_EQ(x.channels, 1);
    EXPECT_EQ(x.data, metrics::rgb_to_y(y).data);
}

TEST(Degrade, RejectsBadSpecs) {
    TensorF y = synth::gen_image(1, 32);
    DegradeSpec spec;
    spec.blur_sigma = 0.0;
    EXPECT_THROW(synth::degrade(y, TaskKind::deblur, spec), std::invalid_argument);
    spec = DegradeSpec{};
    spec.gamma = -1.0;
    EXPECT_THROW(synth::degrade(y, TaskKind::lowlight, spec), std::invalid_argument);
    spec = DegradeSpec{};
    spec.hole_fraction = 1.5;
    EXPECT_THROW(synth::degrade(y, TaskKind::inpaint, spec), std::invalid_argument);
}

// Spatially equivariant degradations commute with flips when noise is off.
TEST(MakeBatch, FlipEquivariance) {
    TensorF y = synth::gen_image(21, 48);
    DegradeSpec spec;
    spec.noise_sigma = 0.0;
    for (TaskKind task : {TaskKind::deblur, TaskKind::lowlight, TaskKind::colorcast}) {
        TensorF flipped = y;
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < y.height; ++i)
                for (int j = 0; j < y.width; ++j)
                    flipped.at(c, i, j) = y.at(c, i, y.width - 1 - j);
        TensorF a = synth::degrade(flipped, task, spec);
        TensorF b = synth::degrade(y, task, spec);
        TensorF b_flipped = b;
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < b.height; ++i)
                for (int j = 0; j < b.width; ++j)
                    b_flipped.at(c, i, j) = b.at(c, i, b.width - 1 - j);
        EXPECT_LT(max_abs_diff(a, b_flipped), 1e-6f) << synth::task_name(task);
    }
}

TEST(MakeBatch, ReproducibleAndShaped) {
    DegradeSpec spec;
    Rng r1(33), r2(33);
    auto b1 = synth::make_batch(TaskKind::lowlight, spec, 8, 96, 64, true, r1);
    auto b2 = synth::make_batch(TaskKind::lowlight, spec, 8, 96, 64, true, r2);
    ASSERT_EQ(b1.size(), 8u);
    for (int i = 0; i < 8; ++i) {
        EXPECT_EQ(b1[i].condition.data, b2[i].condition.data);
        EXPECT_EQ(b1[i].target.data, b2[i].target.data);
    }

    auto sr = synth::make_batch(TaskKind::sr2x, spec, 2, 96, 64, true, r1);
    EXPECT_EQ(sr[0].condition.shape_str(), "(3,32,32)");
    EXPECT_EQ(sr[0].target.shape_str(), "(3,64,64)");
}

TEST(MakeBatch, Sr2xRejectsOddOffsets) {
    TensorF canvas = synth::gen_image(50, 96);
    DegradeSpec spec;
    EXPECT_THROW(synth::make_pair_at(canvas, TaskKind::sr2x, spec, 3, 0, 64, false, false, 0),
                 std::invalid_argument);
    EXPECT_NO_THROW(synth::make_pair_at(canvas, TaskKind::sr2x, spec, 2, 4, 64, true, false, 1));
}

// The default degradations genuinely destroy information: mean PSNR between
// the (shape-matched) condition and the target stays under 30 dB.
TEST(Degrade, TasksAreNonTrivial) {
    DegradeSpec spec;
    for (TaskKind task : {TaskKind::deblur, TaskKind::lowlight, TaskKind::colorcast}) {
        double total = 0;
        const int n = 20;
        for (int i = 0; i < n; ++i) {
            TensorF y = synth::gen_image(5000 + i, 64);
            DegradeSpec s = spec;
            s.seed = 5000 + i;
            total += metrics::psnr(synth::degrade(y, task, s), y);
        }
        EXPECT_LT(total / n, 30.0) << synth::task_name(task);
    }
}

TEST(Valset, DeterministicPairs) {
    DegradeSpec spec;
    auto a = synth::make_valset(TaskKind::deblur, spec, 4, 32, 99);
    auto b = synth::make_valset(TaskKind::deblur, spec, 4, 32, 99);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(a[i].condition.data, b[i].condition.data);
    EXPECT_THROW(synth::make_valset(TaskKind::deblur, spec, 0, 32, 1), std::invalid_argument);
}
