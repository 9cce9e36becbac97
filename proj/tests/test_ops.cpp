#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "testing.hpp"
#include "vsrt/errors.hpp"
#include "vsrt/ops.hpp"

using namespace vsrt;
using namespace vsrt::testing;

namespace {

// Keeps values away from the kinks of relu/warp so central differences stay
// valid at step 1e-3.
void nudge_off_kinks(Tensor& t, float margin = 5e-3f) {
    for (auto& v : t.vec()) {
        if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
        const float frac = v - std::floor(v);
        if (frac < margin) v += margin;
        if (1.0f - frac < margin) v -= margin;
    }
}

} // namespace

TEST_CASE("conv2d all-ones counting") {
    Tensor x(Shape{1, 3, 3}, 1.0f);
    Tensor w(Shape{1, 1, 3, 3}, 1.0f);
    Tensor y = ops::conv2d(x, w, nullptr, 1, 1);
    CHECK(y.dims() == Shape{1, 3, 3});
    CHECK(y.data()[4] == doctest::Approx(9.0));
    CHECK(y.data()[0] == doctest::Approx(4.0));
    CHECK(y.data()[2] == doctest::Approx(4.0));
    CHECK(y.data()[1] == doctest::Approx(6.0));
}

TEST_CASE("conv2d identity kernel") {
    Rng rng(3);
    Tensor x = random_tensor({2, 5, 4}, rng);
    Tensor w(Shape{2, 2, 3, 3}, 0.0f);
    // each output channel passes through its own input channel
    w.data()[(0 * 2 + 0) * 9 + 4] = 1.0f;
    w.data()[(1 * 2 + 1) * 9 + 4] = 1.0f;
    Tensor y = ops::conv2d(x, w, nullptr, 1, 1);
    CHECK(bitwise_equal(y, x));
}

TEST_CASE("conv2d matches loop oracle") {
    Rng rng(11);
    Tensor x = random_tensor({2, 4, 5}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    for (int stride : {1, 2}) {
        for (int pad : {0, 1, 2}) {
            Tensor got = ops::conv2d(x, w, &b, stride, pad);
            Tensor want = conv2d_oracle(x, w, &b, stride, pad);
            CHECK(got.dims() == want.dims());
            CHECK(max_abs_diff(got, want) < 1e-5);
        }
    }
}

TEST_CASE("conv2d batched equals per-frame") {
    Rng rng(4);
    Tensor x = random_tensor({3, 2, 4, 4}, rng);
    Tensor w = random_tensor({5, 2, 3, 3}, rng);
    Tensor y = ops::conv2d(x, w, nullptr, 1, 1);
    for (int t = 0; t < 3; ++t) {
        Tensor xt = ops::slice_frame(x, t);
        Tensor yt = ops::conv2d(xt, w, nullptr, 1, 1);
        Tensor got = ops::slice_frame(y, t);
        CHECK(bitwise_equal(got, yt));
    }
}

TEST_CASE("conv2d shape errors carry both shapes") {
    Tensor x(Shape{3, 4, 4});
    Tensor w(Shape{2, 5, 3, 3});
    try {
        ops::conv2d(x, w, nullptr, 1, 1);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[3,4,4]") != std::string::npos);
        CHECK(msg.find("[2,5,3,3]") != std::string::npos);
    }
    Tensor weven(Shape{2, 3, 2, 2});
    CHECK_THROWS_AS(ops::conv2d(x, weven, nullptr, 1, 1), ShapeError);
}

TEST_CASE("matmul identity and hand arithmetic") {
    Tensor eye(Shape{3, 3}, 0.0f);
    for (int i = 0; i < 3; ++i) eye.data()[i * 3 + i] = 1.0f;
    Rng rng(5);
    Tensor b = random_tensor({3, 2}, rng);
    CHECK(bitwise_equal(ops::matmul(eye, b), b));

    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor v = Tensor::from({2, 1}, {5, 6});
    Tensor y = ops::matmul(a, v);
    CHECK(y.data()[0] == doctest::Approx(17.0));
    CHECK(y.data()[1] == doctest::Approx(39.0));

    CHECK_THROWS_AS(ops::matmul(a, Tensor(Shape{3, 2})), ShapeError);
}

TEST_CASE("matmul matches triple loop oracle") {
    Rng rng(17);
    Tensor a = random_tensor({4, 6}, rng);
    Tensor b = random_tensor({6, 3}, rng);
    CHECK(max_abs_diff(ops::matmul(a, b), matmul_oracle(a, b)) < 1e-6);
}

TEST_CASE("softmax_columns") {
    Tensor same(Shape{4, 1}, 0.7f);
    Tensor y = ops::softmax_columns(same);
    for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(0.25));

    Tensor col = Tensor::from({2, 1}, {0.0f, std::log(3.0f)});
    Tensor z = ops::softmax_columns(col);
    CHECK(z.data()[0] == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(z.data()[1] == doctest::Approx(0.75).epsilon(1e-6));

    Rng rng(23);
    for (int seed = 0; seed < 20; ++seed) {
        Rng r = rng.child(seed);
        Tensor x = random_tensor({5, 7}, r, -8.0f, 8.0f);
        Tensor s = ops::softmax_columns(x);
        for (std::size_t j = 0; j < 7; ++j) {
            double sum = 0.0;
            for (std::size_t i = 0; i < 5; ++i) {
                CHECK(s.data()[i * 7 + j] >= 0.0f);
                sum += s.data()[i * 7 + j];
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
    }

    Tensor bad = Tensor::from({2, 1}, {std::nanf(""), 1.0f});
    CHECK_THROWS_AS(ops::softmax_columns(bad), NumericError);
}

TEST_CASE("layer_norm") {
    // constant channel vector -> output equals shift
    Tensor x(Shape{4, 2}, 3.0f);
    Rng rng(2);
    Tensor gain = random_tensor({4}, rng);
    Tensor shift = random_tensor({4}, rng);
    Tensor y = ops::layer_norm(x, 0, gain, shift, 1e-5f);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(y.data()[i * 2 + j] == doctest::Approx(shift.data()[i]).epsilon(1e-6));
        }
    }

    // [1,-1] is already unit variance
    Tensor v = Tensor::from({2, 1}, {1.0f, -1.0f});
    Tensor ones(Shape{2}, 1.0f);
    Tensor zeros(Shape{2}, 0.0f);
    Tensor u = ops::layer_norm(v, 0, ones, zeros, 0.0f);
    CHECK(u.data()[0] == doctest::Approx(1.0));
    CHECK(u.data()[1] == doctest::Approx(-1.0));

    // unit gain, constant shift: per-location channel mean equals the shift
    Tensor r = random_tensor({6, 5}, rng);
    Tensor g1(Shape{6}, 1.0f);
    Tensor s1(Shape{6}, 0.37f);
    Tensor n = ops::layer_norm(r, 0, g1, s1, 1e-6f);
    for (std::size_t j = 0; j < 5; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 6; ++i) mean += n.data()[i * 5 + j];
        CHECK(mean / 6.0 == doctest::Approx(0.37).epsilon(1e-5));
    }

    Tensor one_ch(Shape{1, 3}, 2.0f);
    Tensor g(Shape{1}, 1.0f), s(Shape{1}, 0.0f);
    CHECK_THROWS_AS(ops::layer_norm(one_ch, 0, g, s, 0.0f), NumericError);
}

TEST_CASE("relu and leaky_relu values and gradients") {
    Tensor x = Tensor::from({4}, {-2.0f, 3.0f, -1.0f, 1.0f});
    Tensor r = ops::relu(x);
    CHECK(r.data()[0] == 0.0f);
    CHECK(r.data()[1] == 3.0f);
    Tensor l = ops::leaky_relu(x, 0.01f);
    CHECK(l.data()[0] == doctest::Approx(-0.02));

    Tape tape;
    Tensor xi = Tensor::from({2}, {-1.0f, 1.0f}).set_requires_grad(true);
    Tensor y = ops::leaky_relu(xi, 0.01f, &tape);
    Tensor loss = ops::sum_all(y, &tape);
    tape.backward(loss);
    CHECK(xi.grad_data()[0] == doctest::Approx(0.01));
    CHECK(xi.grad_data()[1] == doctest::Approx(1.0));
}

TEST_CASE("unfold layout and patch counts") {
    // 1x1x4x4 with 2x2 patches, stride 2
    std::vector<float> vals(16);
    for (int i = 0; i < 16; ++i) vals[i] = float(i);
    Tensor x = Tensor::from({1, 1, 4, 4}, vals);
    Tensor p = ops::unfold(x, 2, 2, 2);
    CHECK(p.dims() == Shape{4, 1, 2, 2});
    CHECK(p.data()[0] == 0.0f);
    CHECK(p.data()[1] == 1.0f);
    CHECK(p.data()[2] == 4.0f);
    CHECK(p.data()[3] == 5.0f);

    // N = T*W*H/(Wp*Hp) with stride == patch side
    Rng rng(9);
    Tensor x2 = random_tensor({2, 1, 4, 4}, rng);
    Tensor p2 = ops::unfold(x2, 2, 2, 2);
    CHECK(p2.dim(0) == 8);

    Tensor x3 = random_tensor({2, 3, 6, 8}, rng);
    Tensor p3 = ops::unfold(x3, 2, 2, 2);
    Tensor want = unfold_oracle(x3, 2, 2, 2);
    CHECK(bitwise_equal(p3, want));

    // overlapping stride
    Tensor p4 = ops::unfold(x3, 4, 4, 2);
    Tensor want4 = unfold_oracle(x3, 4, 4, 2);
    CHECK(bitwise_equal(p4, want4));

    CHECK_THROWS_AS(ops::unfold(x3, 10, 2, 2), ShapeError);
    CHECK_THROWS_AS(ops::unfold(x3, 3, 3, 2), ShapeError);
}

TEST_CASE("fold inverts unfold bitwise at stride == patch") {
    Rng rng(31);
    for (int seed = 0; seed < 20; ++seed) {
        Rng r = rng.child(seed);
        Tensor x = random_tensor({2, 3, 6, 4}, r);
        Tensor p = ops::unfold(x, 2, 2, 2);
        Tensor back = ops::fold(p, 2, 3, 6, 4, 2);
        CHECK(bitwise_equal(back, x));
    }
}

TEST_CASE("fold averaging and oracle") {
    // all-ones patches with overlap still give all-ones output
    Tensor p(Shape{9, 2, 2, 2}, 1.0f);
    Tensor y = ops::fold(p, 1, 2, 4, 4, 1);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == doctest::Approx(1.0));

    Rng rng(41);
    Tensor pr = random_tensor({18, 2, 2, 2}, rng);
    Tensor got = ops::fold(pr, 2, 2, 4, 4, 1);
    Tensor want = fold_oracle(pr, 2, 2, 4, 4, 1);
    CHECK(max_abs_diff(got, want) < 1e-6);

    CHECK_THROWS_AS(ops::fold(pr, 3, 2, 4, 4, 1), ShapeError);
}

TEST_CASE("pixel_shuffle") {
    Rng rng(13);
    Tensor x = random_tensor({4, 3, 5}, rng);
    CHECK(bitwise_equal(ops::pixel_shuffle(x, 1), x));

    Tensor q = Tensor::from({4, 1, 1}, {1, 2, 3, 4});
    Tensor y = ops::pixel_shuffle(q, 2);
    CHECK(y.dims() == Shape{1, 2, 2});
    CHECK(y.data()[0] == 1.0f);
    CHECK(y.data()[1] == 2.0f);
    CHECK(y.data()[2] == 3.0f);
    CHECK(y.data()[3] == 4.0f);

    Tensor r = random_tensor({8, 3, 4}, rng);
    CHECK(bitwise_equal(ops::pixel_shuffle(r, 2), pixel_shuffle_oracle(r, 2)));

    CHECK_THROWS_AS(ops::pixel_shuffle(Tensor(Shape{3, 2, 2}), 2), ShapeError);
}

TEST_CASE("pixel_shuffle preserves the value multiset") {
    Rng rng(101);
    for (int seed = 0; seed < 10; ++seed) {
        Rng r = rng.child(seed);
        Tensor x = random_tensor({8, 3, 4}, r);
        Tensor y = ops::pixel_shuffle(x, 2);
        std::vector<float> a(x.vec()), b(y.vec());
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
}

TEST_CASE("bilinear_warp") {
    Rng rng(19);
    Tensor x = random_tensor({2, 4, 5}, rng);
    Tensor zero(Shape{2, 4, 5}, 0.0f);
    CHECK(bitwise_equal(ops::bilinear_warp(x, zero), x));

    // constant flow (1,0) on a horizontal ramp: shifted ramp, last column zero
    std::vector<float> ramp(4 * 5);
    for (int y = 0; y < 4; ++y)
        for (int xx = 0; xx < 5; ++xx) ramp[y * 5 + xx] = float(xx);
    Tensor img = Tensor::from({1, 4, 5}, ramp);
    Tensor flow(Shape{2, 4, 5}, 0.0f);
    for (int i = 0; i < 20; ++i) flow.data()[i] = 1.0f;
    Tensor s = ops::bilinear_warp(img, flow);
    for (int y = 0; y < 4; ++y) {
        for (int xx = 0; xx < 4; ++xx) CHECK(s.data()[y * 5 + xx] == doctest::Approx(xx + 1.0));
        CHECK(s.data()[y * 5 + 4] == 0.0f);
    }

    Tensor f2(Shape{2, 4, 5}, 0.0f);
    for (int i = 0; i < 20; ++i) f2.data()[i] = 0.5f;
    Tensor w1 = ops::bilinear_warp(x, f2);
    Tensor w2 = warp_oracle(x, f2);
    CHECK(max_abs_diff(w1, w2) < 1e-5);

    Rng rr(77);
    Tensor f3 = random_tensor({2, 4, 5}, rr, -2.0f, 2.0f);
    CHECK(max_abs_diff(ops::bilinear_warp(x, f3), warp_oracle(x, f3)) < 1e-5);
}

TEST_CASE("backward basics") {
    Tape tape;
    Rng rng(3);
    Tensor x = random_tensor({3, 2}, rng).set_requires_grad(true);
    Tensor loss = ops::sum_all(x, &tape);
    tape.backward(loss);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad_data()[i] == 1.0f);

    Tape tape2;
    Tensor v = Tensor::from({2}, {1.0f, 2.0f}).set_requires_grad(true);
    Tensor sq = ops::mul(v, v, &tape2);
    Tensor l2 = ops::sum_all(sq, &tape2);
    tape2.backward(l2);
    CHECK(v.grad_data()[0] == doctest::Approx(2.0));
    CHECK(v.grad_data()[1] == doctest::Approx(4.0));

    Tensor stranger = Tensor::scalar(1.0f);
    CHECK_THROWS_AS(tape2.backward(stranger), GraphError);
    CHECK_THROWS_AS(tape2.backward(v), GraphError);
}

TEST_CASE("gradients accumulate over fan-out") {
    Tape tape;
    Tensor x = Tensor::from({2}, {0.5f, -0.25f}).set_requires_grad(true);
    Tensor a = ops::scale(x, 2.0f, &tape);
    Tensor b = ops::scale(x, 3.0f, &tape);
    Tensor s = ops::add(a, b, &tape);
    Tensor loss = ops::sum_all(s, &tape);
    tape.backward(loss);
    CHECK(x.grad_data()[0] == doctest::Approx(5.0));
    CHECK(x.grad_data()[1] == doctest::Approx(5.0));
}

TEST_CASE("composite chain matches finite differences") {
    Rng rng(57);
    Tensor x = random_tensor({2, 4, 4}, rng);
    Tensor w = random_tensor({2, 2, 3, 3}, rng);
    Tensor m = random_tensor({16, 3}, rng);
    Tensor pick = random_tensor({2, 3}, rng);
    nudge_off_kinks(x);
    auto build = [&pick](std::vector<Tensor>& in, Tape* t) {
        Tensor c = ops::conv2d(in[0], in[1], nullptr, 1, 1, t);
        Tensor r = ops::relu(c, t);
        Tensor flat = ops::reshape(r, {2, 16}, t);
        Tensor mm = ops::matmul(flat, in[2], t);
        Tensor sm = ops::softmax_columns(mm, t);
        Tensor weighted = ops::mul(sm, in[3], t);
        return ops::sum_all(weighted, t);
    };
    auto rep = fd_check_graph(build, {x, w, m, pick});
    CHECK(rep.max_rel_err < 1e-3);
}

TEST_CASE("per-op finite difference checks") {
    Rng rng(91);

    SUBCASE("conv2d with bias") {
        Tensor x = random_tensor({2, 4, 4}, rng);
        Tensor w = random_tensor({3, 2, 3, 3}, rng);
        Tensor b = random_tensor({3}, rng);
        auto rep = fd_check_graph(
            [](std::vector<Tensor>& in, Tape* t) {
                Tensor y = ops::conv2d(in[0], in[1], &in[2], 1, 1, t);
                return ops::sum_all(ops::mul(y, y, t), t);
            },
            {x, w, b});
        CHECK(rep.max_rel_err < 1e-3);
    }
    SUBCASE("matmul") {
        Tensor a = random_tensor({3, 4}, rng);
        Tensor b = random_tensor({4, 2}, rng);
        auto rep = fd_check_graph(
            [](std::vector<Tensor>& in, Tape* t) {
                Tensor y = ops::matmul(in[0], in[1], t);
                return ops::sum_all(ops::mul(y, y, t), t);
            },
            {a, b});
        CHECK(rep.max_rel_err < 1e-3);
    }
    SUBCASE("softmax_columns") {
        Tensor x = random_tensor({4, 3}, rng);
        Tensor w = random_tensor({4, 3}, rng);
        auto rep = fd_check_graph(
            [](std::vector<Tensor>& in, Tape* t) {
                Tensor y = ops::softmax_columns(in[0], t);
                return ops::sum_all(ops::mul(y, in[1], t), t);
            },
            {x, w});
        CHECK(rep.max_rel_err < 1e-3);
    }
    SUBCASE("layer_norm") {
        Tensor x = random_tensor({3, 4}, rng);
        Tensor g = random_tensor({3}, rng, 0.5f, 1.5f);
        Tensor s = random_tensor({3}, rng);
        auto rep = fd_check_graph(
            [](std::vector<Tensor>& in, Tape* t) {
                Tensor y = ops::layer_norm(in[0], 0, in[1], in[2], 1e-3f, t);
                return ops::sum_all(ops::mul(y, y, t), t);
            },
            {x, g, s});
        CHECK(rep.max_rel_err < 1e-3);
    }
    SUBCASE("unfold fold pixel_shuffle chain") {
        Tensor x = random_tensor({2, 4, 4, 4}, rng);
        auto rep = fd_check_graph(
            [](std::vector<Tensor>& in, Tape* t) {
                Tensor p = ops::unfold(in[0], 2, 2, 1, t);
                Tensor f = ops::fold(p, 2, 4, 4, 4, 1, t);
                Tensor ps = ops::pixel_shuffle(f, 2, t);
                return ops::sum_all(ops::mul(ps, ps, t), t);
            },
            {x});
        CHECK(rep.max_rel_err < 1e-3);
    }
    SUBCASE("bilinear_warp wrt image and flow") {
        Tensor x = random_tensor({2, 5, 5}, rng);
        Tensor f = random_tensor({2, 5, 5}, rng, -1.5f, 1.5f);
        nudge_off_kinks(f);
        auto rep = fd_check_graph(
            [](std::vector<Tensor>& in, Tape* t) {
                Tensor y = ops::bilinear_warp(in[0], in[1], t);
                return ops::sum_all(ops::mul(y, y, t), t);
            },
            {x, f});
        CHECK(rep.max_rel_err < 1e-3);
    }
    SUBCASE("resampling ops") {
        Tensor x = random_tensor({2, 4, 6}, rng);
        auto rep = fd_check_graph(
            [](std::vector<Tensor>& in, Tape* t) {
                Tensor up = ops::upsample_bilinear2x(in[0], t);
                Tensor dn = ops::downsample2x_avg(up, t);
                return ops::sum_all(ops::mul(dn, dn, t), t);
            },
            {x});
        CHECK(rep.max_rel_err < 1e-3);
    }
    SUBCASE("concat slice stack transpose bias") {
        Tensor a = random_tensor({2, 3, 3}, rng);
        Tensor b = random_tensor({1, 3, 3}, rng);
        Tensor bias = random_tensor({3}, rng);
        auto rep = fd_check_graph(
            [](std::vector<Tensor>& in, Tape* t) {
                Tensor cat = ops::concat_channels(in[0], in[1], t);
                Tensor s0 = ops::slice_frame(cat, 0, t);
                Tensor s2 = ops::slice_frame(cat, 2, t);
                Tensor st = ops::stack_frames({s0, s2}, t);
                Tensor flat = ops::reshape(st, {3, 6}, t);
                Tensor tr = ops::transpose(ops::transpose(flat, t), t);
                Tensor wb = ops::add_col_bias(tr, in[2], t);
                return ops::sum_all(ops::mul(wb, wb, t), t);
            },
            {a, b, bias});
        CHECK(rep.max_rel_err < 1e-3);
    }
}

TEST_CASE("upsampling values") {
    // x2 of a 2-px row follows the half-pixel taps; the single source row
    // duplicates vertically under border clamping
    Tensor x = Tensor::from({1, 1, 2}, {0.0f, 1.0f});
    Tensor y = ops::upsample_bilinear2x(x);
    CHECK(y.dims() == Shape{1, 2, 4});
    for (int row = 0; row < 2; ++row) {
        CHECK(y.data()[row * 4 + 0] == doctest::Approx(0.0));
        CHECK(y.data()[row * 4 + 1] == doctest::Approx(0.25));
        CHECK(y.data()[row * 4 + 2] == doctest::Approx(0.75));
        CHECK(y.data()[row * 4 + 3] == doctest::Approx(1.0));
    }

    Tensor c(Shape{1, 3, 3}, 0.6f);
    Tensor u = ops::upsample_bilinear(c, 4);
    CHECK(u.dims() == Shape{1, 12, 12});
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(u.data()[i] == doctest::Approx(0.6));
}

TEST_CASE("charbonnier loss") {
    Tensor a(Shape{3}, 0.5f);
    Tensor b(Shape{3}, 0.5f);
    Tensor l = ops::charbonnier(a, b, 1e-8f);
    CHECK(l.item() == doctest::Approx(1e-8));

    Tensor p = Tensor::scalar(4.0f);
    Tensor q = Tensor::scalar(1.0f);
    CHECK(ops::charbonnier(p, q, 0.0f).item() == doctest::Approx(3.0));

    Rng rng(8);
    Tensor x = random_tensor({6}, rng);
    Tensor yv = random_tensor({6}, rng);
    for (std::size_t i = 0; i < 6; ++i) {
        if (std::abs(x.data()[i] - yv.data()[i]) < 0.05f) x.data()[i] += 0.1f;
    }
    auto rep = fd_check_graph(
        [&yv](std::vector<Tensor>& in, Tape* t) { return ops::charbonnier(in[0], yv, 1e-3f, t); },
        {x});
    CHECK(rep.max_rel_err < 1e-4);

    CHECK_THROWS_AS(ops::charbonnier(a, Tensor(Shape{4}), 1e-8f), ShapeError);
}
