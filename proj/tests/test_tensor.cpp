#include <doctest.h>

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "haug/ops.hpp"
#include "haug/rng.hpp"
#include "haug/tensor.hpp"
#include "oracles.hpp"

using namespace haug;

TEST_SUITE("tensor") {

    TEST_CASE("conv2d all-ones 3x3 gives 9") {
        Tensor x = Tensor::full({1, 1, 3, 3}, 1);
        Tensor w = Tensor::full({1, 1, 3, 3}, 1);
        Tensor y = conv2d(x, w, 1, 0);
        CHECK(y.shape() == std::vector<int>{1, 1, 1, 1});
        CHECK(y.data()[0] == doctest::Approx(9.0));
    }

    TEST_CASE("conv2d identity kernel reproduces input") {
        Rng rng = make_rng(7);
        Tensor x = gradcheck::random_tensor({2, 1, 4, 5}, rng, false);
        std::vector<scalar> k(9, 0);
        k[4] = 1;  // center tap
        Tensor w = Tensor::from_data({1, 1, 3, 3}, k);
        Tensor y = conv2d(x, w, 1, 1);
        REQUIRE(y.shape() == std::vector<int>{2, 1, 4, 5});
        for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
    }

    TEST_CASE("conv2d matches six-loop oracle") {
        Rng rng = make_rng(11);
        Tensor x = gradcheck::random_tensor({2, 3, 5, 5}, rng, false);
        Tensor w = gradcheck::random_tensor({4, 3, 3, 3}, rng, false);
        for (int stride : {1, 2}) {
            for (int pad : {0, 1}) {
                Tensor y = conv2d(x, w, stride, pad);
                std::vector<double> xd(x.data().begin(), x.data().end());
                std::vector<double> wd(w.data().begin(), w.data().end());
                int oh = 0, ow = 0;
                auto ref = oracle::conv2d_naive(xd, 2, 3, 5, 5, wd, 4, 3, 3, stride, pad, oh, ow);
                REQUIRE(y.numel() == static_cast<int>(ref.size()));
                for (size_t i = 0; i < ref.size(); ++i)
                    CHECK(std::abs(static_cast<double>(y.data()[i]) - ref[i]) <= 1e-5);
            }
        }
    }

    TEST_CASE("conv2d shape errors name both shapes") {
        Tensor x = Tensor::zeros({1, 2, 4, 4});
        Tensor w = Tensor::zeros({1, 3, 3, 3});
        CHECK_THROWS_WITH_AS(conv2d(x, w, 1, 0),
                             doctest::Contains("[1,2,4,4]"), std::invalid_argument);
        Tensor wbig = Tensor::zeros({1, 2, 7, 7});
        CHECK_THROWS_AS(conv2d(x, wbig, 1, 0), std::invalid_argument);
    }

    TEST_CASE("batch_norm constant channel maps to zeros via eps") {
        Tensor x = Tensor::full({4, 3}, scalar(2.5));
        Tensor gamma = Tensor::full({3}, 1);
        Tensor beta = Tensor::zeros({3});
        BatchNormStats stats{Tensor::zeros({3}), Tensor::full({3}, 1)};
        Tensor y = batch_norm(x, gamma, beta, stats, true);
        for (scalar v : y.data()) CHECK(v == doctest::Approx(0.0));
    }

    TEST_CASE("batch_norm gamma zero broadcasts beta") {
        Rng rng = make_rng(3);
        Tensor x = gradcheck::random_tensor({6, 4}, rng, false);
        Tensor gamma = Tensor::zeros({4});
        std::vector<scalar> bv = {scalar(0.5), scalar(-1), scalar(2), scalar(0)};
        Tensor beta = Tensor::from_data({4}, bv);
        BatchNormStats stats{Tensor::zeros({4}), Tensor::full({4}, 1)};
        Tensor y = batch_norm(x, gamma, beta, stats, true);
        for (int n = 0; n < 6; ++n)
            for (int d = 0; d < 4; ++d) CHECK(y.data()[n * 4 + d] == bv[d]);
    }

    TEST_CASE("batch_norm matches two-pass oracle and normalizes the batch") {
        Rng rng = make_rng(5);
        Tensor x = gradcheck::random_tensor({8, 4}, rng, false, -2.0, 3.0);
        Tensor gamma = gradcheck::random_tensor({4}, rng, false, 0.5, 1.5);
        Tensor beta = gradcheck::random_tensor({4}, rng, false);
        BatchNormStats stats{Tensor::zeros({4}), Tensor::full({4}, 1)};
        Tensor y = batch_norm(x, gamma, beta, stats, true);

        std::vector<double> xd(x.data().begin(), x.data().end());
        std::vector<double> gd(gamma.data().begin(), gamma.data().end());
        std::vector<double> bd(beta.data().begin(), beta.data().end());
        auto ref = oracle::batch_norm_2d_naive(xd, 8, 4, gd, bd, 1e-5);
        for (size_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(static_cast<double>(y.data()[i]) - ref[i]) <= 1e-5);

        // pre-affine statistics: recover xhat = (y - beta) / gamma
        for (int d = 0; d < 4; ++d) {
            double mu = 0, var = 0;
            for (int n = 0; n < 8; ++n) {
                const double xh = (y.data()[n * 4 + d] - bd[d]) / gd[d];
                mu += xh;
            }
            mu /= 8;
            for (int n = 0; n < 8; ++n) {
                const double xh = (y.data()[n * 4 + d] - bd[d]) / gd[d];
                var += (xh - mu) * (xh - mu);
            }
            var /= 8;
            CHECK(std::abs(mu) <= 1e-4);
            CHECK(std::abs(var - 1.0) <= 1e-3);  // eps shifts variance slightly below 1
        }

        // running stats moved toward batch stats with momentum 0.1
        CHECK(stats.running_mean.data()[0] != scalar(0));
        CHECK(stats.running_var.data()[0] != scalar(1));
    }

    TEST_CASE("batch_norm rejects batch of one in training mode") {
        Tensor x = Tensor::zeros({1, 3});
        Tensor gamma = Tensor::full({3}, 1);
        Tensor beta = Tensor::zeros({3});
        BatchNormStats stats{Tensor::zeros({3}), Tensor::full({3}, 1)};
        CHECK_THROWS_WITH_AS(batch_norm(x, gamma, beta, stats, true),
                             doctest::Contains("degenerate"), std::invalid_argument);
        CHECK_NOTHROW(batch_norm(x, gamma, beta, stats, false));
    }

    TEST_CASE("l2_normalize examples") {
        Tensor v = Tensor::from_data({2}, {3, 4});
        Tensor y = l2_normalize(v, 0);
        CHECK(y.data()[0] == doctest::Approx(0.6));
        CHECK(y.data()[1] == doctest::Approx(0.8));

        Tensor u = Tensor::from_data({2}, {0, 1});
        Tensor yu = l2_normalize(u, 0);
        CHECK(yu.data()[0] == doctest::Approx(0.0));
        CHECK(yu.data()[1] == doctest::Approx(1.0).epsilon(1e-5));

        Tensor z = Tensor::from_data({2}, {0, 0});
        Tensor yz = l2_normalize(z, 0);
        CHECK(yz.data()[0] == scalar(0));
        CHECK(yz.data()[1] == scalar(0));
        CHECK(std::isfinite(static_cast<double>(yz.data()[0])));
    }

    TEST_CASE("l2_normalize unit norm per row") {
        Rng rng = make_rng(13);
        Tensor v = gradcheck::random_tensor({5, 7}, rng, false, -2, 2);
        Tensor y = l2_normalize(v, 1);
        for (int r = 0; r < 5; ++r) {
            double n = 0;
            for (int d = 0; d < 7; ++d) n += static_cast<double>(y.data()[r * 7 + d]) *
                                             static_cast<double>(y.data()[r * 7 + d]);
            CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-5);
        }
    }

    TEST_CASE("stop_gradient is the identity forward") {
        Tensor v = Tensor::from_data({2}, {1, 2});
        Tensor y = stop_gradient(v);
        CHECK(y.data()[0] == scalar(1));
        CHECK(y.data()[1] == scalar(2));
        CHECK_FALSE(y.requires_grad());
    }

    TEST_CASE("backward fills leaf grads") {
        Tensor x = Tensor::full({5}, scalar(3), true);
        backward(sum(x));
        for (scalar g : x.grad_or_zeros()) CHECK(g == scalar(1));

        Tensor x2 = Tensor::from_data({2}, {1, 2}, true);
        backward(mean(mul(x2, x2)));  // d/dx mean(x^2) = 2x/n = x for n=2
        auto g2 = x2.grad_or_zeros();
        CHECK(g2[0] == doctest::Approx(1.0));
        CHECK(g2[1] == doctest::Approx(2.0));
    }

    TEST_CASE("backward rejects non-scalar loss") {
        Tensor x = Tensor::zeros({3}, true);
        CHECK_THROWS_AS(backward(add(x, x)), std::invalid_argument);
    }

    TEST_CASE("grads accumulate across backward calls and uses") {
        Tensor x = Tensor::from_data({2}, {2, 5}, true);
        Tensor y = add(x, x);  // two uses of the same node
        backward(sum(y));
        auto g = x.grad_or_zeros();
        CHECK(g[0] == scalar(2));
        CHECK(g[1] == scalar(2));
        backward(sum(add(x, x)));
        g = x.grad_or_zeros();
        CHECK(g[0] == scalar(4));
        x.zero_grad();
        CHECK(x.grad_or_zeros()[0] == scalar(0));
    }

    TEST_CASE("forward pass is deterministic bit for bit") {
        Rng rng = make_rng(17);
        Tensor x = gradcheck::random_tensor({2, 3, 6, 6}, rng, false);
        Tensor w = gradcheck::random_tensor({4, 3, 3, 3}, rng, false);
        Tensor y1 = conv2d(x, w, 2, 1);
        Tensor y2 = conv2d(x, w, 2, 1);
        for (size_t i = 0; i < y1.data().size(); ++i) CHECK(y1.data()[i] == y2.data()[i]);
    }

    TEST_CASE("concat then slice along the same axis is the identity") {
        Rng rng = make_rng(19);
        for (int axis : {0, 1}) {
            Tensor a = gradcheck::random_tensor({3, 4}, rng, false);
            Tensor b = gradcheck::random_tensor({3, 4}, rng, false);
            Tensor c = concat({a, b}, axis);
            Tensor sa = slice(c, axis, 0, a.shape()[axis]);
            Tensor sb = slice(c, axis, a.shape()[axis], b.shape()[axis]);
            for (size_t i = 0; i < a.data().size(); ++i) {
                CHECK(sa.data()[i] == a.data()[i]);
                CHECK(sb.data()[i] == b.data()[i]);
            }
        }
    }

    TEST_CASE("no-grad mode records no graph") {
        Tensor x = Tensor::full({3}, 2, true);
        NoGradGuard guard;
        Tensor y = mul(x, x);
        CHECK_FALSE(y.requires_grad());
        CHECK(y.node()->inputs.empty());
    }

    TEST_CASE("check_finite flags NaN") {
        Tensor ok = Tensor::full({2}, 1);
        CHECK_NOTHROW(check_finite(ok, "test"));
        Tensor bad = Tensor::from_data({2}, {scalar(1), std::numeric_limits<scalar>::quiet_NaN()});
        CHECK_THROWS_AS(check_finite(bad, "test"), std::runtime_error);
    }
}
