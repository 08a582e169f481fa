#include "nshawkes/errors.hpp"
#include "nshawkes/kernel.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace nshawkes;
using std::numbers::pi;

namespace {

// Angle form of the focus-point covariance, used as an independent oracle.
kernel::Cov2 angle_form(geo::Point psi, double area, double scale) {
    const double n2 = psi.x * psi.x + psi.y * psi.y;
    const double q = std::sqrt(4.0 * area * area + n2 * n2 * pi * pi) / (2.0 * pi);
    const double a = std::atan2(psi.y, psi.x);
    const double s2 = scale * scale;
    return {s2 * (q + 0.5 * n2 * std::cos(2 * a)), s2 * 0.5 * n2 * std::sin(2 * a),
            s2 * (q - 0.5 * n2 * std::cos(2 * a))};
}

double dense_density(geo::Point d, const kernel::Cov2& m) {
    // Inverse via explicit 2x2 formula on a different arrangement of terms.
    const double det = m.xx * m.yy - m.xy * m.xy;
    const double i11 = m.yy / det, i12 = -m.xy / det, i22 = m.xx / det;
    const double q = d.x * (i11 * d.x + i12 * d.y) + d.y * (i12 * d.x + i22 * d.y);
    return std::exp(-q / 2) / (2 * pi * std::sqrt(det));
}

kernel::KernelParams params_with_nets(std::uint64_t seed, int R = 2) {
    const auto rs = testing_support::unit_partition(2, 2);
    return testing_support::random_params(rs, seed, R, 4).kernel;
}

} // namespace

TEST(Kernel, IsotropicCovarianceAtZeroFocus) {
    const auto s = kernel::covariance_from_focus({0, 0}, pi, 1.0);
    EXPECT_NEAR(s.xx, 1.0, 1e-15);
    EXPECT_EQ(s.xy, 0.0);
    EXPECT_NEAR(s.yy, 1.0, 1e-15);
}

TEST(Kernel, CovarianceMatchesAngleForm) {
    const auto s = kernel::covariance_from_focus({0.1, 0.0}, 0.35, 1.0);
    const auto o = angle_form({0.1, 0.0}, 0.35, 1.0);
    EXPECT_NEAR(s.xx, o.xx, 1e-15);
    EXPECT_NEAR(s.yy, o.yy, 1e-15);
    EXPECT_NEAR(s.xx, 0.1165206, 1e-7);
    EXPECT_NEAR(s.yy, 0.1065206, 1e-7);
    EXPECT_NEAR(s.xx - s.yy, 0.01, 1e-15);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.07, 0.07);
    for (int i = 0; i < 200; ++i) {
        const geo::Point psi{u(rng), u(rng)};
        const auto a = kernel::covariance_from_focus(psi, 0.35, 0.7);
        const auto b = angle_form(psi, 0.35, 0.7);
        EXPECT_NEAR(a.xx, b.xx, 1e-14);
        EXPECT_NEAR(a.xy, b.xy, 1e-14);
        EXPECT_NEAR(a.yy, b.yy, 1e-14);
    }
}

TEST(Kernel, RotatingFocusConjugatesCovariance) {
    const geo::Point psi{0.06, 0.03};
    const auto s = kernel::covariance_from_focus(psi, 0.35, 1.3);
    const auto r = kernel::covariance_from_focus({-psi.y, psi.x}, 0.35, 1.3);
    // R S R^T with R the 90 degree rotation swaps the diagonal and negates xy.
    EXPECT_NEAR(r.xx, s.yy, 1e-15);
    EXPECT_NEAR(r.yy, s.xx, 1e-15);
    EXPECT_NEAR(r.xy, -s.xy, 1e-15);
}

TEST(Kernel, EllipseAreaIsPreserved) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double area : {0.1, 0.35, pi}) {
        for (int i = 0; i < 300; ++i) {
            geo::Point psi{u(rng), u(rng)};
            const double n = std::hypot(psi.x, psi.y);
            const double radius = 0.1 * std::abs(u(rng));
            if (n > 0) psi = (radius / n) * psi;
            const auto s = kernel::covariance_from_focus(psi, area, 1.0);
            EXPECT_NEAR(pi * std::sqrt(s.det()), area, 1e-9);
        }
    }
}

TEST(Kernel, FocusGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const geo::Point psi{0.07 * u(rng), 0.07 * u(rng)};
        const kernel::CovGrad g{u(rng), u(rng), u(rng)};
        auto f = [&](geo::Point p) {
            const auto s = kernel::covariance_from_focus(p, 0.35, 0.8);
            return g.xx * s.xx + g.xy * s.xy + g.yy * s.yy;
        };
        const auto a = kernel::focus_gradient(psi, 0.35, 0.8, g);
        const double h = 1e-6;
        EXPECT_NEAR(a.x, (f({psi.x + h, psi.y}) - f({psi.x - h, psi.y})) / (2 * h), 1e-8);
        EXPECT_NEAR(a.y, (f({psi.x, psi.y + h}) - f({psi.x, psi.y - h})) / (2 * h), 1e-8);
    }
}

TEST(Kernel, GaussianTermGradient) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const geo::Point d{0.3 * u(rng), 0.3 * u(rng)};
        const kernel::Cov2 m{0.2 + 0.05 * u(rng), 0.03 * u(rng), 0.15 + 0.05 * u(rng)};
        const auto t = kernel::gaussian_term(d, m);
        EXPECT_NEAR(t.value, dense_density(d, m), 1e-13);
        const double h = 1e-7;
        auto at = [&](double dxx, double dxy, double dyy) {
            return dense_density(d, {m.xx + dxx, m.xy + dxy, m.yy + dyy});
        };
        EXPECT_NEAR(t.d_cov.xx, (at(h, 0, 0) - at(-h, 0, 0)) / (2 * h), 1e-6);
        EXPECT_NEAR(t.d_cov.xy, (at(0, h, 0) - at(0, -h, 0)) / (2 * h), 1e-6);
        EXPECT_NEAR(t.d_cov.yy, (at(0, 0, h) - at(0, 0, -h)) / (2 * h), 1e-6);
    }
}

TEST(Kernel, TemporalKernelValues) {
    EXPECT_NEAR(kernel::temporal_kernel(1e-12, 1.0, 2.0), 1.0, 1e-12);
    EXPECT_NEAR(kernel::temporal_kernel(2.0, 3.0, 2.0), 3.0 * 0.60653065971263342, 1e-15);
    EXPECT_EQ(kernel::temporal_kernel(0.0, 1.0, 1.0), 0.0);
    EXPECT_EQ(kernel::temporal_kernel(-1.0, 1.0, 1.0), 0.0);
}

TEST(Kernel, SpatialKernelAtCoincidentPointsIsotropic) {
    kernel::KernelParams p;
    p.nets = neural::FeatureNet(1, 2, 0.1, {0, 0, 1, 1});
    p.ellipse_area = pi;
    p.set_cov_scale(1.0);
    EXPECT_NEAR(kernel::spatial_kernel({0.4, 0.4}, {0.4, 0.4}, p), 1.0 / (4.0 * pi), 1e-15);
    EXPECT_NEAR(kernel::spatial_kernel({0.4, 0.4}, {0.4, 0.4}, p), 0.0795775, 1e-7);
}

TEST(Kernel, SpatialKernelMatchesDoubleSumOracle) {
    const auto p = params_with_nets(12, 3);
    const geo::Point s{0.3, 0.7}, t{0.45, 0.62};
    const auto fs = p.nets.forward(s);
    const auto ft = p.nets.forward(t);
    double oracle = 0.0;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            const auto sa = angle_form(fs.focus[a], p.ellipse_area, p.cov_scale());
            const auto tb = angle_form(ft.focus[b], p.ellipse_area, p.cov_scale());
            oracle += fs.weight[a] * ft.weight[b] *
                      dense_density(s - t, {sa.xx + tb.xx, sa.xy + tb.xy, sa.yy + tb.yy});
        }
    }
    EXPECT_NEAR(kernel::spatial_kernel(s, t, p), oracle, 1e-12 * oracle);
}

TEST(Kernel, SpatialKernelIsSymmetric) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = params_with_nets(seed);
        const geo::Point a{u(rng), u(rng)}, b{u(rng), u(rng)};
        const double ab = kernel::spatial_kernel(a, b, p);
        EXPECT_NEAR(ab, kernel::spatial_kernel(b, a, p), 1e-12 * std::max(ab, 1e-300));
    }
}

TEST(Kernel, ConstantNetsGiveShiftInvariantKernel) {
    kernel::KernelParams p;
    p.nets = neural::FeatureNet(2, 3, 0.1, {0, 0, 1, 1});
    // Only output biases: the outputs are the same at every location.
    const auto l = p.nets.layout();
    auto w = p.nets.parameters();
    w[l.b3] = 0.7;
    w[l.b3 + 1] = -0.2;
    w[l.b3 + 2] = 0.4;
    w[l.size + l.b3] = 0.1;
    p.set_cov_scale(0.2);
    const geo::Point d{0.05, -0.03};
    const double k1 = kernel::spatial_kernel({0.2, 0.3}, geo::Point{0.2, 0.3} + d, p);
    const double k2 = kernel::spatial_kernel({0.7, 0.6}, geo::Point{0.7, 0.6} + d, p);
    EXPECT_NEAR(k1, k2, 1e-12 * k1);
}

TEST(Kernel, InfluenceKernelFactorizes) {
    const auto p = params_with_nets(5);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const geo::Point a{u(rng), u(rng)}, b{u(rng), u(rng)};
        const double t = 3 * u(rng), tp = 3 * u(rng);
        const double k = kernel::influence_kernel(t, tp, a, b, p);
        EXPECT_GE(k, 0.0);
        if (t <= tp) {
            EXPECT_EQ(k, 0.0);
        } else {
            const double prod = kernel::temporal_kernel(t - tp, p.magnitude(), p.time_scale()) *
                                kernel::spatial_kernel(a, b, p);
            EXPECT_NEAR(k, prod, 1e-12 * prod);
        }
    }
}

TEST(Kernel, TriggeringIntegralLimits) {
    const std::vector<double> far{0.0};
    EXPECT_NEAR(kernel::triggering_integral(far, 50.0, 2.0, 1.0),
                2.0 * 1.0 * std::sqrt(pi / 2.0), 1e-12);
    EXPECT_NEAR(std::sqrt(pi / 2.0), 1.253314, 1e-6);
    const std::vector<double> at_end{5.0};
    EXPECT_EQ(kernel::triggering_integral(at_end, 5.0, 2.0, 1.0), 0.0);
}

TEST(Kernel, TriggeringIntegralMatchesTemporalQuadrature) {
    const std::vector<double> times{0.5, 1.2, 3.9};
    const double T = 4.5, C = 0.7, sigma = 0.8;
    double oracle = 0.0;
    for (double t : times) {
        const int n = 20000;
        const double h = (T - t) / n;
        for (int k = 0; k < n; ++k) {
            oracle += kernel::temporal_kernel((k + 0.5) * h, C, sigma) * h;
        }
    }
    EXPECT_NEAR(kernel::triggering_integral(times, T, C, sigma), oracle, 1e-8);
}

TEST(Kernel, TriggeringIntegralMonotoneInHorizon) {
    const std::vector<double> times{0.1, 0.4, 2.0, 2.2};
    double prev = 0.0;
    for (double T = 2.2; T < 10.0; T += 0.3) {
        const double v = kernel::triggering_integral(times, T, 1.0, 0.5);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(Kernel, ErrorBoundAtDefaults) {
    const double c2 = 0.01, a = 0.35;
    const double u = (std::sqrt(4 * a * a + c2 * c2 * pi * pi) + c2 * pi) / (2 * a);
    const double bound = kernel::triggering_error_bound(0.35, 0.1);
    EXPECT_NEAR(bound, std::max(u - 1, 1 - 1 / u), 1e-15);
    EXPECT_NEAR(bound, 0.0459, 1e-4);
    EXPECT_LT(bound, 0.05);
}

TEST(Kernel, ThinningBoundsDominateKernel) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = params_with_nets(seed);
        const double bound = kernel::spatial_kernel_bound(p);
        for (int i = 0; i < 50; ++i) {
            const geo::Point a{u(rng), u(rng)};
            const geo::Point b = a + geo::Point{0.01 * u(rng), 0.01 * u(rng)};
            EXPECT_LE(kernel::spatial_kernel(a, b, p), bound);
        }
    }
}
