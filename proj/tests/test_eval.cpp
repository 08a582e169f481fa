#include "nshawkes/errors.hpp"
#include "nshawkes/eval.hpp"
#include "nshawkes/model.hpp"
#include "nshawkes/simulate.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace nshawkes;
using testing_support::random_events;
using testing_support::random_params;
using testing_support::unit_partition;

namespace {

model::ModelParams flat_params(const geo::RegionSet& rs, double mu0) {
    auto p = random_params(rs, 1);
    p.kernel.log_magnitude = -INFINITY;
    p.background.set_base_rate(mu0);
    std::fill(p.background.gamma.begin(), p.background.gamma.end(), 0.0);
    return p;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

} // namespace

TEST(Eval, HomogeneousCountsMatchRateTimesVolume) {
    const auto rs = unit_partition(2, 2);
    const auto grid = geo::build_grid(rs, 0.01);
    const model::NeuralSurface surface(flat_params(rs, 1.0), rs);
    const eval::CountIntegrator integ(surface, rs, grid);
    const auto c = integ.expected_counts(0.0, 3.0, {}, eval::HistoryMode::InSample);
    for (double v : c) EXPECT_NEAR(v, 1.5, 0.015);
    EXPECT_NEAR(sum(c), 6.0, 0.06);
}

TEST(Eval, NeuralTemporalIntegralMatchesQuadrature) {
    const auto rs = unit_partition(2, 2);
    const model::NeuralSurface s(random_params(rs, 3), rs);
    const int n = 200000;
    const double lo = 0.3, hi = 2.1;
    double q = 0.0;
    for (int k = 0; k < n; ++k) q += s.temporal(lo + (k + 0.5) * (hi - lo) / n);
    q *= (hi - lo) / n;
    EXPECT_NEAR(s.temporal_integral(lo, hi), q, 1e-9);
}

TEST(Eval, CountsAddOverIntervals) {
    const auto rs = unit_partition(3, 3);
    const auto grid = geo::build_grid(rs, 0.02);
    const model::NeuralSurface surface(random_params(rs, 4), rs);
    const eval::CountIntegrator integ(surface, rs, grid, 0.0);
    const auto ev = random_events(30, 4.0, 4);
    const auto a = integ.expected_counts(0.0, 1.7, ev, eval::HistoryMode::InSample);
    const auto b = integ.expected_counts(1.7, 4.0, ev, eval::HistoryMode::InSample);
    const auto whole = integ.expected_counts(0.0, 4.0, ev, eval::HistoryMode::InSample);
    for (std::size_t j = 0; j < rs.size(); ++j) {
        EXPECT_NEAR(a[j] + b[j], whole[j], 1e-10 * whole[j]);
    }
}

TEST(Eval, RegionCountsAddToDomainMass) {
    const auto rs = unit_partition(3, 3);
    const auto grid = geo::build_grid(rs, 0.01);
    auto p = random_params(rs, 5);
    p.kernel.set_cov_scale(0.15);
    const model::NeuralSurface surface(p, rs);
    const eval::CountIntegrator integ(surface, rs, grid, 0.0);
    data::EventSequence ev;
    ev.events = {{0.5, {0.5, 0.5}}};
    ev.horizon = 3.0;
    const auto c = integ.expected_counts(1.0, 3.0, ev, eval::HistoryMode::Frozen);
    const double expected = sum(integ.background_mass()) * 2.0 + surface.temporal_integral(0.5, 2.5);
    EXPECT_NEAR(sum(c), expected, 0.01 * expected);
}

TEST(Eval, FrozenWithoutHistoryIsBackgroundOnly) {
    const auto rs = unit_partition(3, 3);
    const auto grid = geo::build_grid(rs, 0.02);
    const model::NeuralSurface surface(random_params(rs, 6), rs);
    const eval::CountIntegrator integ(surface, rs, grid);
    const auto ev = random_events(20, 4.0, 6);
    data::EventSequence late;
    for (const auto& e : ev) {
        if (e.t >= 2.0) late.events.push_back(e);
    }
    late.horizon = 4.0;
    const auto c = integ.expected_counts(2.0, 3.0, late, eval::HistoryMode::Frozen);
    for (std::size_t j = 0; j < rs.size(); ++j) EXPECT_EQ(c[j], integ.background_mass()[j]);
}

TEST(Eval, TimeStepRefinementIsStable) {
    const auto rs = unit_partition(3, 3);
    const auto grid = geo::build_grid(rs, 0.02);
    const model::NeuralSurface surface(random_params(rs, 7), rs);
    const auto ev = random_events(40, 10.0, 7);
    const eval::CountIntegrator coarse(surface, rs, grid, 0.25), fine(surface, rs, grid, 0.125),
        exact(surface, rs, grid, 0.0);
    const auto a = coarse.expected_counts(7.0, 10.0, ev, eval::HistoryMode::Frozen);
    const auto b = fine.expected_counts(7.0, 10.0, ev, eval::HistoryMode::Frozen);
    const auto e = exact.expected_counts(7.0, 10.0, ev, eval::HistoryMode::Frozen);
    for (std::size_t j = 0; j < rs.size(); ++j) {
        EXPECT_LT(std::abs(a[j] - b[j]) / b[j], 0.005);
        EXPECT_LT(std::abs(b[j] - e[j]) / e[j], 0.005);
    }
}

TEST(Eval, UnknownRegionIsContractError) {
    const auto rs = unit_partition(2, 2);
    const auto grid = geo::build_grid(rs, 0.05);
    const model::NeuralSurface surface(flat_params(rs, 1.0), rs);
    const eval::CountIntegrator integ(surface, rs, grid);
    EXPECT_THROW(integ.expected_count(0, 1, "nowhere", {}, eval::HistoryMode::Frozen),
                 ContractError);
    EXPECT_NO_THROW(integ.expected_count(0, 1, rs[0].id, {}, eval::HistoryMode::Frozen));
    EXPECT_THROW(integ.expected_counts(2, 1, {}, eval::HistoryMode::Frozen), ContractError);
}

TEST(Eval, FrequentSetIsTopFifthWithLowIndexTies) {
    const std::vector<double> counts{5, 9, 1, 9, 9, 0, 3, 2, 2, 4};
    EXPECT_EQ(eval::frequent_regions(counts), (std::vector<std::size_t>{1, 3}));
    const std::vector<double> three{1, 1, 1};
    EXPECT_EQ(eval::frequent_regions(three), (std::vector<std::size_t>{0}));
}

TEST(Eval, ObservedCountsBinEvents) {
    const auto rs = unit_partition(2, 1);
    data::EventSequence ev;
    ev.horizon = 2.0;
    ev.events = {{0.0, {0.2, 0.5}}, {0.99, {0.7, 0.5}}, {1.0, {0.7, 0.5}}, {2.0, {0.2, 0.5}},
                 {1.5, {3.0, 3.0}}};
    const auto c = eval::observed_counts(ev, rs, {0.0, 1.0, 2.0});
    EXPECT_EQ(c[0], (std::vector<double>{1, 1}));
    EXPECT_EQ(c[1], (std::vector<double>{1, 1}));
}

TEST(Eval, TotalMaeIsWeightedAverage) {
    eval::PredictionReport r;
    r.region_ids = {"a", "b", "c", "d", "e"};
    r.predicted = {{1, 2, 3, 4, 5}, {0, 0, 1, 1, 9}};
    r.observed = {{2, 2, 1, 4, 0}, {1, 3, 1, 0, 6}};
    r.frequent = {4};
    eval::score(r);
    EXPECT_DOUBLE_EQ(r.mae_frequent, 4.0);
    EXPECT_DOUBLE_EQ(r.mae_rare, (1 + 0 + 2 + 0 + 1 + 3 + 0 + 1) / 8.0);
    EXPECT_NEAR(r.mae_total, (8 * r.mae_rare + 2 * r.mae_frequent) / 10.0, 1e-15);
    // City totals: 15 vs 9, then 11 vs 11.
    EXPECT_DOUBLE_EQ(r.city_mae, 3.0);
    EXPECT_DOUBLE_EQ(r.mre, (6.0 / 9.0) / 2.0);
}

TEST(Eval, WeeksAndTrainingSeries) {
    EXPECT_EQ(eval::test_weeks(10.0, 24.5), (std::vector<double>{10, 17, 24}));
    EXPECT_THROW(eval::test_weeks(10.0, 16.0), ContractError);
    const auto rs = unit_partition(1, 1);
    data::EventSequence train;
    train.horizon = 15.0;
    train.events = {{0.5, {0.5, 0.5}}, {1.5, {0.5, 0.5}}, {2.0, {0.5, 0.5}}, {9.0, {0.5, 0.5}}};
    const auto s = eval::training_series(train, rs);
    // Full weeks [1, 8) and [8, 15]; the event at 0.5 falls before them.
    EXPECT_EQ(s.counts[0], (std::vector<double>{2, 1}));
}

TEST(Eval, OutOfSampleHasNoLeakage) {
    const auto rs = unit_partition(2, 2);
    const auto grid = geo::build_grid(rs, 0.05);
    const model::NeuralSurface surface(random_params(rs, 8), rs);
    const eval::CountIntegrator integ(surface, rs, grid);
    const auto all = random_events(120, 35.0, 8);
    const auto [train, test] = data::split(all, 14.0);
    auto altered = test;
    // Move every event of the last week; earlier predictions must not notice.
    for (auto& e : altered.events) {
        if (e.t >= 28.0) e.s = {0.9, 0.9};
    }
    const auto a = eval::oos_predict(integ, train, test, rs);
    const auto b = eval::oos_predict(integ, train, altered, rs);
    ASSERT_EQ(a.predicted.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(a.predicted[k], b.predicted[k]);

    const eval::SeriesPredictor last = [](const baselines::WeeklySeries& s) {
        return baselines::persistent_predict(s);
    };
    const auto pa = eval::oos_predict_series(last, train, test, rs);
    const auto pb = eval::oos_predict_series(last, train, altered, rs);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(pa.predicted[k], pb.predicted[k]);
    EXPECT_EQ(pa.predicted[1], pa.observed[0]);
}

TEST(Eval, RenderWithoutEventsShowsBackground) {
    const auto rs = unit_partition(2, 2);
    const auto grid = geo::build_grid(rs, 0.1);
    const model::NeuralSurface surface(flat_params(rs, 0.7), rs);
    const auto raster = eval::render_intensity(surface, grid, 1.0, {});
    ASSERT_EQ(raster.size(), grid.active_cells().size());
    for (const auto& c : raster) EXPECT_NEAR(c.intensity, 1.7, 1e-12);
}

TEST(Eval, RenderJumpMatchesKernel) {
    const auto rs = unit_partition(2, 2);
    const auto grid = geo::build_grid(rs, 0.1);
    const auto p = random_params(rs, 9);
    const model::NeuralSurface surface(p, rs);
    data::EventSequence h;
    h.events = {{0.9, {0.43, 0.61}}};
    const auto before = eval::render_intensity(surface, grid, 1.0, {});
    const auto after = eval::render_intensity(surface, grid, 1.0, h);
    for (std::size_t k = 0; k < before.size(); ++k) {
        EXPECT_GT(before[k].intensity, 0.0);
        const double jump = kernel::influence_kernel(1.0, 0.9, after[k].center, {0.43, 0.61}, p.kernel);
        EXPECT_NEAR(after[k].intensity - before[k].intensity, jump, 1e-9 * (1.0 + jump));
    }
}

TEST(Eval, KernelSamplesRespectFocusBound) {
    const auto rs = unit_partition(2, 2);
    const auto p = random_params(rs, 10);
    const auto samples = eval::kernel_samples(p.kernel, rs, 50, 3);
    ASSERT_EQ(samples.size(), 50u * 2u);
    for (const auto& s : samples) {
        EXPECT_LE(std::hypot(s.focus.x, s.focus.y), p.kernel.focus_bound() + 1e-15);
        EXPECT_TRUE(geo::region_of(s.location, rs).has_value());
    }
    auto zero = p.kernel;
    for (double& w : zero.nets.parameters()) w = 0.0;
    for (const auto& s : eval::kernel_samples(zero, rs, 10, 3)) {
        EXPECT_EQ(s.focus.x, 0.0);
        EXPECT_EQ(s.focus.y, 0.0);
        EXPECT_DOUBLE_EQ(s.weight, 0.5);
    }
}

TEST(Eval, SelfConsistentMonthlyTotals) {
    const auto rs = unit_partition(3, 3);
    const auto grid = geo::build_grid(rs, 0.02);
    auto p = random_params(rs, 12);
    p.kernel.set_magnitude(0.4);
    p.kernel.set_time_scale(1.0);
    p.kernel.set_cov_scale(0.1);
    p.background.set_base_rate(3.0);
    std::fill(p.background.gamma.begin(), p.background.gamma.end(), 0.0);
    simulate::SimConfig sc;
    sc.horizon = 180.0;
    sc.seed = 12;
    const auto ev = simulate::simulate(p, rs, sc);
    const model::NeuralSurface surface(p, rs);
    const eval::CountIntegrator integ(surface, rs, grid);
    const auto r = eval::insample_series(integ, ev, rs);
    ASSERT_EQ(r.predicted.size(), 6u);
    EXPECT_GT(static_cast<double>(ev.size()) / 6.0, 150.0);
    EXPECT_LT(r.mre, 0.10);
}
