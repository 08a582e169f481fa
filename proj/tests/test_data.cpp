#include "nshawkes/data.hpp"
#include "nshawkes/errors.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace nshawkes;
using testing_support::TempDir;
using testing_support::write_file;

namespace {
const geo::Box kBox{-85.0, 33.0, -84.0, 34.0};
}

TEST(Data, TimestampsBecomeDaysFromEarliest) {
    TempDir dir;
    write_file(dir / "e.csv",
               "timestamp,lon,lat\n2021-05-12T12:00:00,-84.5,33.5\n2021-05-11T00:00:00,-84.4,33.6\n");
    const auto loaded = data::load_events(dir / "e.csv", kBox);
    ASSERT_EQ(loaded.sequence.size(), 2u);
    EXPECT_DOUBLE_EQ(loaded.sequence[0].t, 0.0);
    EXPECT_DOUBLE_EQ(loaded.sequence[1].t, 1.5);
    EXPECT_DOUBLE_EQ(loaded.sequence.horizon, 1.5);
    EXPECT_EQ(loaded.origin, "2021-05-11T00:00:00.000000");
}

TEST(Data, ColumnOrderAndTimestampForms) {
    TempDir dir;
    write_file(dir / "e.csv",
               "lat,timestamp,lon\n33.5,2021-05-11,-84.5\n33.5,2021-05-11 06:00:00Z,-84.5\n"
               "33.5,2021-05-11T12:00:00.5,-84.5\n");
    const auto seq = data::load_events(dir / "e.csv", kBox).sequence;
    ASSERT_EQ(seq.size(), 3u);
    EXPECT_DOUBLE_EQ(seq[1].t, 0.25);
    EXPECT_NEAR(seq[2].t, 0.5 + 0.5 / 86400.0, 1e-12);
}

TEST(Data, UnsortedInputIsSortedAndOrderIndependent) {
    TempDir dir;
    std::vector<std::string> rows;
    std::mt19937 rng(4);
    for (int i = 0; i < 50; ++i) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "2021-06-%02dT%02d:%02d:00,%.5f,%.5f", 1 + i % 28, i % 24,
                      (i * 7) % 60, -84.9 + 0.01 * (i % 17), 33.1 + 0.013 * (i % 11));
        rows.push_back(buf);
    }
    auto write = [&](const std::filesystem::path& p) {
        std::string text = "timestamp,lon,lat\n";
        for (const auto& r : rows) text += r + "\n";
        write_file(p, text);
    };
    write(dir / "a.csv");
    std::shuffle(rows.begin(), rows.end(), rng);
    write(dir / "b.csv");
    const auto a = data::load_events(dir / "a.csv", kBox).sequence;
    const auto b = data::load_events(dir / "b.csv", kBox).sequence;
    ASSERT_EQ(a.size(), 50u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].t, b[i].t);
        EXPECT_EQ(a[i].s, b[i].s);
        if (i > 0) EXPECT_LE(a[i - 1].t, a[i].t);
    }
}

TEST(Data, OutOfBoxRowsAreDroppedAndCounted) {
    TempDir dir;
    write_file(dir / "e.csv", "timestamp,lon,lat\n2021-05-11,-84.5,95.0\n2021-05-11,-84.5,33.5\n");
    const auto loaded = data::load_events(dir / "e.csv", kBox);
    EXPECT_EQ(loaded.dropped, 1u);
    EXPECT_EQ(loaded.sequence.size(), 1u);
}

TEST(Data, BadRowReportsLineNumber) {
    TempDir dir;
    write_file(dir / "e.csv", "timestamp,lon,lat\n2021-05-11,-84.5,33.5\nnot-a-date,-84.5,33.5\n");
    try {
        data::load_events(dir / "e.csv", kBox);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
}

TEST(Data, EmptyFileIsAnError) {
    TempDir dir;
    write_file(dir / "e.csv", "");
    EXPECT_THROW(data::load_events(dir / "e.csv", kBox), Error);
    write_file(dir / "h.csv", "timestamp,lon,lat\n");
    EXPECT_THROW(data::load_events(dir / "h.csv", kBox), Error);
}

TEST(Data, SaveLoadRoundTrip) {
    TempDir dir;
    auto seq = testing_support::random_events(40, 20.0, 3, kBox);
    data::save_events(dir / "e.csv", seq, "2020-01-01T00:00:00");
    data::LoadOptions opt;
    opt.origin = "2020-01-01T00:00:00";
    opt.horizon = 20.0;
    const auto back = data::load_events(dir / "e.csv", kBox, opt).sequence;
    ASSERT_EQ(back.size(), seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        EXPECT_NEAR(back[i].t, seq[i].t, 1e-6);
        EXPECT_DOUBLE_EQ(back[i].s.x, seq[i].s.x);
    }
}

namespace {
geo::RegionSet with_column(const std::vector<double>& col) {
    std::vector<geo::Region> rs;
    for (std::size_t i = 0; i < col.size(); ++i) {
        rs.push_back(testing_support::square("r" + std::to_string(i), static_cast<double>(i), 0, 1,
                                             {col[i]}));
    }
    return geo::RegionSet(rs, {"v"});
}
} // namespace

TEST(Data, StandardizeUsesSampleDeviation) {
    const auto [rs, stats] = data::standardize(with_column({1, 2, 3}));
    EXPECT_DOUBLE_EQ(stats.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(stats.sd[0], 1.0);
    EXPECT_DOUBLE_EQ(rs[0].covariates[0], -1.0);
    EXPECT_DOUBLE_EQ(rs[1].covariates[0], 0.0);
    EXPECT_DOUBLE_EQ(rs[2].covariates[0], 1.0);
}

TEST(Data, StandardizeIsIdempotentAndInvertible) {
    const auto raw = with_column({3.5, -1.0, 7.25, 2.0, 11.0});
    const auto [once, stats] = data::standardize(raw);
    const auto [twice, stats2] = data::standardize(once);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        EXPECT_NEAR(twice[i].covariates[0], once[i].covariates[0], 1e-12);
    }
    const auto back = data::unstandardize(once, stats);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        EXPECT_NEAR(back[i].covariates[0], raw[i].covariates[0],
                    1e-10 * std::abs(raw[i].covariates[0]));
    }
}

TEST(Data, ConstantCovariateIsNamed) {
    try {
        data::standardize(with_column({5, 5, 5}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("constant covariate 'v'"), std::string::npos);
    }
}

TEST(Data, SplitPartitionsChronologically) {
    data::EventSequence s;
    s.horizon = 4.0;
    s.events = {{1, {0, 0}}, {2, {0, 0}}, {3, {0, 0}}};
    const auto [train, test] = data::split(s, 2.5);
    EXPECT_EQ(train.size(), 2u);
    EXPECT_EQ(test.size(), 1u);
    EXPECT_DOUBLE_EQ(train.horizon, 2.5);
    EXPECT_DOUBLE_EQ(test.horizon, 4.0);

    const auto [all, none] = data::split(s, 4.0);
    EXPECT_EQ(all.size(), 3u);
    EXPECT_TRUE(none.empty());

    EXPECT_THROW(data::split(s, 0.0), Error);
    EXPECT_THROW(data::split(s, 4.5), Error);
}

TEST(Data, SplitSizesAddUp) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = testing_support::random_events(100, 10.0, seed);
        const auto [a, b] = data::split(s, 1.0 + static_cast<double>(seed) * 0.7);
        EXPECT_EQ(a.size() + b.size(), s.size());
    }
}
