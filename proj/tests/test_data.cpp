#include "stackgp/data.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "stackgp/errors.hpp"
#include "temp_dir.hpp"

namespace stackgp::data {
namespace {

using std::chrono::days;
using testing_support::TempDir;
using testing_support::write_file;

std::chrono::sys_days ymd(int y, unsigned m, unsigned d) {
    return std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

// ---------------------------------------------------------------------------

TEST(CalendarTest, MonthRoundTrip) {
    EXPECT_EQ(month_index(1970, 1), 0);
    EXPECT_EQ(month_index(1969, 12), -1);
    EXPECT_EQ(format_month(month_index(2015, 12)), "2015-12");
    EXPECT_EQ(parse_month("2016-02"), month_index(2016, 2));
    EXPECT_EQ(format_month(-1), "1969-12");
    EXPECT_EQ(days_in_month(month_index(2016, 2)), 29);
    EXPECT_EQ(days_in_month(month_index(2015, 2)), 28);
    EXPECT_THROW(parse_month("2016-13"), SchemaError);
    EXPECT_THROW(parse_month("2016/01"), SchemaError);
    EXPECT_THROW(parse_date("2015-02-29"), SchemaError);
    EXPECT_EQ(format_date(parse_date("2016-02-29")), "2016-02-29");
}

// ---------------------------------------------------------------------------

TEST(DisaggregateTest, UniformSplitAcrossThirtyDayOverlaps) {
    // May 2 .. Jul 30 is 90 days: 30 in May, 30 in June, 30 in July.
    const auto out = disaggregate_quarterly({{ymd(2015, 5, 2), ymd(2015, 7, 30), 900.0}});
    ASSERT_EQ(out.size(), 3u);
    for (const auto& m : out) {
        EXPECT_EQ(m.exact, Rational(300));
        EXPECT_EQ(m.value, 300.0);
        EXPECT_EQ(m.covered_days, 30);
        EXPECT_FALSE(m.missing);
    }
}

TEST(DisaggregateTest, DayCountProportions) {
    const auto out = disaggregate_quarterly({{ymd(2015, 1, 1), ymd(2015, 3, 31), 920.0}});
    ASSERT_EQ(out.size(), 3u);
    const Rational total(920);
    EXPECT_EQ(out[0].exact, total * 31 / 90);
    EXPECT_EQ(out[1].exact, total * 28 / 90);
    EXPECT_EQ(out[2].exact, total * 31 / 90);
    EXPECT_NEAR(out[1].value, 920.0 * 28.0 / 90.0, 1e-12);
    EXPECT_EQ(out[0].month, month_index(2015, 1));
}

TEST(DisaggregateTest, AdjacentQuartersConserveExactly) {
    const auto out = disaggregate_quarterly({{ymd(2015, 4, 1), ymd(2015, 6, 30), 1234.5},
                                             {ymd(2015, 1, 1), ymd(2015, 3, 31), 987.25},
                                             {ymd(2015, 7, 1), ymd(2015, 9, 17), 333.3}});
    Rational sum = 0;
    for (const auto& m : out) sum += m.exact;
    EXPECT_EQ(sum, Rational(1234.5) + Rational(987.25) + Rational(333.3));
}

TEST(DisaggregateTest, RandomIntervalSetsConserve) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<BillingInterval> ivs;
        auto day = ymd(2012, 1, 1) + days{std::uniform_int_distribution<int>(0, 400)(rng)};
        Rational expected = 0;
        const int n = std::uniform_int_distribution<int>(1, 8)(rng);
        for (int i = 0; i < n; ++i) {
            const auto start = day + days{std::uniform_int_distribution<int>(0, 20)(rng)};
            const auto end = start + days{std::uniform_int_distribution<int>(0, 120)(rng)};
            const double total = std::uniform_real_distribution<double>(0.0, 5000.0)(rng);
            ivs.push_back({start, end, total});
            expected += Rational(total);
            day = end + days{1};
        }
        std::shuffle(ivs.begin(), ivs.end(), rng);
        Rational sum = 0;
        for (const auto& m : disaggregate_quarterly(ivs)) sum += m.exact;
        EXPECT_EQ(sum, expected);
    }
}

TEST(DisaggregateTest, GapMonthsMarkedMissing) {
    const auto out = disaggregate_quarterly(
        {{ymd(2015, 1, 1), ymd(2015, 1, 31), 100.0}, {ymd(2015, 4, 1), ymd(2015, 4, 30), 50.0}});
    ASSERT_EQ(out.size(), 4u);
    EXPECT_FALSE(out[0].missing);
    EXPECT_TRUE(out[1].missing);
    EXPECT_TRUE(out[2].missing);
    EXPECT_EQ(out[1].exact, Rational(0));
    EXPECT_FALSE(out[3].missing);
}

TEST(DisaggregateTest, PartialCoverageRecorded) {
    const auto out = disaggregate_quarterly({{ymd(2015, 1, 15), ymd(2015, 2, 28), 45.0}});
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].covered_days, 17);
    EXPECT_EQ(out[1].covered_days, 28);
    EXPECT_EQ(out[0].exact, Rational(17));
}

TEST(DisaggregateTest, Errors) {
    EXPECT_THROW(disaggregate_quarterly({{ymd(2015, 1, 1), ymd(2015, 3, 31), 10.0},
                                         {ymd(2015, 3, 31), ymd(2015, 6, 30), 10.0}}),
                 OverlapError);
    EXPECT_THROW(disaggregate_quarterly({{ymd(2015, 1, 1), ymd(2015, 3, 31), -1.0}}), NegativeTotal);
    EXPECT_THROW(disaggregate_quarterly({{ymd(2015, 3, 1), ymd(2015, 1, 31), 1.0}}), InvalidInterval);
    EXPECT_TRUE(disaggregate_quarterly({}).empty());
}

// ---------------------------------------------------------------------------

struct CsvFixture {
    TempDir dir;
    std::filesystem::path readings = dir / "readings.csv";
    std::filesystem::path weather = dir / "weather.csv";
    std::filesystem::path demographics = dir / "demographics.csv";
};

/// Two households with monthly bills Jan 2014 .. Dec 2015 and weather for
/// every month except the last one in NSW.
void write_two_household_fixture(const CsvFixture& f) {
    std::ostringstream r, w;
    r << "task_id,period_start,period_end,consumption,unit\n";
    w << "region,month,mean_temp_c,hdd,cdd\n";
    for (MonthIndex m = month_index(2014, 1); m <= month_index(2015, 12); ++m) {
        const auto start = first_day(m);
        const auto end = first_day(m + 1) - days{1};
        r << "A," << format_date(start) << "," << format_date(end) << "," << 100 + m % 7 << ",MJ\n";
        r << "B," << format_date(start) << "," << format_date(end) << "," << 200.5 << ",MJ\n";
        w << "VIC," << format_month(m) << ",12.5,170,0\n";
        if (m != month_index(2015, 12)) w << "NSW," << format_month(m) << ",18.5,0,15\n";
    }
    write_file(f.readings, r.str());
    write_file(f.weather, w.str());
    write_file(f.demographics, "task_id,region,income_band,num_rooms\nA,VIC,low,3\nB,NSW,\"high\",5\n");
}

TEST(IngestTest, TwoHouseholdFixture) {
    CsvFixture f;
    write_two_household_fixture(f);
    const auto panel = ingest_csv(f.readings, f.weather, f.demographics);
    ASSERT_EQ(panel.tasks.size(), 2u);
    EXPECT_EQ(panel.unit, Unit::MJ);
    for (const auto& t : panel.tasks) {
        EXPECT_EQ(t.times.size(), 24u);
        EXPECT_EQ(t.weather.size(), 24u);
        EXPECT_EQ(t.times.front(), month_index(2014, 1));
    }
    const auto& a = panel.task("A");
    EXPECT_EQ(a.loads[0], 100.0 + month_index(2014, 1) % 7);
    EXPECT_EQ(std::get<std::string>(a.demographics.at("income_band")), "low");
    EXPECT_EQ(std::get<double>(a.demographics.at("num_rooms")), 3.0);
    EXPECT_EQ(a.weather[0]->hdd, 170.0);

    const auto& b = panel.task("B");
    EXPECT_EQ(std::get<std::string>(b.demographics.at("income_band")), "high");
    EXPECT_TRUE(b.weather[22].has_value());
    EXPECT_FALSE(b.weather[23].has_value());
}

TEST(IngestTest, SerializeRoundTrip) {
    CsvFixture f;
    write_two_household_fixture(f);
    const auto panel = ingest_csv(f.readings, f.weather, f.demographics);
    const auto text = serialize_panel(panel);
    const auto back = parse_panel(text);
    EXPECT_EQ(back, panel);
    EXPECT_EQ(serialize_panel(back), text);
    write_panel(f.dir / "panel.json", panel);
    EXPECT_EQ(read_panel(f.dir / "panel.json"), panel);
}

TEST(IngestTest, OrphanReadingNamesTask) {
    CsvFixture f;
    write_two_household_fixture(f);
    write_file(f.demographics, "task_id,region,income_band,num_rooms\nA,VIC,low,3\n");
    try {
        ingest_csv(f.readings, f.weather, f.demographics);
        FAIL() << "expected JoinError";
    } catch (const JoinError& e) {
        EXPECT_NE(std::string(e.what()).find("'B'"), std::string::npos);
    }
}

TEST(IngestTest, MissingColumnAndUnknownUnit) {
    CsvFixture f;
    write_two_household_fixture(f);
    write_file(f.demographics, "task_id,region,num_rooms\nA,VIC,3\nB,NSW,5\n");
    EXPECT_THROW(ingest_csv(f.readings, f.weather, f.demographics), SchemaError);

    write_two_household_fixture(f);
    write_file(f.readings,
               "task_id,period_start,period_end,consumption,unit\nA,2015-01-01,2015-03-31,10,therms\n");
    EXPECT_THROW(ingest_csv(f.readings, f.weather, f.demographics), UnitError);
}

TEST(IngestTest, ExtraDemographicColumns) {
    CsvFixture f;
    write_two_household_fixture(f);
    write_file(f.demographics,
               "task_id,region,income_band,num_rooms,dwelling,occupants\nA,VIC,low,3,house,2\nB,NSW,high,5,flat,4\n");
    IngestOptions opts;
    opts.extra_categorical = {"dwelling"};
    opts.extra_numeric = {"occupants"};
    const auto panel = ingest_csv(f.readings, f.weather, f.demographics, opts);
    ASSERT_EQ(panel.fields.size(), 4u);
    EXPECT_EQ(std::get<std::string>(panel.task("B").demographics.at("dwelling")), "flat");
    EXPECT_EQ(std::get<double>(panel.task("B").demographics.at("occupants")), 4.0);
    EXPECT_EQ(parse_panel(serialize_panel(panel)), panel);
}

/// Quarterly bills for the given number of consecutive months ending at
/// `last`, with monthly loads mean_load + swing*cos(month). Intervals always
/// cover whole months so every month survives ingestion.
void append_bills(std::ostream& out, const std::string& id, MonthIndex last, int months, double mean_load,
                  double swing) {
    const MonthIndex first = last - months + 1;
    for (MonthIndex m = first; m <= last; m += 3) {
        const MonthIndex end_m = std::min(last, m + 2);
        double total = 0.0;
        for (MonthIndex k = m; k <= end_m; ++k)
            total += mean_load + swing * std::cos(2.0 * 3.141592653589793 * month_of_year(k) / 12.0);
        out << id << "," << format_date(first_day(m)) << "," << format_date(first_day(end_m + 1) - days{1}) << ","
            << total << ",MJ\n";
    }
}

TEST(IngestTest, MultiRegionPanelFixture) {
    // Training: 127 households with 36 months and one with 14 (4586 samples).
    // Testing: 740 households with 12 months in 2016 and one with 2 (8882).
    CsvFixture f;
    std::ostringstream r, d, w;
    r << std::setprecision(17) << "task_id,period_start,period_end,consumption,unit\n";
    d << "task_id,region,income_band,num_rooms\n";
    w << "region,month,mean_temp_c,hdd,cdd\n";
    for (MonthIndex m = month_index(2013, 1); m <= month_index(2016, 12); ++m) w << "VIC," << format_month(m) << ",15,90,0\n";
    const MonthIndex train_end = month_index(2015, 12), test_end = month_index(2016, 12);
    for (int i = 0; i < 741; ++i) {
        const std::string id = "V" + std::to_string(1000 + i);
        d << id << ",VIC,mid,4\n";
        if (i < 128) append_bills(r, id, train_end, i == 127 ? 14 : 36, 4100.0, 1500.0);
        append_bills(r, id, i == 740 ? train_end + 2 : test_end, i == 740 ? 2 : 12, 4500.0, 1500.0);
    }
    write_file(f.readings, r.str());
    write_file(f.demographics, d.str());
    write_file(f.weather, w.str());

    const auto panel = ingest_csv(f.readings, f.weather, f.demographics);
    const auto views = split(panel, train_end, test_end);
    std::size_t n_train = 0, n_test = 0;
    double sum = 0.0;
    for (const auto& t : views.train.tasks) {
        n_train += t.loads.size();
        for (double v : t.loads) sum += v;
    }
    for (const auto& t : views.test.tasks) n_test += t.loads.size();
    EXPECT_EQ(n_train, 4586u);
    EXPECT_EQ(n_test, 8882u);
    EXPECT_NEAR(sum / static_cast<double>(n_train), 4100.0, 50.0);
}

// ---------------------------------------------------------------------------

PanelDataset toy_panel() {
    SynthConfig cfg;
    cfg.n_tasks = 5;
    cfg.start = month_index(2013, 1);
    cfg.train_end = month_index(2015, 12);
    cfg.min_train_months = 36;
    cfg.max_train_months = 36;
    cfg.test_months = 12;
    return generate_synthetic(cfg);
}

TEST(SplitTest, FullTasksGetThirtySixAndTwelve) {
    const auto panel = toy_panel();
    const auto v = split(panel, month_index(2015, 12), month_index(2016, 12));
    ASSERT_EQ(v.train.tasks.size(), 5u);
    ASSERT_EQ(v.test.tasks.size(), 5u);
    for (const auto& t : v.train.tasks) EXPECT_EQ(t.times.size(), 36u);
    for (const auto& t : v.test.tasks) EXPECT_EQ(t.times.size(), 12u);
    EXPECT_EQ(v.train.split->train_end, month_index(2015, 12));
}

TEST(SplitTest, EveryObservationInExactlyOneView) {
    auto panel = toy_panel();
    panel.tasks[1].times.erase(panel.tasks[1].times.begin(), panel.tasks[1].times.begin() + 30);
    panel.tasks[1].loads.erase(panel.tasks[1].loads.begin(), panel.tasks[1].loads.begin() + 30);
    align_weather(panel);
    const auto v = split(panel, month_index(2015, 12), month_index(2016, 12));
    EXPECT_EQ(v.train.task(panel.tasks[1].task_id).times.size(), 6u);

    std::multiset<std::pair<std::string, MonthIndex>> all, seen;
    for (const auto& t : panel.tasks)
        for (auto m : t.times) all.insert({t.task_id, m});
    for (const auto* view : {&v.train, &v.test})
        for (const auto& t : view->tasks)
            for (std::size_t i = 0; i < t.times.size(); ++i) {
                seen.insert({t.task_id, t.times[i]});
                EXPECT_EQ(*panel.task(t.task_id).load_at(t.times[i]), t.loads[i]);
            }
    EXPECT_EQ(seen, all);
}

TEST(SplitTest, BoundaryAfterAllData) {
    const auto panel = toy_panel();
    EXPECT_THROW(split(panel, month_index(2017, 6), month_index(2018, 6)), EmptySplit);
    EXPECT_THROW(split(panel, month_index(2012, 6), month_index(2012, 12)), EmptySplit);
    EXPECT_THROW(split(panel, month_index(2015, 12), month_index(2015, 12)), InvalidInterval);
}

// ---------------------------------------------------------------------------

TEST(SynthTest, NoiseFreeMatchesGeneratingFunction) {
    SynthConfig cfg;
    cfg.n_tasks = 20;
    cfg.noise_level = 0.0;
    cfg.phase_jitter = 0.5;
    const auto panel = generate_synthetic(cfg);
    const auto truth = synthetic_truth(panel);
    ASSERT_EQ(truth.size(), 20u);
    for (std::size_t i = 0; i < panel.tasks.size(); ++i) {
        const auto& t = panel.tasks[i];
        ASSERT_EQ(truth[i].task_id, t.task_id);
        for (std::size_t k = 0; k < t.times.size(); ++k) {
            const double expected = std::max(0.0, synthetic_signal(cfg, truth[i], t.times[k], *t.weather[k]));
            EXPECT_EQ(t.loads[k], expected);
        }
    }
}

TEST(SynthTest, DeterministicPerSeed) {
    SynthConfig cfg;
    cfg.n_tasks = 15;
    EXPECT_EQ(serialize_panel(generate_synthetic(cfg)), serialize_panel(generate_synthetic(cfg)));
    auto other = cfg;
    other.seed = cfg.seed + 1;
    EXPECT_NE(generate_synthetic(cfg), generate_synthetic(other));
}

TEST(SynthTest, HistoryLengthsAndLayout) {
    SynthConfig cfg;
    cfg.n_tasks = 40;
    const auto panel = generate_synthetic(cfg);
    std::set<std::string> ids;
    for (const auto& t : panel.tasks) {
        ids.insert(t.task_id);
        const auto n_train = std::count_if(t.times.begin(), t.times.end(), [&](MonthIndex m) { return m <= cfg.train_end; });
        EXPECT_GE(n_train, cfg.min_train_months);
        EXPECT_LE(n_train, cfg.max_train_months);
        EXPECT_EQ(t.times.back(), cfg.train_end + cfg.test_months);
        for (const auto& w : t.weather) EXPECT_TRUE(w.has_value());
        for (double v : t.loads) EXPECT_GE(v, 0.0);
    }
    EXPECT_EQ(ids.size(), 40u);
    EXPECT_EQ(panel.tasks.front().task_id, "H01");
    EXPECT_EQ(synthetic_config(panel).n_tasks, 40);
    EXPECT_EQ(parse_panel(serialize_panel(panel)), panel);
}

TEST(SynthTest, WinterExceedsSummerUnderHeatingCoupling) {
    SynthConfig cfg;
    cfg.n_tasks = 30;
    cfg.seasonal_amplitude = 0.0;
    cfg.amplitude_rooms_effect = 0.0;
    cfg.hdd_coupling = 2.0;
    cfg.cdd_coupling = 0.0;
    const auto panel = generate_synthetic(cfg);
    const auto truth = synthetic_truth(panel);
    double winter = 0.0, summer = 0.0, winter_oracle = 0.0, summer_oracle = 0.0;
    int nw = 0, ns = 0;
    for (std::size_t i = 0; i < panel.tasks.size(); ++i) {
        const auto& t = panel.tasks[i];
        for (std::size_t k = 0; k < t.times.size(); ++k) {
            const unsigned moy = month_of_year(t.times[k]);
            const auto& w = *t.weather[k];
            // Amplitude is clamped to at least 5% of base, so recompute it.
            const double oracle = truth[i].base + truth[i].amplitude *
                                                      std::cos(2.0 * 3.141592653589793 * (moy - 7.0) / 12.0) +
                                  2.0 * w.hdd;
            if (moy >= 6 && moy <= 8) {
                winter += t.loads[k];
                winter_oracle += oracle;
                ++nw;
            } else if (moy == 12 || moy <= 2) {
                summer += t.loads[k];
                summer_oracle += oracle;
                ++ns;
            }
        }
    }
    ASSERT_GT(nw, 0);
    ASSERT_GT(ns, 0);
    EXPECT_GT(winter_oracle / nw, summer_oracle / ns);
    EXPECT_GT(winter / nw, summer / ns);
}

TEST(SynthTest, InvalidConfigs) {
    SynthConfig cfg;
    cfg.n_tasks = 0;
    EXPECT_THROW(generate_synthetic(cfg), ConfigError);
    cfg = SynthConfig{};
    cfg.noise_level = -1.0;
    EXPECT_THROW(generate_synthetic(cfg), ConfigError);
    cfg = SynthConfig{};
    cfg.start = cfg.train_end - 2;
    cfg.test_months = 2;
    EXPECT_THROW(generate_synthetic(cfg), ConfigError);
}

TEST(SynthTest, ConfigJsonRoundTrip) {
    SynthConfig cfg;
    cfg.n_tasks = 7;
    cfg.regions = {"SA"};
    cfg.noise_level = 12.5;
    const auto back = synth_config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(back), to_json(cfg));
    EXPECT_THROW(synth_config_from_json({{"n_taks", 3}}), ConfigError);
    EXPECT_THROW(synth_config_from_json({{"n_tasks", "three"}}), ConfigError);
}

TEST(SynthTest, ShuffleCorruptsTrainingWindowOnly) {
    SynthConfig cfg;
    cfg.n_tasks = 30;
    const auto clean = generate_synthetic(cfg);
    auto corrupted = clean;
    const auto ids = shuffle_task_loads(corrupted, cfg.train_end, 10, 5);
    ASSERT_EQ(ids.size(), 10u);
    const std::set<std::string> id_set(ids.begin(), ids.end());
    EXPECT_EQ(id_set.size(), 10u);
    for (std::size_t i = 0; i < clean.tasks.size(); ++i) {
        const auto& a = clean.tasks[i];
        const auto& b = corrupted.tasks[i];
        const auto n = static_cast<long>(std::count_if(a.times.begin(), a.times.end(),
                                                       [&](MonthIndex m) { return m <= cfg.train_end; }));
        std::vector<double> ta(a.loads.begin(), a.loads.begin() + n), tb(b.loads.begin(), b.loads.begin() + n);
        EXPECT_TRUE(std::equal(a.loads.begin() + n, a.loads.end(), b.loads.begin() + n));
        if (id_set.count(a.task_id)) {
            EXPECT_NE(ta, tb);
            std::sort(ta.begin(), ta.end());
            std::sort(tb.begin(), tb.end());
            EXPECT_EQ(ta, tb);
        } else {
            EXPECT_EQ(ta, tb);
        }
    }
    EXPECT_THROW(shuffle_task_loads(corrupted, cfg.train_end, 31, 5), ConfigError);
}

TEST(PanelTest, ValidateRejectsBadSeries) {
    auto panel = toy_panel();
    auto dup = panel;
    dup.tasks[1].task_id = dup.tasks[0].task_id;
    EXPECT_THROW(validate(dup), SchemaError);
    auto neg = panel;
    neg.tasks[0].loads[3] = -1.0;
    EXPECT_THROW(validate(neg), SchemaError);
    auto order = panel;
    std::swap(order.tasks[0].times[2], order.tasks[0].times[3]);
    EXPECT_THROW(validate(order), SchemaError);
    EXPECT_THROW(parse_panel("{\"schema_version\": 99}"), SchemaError);
    EXPECT_THROW(parse_panel("not json"), SchemaError);
}

}  // namespace
}  // namespace stackgp::data
