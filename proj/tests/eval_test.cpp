#include "nilm/error.hpp"
#include "nilm/eval/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

using namespace nilm;
using namespace nilm::eval;

TEST_CASE("confusion counts") {
    const auto c = confusion(std::vector<int>{1, 0, 1, 0}, std::vector<int>{1, 0, 0, 1});
    CHECK(c == ConfusionCounts{1, 1, 1, 1});

    const std::vector<int> t{1, 1, 0, 1, 0};
    const auto same = confusion(t, t);
    CHECK(same.fp == 0);
    CHECK(same.fn == 0);

    const auto zeros = confusion(std::vector<int>(5, 0), t);
    CHECK(zeros.fn == 3);
    CHECK(zeros.tp == 0);
    CHECK(zeros.total() == 5);

    CHECK_THROWS_AS(confusion(std::vector<int>{1}, t), Error);
}

TEST_CASE("metrics") {
    const auto perfect = metrics({1, 0, 0, 0});
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f_measure == 1.0);

    const auto dead = metrics({0, 3, 2, 10});
    CHECK(dead.precision == 0.0);
    CHECK(dead.recall == 0.0);
    CHECK(dead.f_measure == 0.0);
    CHECK(dead.f_measure_undefined);
    CHECK_FALSE(dead.precision_undefined);

    const auto m = metrics({3, 1, 2, 0});
    CHECK(m.precision == 0.75);
    CHECK(m.recall == 0.6);
    CHECK(m.f_measure == doctest::Approx(2.0 * 0.45 / 1.35).epsilon(1e-15));
    CHECK(m.f_measure == doctest::Approx(0.6667).epsilon(1e-4));

    const auto silent = metrics({0, 0, 4, 9});
    CHECK(silent.precision_undefined);
    CHECK(silent.precision == 0.0);
}

TEST_CASE("metric properties over many count tuples") {
    for (std::size_t tp = 0; tp < 7; ++tp)
        for (std::size_t fp = 0; fp < 7; ++fp)
            for (std::size_t fn = 0; fn < 7; ++fn) {
                const auto m = metrics({tp, fp, fn, 3});
                const auto swapped = metrics({tp, fn, fp, 3});
                CHECK(m.f_measure == swapped.f_measure);
                for (double v : {m.precision, m.recall, m.f_measure}) {
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                }
                if (m.precision + m.recall > 0.0) {
                    CHECK(m.f_measure >= std::min(m.precision, m.recall) - 1e-15);
                    CHECK(m.f_measure <= std::max(m.precision, m.recall) + 1e-15);
                }
            }
}

TEST_CASE("joint permutation leaves the metrics unchanged") {
    std::mt19937_64 rng(10);
    std::bernoulli_distribution b(0.3);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int> p(40), t(40);
        for (std::size_t i = 0; i < 40; ++i) {
            p[i] = b(rng);
            t[i] = b(rng);
        }
        std::vector<std::size_t> perm(40);
        for (std::size_t i = 0; i < 40; ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> pp(40), tt(40);
        for (std::size_t i = 0; i < 40; ++i) {
            pp[i] = p[perm[i]];
            tt[i] = t[perm[i]];
        }
        CHECK(confusion(p, t) == confusion(pp, tt));
    }
}

TEST_CASE("report tables") {
    ReportEntry e{"1", "REFR", "NN", {3, 1, 2, 10}, metrics({3, 1, 2, 10}), false};
    const MetricsReport one{e};
    const auto table = comparison_table(one);
    CHECK(table.find("House 1") != std::string::npos);
    CHECK(table.find("REFR") != std::string::npos);
    CHECK(table.find("F_M(NN)") != std::string::npos);
    CHECK(table.find("0.67") != std::string::npos);
    CHECK(table.find('*') == std::string::npos);

    const auto back = parse_csv(to_csv(one));
    REQUIRE(back.size() == 1);
    CHECK(back[0].counts == e.counts);
    CHECK(back[0].scores.f_measure == e.scores.f_measure);
    CHECK(back[0].scores.precision == e.scores.precision);
    CHECK(to_csv(back) == to_csv(one));

    const auto csv = comparison_csv(one);
    CHECK(csv == "house,model,REFR\n1,F_M(NN),0.6667\n");
}

TEST_CASE("bundled reference table") {
    const auto ref = load_reference(std::filesystem::path(NILM_SOURCE_DIR) / "data/paper_reference.csv");
    auto cell = [&](const std::string& house, const std::string& method, const std::string& app) {
        for (const auto& r : ref)
            if (r.house == house && r.model == method && r.appliance == app) return r.scores.f_measure;
        FAIL("missing reference cell " << house << " " << method << " " << app);
        return -1.0;
    };
    CHECK(cell("1", "GSP", "REFR") == 0.88);
    CHECK(cell("1", "GSP", "MW") == 0.70);
    CHECK(cell("1", "GSP", "DW") == 0.57);
    CHECK(cell("1", "GSP", "KO") == 0.39);
    CHECK(cell("1", "GSP", "WD") == 0.89);
    CHECK(cell("2", "NN", "MW") == 0.97);
    CHECK(cell("6", "NN", "KO") == 1.0);
    CHECK(cell("6", "RNN_3", "ST") == 0.20);
    for (const auto& r : ref) CHECK(r.reference);
    CHECK(ref.size() == 70);

    ReportEntry mine{"2", "MW", "NN", {1, 0, 0, 0}, metrics({1, 0, 0, 0}), false};
    const auto rows = reference_rows_for({mine}, ref, {"GSP", "HMM"});
    CHECK(rows.size() == 8);
    MetricsReport combined{mine};
    combined.insert(combined.end(), rows.begin(), rows.end());
    const auto table = comparison_table(combined);
    CHECK(table.find("F_M(GSP)*") != std::string::npos);
    CHECK(table.find("published value") != std::string::npos);
    CHECK(table.find("House 1") == std::string::npos);
}

TEST_CASE("malformed csv is a parse error") {
    CHECK_THROWS_AS(parse_reference("house,appliance,method,f_measure\n1,REFR,NN\n"), Error);
    CHECK_THROWS_AS(parse_reference("house,appliance,method,f_measure\n1,REFR,NN,abc\n"), Error);
    CHECK(parse_reference("").empty());
}
