#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "ecosched/errors.hpp"
#include "ecosched/metrics.hpp"

using namespace ecosched;

namespace {

RequestOutcome finished_req(int64_t id, double arrival, double finish, double lat_est,
                            int64_t out_tokens = 4) {
    RequestOutcome r;
    r.id = id;
    r.arrival_s = arrival;
    r.finished_at = finish;
    r.lat_est_s = lat_est;
    r.window_s = 1.4 * lat_est;
    r.output_tokens = out_tokens;
    r.tokens_done = out_tokens;
    return r;
}

}  // namespace

TEST_CASE("percentile: nearest rank") {
    CHECK(*percentile({1, 2, 3, 4}, 50) == 2);
    CHECK(*percentile({42}, 1) == 42);
    CHECK(*percentile({42}, 50) == 42);
    CHECK(*percentile({42}, 99) == 42);
    CHECK(*percentile({5, 1, 3}, 99) == 5);
    CHECK(*percentile({5, 1, 3}, 34) == 3);
    CHECK_FALSE(percentile({}, 50).has_value());  // absent, not zero
    CHECK_THROWS_AS(percentile({1.0}, 0), DomainError);
    CHECK_THROWS_AS(percentile({1.0}, 101), DomainError);
}

TEST_CASE("percentile: monotone in p and bracketed by min/max") {
    const std::vector<double> samples{9, 2, 7, 4, 4, 1, 8, 3};
    double prev = -1e18;
    double sum = 0;
    for (double v : samples) sum += v;
    const double mean = sum / static_cast<double>(samples.size());
    for (double p : {1.0, 10.0, 25.0, 50.0, 75.0, 90.0, 99.0, 100.0}) {
        const double v = *percentile(samples, p);
        CHECK(v >= prev);
        prev = v;
        CHECK(v >= 1);
        CHECK(v <= 9);
    }
    CHECK(mean >= 1);
    CHECK(mean <= 9);
}

TEST_CASE("jain index: formula cases") {
    CHECK(*jain_index(std::vector<double>{4, 4, 4, 4}) == doctest::Approx(1.0));
    CHECK(*jain_index(std::vector<double>{1, 0, 0, 0}) == doctest::Approx(0.25));
    CHECK(*jain_index(std::vector<double>{3, 1}) == doctest::Approx(0.8));
    CHECK_FALSE(jain_index(std::vector<double>{0, 0, 0}).has_value());
    CHECK_FALSE(jain_index({}).has_value());
}

TEST_CASE("jain index: invariant under uniform scaling") {
    const std::vector<double> base{5, 2, 9, 4};
    const double j0 = *jain_index(base);
    for (double scale : {0.5, 2.0, 100.0}) {
        std::vector<double> scaled;
        for (double v : base) scaled.push_back(v * scale);
        CHECK(*jain_index(scaled) == doctest::Approx(j0).epsilon(1e-12));
    }
}

TEST_CASE("violation rate: counting and the beta window") {
    std::vector<RequestOutcome> rs;
    rs.push_back(finished_req(0, 0, 1, 10));
    rs.push_back(finished_req(1, 0, 2, 10));
    rs.push_back(finished_req(2, 0, 3, 10));
    rs.push_back(finished_req(3, 0, 99, 10));  // 99 > 5*10
    CHECK(*violation_rate(rs, 5.0) == doctest::Approx(0.25));

    // boundary: finish - arrival exactly beta*lat is not a violation
    std::vector<RequestOutcome> edge{finished_req(0, 0, 50, 10)};
    CHECK(*violation_rate(edge, 5.0) == 0.0);
    edge[0].finished_at = 10.1;
    edge[0].lat_est_s = 2.0;
    CHECK(*violation_rate(edge, 5.0) == 1.0);  // 10.1 > 10

    // unfinished requests count as violations
    RequestOutcome unfinished;
    unfinished.id = 9;
    unfinished.arrival_s = 0;
    unfinished.lat_est_s = 10;
    std::vector<RequestOutcome> mixed{finished_req(0, 0, 1, 10), unfinished};
    CHECK(*violation_rate(mixed, 5.0) == doctest::Approx(0.5));

    CHECK_FALSE(violation_rate({}, 5.0).has_value());
}

TEST_CASE("violation rate: monotone nonincreasing in beta") {
    std::vector<RequestOutcome> rs;
    for (int i = 0; i < 20; ++i) rs.push_back(finished_req(i, 0, 2.0 + i, 1.0));
    double prev = 1.0;
    for (double beta : {1.0, 2.0, 5.0, 10.0, 30.0}) {
        const double v = *violation_rate(rs, beta);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("jain fairness over quartile groups of timely tokens") {
    // Four requests with output counts 1..4; every token lands inside its
    // window: X = (1,2,3,4) over four singleton quartiles.
    std::vector<RequestOutcome> rs;
    for (int i = 0; i < 4; ++i) {
        RequestOutcome r = finished_req(i, 0, 0.5, 10, i + 1);
        for (int k = 0; k <= i; ++k) r.token_times.push_back(0.1 * (k + 1));
        rs.push_back(r);
    }
    const double want = (1 + 2 + 3 + 4) * (1 + 2 + 3 + 4) / (4.0 * (1 + 4 + 9 + 16));
    CHECK(*jain_fairness(rs, 4) == doctest::Approx(want));

    // tokens beyond the window do not count
    rs[3].token_times = {1e9, 1e9, 1e9, 1e9};
    const double want2 = (1 + 2 + 3 + 0) * (1 + 2 + 3 + 0) / (4.0 * (1 + 4 + 9 + 0));
    CHECK(*jain_fairness(rs, 4) == doctest::Approx(want2));

    // all-zero totals: absent
    for (auto& r : rs) r.token_times = {1e9};
    CHECK_FALSE(jain_fairness(rs, 4).has_value());

    // fewer requests than groups: empty quartiles excluded from K
    std::vector<RequestOutcome> two;
    two.push_back(finished_req(0, 0, 0.5, 10, 2));
    two.back().token_times = {0.1, 0.2};
    two.push_back(finished_req(1, 0, 0.5, 10, 2));
    two.back().token_times = {0.1, 0.2};
    CHECK(*jain_fairness(two, 4) == doctest::Approx(1.0));
}

TEST_CASE("report blocks: absent metrics stay absent and csv row shape holds") {
    RunState st;
    st.scenario.name = "unit";
    st.config_hash = "deadbeef";
    st.horizon_s = 100;
    const SimReport rep = build_report(st);
    CHECK_FALSE(rep.violation_rate.has_value());
    CHECK_FALSE(rep.e2e.mean.has_value());
    const std::string header = SimReport::csv_header();
    const std::string row = rep.to_csv_row();
    const auto count = [](const std::string& s) {
        size_t n = 1;
        for (char c : s)
            if (c == ',') ++n;
        return n;
    };
    CHECK(count(header) == count(row));
    CHECK(header.find("e2e_p50") != std::string::npos);
    CHECK(header.find("tbt_p99") != std::string::npos);
    CHECK(rep.to_json().find("\"config_hash\": \"deadbeef\"") != std::string::npos);
}

TEST_CASE("report: percentiles ordered within each latency block") {
    RunState st;
    st.scenario.name = "unit";
    for (int i = 0; i < 50; ++i) {
        RequestOutcome r = finished_req(i, 0, 1.0 + 0.3 * i, 5.0, 3);
        r.first_token_at = 0.2 + 0.01 * i;
        r.token_times = {r.first_token_at, r.first_token_at + 0.5, r.finished_at};
        st.requests.push_back(r);
    }
    const SimReport rep = build_report(st);
    REQUIRE(rep.e2e.p50.has_value());
    CHECK(*rep.e2e.p50 <= *rep.e2e.p90);
    CHECK(*rep.e2e.p90 <= *rep.e2e.p99);
    CHECK(*rep.ttft.p50 <= *rep.ttft.p99);
    CHECK(*rep.tbt.p50 <= *rep.tbt.p99);
    CHECK(rep.tbt_pooled.samples == 100);  // two gaps per request
}
