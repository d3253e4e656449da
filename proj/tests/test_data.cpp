#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "sawar/data.hpp"
#include "sawar/errors.hpp"

using namespace sawar;

namespace {

const char* kFixture =
    "pid,time,event,num_a,num_b,fac_color\n"
    "1,1.5,1,2.0,10,red\n"
    "2,2.0,0,4.0,20,green\n"
    "3,0.5,1,,30,blue\n"
    "4,3.0,0,6.0,40,red\n"
    "5,1.0,1,8.0,50,\n";

std::vector<std::size_t> all_rows(const RawDataset& raw) {
    std::vector<std::size_t> v(raw.rows.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
    return v;
}

RawDataset synthetic(int n, int events, int levels = 3) {
    std::ostringstream os;
    os << "time,event,num_x,fac_g\n";
    for (int i = 0; i < n; ++i) os << 1.0 + i * 0.1 << ',' << (i < events ? 1 : 0) << ',' << (i * 7 % 13) << ",L" << i % levels << '\n';
    return parse_csv(os.str(), "synthetic");
}

double event_rate(const SurvivalDataset& ds) {
    double s = 0.0;
    for (int e : ds.e) s += e;
    return s / static_cast<double>(ds.e.size());
}

}  // namespace

TEST_CASE("parse a small fixture") {
    const RawDataset raw = parse_csv(kFixture, "fixture");
    CHECK(raw.rows.size() == 5);
    CHECK(raw.num_names == std::vector<std::string>{"num_a", "num_b"});
    CHECK(raw.fac_names == std::vector<std::string>{"fac_color"});
    CHECK(raw.missing_values == 2);
    CHECK_FALSE(raw.rows[2].num[0].has_value());
    CHECK_FALSE(raw.rows[4].fac[0].has_value());
    CHECK(raw.rows[0].time == 1.5);
    CHECK(raw.rows[1].event == 0);
}

TEST_CASE("non-positive times are dropped and counted") {
    const RawDataset raw = parse_csv("time,event,num_a\n0,1,3\n1,0,2\n-2,1,1\n", "drop");
    CHECK(raw.rows.size() == 1);
    CHECK(raw.dropped_nonpositive_time == 2);
}

TEST_CASE("csv format errors") {
    CHECK_THROWS_AS(parse_csv("event,num_a\n1,2\n", "x"), FormatError);
    CHECK_THROWS_AS(parse_csv("time,num_a\n1,2\n", "x"), FormatError);
    try {
        parse_csv("time,event,num_a\n1,0,2\n2,1,abc\n", "x");
        FAIL("expected an input error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("quoted fields and missing tokens") {
    const RawDataset raw = parse_csv("time,event,fac_a,num_b\n1,1,\"x, y\",NA\n2,0,z,3\n", "q");
    CHECK(*raw.rows[0].fac[0] == "x, y");
    CHECK_FALSE(raw.rows[0].num[0].has_value());
}

TEST_CASE("stagec has 146 rows, 4 factors and 3 numerics") {
    const RawDataset raw = load_csv(SAWAR_DATA_DIR "/stagec.csv");
    CHECK(raw.rows.size() == 146);
    CHECK(raw.fac_names.size() == 4);
    CHECK(raw.num_names.size() == 3);
    const FeatureCodec codec = fit_codec(raw, all_rows(raw));
    // ploidy 3 + eet 3 + grade 4 + gleason 9 levels, counted on the data file.
    CHECK(codec.dim() == 3 + 19);
}

TEST_CASE("codec one-hot encoding and standardization") {
    const RawDataset raw = parse_csv(kFixture, "fixture");
    const FeatureCodec codec = fit_codec(raw, all_rows(raw));
    REQUIRE(codec.factors.size() == 1);
    CHECK(codec.factors[0].levels == std::vector<std::string>{"blue", "green", "missing", "red"});
    const SurvivalDataset ds = apply_codec(codec, raw);
    CHECK(ds.X.cols() == 2 + 4);
    for (Eigen::Index i = 0; i < ds.size(); ++i) CHECK(ds.X.row(i).tail(4).sum() == 1.0);
    for (Eigen::Index c = 0; c < 2; ++c) {
        const double mean = ds.X.col(c).mean();
        const double sd = std::sqrt((ds.X.col(c).array() - mean).square().mean());
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(sd - 1.0) < 1e-10);
    }
    // Row 3 by hand: num_a imputed with median(2,4,6,8)=5; imputed column is 2,4,5,6,8.
    const double mean_a = 5.0;
    const double sd_a = std::sqrt((9.0 + 1.0 + 0.0 + 1.0 + 9.0) / 5.0);
    const double sd_b = std::sqrt((400.0 + 100.0 + 0.0 + 100.0 + 400.0) / 5.0);
    CHECK(ds.X(2, 0) == doctest::Approx((5.0 - mean_a) / sd_a).epsilon(1e-15));
    CHECK(ds.X(2, 1) == doctest::Approx(0.0));
    CHECK(ds.X(0, 1) == doctest::Approx((10.0 - 30.0) / sd_b).epsilon(1e-14));
    CHECK(ds.X(2, 2) == 1.0);
    CHECK(ds.X(2, 5) == 0.0);
}

TEST_CASE("unseen levels encode as an all-zero block") {
    const RawDataset raw = parse_csv(kFixture, "fixture");
    const FeatureCodec codec = fit_codec(raw, {0, 1, 3});
    CHECK(codec.factors[0].levels == std::vector<std::string>{"green", "red"});
    const SurvivalDataset ds = apply_codec(codec, raw, {2});
    CHECK(ds.X.row(0).tail(2).isZero(0.0));
}

TEST_CASE("codec statistics use only the train rows") {
    const RawDataset raw = parse_csv(kFixture, "fixture");
    const FeatureCodec codec = fit_codec(raw, {0, 1});
    CHECK(codec.numeric[0].mean == 3.0);
    CHECK(codec.numeric[0].stddev == 1.0);
    const nlohmann::json before = codec_to_json(codec);
    apply_codec(codec, raw, {2, 3, 4});
    CHECK(codec_to_json(codec) == before);
}

TEST_CASE("constant columns are dropped and all-constant data is rejected") {
    const RawDataset raw = parse_csv("time,event,num_a,num_c\n1,1,1,5\n2,0,2,5\n3,1,3,5\n", "c");
    const FeatureCodec codec = fit_codec(raw, {0, 1, 2});
    CHECK(codec.dim() == 1);
    CHECK(codec.dropped == std::vector<std::string>{"num_c"});
    const RawDataset flat = parse_csv("time,event,num_c\n1,1,5\n2,0,5\n", "flat");
    CHECK_THROWS_AS(fit_codec(flat, {0, 1}), CodecError);
}

TEST_CASE("applying a codec to different columns is rejected") {
    const RawDataset raw = parse_csv(kFixture, "fixture");
    const FeatureCodec codec = fit_codec(raw, all_rows(raw));
    const RawDataset other = parse_csv("time,event,num_z\n1,1,1\n2,0,2\n", "other");
    CHECK_THROWS_AS(apply_codec(codec, other), CodecError);
}

TEST_CASE("normalize_all standardizes the one-hot columns too") {
    const RawDataset raw = synthetic(30, 12);
    const FeatureCodec codec = fit_codec(raw, all_rows(raw), {true});
    const SurvivalDataset ds = apply_codec(codec, raw);
    for (Eigen::Index c = 0; c < ds.X.cols(); ++c) {
        const double mean = ds.X.col(c).mean();
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(std::sqrt((ds.X.col(c).array() - mean).square().mean()) - 1.0) < 1e-10);
    }
}

TEST_CASE("codec json round trip") {
    const RawDataset raw = load_csv(SAWAR_DATA_DIR "/stagec.csv");
    for (bool all : {false, true}) {
        const FeatureCodec codec = fit_codec(raw, all_rows(raw), {all});
        const FeatureCodec back = codec_from_json(nlohmann::json::parse(codec_to_json(codec).dump()));
        CHECK(apply_codec(back, raw).X == apply_codec(codec, raw).X);
        CHECK(back.column_names() == codec.column_names());
    }
    CHECK_THROWS_AS(codec_from_json(nlohmann::json::parse("{\"numeric\": 3}")), CodecError);
}

TEST_CASE("stratified split of 100 rows with 40 events") {
    const RawDataset raw = synthetic(100, 40);
    const SplitDataset s = stratified_split(raw, 5);
    CHECK(s.train.size() == 60);
    CHECK(s.validation.size() == 20);
    CHECK(s.test.size() == 20);
    int train_events = 0;
    for (int e : s.train.e) train_events += e;
    CHECK(std::abs(train_events - 24) <= 1);
    CHECK(s.stratified);
}

TEST_CASE("split is a deterministic partition") {
    std::vector<int> events;
    for (int i = 0; i < 137; ++i) events.push_back(i % 3 == 0);
    const SplitIndices a = split_indices(events, 9);
    const SplitIndices b = split_indices(events, 9);
    const SplitIndices c = split_indices(events, 10);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);
    CHECK(a.train != c.train);
    std::set<std::size_t> seen;
    for (const auto* part : {&a.train, &a.validation, &a.test}) {
        for (auto i : *part) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == events.size());
}

TEST_CASE("event rates are balanced across splits") {
    for (const char* file : {"/retinopathy.csv", "/zinc.csv"}) {
        const RawDataset raw = load_csv(std::string(SAWAR_DATA_DIR) + file);
        REQUIRE(raw.rows.size() >= 200);
        double all = 0.0;
        for (const auto& r : raw.rows) all += r.event;
        all /= static_cast<double>(raw.rows.size());
        for (std::uint64_t seed : {0, 1, 2}) {
            const SplitDataset s = stratified_split(raw, seed);
            CHECK(std::abs(event_rate(s.train) - all) <= 0.05);
            CHECK(std::abs(event_rate(s.validation) - all) <= 0.05);
            CHECK(std::abs(event_rate(s.test) - all) <= 0.05);
        }
    }
}

TEST_CASE("single event class falls back to a plain shuffle") {
    const RawDataset raw = synthetic(20, 0);
    const SplitDataset s = stratified_split(raw, 1);
    CHECK_FALSE(s.stratified);
    CHECK(s.warnings.size() >= 1);
    CHECK(s.train.size() + s.validation.size() + s.test.size() == 20);
    CHECK_THROWS_AS(stratified_split(synthetic(9, 4), 1), InputError);
}
