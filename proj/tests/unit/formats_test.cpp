#include <doctest.h>

#include <cmath>
#include <limits>
#include <algorithm>
#include <set>
#include <sstream>

#include "fuselab/byte_io.hpp"
#include "fuselab/dataset.hpp"
#include "fuselab/history.hpp"
#include "fuselab/model_io.hpp"
#include "fuselab/train_config.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace fuselab;

namespace {

Dataset three_records() {
    Dataset ds;
    Rng rng(1);
    const char* ids[] = {"a", "bb", "ccc"};
    for (int i = 0; i < 3; ++i) {
        EmbeddingRecord r{ids[i], static_cast<Sentiment>(i), std::vector<float>(768), std::vector<float>(384)};
        for (auto& x : r.text) x = static_cast<float>(rng.normal());
        for (auto& x : r.image) x = static_cast<float>(rng.normal());
        ds.records.push_back(std::move(r));
    }
    return ds;
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

TEST_CASE("byte io little-endian") {
    io::ByteWriter w;
    w.u16(0x0102);
    w.u32(0x03040506);
    w.f32(1.0f);
    auto b = w.take();
    CHECK(b[0] == 0x02);
    CHECK(b[2] == 0x06);
    io::ByteReader r(b);
    CHECK(r.u16() == 0x0102);
    CHECK(r.u32() == 0x03040506);
    CHECK(r.f32() == 1.0f);
    CHECK(r.remaining() == 0);
    CHECK_THROWS_AS(r.u8(), FormatError);
}

TEST_CASE("embedding file round trip and size") {
    auto ds = three_records();
    auto bytes = encode_embeddings(ds);
    CHECK(bytes.size() == 13867);
    auto back = decode_embeddings(bytes);
    CHECK(same_content(ds, back));

    testing::TempDir dir;
    save_embeddings(ds, dir / "x.mmeb");
    auto loaded = load_embeddings(dir / "x.mmeb");
    CHECK(same_content(ds, loaded));
    CHECK(loaded.source == dir / "x.mmeb");
}

TEST_CASE("embedding file with zero records") {
    Dataset ds;
    auto bytes = encode_embeddings(ds);
    CHECK(bytes.size() == kEmbeddingHeaderBytes);
    CHECK(decode_embeddings(bytes).empty());
}

TEST_CASE("malformed embedding files are rejected") {
    auto good = encode_embeddings(three_records());
    SUBCASE("empty") { CHECK_THROWS_AS(decode_embeddings({}), FormatError); }
    SUBCASE("magic") {
        auto b = good;
        b[0] = 'X';
        CHECK_THROWS_AS(decode_embeddings(b), FormatError);
    }
    SUBCASE("version") {
        auto b = good;
        put_u32(b, 4, 2);
        CHECK_THROWS_AS(decode_embeddings(b), UnsupportedVersionError);
    }
    SUBCASE("class count") {
        auto b = good;
        put_u32(b, 24, 5);
        CHECK_THROWS_AS(decode_embeddings(b), FormatError);
    }
    SUBCASE("truncated record names its index") {
        auto b = good;
        b.resize(b.size() - 4);  // the last record carries 767 image floats
        try {
            decode_embeddings(b);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("record 2") != std::string::npos);
        }
    }
    SUBCASE("short text vector") {
        auto ds = three_records();
        ds.records[1].text.pop_back();
        CHECK_THROWS(encode_embeddings(ds));
    }
    SUBCASE("trailing bytes") {
        auto b = good;
        b.push_back(0);
        CHECK_THROWS_AS(decode_embeddings(b), FormatError);
    }
    SUBCASE("label out of range") {
        auto b = good;
        b[kEmbeddingHeaderBytes + 2 + 1] = 7;
        CHECK_THROWS(decode_embeddings(b));
    }
    SUBCASE("duplicate ids") {
        auto ds = three_records();
        ds.records[2].id = "a";
        Dataset copy = ds;
        CHECK_THROWS_AS(copy.validate(), IntegrityError);
    }
    SUBCASE("non-finite values") {
        auto ds = three_records();
        ds.records[0].image[5] = std::numeric_limits<float>::quiet_NaN();
        CHECK_THROWS(ds.validate());
    }
}

TEST_CASE("stratified split") {
    auto ds = testing::separable_dataset(300, 4, 4, 3);
    auto s = stratified_split(ds, {0.8, 0.1, 0.1, 42});
    CHECK(s.train.size() == 240);
    CHECK(s.val.size() == 30);
    CHECK(s.test.size() == 30);
    CHECK(class_distribution(s.train) == std::array<std::size_t, 3>{80, 80, 80});
    CHECK(class_distribution(s.val) == std::array<std::size_t, 3>{10, 10, 10});
    std::set<std::string> ids;
    for (const auto* part : {&s.train, &s.val, &s.test})
        for (const auto& r : part->records) CHECK(ids.insert(r.id).second);
    CHECK(ids.size() == 300);

    auto again = stratified_split(ds, {0.8, 0.1, 0.1, 42});
    CHECK(same_content(s.train, again.train));
    auto other = stratified_split(ds, {0.8, 0.1, 0.1, 43});
    CHECK_FALSE(same_content(s.train, other.train));

    CHECK_THROWS_AS(stratified_split(ds, {0.8, 0.1, 0.2, 42}), DomainError);
    CHECK_THROWS_AS(stratified_split(ds, {1.0, 0.0, 0.0, 42}), DomainError);
}

TEST_CASE("stratified split proportions stay within one sample per class") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 30 + rng.index(200);
        auto ds = testing::noise_dataset(n, trial, 2, 2);
        auto counts = class_distribution(ds);
        if (*std::min_element(counts.begin(), counts.end()) < 3) continue;
        SplitSpec spec{0.7, 0.2, 0.1, static_cast<std::uint64_t>(trial)};
        auto s = stratified_split(ds, spec);
        CHECK(s.train.size() + s.val.size() + s.test.size() == n);
        auto tr = class_distribution(s.train);
        for (int c = 0; c < 3; ++c) CHECK(std::abs(static_cast<double>(tr[c]) - 0.7 * counts[c]) < 1.0);
    }
}

TEST_CASE("model file round trip") {
    testing::TempDir dir;
    for (auto kind : kAllFusionKinds) {
        auto m = init_params<float>(kind, 3, ModelDims{6, 5, 4, 5});
        m.hidden.bias(0, 1) = 0.125f;
        auto bytes = encode_model(m);
        CHECK(decode_model(bytes) == m);
        save_model(m, dir / "m.fmdl");
        CHECK(load_model(dir / "m.fmdl") == m);
        CHECK(io::read_file(dir / "m.fmdl") == bytes);
    }
}

TEST_CASE("malformed model files are rejected") {
    auto good = encode_model(init_params<float>(FusionKind::SelfAttention, 3, ModelDims{6, 5, 4, 5}));
    auto b = good;
    b.resize(b.size() / 2);
    CHECK_THROWS_AS(decode_model(b), FormatError);
    b = good;
    put_u32(b, 4, 9);
    CHECK_THROWS_AS(decode_model(b), UnsupportedVersionError);
    b = good;
    b[1] = 'Q';
    CHECK_THROWS_AS(decode_model(b), FormatError);
    b = good;
    b[8] = 2;  // claims dual attention but lacks the cross blocks
    CHECK_THROWS_AS(decode_model(b), FormatError);
    b = good;
    b[8] = 9;
    CHECK_THROWS_AS(decode_model(b), FormatError);
    b = good;
    b.push_back(1);
    CHECK_THROWS_AS(decode_model(b), FormatError);
    CHECK_THROWS(load_model("/nonexistent/model.fmdl"));
}

TEST_CASE("train config json") {
    TrainConfig c;
    c.learning_rate = 1e-4;
    c.loss_kind = LossKind::CrossEntropy;
    c.selection_metric = SelectionMetric::WeightedF1;
    auto j = to_json(c);
    CHECK(j.at("loss_kind") == "cross_entropy");
    CHECK(j.at("selection_metric") == "weighted_f1");
    CHECK(train_config_from_json(j) == c);
    auto extra = j;
    extra["momentum"] = 0.9;
    CHECK_THROWS_AS(train_config_from_json(extra), InputError);
    auto missing = j;
    missing.erase("patience");
    CHECK_THROWS_AS(train_config_from_json(missing), InputError);

    TrainConfig bad;
    bad.dropout_rate = 1.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = {};
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = {};
    bad.focal_gamma = -1;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    CHECK(parse_selection_metric("macro-f1") == SelectionMetric::MacroF1);
}

TEST_CASE("history csv round trip") {
    TrainHistory h;
    for (int e = 1; e <= 3; ++e) {
        EpochRecord r;
        r.epoch = e;
        r.train_loss = 1.0 / (e + 2);
        r.val_accuracy = 0.1 * e;
        r.val_macro_f1 = 0.3333333333333333 * e / 3;
        r.val_weighted_f1 = 0.2;
        r.class_f1 = {0.1, 0.2 * e, 1e-17};
        h.epochs.push_back(r);
    }
    std::stringstream ss;
    write_history_csv(h, ss);
    const std::string text = ss.str();
    CHECK(text.rfind("epoch,train_loss,val_accuracy,val_macro_f1,val_weighted_f1,f1_negative,f1_neutral,f1_positive\n", 0) == 0);
    auto back = parse_history_csv(ss);
    REQUIRE(back.epochs.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(back.epochs[i].train_loss == h.epochs[i].train_loss);
        CHECK(back.epochs[i].class_f1 == h.epochs[i].class_f1);
    }

    std::stringstream bad("epoch,loss\n1,2\n");
    CHECK_THROWS_AS(parse_history_csv(bad), FormatError);
    std::stringstream order(text.substr(0, text.find('\n') + 1) + "2,0,0,0,0,0,0,0\n1,0,0,0,0,0,0,0\n");
    CHECK_THROWS_AS(parse_history_csv(order), FormatError);

    auto rows = breakdown_series(h);
    CHECK(rows.size() == 3);
    CHECK(rows[1].f1[1] == h.epochs[1].class_f1[1]);
    std::stringstream wide, longf;
    write_breakdown_csv(rows, wide);
    write_breakdown_long_csv(rows, longf);
    const std::string w = wide.str(), l = longf.str();
    CHECK(std::count(w.begin(), w.end(), '\n') == 4);
    CHECK(std::count(l.begin(), l.end(), '\n') == 10);
    CHECK_THROWS_AS(breakdown_series(TrainHistory{}), InputError);
}

TEST_CASE("class distribution") {
    auto ds = testing::separable_dataset(10, 1, 2, 2);
    for (auto& r : ds.records) r.label = Sentiment::Positive;
    CHECK(class_distribution(ds) == std::array<std::size_t, 3>{0, 0, 10});

    auto mixed = testing::noise_dataset(50, 3, 2, 2);
    auto counts = class_distribution(mixed);
    CHECK(counts[0] + counts[1] + counts[2] == 50);
    std::reverse(mixed.records.begin(), mixed.records.end());
    CHECK(class_distribution(mixed) == counts);
}

TEST_CASE("split needs three samples per class") {
    auto ds = testing::separable_dataset(9, 1, 2, 2);
    ds.records[0].label = Sentiment::Positive;  // negative now has 2
    CHECK_THROWS_AS(stratified_split(ds, {}), InputError);
}
