#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <random>

#include "lupihcrf/seqdata.hpp"

using namespace lupihcrf;

namespace {

std::string temp_path(const std::string& name) {
    return std::string(std::getenv("TMPDIR") ? std::getenv("TMPDIR") : "/tmp") + "/" + name;
}

Dataset tiny_dataset(bool with_privileged) {
    Dataset ds;
    ds.label_vocab = {"a", "b"};
    ds.dim_regular = 2;
    ds.dim_privileged = with_privileged ? 3 : 0;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int i = 0; i < 6; ++i) {
        SequenceSample s;
        s.id = "s" + std::to_string(i);
        s.label = i % 2;
        s.frames = Matrix::NullaryExpr(4, 2, [&](Eigen::Index, Eigen::Index) { return g(rng); });
        if (with_privileged)
            s.privileged =
                Matrix::NullaryExpr(4, 3, [&](Eigen::Index, Eigen::Index) { return g(rng); });
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

bool datasets_equal(const Dataset& x, const Dataset& y) {
    if (x.label_vocab != y.label_vocab || x.dim_regular != y.dim_regular ||
        x.dim_privileged != y.dim_privileged || x.size() != y.size())
        return false;
    for (int i = 0; i < x.size(); ++i) {
        const auto& a = x.samples[i];
        const auto& b = y.samples[i];
        if (a.id != b.id || a.label != b.label) return false;
        if (a.frames != b.frames) return false;
        if (a.privileged.has_value() != b.privileged.has_value()) return false;
        if (a.privileged && *a.privileged != *b.privileged) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("load_dataset parses a small JSONL file") {
    const std::string path = temp_path("tiny.jsonl");
    {
        std::ofstream out(path);
        out << R"({"id":"x","label":"b","frames":[[1,2],[3,4],[5,6]]})" << "\n";
        out << R"({"id":"y","label":"a","frames":[[0,1],[2,3],[4,5]]})" << "\n";
    }
    const Dataset ds = load_dataset(path);
    CHECK(ds.size() == 2);
    CHECK(ds.dim_regular == 2);
    CHECK(ds.label_vocab == std::vector<std::string>{"a", "b"});
    CHECK(ds.samples[0].label == 1);  // "b" sorts after "a"
    CHECK(ds.samples[0].frames(2, 1) == 6.0);
    std::remove(path.c_str());
}

TEST_CASE("load_dataset rejects mixed privileged presence") {
    const std::string path = temp_path("mixed.jsonl");
    {
        std::ofstream out(path);
        out << R"({"id":"x","label":"a","frames":[[1,2]]})" << "\n";
        out << R"({"id":"y","label":"b","frames":[[1,2]],"privileged":[[9]]})" << "\n";
    }
    CHECK_THROWS_WITH(load_dataset(path), Catch::Matchers::ContainsSubstring("mixed privileged"));
    std::remove(path.c_str());
}

TEST_CASE("load_dataset reports parse errors with line numbers") {
    const std::string path = temp_path("bad.jsonl");
    {
        std::ofstream out(path);
        out << R"({"id":"x","label":"a","frames":[[1,2]]})" << "\n";
        out << "not json\n";
    }
    CHECK_THROWS_WITH(load_dataset(path), Catch::Matchers::ContainsSubstring("line 2"));
    std::remove(path.c_str());
}

TEST_CASE("save/load round trip is exact") {
    const std::string path = temp_path("roundtrip.jsonl");
    for (bool priv : {false, true}) {
        const Dataset ds = tiny_dataset(priv);
        save_dataset(ds, path);
        CHECK(datasets_equal(ds, load_dataset(path)));
    }
    std::remove(path.c_str());
}

TEST_CASE("save_dataset rejects an empty dataset") {
    Dataset empty;
    CHECK_THROWS_WITH(save_dataset(empty, temp_path("never.jsonl")),
                      Catch::Matchers::ContainsSubstring("no samples"));
}

TEST_CASE("generate_synthetic is deterministic in its seed") {
    SynthSpec spec;
    spec.seed = 7;
    spec.n_sequences_per_class = 5;
    const Dataset a = generate_synthetic(spec);
    const Dataset b = generate_synthetic(spec);
    CHECK(datasets_equal(a, b));
    spec.seed = 8;
    CHECK(!datasets_equal(a, generate_synthetic(spec)));
}

TEST_CASE("zero privileged noise gives exact per-state means") {
    SynthSpec spec;
    spec.outlier_rate = 0.0;
    spec.privileged_noise_sigma = 0.0;
    spec.n_sequences_per_class = 4;
    spec.seed = 3;
    const Dataset ds = generate_synthetic(spec);
    // Every privileged frame must hit one of n_classes * n_states_true means.
    std::vector<Vector> means;
    for (const auto& s : ds.samples)
        for (Eigen::Index j = 0; j < s.privileged->rows(); ++j) {
            const Vector v = s.privileged->row(j).transpose();
            bool found = false;
            for (const auto& m : means)
                if ((m - v).norm() < 1e-15) found = true;
            if (!found) means.push_back(v);
        }
    CHECK(means.size() <= static_cast<std::size_t>(spec.n_classes * spec.n_states_true));
}

TEST_CASE("synthetic spec validation") {
    SynthSpec spec;
    spec.outlier_rate = 1.5;
    CHECK_THROWS_WITH(generate_synthetic(spec), Catch::Matchers::ContainsSubstring("outlier_rate"));
    spec = SynthSpec{};
    spec.seq_len_min = 5;
    spec.seq_len_max = 2;
    CHECK_THROWS(generate_synthetic(spec));
}

TEST_CASE("split_folds partitions the index set") {
    const Dataset ds = tiny_dataset(true);  // 6 samples, 2 labels
    for (int k : {2, 3, 6}) {
        const auto folds = split_folds(ds, k, 11);
        std::vector<int> seen;
        for (const auto& [train, test] : folds) {
            for (int i : test) seen.push_back(i);
            // train and test are disjoint and cover everything
            CHECK(train.size() + test.size() == static_cast<std::size_t>(ds.size()));
        }
        std::sort(seen.begin(), seen.end());
        std::vector<int> all(ds.size());
        std::iota(all.begin(), all.end(), 0);
        CHECK(seen == all);
    }
    CHECK(split_folds(ds, 6, 0).front().second.size() == 1);  // leave-one-out
    CHECK_THROWS(split_folds(ds, 7, 0));
}

TEST_CASE("split_folds is deterministic and stratified") {
    SynthSpec spec;
    spec.n_sequences_per_class = 10;
    const Dataset ds = generate_synthetic(spec);
    const auto a = split_folds(ds, 5, 42);
    const auto b = split_folds(ds, 5, 42);
    for (std::size_t f = 0; f < a.size(); ++f) CHECK(a[f].second == b[f].second);
    // 10 per class over 5 folds: every test fold holds 2 of each label.
    for (const auto& [train, test] : a) {
        int per_label[2] = {0, 0};
        for (int i : test) ++per_label[ds.samples[i].label];
        CHECK(per_label[0] == 2);
        CHECK(per_label[1] == 2);
    }
}

TEST_CASE("standardize centers and scales pooled frames") {
    const Dataset ds = tiny_dataset(true);
    const auto [out, scaler] = standardize(ds);
    Vector sum = Vector::Zero(2), sumsq = Vector::Zero(2);
    long n = 0;
    for (const auto& s : out.samples) {
        sum += s.frames.colwise().sum().transpose();
        sumsq += s.frames.array().square().colwise().sum().matrix().transpose();
        n += s.frames.rows();
    }
    const Vector mean = sum / n;
    CHECK(mean.cwiseAbs().maxCoeff() < 1e-10);
    const Vector var = sumsq / n - mean.cwiseProduct(mean);
    CHECK((var.array() - 1.0).abs().maxCoeff() < 1e-10);
    // Applying the scaler again reproduces the standardized output.
    for (int i = 0; i < ds.size(); ++i)
        CHECK((scaler.apply_regular(ds.samples[i].frames) - out.samples[i].frames)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
}

TEST_CASE("constant feature column passes through with std 1") {
    Dataset ds = tiny_dataset(false);
    for (auto& s : ds.samples) s.frames.col(1).setConstant(3.5);
    const auto [out, scaler] = standardize(ds);
    CHECK(scaler.std_regular(1) == 1.0);
    for (const auto& s : out.samples) CHECK(s.frames.col(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("standardize then invert recovers the input") {
    const Dataset ds = tiny_dataset(false);
    const auto [out, scaler] = standardize(ds);
    for (int i = 0; i < ds.size(); ++i) {
        const Matrix back = scaler.invert_regular(out.samples[i].frames);
        CHECK((back - ds.samples[i].frames).cwiseAbs().maxCoeff() <
              1e-12 * (1.0 + ds.samples[i].frames.cwiseAbs().maxCoeff()));
    }
}
