#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lupihcrf/seqdata.hpp"

namespace {

std::string cli_bin() {
    const char* bin = std::getenv("LUPIHCRF_BIN");
    REQUIRE(bin != nullptr);
    return bin;
}

int run(const std::string& args) {
    const std::string cmd = cli_bin() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmp(const std::string& name) { return "/tmp/lupihcrf_cli_" + name; }

}  // namespace

TEST_CASE("synth is byte-deterministic and validates flags") {
    const std::string d1 = tmp("d1.jsonl"), d2 = tmp("d2.jsonl");
    REQUIRE(run("synth --classes 2 --seqs 5 --seed 7 --out " + d1) == 0);
    REQUIRE(run("synth --classes 2 --seqs 5 --seed 7 --out " + d2) == 0);
    CHECK(slurp(d1) == slurp(d2));
    CHECK(run("synth --classes 2 --seqs 5 --seed 7") == 2);  // missing --out
    CHECK(run("synth --outlier-rate 1.5 --out " + d1) == 2);
}

TEST_CASE("train/predict/eval pipeline with exit-code contract") {
    const std::string data = tmp("p.jsonl"), model = tmp("p_model.json");
    const std::string preds = tmp("p_preds.jsonl"), conf = tmp("p_conf.csv");
    REQUIRE(run("synth --classes 2 --seqs 8 --noise 0.3 --seed 3 --out " + data) == 0);
    REQUIRE(run("train --data " + data + " --out " + model +
                " --states 3 --sigma 1.0 --max-iters 60 --seed 1") == 0);

    // config round-trips into the model file
    const auto mj = nlohmann::json::parse(slurp(model));
    CHECK(mj["config"]["n_states"] == 3);
    CHECK(mj["meta"]["sigma"] == 1.0);
    CHECK(mj["meta"]["max_iters"] == 60);

    REQUIRE(run("predict --model " + model + " --data " + data + " --out " + preds) == 0);
    std::ifstream in(preds);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        const auto rec = nlohmann::json::parse(line);
        double total = 0.0;
        for (const auto& [k, v] : rec.at("posterior").items()) total += v.get<double>();
        CHECK(total == Catch::Approx(1.0).margin(1e-9));
        ++rows;
    }
    CHECK(rows == 16);

    REQUIRE(run("eval --predictions " + preds + " --data " + data + " --confusion " + conf) == 0);
    const std::string csv = slurp(conf);
    CHECK(csv.find("class0") != std::string::npos);

    // deterministic retrain gives a byte-identical model file
    const std::string model2 = tmp("p_model2.json");
    REQUIRE(run("train --data " + data + " --out " + model2 +
                " --states 3 --sigma 1.0 --max-iters 60 --seed 1") == 0);
    CHECK(slurp(model) == slurp(model2));
}

TEST_CASE("train without privileged features exits 2") {
    const std::string data = tmp("nopriv.jsonl");
    {
        std::ofstream out(data);
        out << R"({"id":"a","label":"x","frames":[[1,2],[3,4]]})" << "\n";
        out << R"({"id":"b","label":"y","frames":[[0,1],[2,3]]})" << "\n";
    }
    CHECK(run("train --data " + data + " --out " + tmp("never.json")) == 2);
}

TEST_CASE("predict ignores privileged fields in the test file") {
    const std::string data = tmp("ig.jsonl"), model = tmp("ig_model.json");
    REQUIRE(run("synth --classes 2 --seqs 6 --seed 5 --out " + data) == 0);
    REQUIRE(run("train --data " + data + " --out " + model + " --max-iters 40 --states 2") == 0);

    // corrupt the privileged channel; predictions must not move
    using namespace lupihcrf;
    Dataset ds = load_dataset(data);
    for (auto& s : ds.samples) s.privileged->setConstant(1e6);
    const std::string corrupted = tmp("ig_bad.jsonl");
    save_dataset(ds, corrupted);

    for (const std::string strategy : {"mean", "mc", "regression", "drop"}) {
        const std::string p1 = tmp("ig_p1.jsonl"), p2 = tmp("ig_p2.jsonl");
        REQUIRE(run("predict --model " + model + " --data " + data + " --strategy " +
                    strategy + " --mc-samples 5 --mc-seed 1 --out " + p1) == 0);
        REQUIRE(run("predict --model " + model + " --data " + corrupted + " --strategy " +
                    strategy + " --mc-samples 5 --mc-seed 1 --out " + p2) == 0);
        CHECK(slurp(p1) == slurp(p2));
    }
}

TEST_CASE("monte-carlo prediction is seed-deterministic") {
    const std::string data = tmp("mc.jsonl"), model = tmp("mc_model.json");
    REQUIRE(run("synth --classes 2 --seqs 4 --seed 9 --out " + data) == 0);
    REQUIRE(run("train --data " + data + " --out " + model + " --max-iters 30 --states 2") == 0);
    const std::string p1 = tmp("mc_p1.jsonl"), p2 = tmp("mc_p2.jsonl");
    REQUIRE(run("predict --model " + model + " --data " + data +
                " --strategy mc --mc-samples 100 --mc-seed 1 --out " + p1) == 0);
    REQUIRE(run("predict --model " + model + " --data " + data +
                " --strategy mc --mc-samples 100 --mc-seed 1 --out " + p2) == 0);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("eval rejects unknown prediction ids") {
    const std::string data = tmp("e.jsonl");
    REQUIRE(run("synth --classes 2 --seqs 3 --seed 2 --out " + data) == 0);
    const std::string preds = tmp("e_preds.jsonl");
    {
        std::ofstream out(preds);
        out << R"({"id":"ghost","predicted_label":"class0"})" << "\n";
    }
    CHECK(run("eval --predictions " + preds + " --data " + data) == 2);
}

TEST_CASE("hand-built 3-right-1-wrong eval") {
    const std::string data = tmp("h.jsonl");
    {
        std::ofstream out(data);
        out << R"({"id":"a","label":"x","frames":[[1]]})" << "\n";
        out << R"({"id":"b","label":"x","frames":[[1]]})" << "\n";
        out << R"({"id":"c","label":"x","frames":[[1]]})" << "\n";
        out << R"({"id":"d","label":"y","frames":[[1]]})" << "\n";
    }
    const std::string preds = tmp("h_preds.jsonl");
    {
        std::ofstream out(preds);
        out << R"({"id":"a","predicted_label":"x"})" << "\n";
        out << R"({"id":"b","predicted_label":"x"})" << "\n";
        out << R"({"id":"c","predicted_label":"y"})" << "\n";
        out << R"({"id":"d","predicted_label":"y"})" << "\n";
    }
    const std::string conf = tmp("h_conf.csv");
    REQUIRE(run("eval --predictions " + preds + " --data " + data + " --confusion " + conf) == 0);
    CHECK(slurp(conf) == "true\\predicted,x,y\nx,2,1\ny,0,1\n");
}

TEST_CASE("cv emits the expected table shape deterministically") {
    const std::string data = tmp("cv.jsonl");
    REQUIRE(run("synth --classes 2 --seqs 10 --noise 0.3 --seed 4 --out " + data) == 0);
    const std::string t1 = tmp("cv_t1.csv"), b1 = tmp("cv_b1.json");
    const std::string t2 = tmp("cv_t2.csv"), b2 = tmp("cv_b2.json");
    const std::string args = "cv --data " + data +
                             " --states 2,3 --sigma 0.1,1 --folds 5 --seed 1 --max-iters 25";
    REQUIRE(run(args + " --table " + t1 + " --best " + b1) == 0);
    REQUIRE(run(args + " --table " + t2 + " --best " + b2) == 0);
    CHECK(slurp(t1) == slurp(t2));
    CHECK(slurp(b1) == slurp(b2));

    std::istringstream in(slurp(t1));
    std::string line;
    int fold_rows = 0, mean_rows = 0;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.find(",mean,") != std::string::npos)
            ++mean_rows;
        else
            ++fold_rows;
    }
    CHECK(fold_rows == 2 * 2 * 5);
    CHECK(mean_rows == 4 + 1);  // per-config means + overall mean
}

TEST_CASE("fit-fusion writes a usable map") {
    const std::string data = tmp("f.jsonl"), out = tmp("f_map.json");
    REQUIRE(run("synth --classes 2 --seqs 6 --seed 8 --out " + data) == 0);
    REQUIRE(run("fit-fusion --data " + data + " --out " + out + " --folds 3") == 0);
    const auto j = nlohmann::json::parse(slurp(out));
    CHECK(j.at("gamma").size() == 3);           // dim_regular rows
    CHECK(j.at("gamma")[0].size() == 2);        // dim_privileged cols
    CHECK(j.at("cv_table").size() == 9);
    CHECK(j.at("eta").get<double>() >= 1e-4);
}
