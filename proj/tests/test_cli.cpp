#include <catch2/catch.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "erosym/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::string& args, std::string* output = nullptr) {
    const fs::path out = fs::temp_directory_path() / "erosym_cli_out.txt";
    const std::string cmd =
        std::string(EROSYM_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) {
        std::ifstream in(out);
        std::stringstream ss;
        ss << in.rdbuf();
        *output = ss.str();
    }
#ifdef WEXITSTATUS
    return WEXITSTATUS(status);
#else
    return status;
#endif
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

struct Workspace {
    fs::path dir;

    Workspace() {
        dir = fs::temp_directory_path() / ("erosym_cli_ws_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }

    // Two-topic dataset whose tokens stem to themselves, plus an embedding
    // file covering that vocabulary with separated clusters.
    void write_corpus(std::size_t per_class = 20) {
        erosym::Rng rng(4242);
        std::ofstream data(dir / "data.jsonl");
        std::ofstream vec(dir / "emb.vec");
        const std::size_t dim = 8, words = 12;
        vec << 2 * words << " " << dim << "\n";
        for (std::size_t w = 0; w < words; ++w) {
            vec << "alpha" << w;
            for (std::size_t d = 0; d < dim; ++d)
                vec << " " << (d == 0 ? 2.0 : 0.0) + rng.uniform(-0.3, 0.3);
            vec << "\n";
            vec << "beta" << w;
            for (std::size_t d = 0; d < dim; ++d)
                vec << " " << (d == 0 ? -2.0 : 0.0) + rng.uniform(-0.3, 0.3);
            vec << "\n";
        }
        std::size_t id = 0;
        for (std::size_t i = 0; i < per_class; ++i) {
            for (const bool pos : {true, false}) {
                std::string msg;
                for (int t = 0; t < 6; ++t)
                    msg += (pos ? "alpha" : "beta") + std::to_string(rng.below(words)) + " ";
                json j;
                j["id"] = "c" + std::to_string(id++);
                j["project"] = "nova";
                j["change_number"] = 1;
                j["revision_id"] = "r";
                j["file_path"] = "f.cc";
                j["line"] = 1;
                j["message"] = msg;
                j["url"] = "u";
                j["timestamp"] = "2019-01-01T00:00:00Z";
                j["label"] = pos ? "violation" : "non_violation";
                data << j.dump() << "\n";
            }
        }
    }

    void write_gerrit_fixtures() {
        const fs::path fx = dir / "fixtures";
        fs::create_directories(fx);
        json page = json::array();
        for (long n : {101L, 102L}) {
            json c;
            c["_number"] = n;
            c["project"] = "nova";
            c["current_revision"] = "rev";
            page.push_back(c);
        }
        json index = json::array();
        const auto record = [&](const std::string& path, const std::string& file,
                                const json& body) {
            std::ofstream out(fx / file);
            out << ")]}'\n" << body.dump();
            index.push_back({{"path", path}, {"body_file", file}});
        };
        record("/changes/?q=project:nova+status:merged&n=100", "changes.json", page);
        json files1;
        files1["src/a.cc"] = json::array({{{"id", "c1"},
                                           {"line", 5},
                                           {"message", "this violates the layer isolation"},
                                           {"patch_set", 1},
                                           {"updated", "2019-01-01 00:00:00.000000000"}}});
        record("/changes/101/comments", "comments101.json", files1);
        record("/changes/101/messages", "messages101.json", json::array());
        json files2;
        files2["src/b.cc"] = json::array({{{"id", "c2"},
                                           {"line", 9},
                                           {"message", "LGTM"},
                                           {"patch_set", 1},
                                           {"updated", "2019-01-02 00:00:00.000000000"}}});
        record("/changes/102/comments", "comments102.json", files2);
        record("/changes/102/messages", "messages102.json", json::array());
        std::ofstream out(fx / "index.json");
        out << index.dump();

        std::ofstream kw(dir / "keywords.txt");
        kw << "violat\n";
    }
};

} // namespace

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli("") == 2);
    CHECK(run_cli("ingest --project nova --out /tmp/x.jsonl") == 2); // missing --base-url
    CHECK(run_cli("definitely-not-a-subcommand") == 2);
}

TEST_CASE("ingest refuses to overwrite without --force") {
    Workspace ws;
    const fs::path out = ws.dir / "existing.jsonl";
    std::ofstream(out) << "precious\n";
    const int code = run_cli("ingest --base-url https://example.org --project nova --out " +
                             out.string());
    CHECK(code == 3);
    CHECK(slurp(out) == "precious\n");
}

TEST_CASE("fixture-backed ingest writes filtered unlabeled JSONL") {
    Workspace ws;
    ws.write_gerrit_fixtures();
    const fs::path out = ws.dir / "mined.jsonl";
    std::string log;
    const int code = run_cli("ingest --base-url https://review.example.org --project nova"
                             " --keywords-file " + (ws.dir / "keywords.txt").string() +
                             " --fixture-dir " + (ws.dir / "fixtures").string() +
                             " --out " + out.string(), &log);
    INFO(log);
    REQUIRE(code == 0);
    const std::string text = slurp(out);
    CHECK(count_lines(text) == 1); // only the violation-flavored comment survives
    const json j = json::parse(text.substr(0, text.find('\n')));
    CHECK(j.at("id") == "101:c1");
    CHECK_FALSE(j.contains("label"));
    CHECK(fs::exists(out.string() + ".log"));
}

TEST_CASE("prep emits token lists per comment") {
    Workspace ws;
    ws.write_corpus(3);
    const fs::path out = ws.dir / "tokens.jsonl";
    const int code = run_cli("prep --data " + (ws.dir / "data.jsonl").string() + " --stopwords " +
                             std::string(EROSYM_DATA_DIR) + "/stopwords_english.txt --out " +
                             out.string());
    REQUIRE(code == 0);
    std::ifstream in(out);
    std::string line;
    REQUIRE(std::getline(in, line));
    const json j = json::parse(line);
    CHECK(j.contains("id"));
    CHECK(j.at("tokens").is_array());
    CHECK_FALSE(j.at("tokens").empty());
}

TEST_CASE("train produces a bundle and a deterministic score table") {
    Workspace ws;
    ws.write_corpus();
    const std::string common = "train --family svm --data " + (ws.dir / "data.jsonl").string() +
                               " --embedding " + (ws.dir / "emb.vec").string() +
                               " --embedding-id emb --seed 42 --out-dir " +
                               (ws.dir / "run").string();
    std::string log;
    REQUIRE(run_cli(common, &log) == 0);

    fs::path model, scores;
    for (const auto& entry : fs::directory_iterator(ws.dir / "run")) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("model_", 0) == 0) model = entry.path();
        if (name.rfind("scores_", 0) == 0) scores = entry.path();
    }
    REQUIRE_FALSE(model.empty());
    REQUIRE_FALSE(scores.empty());
    const std::string first = slurp(scores);
    CHECK(first.find("f1") != std::string::npos);

    REQUIRE(run_cli(common) == 0); // identical run overwrites identically
    CHECK(slurp(scores) == first);

    SECTION("predict consumes the trained bundle") {
        std::string out;
        const int code = run_cli("predict --bundle " + model.string() + " --embedding emb=" +
                                     (ws.dir / "emb.vec").string() +
                                     " --text \"alpha1 alpha2 alpha3\"",
                                 &out);
        REQUIRE(code == 0);
        CHECK(out.find("violation") != std::string::npos);
    }

    SECTION("batch predict writes one row per input, in input order") {
        const fs::path preds = ws.dir / "preds.jsonl";
        const int code = run_cli("predict --bundle " + model.string() + " --embedding emb=" +
                                 (ws.dir / "emb.vec").string() + " --data " +
                                 (ws.dir / "data.jsonl").string() + " --out " + preds.string());
        REQUIRE(code == 0);
        std::ifstream in(preds);
        std::string line;
        std::size_t rows = 0;
        std::string first_id;
        while (std::getline(in, line)) {
            const json j = json::parse(line);
            if (rows == 0) first_id = j.at("id");
            CHECK(j.contains("label"));
            ++rows;
        }
        CHECK(rows == 40); // write_corpus() default: 20 per class
        CHECK(first_id == "c0");
    }

    SECTION("an ensemble of bundles votes by hard majority") {
        // a second family over the same embedding gives a two-voter ensemble
        REQUIRE(run_cli("train --family nb --data " + (ws.dir / "data.jsonl").string() +
                        " --embedding " + (ws.dir / "emb.vec").string() +
                        " --embedding-id emb --seed 42 --out-dir " +
                        (ws.dir / "run_nb").string()) == 0);
        fs::path nb_model;
        for (const auto& entry : fs::directory_iterator(ws.dir / "run_nb"))
            if (entry.path().filename().string().rfind("model_", 0) == 0)
                nb_model = entry.path();
        REQUIRE_FALSE(nb_model.empty());
        std::string out;
        const int code = run_cli("predict --bundle " + model.string() + " --bundle " +
                                     nb_model.string() + " --embedding emb=" +
                                     (ws.dir / "emb.vec").string() +
                                     " --text \"beta1 beta2 beta3\"",
                                 &out);
        REQUIRE(code == 0);
        CHECK(out.find("non_violation") != std::string::npos);
    }
}

TEST_CASE("train of textcnn (learned vocabulary) works without an embedding file") {
    Workspace ws;
    ws.write_corpus(8);
    const int code = run_cli(
        "train --family textcnn --embedding-mode learned_from_vocab --data " +
        (ws.dir / "data.jsonl").string() +
        " --emb-dim 12 --max-len 16 --filter-sizes 2,3 --filters-per-size 4 --max-epochs 3"
        " --seed 7 --out-dir " + (ws.dir / "cnnrun").string());
    REQUIRE(code == 0);
    bool saw_model = false;
    for (const auto& entry : fs::directory_iterator(ws.dir / "cnnrun"))
        if (entry.path().filename().string().rfind("model_", 0) == 0) saw_model = true;
    CHECK(saw_model);
}

TEST_CASE("train and predict agree on a PCA-reduced embedding") {
    Workspace ws;
    ws.write_corpus(12);
    const fs::path run = ws.dir / "redrun";
    REQUIRE(run_cli("train --family logreg --data " + (ws.dir / "data.jsonl").string() +
                    " --embedding " + (ws.dir / "emb.vec").string() +
                    " --embedding-id emb --reduce-dim 4 --seed 42 --out-dir " +
                    run.string()) == 0);
    fs::path model;
    for (const auto& entry : fs::directory_iterator(run))
        if (entry.path().filename().string().rfind("model_", 0) == 0) model = entry.path();
    REQUIRE_FALSE(model.empty());
    const json bundle = json::parse(slurp(model));
    CHECK(bundle.at("embedding").at("dim") == 4);

    std::string out;
    const int code = run_cli("predict --bundle " + model.string() + " --embedding emb=" +
                                 (ws.dir / "emb.vec").string() + "@4" +
                                 " --text \"alpha1 alpha2 alpha3\"",
                             &out);
    INFO(out);
    REQUIRE(code == 0);
    CHECK(out.find("violation") != std::string::npos);
}

TEST_CASE("evaluate runs cross-validation and writes the report") {
    Workspace ws;
    ws.write_corpus();
    const int code = run_cli("evaluate --mode cv --k 5 --family nb --data " +
                             (ws.dir / "data.jsonl").string() + " --embedding " +
                             (ws.dir / "emb.vec").string() + " --seed 42 --out-dir " +
                             (ws.dir / "cv").string());
    REQUIRE(code == 0);
    fs::path report;
    for (const auto& entry : fs::directory_iterator(ws.dir / "cv"))
        if (entry.path().filename().string().rfind("cv_", 0) == 0) report = entry.path();
    REQUIRE_FALSE(report.empty());
    const std::string text = slurp(report);
    CHECK(count_lines(text) == 1 + 5 + 2); // header, folds, mean, stddev
}

TEST_CASE("data errors exit with code 4") {
    CHECK(run_cli("prep --data /nonexistent/nope.jsonl") == 4);
    Workspace ws;
    std::ofstream(ws.dir / "bad.jsonl") << "{broken\n";
    CHECK(run_cli("prep --data " + (ws.dir / "bad.jsonl").string()) == 4);
}

TEST_CASE("unknown config keys are rejected as usage errors") {
    Workspace ws;
    std::ofstream(ws.dir / "bad.config") << "no_such_key=1\n";
    ws.write_corpus(3);
    const int code = run_cli("--config " + (ws.dir / "bad.config").string() +
                             " train --family svm --data " + (ws.dir / "data.jsonl").string());
    CHECK(code == 4); // parse error names the offending line
}

TEST_CASE("ERSN_CONFIG supplies the config path when --config is absent") {
    Workspace ws;
    ws.write_corpus(8);
    std::ofstream(ws.dir / "run.config")
        << "family=nb\n"
        << "data=" << (ws.dir / "data.jsonl").string() << "\n"
        << "embedding_file=" << (ws.dir / "emb.vec").string() << "\n"
        << "embedding_id=emb\n"
        << "seed=11\n";
    // the subcommand still requires its mandatory flags on the command
    // line; the file fills in the rest
    const std::string cmd = "ERSN_CONFIG=" + (ws.dir / "run.config").string() + " " +
                            std::string(EROSYM_CLI_PATH) + " train --family nb --data " +
                            (ws.dir / "data.jsonl").string() + " --out-dir " +
                            (ws.dir / "envrun").string() + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WEXITSTATUS(status) == 0);
    bool saw_seed = false;
    for (const auto& entry : fs::directory_iterator(ws.dir / "envrun"))
        if (entry.path().filename().string().rfind("run_", 0) == 0)
            saw_seed = slurp(entry.path()).find("seed=11") != std::string::npos;
    CHECK(saw_seed);
}
