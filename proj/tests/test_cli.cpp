#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

const fs::path& work_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "rear_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string rear_bin() {
    const char* env = std::getenv("REAR_BIN");
    REQUIRE_MESSAGE(env != nullptr, "REAR_BIN must point at the cli binary");
    return env;
}

/// Runs `<env> rear <args>` through the shell, capturing streams and status.
RunResult run(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const auto out_path = work_dir() / ("out" + std::to_string(counter) + ".txt");
    const auto err_path = work_dir() / ("err" + std::to_string(counter) + ".txt");
    ++counter;

    std::string cmd = env_prefix + (env_prefix.empty() ? "" : " ") + "'" + rear_bin() + "' " +
                      args + " >'" + out_path.string() + "' 2>'" + err_path.string() + "'";
    const int status = std::system(cmd.c_str());

    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
}

void write_file(const fs::path& path, const std::string& contents) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << contents;
}

/// Three-table fixture: t1/t2 join on the shared key column, t3 is isolated.
fs::path fixture_corpus() {
    static const fs::path path = [] {
        const auto p = work_dir() / "corpus.jsonl";
        write_file(
            p,
            R"({"table_id":"t1","title":"alpha report","columns":[{"name":"key","values":["k1","k2"]},{"name":"notes","values":["alpha","beta"]}],"row_count":2})" "\n"
            R"({"table_id":"t2","title":"beta ledger","columns":[{"name":"key","values":["k1","k2"]}],"row_count":2})" "\n"
            R"({"table_id":"t3","title":"gamma chart","columns":[{"name":"other","values":["x","y"]}],"row_count":2})" "\n");
        return p;
    }();
    return path;
}

fs::path fixture_queries() {
    static const fs::path path = [] {
        const auto p = work_dir() / "queries.jsonl";
        write_file(p,
                   R"({"query_id":"q1","text":"alpha report","gold_tables":["t1"]})" "\n"
                   R"({"query_id":"q2","text":"beta ledger","gold_tables":["t2"]})" "\n");
        return p;
    }();
    return path;
}

std::string corpus_arg() { return "--corpus '" + fixture_corpus().string() + "'"; }

} // namespace

TEST_CASE("usage errors exit with status 1") {
    CHECK(run("").exit_code == 1);
    CHECK(run("frobnicate").exit_code == 1);
    CHECK(run("retrieve").exit_code == 1);                       // missing --corpus
    CHECK(run("ingest --corpus /definitely/missing.jsonl").exit_code == 2);
    const auto bad_flag = run("retrieve " + corpus_arg() + " --text x --pipeline.k_base 0");
    CHECK(bad_flag.exit_code == 1); // rejected by config validation

    const auto help = run("--help");
    CHECK(help.exit_code == 0);
    CHECK(help.out.find("ingest") != std::string::npos);
    CHECK(help.out.find("compare-strategies") != std::string::npos);
}

TEST_CASE("ingest prints corpus statistics") {
    const auto result = run("ingest " + corpus_arg());
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("tables") != std::string::npos);
    CHECK(result.out.find("3") != std::string::npos);
    CHECK(result.out.find("1.33") != std::string::npos); // avg columns (2+1+1)/3
    CHECK(result.out.find("2.00") != std::string::npos); // avg rows

    SUBCASE("with queries") {
        const auto with_queries =
            run("ingest " + corpus_arg() + " --queries '" + fixture_queries().string() + "'");
        CHECK(with_queries.exit_code == 0);
        CHECK(with_queries.out.find("queries") != std::string::npos);
    }
    SUBCASE("malformed corpus names the line") {
        const auto bad = work_dir() / "bad.jsonl";
        write_file(bad, "{\"table_id\":\"x\",\"title\":\"y\",\"columns\":[]}\n{nope\n");
        const auto result2 = run("ingest --corpus '" + bad.string() + "'");
        CHECK(result2.exit_code == 2);
        CHECK(result2.err.find("line 2") != std::string::npos);
    }
}

TEST_CASE("retrieve emits a stage trace") {
    const auto result = run("retrieve " + corpus_arg() +
                            " --text 'alpha report' --pipeline.k_base 2 --pipeline.k_final 2");
    REQUIRE(result.exit_code == 0);
    const auto doc = json::parse(result.out);
    CHECK(doc["query_id"] == "adhoc");
    CHECK(doc["base"].size() == 2);
    CHECK(doc["base"][0] == "t1");
    CHECK(doc["final"].size() == 2);

    SUBCASE("k_join=0 with strategy none reproduces the stage-1 ranking") {
        const auto collapsed =
            run("retrieve " + corpus_arg() +
                " --text 'alpha report' --pipeline.k_base 2 --pipeline.k_final 2"
                " --pipeline.k_join 0 --pipeline.strategy none");
        REQUIRE(collapsed.exit_code == 0);
        const auto trace = json::parse(collapsed.out);
        REQUIRE(trace["final"].size() == trace["base"].size());
        for (std::size_t i = 0; i < trace["base"].size(); ++i) {
            CHECK(trace["final"][i]["id"] == trace["base"][i]);
        }
        CHECK(trace["counters"]["embed_calls"] == 0);
        CHECK(trace["counters"]["pair_calls"] == 0);
    }
    SUBCASE("stored query by id") {
        const auto stored = run("retrieve " + corpus_arg() + " --queries '" +
                                fixture_queries().string() + "' --query-id q2");
        REQUIRE(stored.exit_code == 0);
        CHECK(json::parse(stored.out)["query_id"] == "q2");
    }
    SUBCASE("unknown query id is a data error") {
        const auto missing = run("retrieve " + corpus_arg() + " --queries '" +
                                 fixture_queries().string() + "' --query-id q9");
        CHECK(missing.exit_code == 2);
    }
    SUBCASE("--text and --query-id are mutually exclusive") {
        const auto both = run("retrieve " + corpus_arg() + " --queries '" +
                              fixture_queries().string() + "' --query-id q1 --text also");
        CHECK(both.exit_code == 1);
    }
    SUBCASE("trace lands in --out when given") {
        const auto out = work_dir() / "trace.json";
        const auto to_file = run("retrieve " + corpus_arg() +
                                 " --text 'alpha report' --out '" + out.string() + "'");
        CHECK(to_file.exit_code == 0);
        CHECK(json::parse(slurp(out)).contains("final"));
    }
}

TEST_CASE("eval renders a table row and writes the report") {
    const auto report_path = work_dir() / "report.json";
    const auto result = run("eval " + corpus_arg() + " --queries '" +
                            fixture_queries().string() + "' --pipeline.k_base 2" +
                            " --pipeline.k_final 2 --out '" + report_path.string() + "'");
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("strategy") != std::string::npos);
    CHECK(result.out.find("refine") != std::string::npos);

    const auto doc = json::parse(slurp(report_path));
    CHECK(doc["aggregates"].contains("full_recall"));
    CHECK(doc["per_query"].size() == 2);
    CHECK(doc["per_query"][0]["query_id"] == "q1");
    CHECK(doc["config"]["k_base"] == 2);
}

TEST_CASE("index artifacts are idempotent and reloadable") {
    const auto dir_a = work_dir() / "idx_a";
    const auto dir_b = work_dir() / "idx_b";
    const auto first = run("index " + corpus_arg() + " --out '" + dir_a.string() + "'");
    REQUIRE(first.exit_code == 0);
    CHECK(first.out.find("sparse.json") != std::string::npos);
    const auto second = run("index " + corpus_arg() + " --out '" + dir_b.string() + "'");
    REQUIRE(second.exit_code == 0);

    for (const std::string name : {"sparse.json", "dense.json", "columns.json"}) {
        CAPTURE(name);
        const auto a = slurp(dir_a / name);
        const auto b = slurp(dir_b / name);
        CHECK(!a.empty());
        CHECK(a == b); // same inputs, same bytes
    }
}

TEST_CASE("join-graph lists column edges above tau") {
    const auto result = run("join-graph " + corpus_arg() + " --join.tau 0.5");
    REQUIRE(result.exit_code == 0);

    bool found = false;
    std::istringstream lines(result.out);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const auto edge = json::parse(line);
        CHECK(edge["sim"].get<double>() >= 0.5);
        CHECK(edge["table_a"].get<std::string>() < edge["table_b"].get<std::string>());
        if (edge["table_a"] == "t1" && edge["table_b"] == "t2") {
            CHECK(edge["column_a"] == "key");
            CHECK(edge["column_b"] == "key");
            found = true;
        }
    }
    CHECK(found);

    // A prohibitive tau yields no edges at all.
    const auto strict = run("join-graph " + corpus_arg() + " --join.tau 1.01");
    CHECK(strict.exit_code == 0);
    CHECK(strict.out.find("t1") == std::string::npos);
}

TEST_CASE("compare-strategies prints one row per strategy") {
    const auto summary_path = work_dir() / "strategies.json";
    const auto result = run("compare-strategies " + corpus_arg() + " --queries '" +
                            fixture_queries().string() + "' --pipeline.k_base 2" +
                            " --pipeline.k_final 2 --out '" + summary_path.string() + "'");
    REQUIRE(result.exit_code == 0);

    for (const std::string name : {"refine", "alpha_beta", "adaptive", "max1", "max2", "none"}) {
        CAPTURE(name);
        CHECK(result.out.find(name) != std::string::npos);
    }

    const auto doc = json::parse(slurp(summary_path));
    REQUIRE(doc.is_object());
    CHECK(doc.size() == 6);
    CHECK(doc["adaptive"].contains("avg_retrieved"));
    CHECK(doc["refine"].contains("full_recall"));
}

TEST_CASE("config files feed defaults; flags win; unknown keys are rejected") {
    const auto config_path = work_dir() / "rear.ini";
    write_file(config_path,
               "[pipeline]\n"
               "k_base = 2\n"
               "k_final = 1\n"
               "[retrieval]\n"
               "mode = sparse\n");

    const auto from_config = run("retrieve " + corpus_arg() + " --config '" +
                                 config_path.string() + "' --text 'alpha report'");
    REQUIRE(from_config.exit_code == 0);
    CHECK(json::parse(from_config.out)["final"].size() == 1);

    SUBCASE("command line overrides the file") {
        const auto overridden = run("retrieve " + corpus_arg() + " --config '" +
                                    config_path.string() +
                                    "' --text 'alpha report' --pipeline.k_final 2");
        REQUIRE(overridden.exit_code == 0);
        CHECK(json::parse(overridden.out)["final"].size() == 2);
    }
    SUBCASE("unknown keys fail fast") {
        const auto bad_path = work_dir() / "bad.ini";
        write_file(bad_path, "[pipeline]\nk_finale = 3\n");
        const auto result = run("retrieve " + corpus_arg() + " --config '" + bad_path.string() +
                                "' --text 'alpha report'");
        CHECK(result.exit_code == 1);
    }
}

TEST_CASE("provider urls come from flags or environment; failures exit 3") {
    // Nothing listens on port 9; the embedder retries, then gives up.
    const auto flagged = run("retrieve " + corpus_arg() +
                             " --text 'alpha report' --retrieval.mode dense" +
                             " --providers.embed.url http://127.0.0.1:9/embed");
    CHECK(flagged.exit_code == 3);

    const auto via_env = run("retrieve " + corpus_arg() +
                                 " --text 'alpha report' --retrieval.mode dense",
                             "REAR_EMBED_URL=http://127.0.0.1:9/embed");
    CHECK(via_env.exit_code == 3);
}

TEST_CASE("embedding cache file shrinks provider traffic on the second run") {
    const auto cache_path = work_dir() / "embed_cache.jsonl";
    const auto args = "retrieve " + corpus_arg() +
                      " --text 'alpha report' --retrieval.mode dense --providers.embed_cache '" +
                      cache_path.string() + "'";
    const auto first = run(args);
    REQUIRE(first.exit_code == 0);
    const auto first_calls = json::parse(first.out)["counters"]["embed_calls"].get<int>();
    CHECK(first_calls > 0);

    const auto second = run(args);
    REQUIRE(second.exit_code == 0);
    CHECK(json::parse(second.out)["counters"]["embed_calls"].get<int>() == 0);
}
