#include <doctest.h>

#include "srlab/cli.hpp"
#include "srlab/data.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace srlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
    fs::path path;
    TmpDir() {
        std::string tmpl = (fs::temp_directory_path() / "srlab_cli_XXXXXX").string();
        REQUIRE(mkdtemp(tmpl.data()) != nullptr);
        path = tmpl;
    }
    ~TmpDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// runs the installed binary through the shell; output is discarded, only the
// exit status matters here
int run_tool(const std::vector<std::string>& args) {
    const char* exe = std::getenv("SRLAB_CLI");
    REQUIRE_MESSAGE(exe != nullptr, "SRLAB_CLI must point at the command-line binary");
    std::string cmd = "'" + std::string(exe) + "'";
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    REQUIRE(st != -1);
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

// y = 2a - b + 0.5, noise-free: easy enough that tiny smoke runs stay finite
std::string linear_csv(int rows, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::string s = "a,b,y\n";
    for (int i = 0; i < rows; ++i) {
        const double a = u(gen), b = u(gen);
        s += num(a) + "," + num(b) + "," + num(2 * a - b + 0.5) + "\n";
    }
    return s;
}

// a metric cell written as %.17g round-trips exactly; "nan" matches a NaN value
void check_metric_cell(const std::string& cell, double v) {
    if (std::isnan(v)) {
        CHECK(cell == "nan");
    } else {
        CHECK(std::strtod(cell.c_str(), nullptr) == v);
    }
}

using Grouped = std::map<std::string, std::map<std::string, std::vector<double>>>;

} // namespace

TEST_SUITE("cli") {

TEST_CASE("an empty config keeps every documented default") {
    const RunConfig rc = parse_run_config(json::object());
    CHECK(rc.engine == "gp");
    CHECK(rc.seed == 0);
    CHECK(rc.test_fraction == 0.25);
    CHECK(rc.validation_fraction == 0.25);
    CHECK_FALSE(rc.standardize);

    CHECK(rc.gp.pop_size == 80);
    CHECK(rc.gp.generations == 200);
    CHECK(rc.gp.max_size == 128);
    CHECK(rc.gp.max_depth == 7);
    CHECK(rc.gp.variation_tolerance == 3);
    CHECK_FALSE(rc.gp.variation_failure_random);
    for (double w : rc.gp.variation_weights) CHECK(w == 1.0);
    CHECK(rc.gp.opt_iterations == 10);
    CHECK(rc.gp.selection.kind == SelectionKind::MadSemi);
    CHECK_FALSE(rc.gp.selection.mvt_weighted);
    REQUIRE(rc.gp.objectives.size() == 2);
    CHECK(rc.gp.objectives[0] == Objective::TrainLoss);
    CHECK(rc.gp.objectives[1] == Objective::Complexity);
    CHECK_FALSE(rc.gp.simplify.enabled);
    CHECK(rc.gp.simplify.tolerance == 0.01);
    CHECK(rc.gp.simplify.bottom_up);
    CHECK(rc.gp.simplify.hash_bits == 256);
    CHECK(rc.gp.simplify.max_subtree == 0);

    CHECK(rc.itea.pop_size == 250);
    CHECK(rc.itea.generations == 400);
    CHECK(rc.itea.terms_min == 2);
    CHECK(rc.itea.terms_max == 15);
    CHECK(rc.itea.strength_min == -3);
    CHECK(rc.itea.strength_max == 3);
    CHECK(rc.itea.max_nonzero_strengths == 2);
    CHECK(rc.itea.transforms.size() == 8);
    CHECK(rc.itea.heuristic == FitHeuristic::Ols);
    CHECK(rc.itea.lm_iterations == 10);
    CHECK(rc.itea.tournament_size == 3);
    CHECK(rc.itea.cache_capacity == 10000);

    const json j = run_config_to_json(rc);
    CHECK(j.at("selection") == "lex-mad-semi");
    CHECK(j.at("objectives") == json::array({"train_loss", "complexity"}));
    CHECK(j.at("transforms") ==
          json::array({"id", "sin", "cos", "tan", "sqrt", "log", "exp", "abs"}));
    CHECK(j.at("heuristic") == "ols");
    CHECK(j.at("simplify_traversal") == "bottom-up");
}

TEST_CASE("the digest is canonical over the effective configuration") {
    const RunConfig base = parse_run_config(json::object());
    CHECK(base.digest.size() == 16);
    CHECK(base.digest == fnv1a_hex(run_config_to_json(base).dump()));

    json a, b;
    a["seed"] = 7;
    a["pop_size"] = 12;
    b["pop_size"] = 12;
    b["seed"] = 7;
    CHECK(parse_run_config(a).digest == parse_run_config(b).digest);
    CHECK(parse_run_config(a).digest != base.digest);

    // 64-bit FNV-1a reference digests
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("hello") == "a430d84680aabd0b");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("malformed configs are rejected") {
    auto bad = [](const json& j) { CHECK_THROWS_AS(parse_run_config(j), config_error); };
    bad(json::array());
    bad({{"bogus_key", 1}});
    bad({{"engine", "annealing"}});
    bad({{"seed", -1}});
    bad({{"seed", 1.5}});
    bad({{"pop_size", "many"}});
    bad({{"standardize", 1}});
    bad({{"objectives", json::array()}});
    bad({{"objectives", json::array({"fitness"})}});
    bad({{"variation_weights", json::array({1, 2, 3})}});
    bad({{"selection", "roulette"}});
    bad({{"simplify_traversal", "sideways"}});
    bad({{"transforms", json::array()}});
    bad({{"heuristic", "annealing"}});
    bad({{"cache_capacity", 0}});
}

TEST_CASE("config files must exist and parse") {
    TmpDir t;
    CHECK_THROWS_AS(load_run_config(t.file("absent.json")), config_error);
    spit(t.file("broken.json"), "{nope");
    CHECK_THROWS_AS(load_run_config(t.file("broken.json")), config_error);
}

TEST_CASE("fit writes a model document and a per-generation log") {
    TmpDir t;
    spit(t.file("cfg.json"), R"({"pop_size":10,"generations":4,"max_size":24,"seed":5})");
    spit(t.file("train.csv"), linear_csv(48, 11));
    REQUIRE(run_tool({"fit", "--config", t.file("cfg.json"), "--data", t.file("train.csv"),
                      "--target", "y", "--out", t.file("model.json"), "--log",
                      t.file("log.csv")}) == 0);

    const json m = json::parse(slurp(t.file("model.json")));
    CHECK(m.at("format") == "sr-model/1");
    CHECK(m.at("engine") == "gp");
    CHECK(m.at("seed") == 5);
    CHECK(m.at("config_digest") == load_run_config(t.file("cfg.json")).digest);
    CHECK(m.at("target") == "y");
    CHECK(m.at("feature_names") == json::array({"a", "b"}));
    CHECK(m.at("standardization").is_null());
    CHECK(m.contains("tree"));
    CHECK(m.at("display").is_string());
    CHECK_FALSE(m.at("display").get<std::string>().empty());
    CHECK(m.at("picked_by_train_fallback").is_boolean());
    for (const char* k : {"r2_train", "r2_val", "r2_test", "nmse_train", "nmse_val", "nmse_test"})
        CHECK(m.at("metrics").contains(k));
    // non-finite metrics serialize as null; the training side must be real
    CHECK(m.at("metrics").at("r2_train").is_number());
    CHECK(m.at("metrics").at("nmse_train").is_number());
    CHECK(m.at("metrics").at("r2_train").get<double>() <= 1.0 + 1e-12);
    CHECK(m.at("metrics").at("nmse_train").get<double>() >= 0.0);

    const auto rows = split_lines(slurp(t.file("log.csv")));
    REQUIRE(rows.size() == 6); // header, the starting population, four generations
    CHECK(rows[0] == "generation,best_train_loss,best_val_loss,median_size,median_complexity,"
                     "n_simplifications,elapsed_ms");
    for (int g = 0; g < 5; ++g) {
        const auto cells = split_cells(rows[g + 1]);
        REQUIRE(cells.size() == 7);
        CHECK(cells[0] == std::to_string(g));
        CHECK(std::isfinite(std::strtod(cells[1].c_str(), nullptr)));
    }
}

TEST_CASE("a fixed seed reproduces the model file byte for byte") {
    TmpDir t;
    spit(t.file("cfg.json"), R"({"pop_size":8,"generations":3,"max_size":20,"seed":9})");
    spit(t.file("train.csv"), linear_csv(40, 3));
    REQUIRE(run_tool({"fit", "--config", t.file("cfg.json"), "--data", t.file("train.csv"),
                      "--out", t.file("m1.json")}) == 0);
    REQUIRE(run_tool({"fit", "--config", t.file("cfg.json"), "--data", t.file("train.csv"),
                      "--out", t.file("m2.json")}) == 0);
    CHECK(slurp(t.file("m1.json")) == slurp(t.file("m2.json")));

    spit(t.file("cfg2.json"), R"({"pop_size":8,"generations":3,"max_size":20,"seed":10})");
    REQUIRE(run_tool({"fit", "--config", t.file("cfg2.json"), "--data", t.file("train.csv"),
                      "--out", t.file("m3.json")}) == 0);
    CHECK(json::parse(slurp(t.file("m3.json"))).at("config_digest") !=
          json::parse(slurp(t.file("m1.json"))).at("config_digest"));
}

TEST_CASE("predict drops the stored target and matches columns by name") {
    TmpDir t;
    spit(t.file("cfg.json"), R"({"pop_size":8,"generations":3,"standardize":true,"seed":3})");

    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const int n = 44;
    std::vector<double> a(n), b(n), y(n);
    for (int i = 0; i < n; ++i) {
        a[i] = u(gen);
        b[i] = u(gen);
        y[i] = 2 * a[i] - b[i] + 0.5;
    }
    std::string plain = "a,b,y\n", shuffled = "b,y,a\n", renamed = "c,d\n", narrow = "a\n";
    for (int i = 0; i < n; ++i) {
        plain += num(a[i]) + "," + num(b[i]) + "," + num(y[i]) + "\n";
        shuffled += num(b[i]) + "," + num(y[i]) + "," + num(a[i]) + "\n";
        renamed += num(a[i]) + "," + num(b[i]) + "\n";
        narrow += num(a[i]) + "\n";
    }
    spit(t.file("plain.csv"), plain);
    spit(t.file("shuffled.csv"), shuffled);
    spit(t.file("renamed.csv"), renamed);
    spit(t.file("narrow.csv"), narrow);

    REQUIRE(run_tool({"fit", "--config", t.file("cfg.json"), "--data", t.file("plain.csv"),
                      "--out", t.file("model.json")}) == 0);
    REQUIRE(run_tool({"predict", "--model", t.file("model.json"), "--data", t.file("plain.csv"),
                      "--out", t.file("p1.csv")}) == 0);

    const std::string p1 = slurp(t.file("p1.csv"));
    const auto rows = split_lines(p1);
    REQUIRE(rows.size() == static_cast<size_t>(n) + 1);
    CHECK(rows[0] == "prediction");

    // same values, different column order: the name mapping must undo it
    REQUIRE(run_tool({"predict", "--model", t.file("model.json"), "--data", t.file("shuffled.csv"),
                      "--out", t.file("p2.csv")}) == 0);
    CHECK(slurp(t.file("p2.csv")) == p1);

    // unknown names but the right width: positional fallback
    REQUIRE(run_tool({"predict", "--model", t.file("model.json"), "--data", t.file("renamed.csv"),
                      "--out", t.file("p3.csv")}) == 0);
    CHECK(slurp(t.file("p3.csv")) == p1);

    // one feature missing entirely
    CHECK(run_tool({"predict", "--model", t.file("model.json"), "--data", t.file("narrow.csv"),
                    "--out", t.file("p4.csv")}) == 3);
}

TEST_CASE("a stored model is replayed verbatim on new rows") {
    TmpDir t;
    const int n = 20;
    std::vector<double> us(n), vs(n);
    std::string csv = "u,v\n";
    for (int i = 0; i < n; ++i) {
        us[i] = 0.25 * i - 2.0;
        vs[i] = std::sin(static_cast<double>(i)) + 2.0;
        csv += num(us[i]) + "," + num(vs[i]) + "\n";
    }
    spit(t.file("uv.csv"), csv);

    json gp_model;
    gp_model["format"] = "sr-model/1";
    gp_model["engine"] = "gp";
    gp_model["feature_names"] = json::array({"u", "v"});
    gp_model["target"] = "t";
    gp_model["standardization"] = nullptr;
    gp_model["tree"] = tree_to_json(Node::variable(1));
    spit(t.file("echo.json"), gp_model.dump());
    REQUIRE(run_tool({"predict", "--model", t.file("echo.json"), "--data", t.file("uv.csv"),
                      "--out", t.file("pg.csv")}) == 0);
    auto rows = split_lines(slurp(t.file("pg.csv")));
    REQUIRE(rows.size() == static_cast<size_t>(n) + 1);
    for (int i = 0; i < n; ++i)
        CHECK(std::strtod(rows[i + 1].c_str(), nullptr) == vs[i]); // %.17g round-trips

    json it_model;
    it_model["format"] = "sr-model/1";
    it_model["engine"] = "itea";
    it_model["feature_names"] = json::array({"u", "v"});
    it_model["target"] = "t";
    it_model["standardization"] = nullptr;
    it_model["itea"] = {{"beta0", 1.0},
                        {"terms", json::array({{{"transform", "id"},
                                                {"strengths", json::array({1, 0})},
                                                {"theta0", 0.0},
                                                {"theta1", 1.0},
                                                {"beta", 2.0}}})}};
    spit(t.file("affine.json"), it_model.dump());
    REQUIRE(run_tool({"predict", "--model", t.file("affine.json"), "--data", t.file("uv.csv"),
                      "--out", t.file("pi.csv")}) == 0);
    rows = split_lines(slurp(t.file("pi.csv")));
    REQUIRE(rows.size() == static_cast<size_t>(n) + 1);
    for (int i = 0; i < n; ++i)
        CHECK(std::strtod(rows[i + 1].c_str(), nullptr) ==
              doctest::Approx(1.0 + 2.0 * us[i]).epsilon(1e-12));
}

TEST_CASE("prediction inputs that cannot match the model are data errors") {
    TmpDir t;
    std::string wide = "p,q,r\n";
    for (int i = 0; i < 6; ++i) wide += num(i * 0.5) + "," + num(i + 1.0) + "," + num(2.0) + "\n";
    spit(t.file("wide.csv"), wide);

    json m;
    m["engine"] = "itea";
    m["feature_names"] = json::array({"u", "v"});
    m["standardization"] = nullptr;
    m["itea"] = {{"beta0", 0.0},
                 {"terms", json::array({{{"transform", "id"},
                                         {"strengths", json::array({1, 0})},
                                         {"theta0", 0.0},
                                         {"theta1", 1.0},
                                         {"beta", 1.0}}})}};
    spit(t.file("two_feature.json"), m.dump());
    CHECK(run_tool({"predict", "--model", t.file("two_feature.json"), "--data", t.file("wide.csv"),
                    "--out", t.file("p.csv")}) == 3);

    json hollow;
    hollow["engine"] = "gp";
    hollow["feature_names"] = json::array({"p", "q", "r"});
    spit(t.file("hollow.json"), hollow.dump()); // no tree at all
    CHECK(run_tool({"predict", "--model", t.file("hollow.json"), "--data", t.file("wide.csv"),
                    "--out", t.file("p.csv")}) == 3);

    json alien = hollow;
    alien["engine"] = "dowsing";
    spit(t.file("alien.json"), alien.dump());
    CHECK(run_tool({"predict", "--model", t.file("alien.json"), "--data", t.file("wide.csv"),
                    "--out", t.file("p.csv")}) == 3);

    json stale;
    stale["engine"] = "gp";
    stale["feature_names"] = json::array({"p", "q", "r"});
    stale["tree"] = tree_to_json(Node::variable(5)); // index past the data width
    spit(t.file("stale.json"), stale.dump());
    CHECK(run_tool({"predict", "--model", t.file("stale.json"), "--data", t.file("wide.csv"),
                    "--out", t.file("p.csv")}) == 3);

    spit(t.file("garbled.json"), "{not json");
    CHECK(run_tool({"predict", "--model", t.file("garbled.json"), "--data", t.file("wide.csv"),
                    "--out", t.file("p.csv")}) == 3);
    CHECK(run_tool({"predict", "--model", t.file("absent.json"), "--data", t.file("wide.csv"),
                    "--out", t.file("p.csv")}) == 3);
}

TEST_CASE("bench covers the config x dataset x seed grid in sorted order") {
    TmpDir t;
    fs::create_directories(t.path / "configs");
    fs::create_directories(t.path / "data");
    spit(t.file("configs/gp.json"),
         R"({"pop_size":8,"generations":3,"max_size":16,"opt_iterations":3})");
    spit(t.file("configs/itea.json"),
         R"({"engine":"itea","itea_pop_size":10,"itea_generations":3,"terms_min":2,)"
         R"("terms_max":3,"lm_iterations":2})");
    spit(t.file("data/lin1.csv"), linear_csv(40, 5));
    spit(t.file("data/lin2.csv"), linear_csv(40, 6));

    const std::vector<std::string> cmd = {"bench",   "--configs", t.file("configs"),
                                          "--data",  t.file("data"), "--seeds", "2",
                                          "--out",   t.file("r.csv")};
    REQUIRE(run_tool(cmd) == 0);

    const std::string first = slurp(t.file("r.csv"));
    const auto rows = split_lines(first);
    REQUIRE(rows.size() == 9); // header + 2 datasets x 2 methods x 2 seeds
    CHECK(rows[0] == "dataset,method,seed,r2_train,r2_val,r2_test,nmse_train,nmse_val,"
                     "nmse_test,size,complexity,runtime_ms");
    const char* want[8][3] = {{"lin1", "gp", "0"},   {"lin1", "gp", "1"},
                              {"lin1", "itea", "0"}, {"lin1", "itea", "1"},
                              {"lin2", "gp", "0"},   {"lin2", "gp", "1"},
                              {"lin2", "itea", "0"}, {"lin2", "itea", "1"}};
    for (int r = 0; r < 8; ++r) {
        const auto cells = split_cells(rows[r + 1]);
        REQUIRE(cells.size() == 12);
        CHECK(cells[0] == want[r][0]);
        CHECK(cells[1] == want[r][1]);
        CHECK(cells[2] == want[r][2]);
        for (int c = 3; c < 12; ++c) {
            char* end = nullptr;
            std::strtod(cells[c].c_str(), &end);
            CHECK(end != cells[c].c_str()); // numeric or the literal "nan"
        }
        CHECK(std::strtod(cells[9].c_str(), nullptr) >= 1.0); // model size
    }

    // nothing left to do: the rewrite must be byte-identical
    REQUIRE(run_tool(cmd) == 0);
    CHECK(slurp(t.file("r.csv")) == first);

    // a stored row carries exactly what a standalone fit reports
    RunConfig rc = load_run_config(t.file("configs/gp.json"));
    FitOutcome fo = run_fit(rc, load_csv(t.file("data/lin1.csv"), ""));
    const auto cells = split_cells(rows[1]); // lin1,gp,0 and the config's seed is 0
    check_metric_cell(cells[3], fo.r2_train);
    check_metric_cell(cells[5], fo.r2_test);
    check_metric_cell(cells[6], fo.nmse_train);
    check_metric_cell(cells[9], fo.size);
}

TEST_CASE("bench keeps finished rows verbatim when resuming") {
    TmpDir t;
    fs::create_directories(t.path / "configs");
    fs::create_directories(t.path / "data");
    spit(t.file("configs/gp.json"), R"({"pop_size":8,"generations":2,"max_size":16})");
    spit(t.file("data/lin.csv"), linear_csv(36, 8));

    // one seed is already "done" with sentinel metrics no real run would produce
    spit(t.file("r.csv"), "dataset,method,seed,r2_train,r2_val,r2_test,nmse_train,nmse_val,"
                          "nmse_test,size,complexity,runtime_ms\n"
                          "lin,gp,0,1,2,3,4,5,6,7,8,9\n");
    REQUIRE(run_tool({"bench", "--configs", t.file("configs"), "--data", t.file("data"),
                      "--seeds", "2", "--out", t.file("r.csv")}) == 0);

    const auto rows = split_lines(slurp(t.file("r.csv")));
    REQUIRE(rows.size() == 3);
    CHECK(rows[1] == "lin,gp,0,1,2,3,4,5,6,7,8,9");
    CHECK(rows[2].rfind("lin,gp,1,", 0) == 0);
    CHECK(rows[2] != "lin,gp,1,1,2,3,4,5,6,7,8,9");
}

TEST_CASE("bench argument and directory problems use the documented exit codes") {
    TmpDir t;
    fs::create_directories(t.path / "configs");
    fs::create_directories(t.path / "data");
    spit(t.file("data/lin.csv"), linear_csv(30, 1));

    // no configs at all
    CHECK(run_tool({"bench", "--configs", t.file("configs"), "--data", t.file("data"), "--seeds",
                    "1", "--out", t.file("r.csv")}) == 2);
    spit(t.file("configs/gp.json"), R"({"pop_size":8,"generations":1})");
    fs::create_directories(t.path / "empty");
    CHECK(run_tool({"bench", "--configs", t.file("configs"), "--data", t.file("empty"), "--seeds",
                    "1", "--out", t.file("r.csv")}) == 3);
    CHECK(run_tool({"bench", "--configs", t.file("configs"), "--data", t.file("data"), "--seeds",
                    "0", "--out", t.file("r.csv")}) == 2);
    CHECK(run_tool({"bench", "--configs", t.file("nowhere"), "--data", t.file("data"), "--seeds",
                    "1", "--out", t.file("r.csv")}) == 2);
    CHECK(run_tool({"bench", "--configs", t.file("configs"), "--data", t.file("nowhere"),
                    "--seeds", "1", "--out", t.file("r.csv")}) == 3);
}

TEST_CASE("profile endpoints are exact and the flat cases integrate cleanly") {
    Grouped g;
    g["wins"] = {{"d1", {1.0, 1.0}}, {"d2", {1.0}}, {"d3", {0.5, 1.0}}};
    g["fails"] = {{"d1", {0.0, -2.0}}, {"d2", {-0.5}}};
    g["half"] = {{"d1", {1.0}}, {"d2", {-1.0}}};
    const auto curves = profile_curves(g, "max");
    REQUIRE(curves.size() == 3);
    auto by_name = [&](const std::string& m) -> const ProfileCurve& {
        for (const auto& c : curves)
            if (c.method == m) return c;
        REQUIRE(false);
        return curves.front();
    };

    const auto& wins = by_name("wins");
    REQUIRE(wins.threshold.size() == 1001);
    REQUIRE(wins.probability.size() == 1001);
    CHECK(wins.threshold.front() == 0.0);
    CHECK(wins.threshold.back() == 1.0);
    for (double p : wins.probability) CHECK(p == 1.0);
    CHECK(wins.auc == 1.0); // exact, not approximate

    const auto& fails = by_name("fails");
    for (double p : fails.probability) CHECK(p == 0.0);
    CHECK(fails.auc == 0.0);

    const auto& half = by_name("half");
    for (double p : half.probability) CHECK(p == 0.5);
    CHECK(half.auc == 0.5);
}

TEST_CASE("median aggregation uses the per-dataset run median") {
    Grouped g;
    g["m"] = {{"d", {-1.0, 0.2, 1.0}}};
    const auto med = profile_curves(g, "median").front();
    const auto best = profile_curves(g, "max").front();
    CHECK(med.probability[200] == 1.0); // the median 0.2 clears x = 0.200
    CHECK(med.probability[201] == 0.0);
    CHECK(med.auc == doctest::Approx(0.2005).epsilon(1e-12));
    CHECK(best.auc == 1.0);

    Grouped e;
    e["m"] = {{"d", {0.0, 0.4}}}; // even count: the two middle runs average
    const auto mid = profile_curves(e, "median").front();
    CHECK(mid.probability[200] == 1.0);
    CHECK(mid.probability[201] == 0.0);
}

TEST_CASE("random curves are non-increasing and integrate to the clipped mean") {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> val(-2.0, 1.0);
    std::uniform_int_distribution<int> n_methods(1, 3), n_datasets(1, 4), n_runs(1, 5);
    for (int trial = 0; trial < 30; ++trial) {
        Grouped g;
        const int m = n_methods(gen);
        for (int i = 0; i < m; ++i) {
            const int d = n_datasets(gen);
            for (int j = 0; j < d; ++j) {
                auto& runs = g["m" + std::to_string(i)]["d" + std::to_string(j)];
                const int r = n_runs(gen);
                for (int k = 0; k < r; ++k) runs.push_back(val(gen));
            }
        }
        const std::string agg = trial % 2 ? "median" : "max";
        for (const auto& c : profile_curves(g, agg)) {
            REQUIRE(c.probability.size() == 1001);
            for (size_t k = 0; k + 1 < c.probability.size(); ++k)
                CHECK(c.probability[k + 1] <= c.probability[k]);
            CHECK(c.auc >= 0.0);
            CHECK(c.auc <= 1.0);

            // the integral of P[V >= x] over [0,1] is the mean of the clipped
            // aggregated values; the grid can miss by at most one step
            double mean = 0;
            int count = 0;
            for (const auto& [ds, runs] : g[c.method]) {
                std::vector<double> s(runs);
                std::sort(s.begin(), s.end());
                double v = agg == "max" ? s.back()
                                        : (s.size() % 2 ? s[s.size() / 2]
                                                        : (s[s.size() / 2 - 1] + s[s.size() / 2]) / 2);
                mean += std::max(0.0, v);
                ++count;
            }
            mean /= count;
            CHECK(std::abs(c.auc - mean) <= 1e-3);
        }
    }
}

TEST_CASE("profile rejects impossible inputs") {
    CHECK_THROWS_AS(profile_curves({}, "max"), data_error);
    Grouped g;
    g["m"] = {{"d", {0.5}}};
    CHECK_THROWS_AS(profile_curves(g, "mean"), config_error);
    Grouped e;
    e["m"] = {{"d", {}}};
    CHECK_THROWS_AS(profile_curves(e, "max"), data_error);
}

TEST_CASE("profile reads bench results and writes one block per method") {
    TmpDir t;
    spit(t.file("r.csv"), "dataset,method,seed,r2_test\n"
                          "d1,alpha,0,1\n"
                          "d1,alpha,1,0.25\n"
                          "d2,alpha,0,1\n"
                          "d1,beta,0,-1\n"
                          "d2,beta,0,0\n");
    REQUIRE(run_tool({"profile", "--results", t.file("r.csv"), "--agg", "max", "--out",
                      t.file("curves.csv")}) == 0);

    const auto rows = split_lines(slurp(t.file("curves.csv")));
    REQUIRE(rows.size() == 1 + 2 * 1001);
    CHECK(rows[0] == "method,threshold,probability,auc");
    CHECK(rows[1] == "alpha,0,1,1");
    CHECK(rows[1001] == "alpha,1,1,1");
    CHECK(rows[1002] == "beta,0,0,0");
    CHECK(rows[2002] == "beta,1,0,0");

    CHECK(run_tool({"profile", "--results", t.file("r.csv"), "--agg", "sum", "--out",
                    t.file("curves.csv")}) == 2);
    spit(t.file("no_col.csv"), "dataset,method,seed\n" "d1,alpha,0\n");
    CHECK(run_tool({"profile", "--results", t.file("no_col.csv"), "--agg", "max", "--out",
                    t.file("curves.csv")}) == 3);
    spit(t.file("header_only.csv"), "dataset,method,seed,r2_test\n");
    CHECK(run_tool({"profile", "--results", t.file("header_only.csv"), "--agg", "max", "--out",
                    t.file("curves.csv")}) == 3);
    CHECK(run_tool({"profile", "--results", t.file("absent.csv"), "--agg", "max", "--out",
                    t.file("curves.csv")}) == 3);
}

TEST_CASE("usage problems and missing inputs map to the documented exit codes") {
    TmpDir t;
    CHECK(run_tool({}) == 2); // a subcommand is required
    CHECK(run_tool({"transmogrify"}) == 2);
    CHECK(run_tool({"fit", "--config", t.file("cfg.json")}) == 2); // required flags missing
    CHECK(run_tool({"--help"}) == 0);

    spit(t.file("cfg.json"), R"({"pop_size":8,"generations":2})");
    spit(t.file("bad.json"), R"({"bogus":1})");
    spit(t.file("train.csv"), linear_csv(30, 2));
    CHECK(run_tool({"fit", "--config", t.file("bad.json"), "--data", t.file("train.csv"), "--out",
                    t.file("m.json")}) == 2);
    CHECK(run_tool({"fit", "--config", t.file("cfg.json"), "--data", t.file("absent.csv"),
                    "--out", t.file("m.json")}) == 3);
    CHECK(run_tool({"fit", "--config", t.file("cfg.json"), "--data", t.file("train.csv"),
                    "--target", "zzz", "--out", t.file("m.json")}) == 3);

    // a constant target has no variance to normalize by
    std::string flat = "a,y\n";
    for (int i = 0; i < 30; ++i) flat += num(i * 0.1) + ",4.2\n";
    spit(t.file("flat.csv"), flat);
    spit(t.file("itea.json"), R"({"engine":"itea","itea_pop_size":8,"itea_generations":2,)"
                              R"("terms_min":2,"terms_max":3,"lm_iterations":2})");
    CHECK(run_tool({"fit", "--config", t.file("itea.json"), "--data", t.file("flat.csv"), "--out",
                    t.file("m.json")}) == 4);
}

} // TEST_SUITE
