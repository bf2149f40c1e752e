#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "hmf/cli.hpp"
#include "hmf/io.hpp"
#include "support.hpp"

using namespace hmf;
using nlohmann::json;

namespace {

int call(const std::vector<std::string>& args, std::string* stdout_text = nullptr)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (stdout_text) *stdout_text = out.str();
    return code;
}

json load(const std::filesystem::path& p) { return json::parse(read_file(p)); }

const char* kSmallSim = R"({"grid": {"lx": 0.5, "nx": 257, "ny": 129},
 "initial": {"bubbles": [{"lambda": 0.04, "q": 0.0}], "delta": DELTA, "twist": 10.0},
 "stop": {"max_steps": 80}, "output": {"cadence": 20}})";

std::string small_sim(const std::string& delta)
{
    std::string s = kSmallSim;
    s.replace(s.find("DELTA"), 5, delta);
    return s;
}

}  // namespace

TEST_CASE("usage errors exit with 2")
{
    CHECK(call({}) == cli::kUsage);
    CHECK(call({"nope"}) == cli::kUsage);
    CHECK(call({"profile", "--degree", "x"}) == cli::kUsage);
    CHECK(call({"gamma", "--k-variant", "kxx"}) == cli::kUsage);
    CHECK(call({"simulate", "--boundary", "dirichlet"}) == cli::kUsage);
    CHECK(call({"--help"}) == cli::kOk);
    test::TempDir d("cli_usage");
    CHECK(call({"profile", "--degree", "0", "--out", d.path().string()}) == cli::kUsage);
    write_file(d.path() / "bad.json", R"({"degree": 1, "colour": "red"})");
    CHECK(call({"profile", "--config", (d.path() / "bad.json").string(), "--out", d.path().string()}) == cli::kUsage);
}

TEST_CASE("profile emits the trace from -range and the energy report")
{
    test::TempDir d("cli_profile");
    std::string text;
    REQUIRE(call({"profile", "--degree", "1", "--range", "50", "--out", d.path().string()}, &text) == cli::kOk);
    const std::string csv = read_file(d.path() / "profile.csv");
    const auto second = csv.substr(csv.find('\n') + 1);
    CHECK(second.rfind("-50,", 0) == 0);
    const auto e = load(d.path() / "energy.json");
    CHECK(e["within_tail_bound"] == true);
    CHECK(e["target"].get<double>() == doctest::Approx(3.141592653589793));
    CHECK(text.find("energy ") == 0);
    const auto m = load(d.path() / "manifest.json");
    CHECK(m["command"] == "profile");
    CHECK(m["files"].size() == 4);
}

TEST_CASE("profile of degree two carries 2 pi")
{
    test::TempDir d("cli_profile2");
    REQUIRE(call({"profile", "--degree", "2", "--out", d.path().string()}) == cli::kOk);
    const auto e = load(d.path() / "energy.json");
    CHECK(e["corrected"].get<double>() == doctest::Approx(2 * 3.141592653589793).epsilon(0.01));
}

TEST_CASE("gamma emits both readings and the tau = 0 row")
{
    test::TempDir d("cli_gamma");
    REQUIRE(call({"gamma", "--k-variant", "both", "--out", d.path().string()}) == cli::kOk);
    const auto g = load(d.path() / "gamma.json");
    CHECK(g["variants"].contains("kzz"));
    CHECK(g["variants"].contains("ksq"));
    CHECK(g["gamma_b0_error"].get<double>() <= 1e-6);
    for (const char* f : {"gamma_kzz.csv", "gamma_ksq.csv"}) {
        const std::string csv = read_file(d.path() / f);
        const auto row = csv.substr(csv.find('\n') + 1);
        CHECK(row.rfind("0,", 0) == 0);
        CHECK(row.find(",1.5707963") != std::string::npos);
    }
    CHECK(g["variants"]["kzz"]["tau_gamma0_bounded"] == true);
}

TEST_CASE("modulate: lambda0 vanishes at T, kappa0 = -2 b2 / c, A decreases")
{
    test::TempDir d("cli_modulate");
    std::string text;
    REQUIRE(call({"modulate", "--out", d.path().string()}, &text) == cli::kOk);
    CHECK(text.find("-2 b2 / c = 0.4") != std::string::npos);
    const auto m = load(d.path() / "modulate.json")["variants"]["kzz"];
    CHECK(m["kappa0"].get<double>() == doctest::Approx(-2 * m["b2"].get<double>() / m["c"].get<double>()));
    CHECK(m["A_decreasing"] == true);
    for (const auto& h : m["horizons"]) {
        CHECK(h["lambda_at_T"].get<double>() == 0.0);
        const std::string csv = read_file(d.path() / ("path_kzz_T" + fmt(h["T"].get<double>()) + ".csv"));
        const auto last = csv.substr(csv.rfind('\n', csv.size() - 2) + 1);
        CHECK(last.find(",0,") != std::string::npos);
    }
}

TEST_CASE("residual: p = 0 grid vanishes, FD error and symmetry flags are reported")
{
    test::TempDir d("cli_residual");
    REQUIRE(call({"residual", "--out", d.path().string()}) == cli::kOk);
    const auto r = load(d.path() / "residual.json");
    CHECK(r["p_zero_identically_zero"] == true);
    CHECK(r["fd_max_rel_error"].get<double>() <= 1e-3);
    CHECK(r.contains("e1_symmetric"));
    CHECK(r.contains("e2_symmetric"));
    CHECK(r["e1_symmetric"] == true);
}

TEST_CASE("simulate is deterministic and the delta = 0 control does not blow up")
{
    test::TempDir d("cli_sim");
    write_file(d.path() / "a.json", small_sim("0.1"));
    write_file(d.path() / "c.json", small_sim("0.0"));
    const auto cfg = (d.path() / "a.json").string();
    REQUIRE(call({"simulate", "--config", cfg, "--out", (d.path() / "r1").string()}) == cli::kOk);
    REQUIRE(call({"simulate", "--config", cfg, "--threads", "3", "--out", (d.path() / "r2").string()}) == cli::kOk);
    CHECK(read_file(d.path() / "r1/report.json") == read_file(d.path() / "r2/report.json"));
    CHECK(read_file(d.path() / "r1/series.csv") == read_file(d.path() / "r2/series.csv"));
    const auto m1 = load(d.path() / "r1/manifest.json"), m2 = load(d.path() / "r2/manifest.json");
    CHECK(m1["config_digest"] == m2["config_digest"]);
    CHECK(m1["steps"] == 80);

    REQUIRE(call({"simulate", "--config", (d.path() / "c.json").string(), "--out", (d.path() / "c").string()}) ==
            cli::kOk);
    CHECK(load(d.path() / "c/report.json")["blowup_detected"] == false);
}

TEST_CASE("config digest is content based")
{
    const json a = {{"x", 1.0}, {"y", "z"}};
    CHECK(cli::config_digest(a) == cli::config_digest(json::parse(a.dump())));
    CHECK(cli::config_digest(a) != cli::config_digest({{"x", 1.5}, {"y", "z"}}));
}
