#include <doctest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "uapforge/attacks.hpp"
#include "uapforge/cli.hpp"
#include "uapforge/data.hpp"

using namespace uapforge;
using testing_support::ScratchDir;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string small_data(const ScratchDir& dir, const std::string& sub = "data") {
    const auto out = (dir / sub).string();
    const auto r = run({"gen-data", "--channels", "4", "--samples", "32", "--per-class", "40", "--out", out});
    REQUIRE(r.code == 0);
    return out + "/trials.eegb";
}

std::string value_after(const std::string& text, const std::string& key) {
    const auto at = text.find(key);
    REQUIRE(at != std::string::npos);
    return text.substr(at + key.size(), text.find_first_of(" \n", at + key.size()) - at - key.size());
}

}  // namespace

TEST_CASE("cli gen-data: byte-stable output and summary line") {
    ScratchDir dir("cli-gen");
    const auto a = small_data(dir, "a");
    const auto b = small_data(dir, "b");
    CHECK(testing_support::read_bytes(a) == testing_support::read_bytes(b));
    const auto r = run({"gen-data", "--classes", "3", "--channels", "2", "--samples", "16", "--per-class", "5",
                        "--out", (dir / "c").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("n=15 C=2 T=16 K=3") != std::string::npos);
    CHECK(read_trials(dir / "c" / "trials.eegb").size() == 15);
}

TEST_CASE("cli: invalid values and usage errors exit with 2") {
    ScratchDir dir("cli-usage");
    CHECK(run({"gen-data", "--classes", "1", "--out", (dir / "x").string()}).code == cli::kExitUsage);
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"no-such-command"}).code == cli::kExitUsage);
    const auto missing = (dir / "missing.eegb").string();
    const auto r = run({"train", "--data", missing, "--out", (dir / "m.json").string()});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("missing.eegb") != std::string::npos);
}

TEST_CASE("cli: a corrupt trial file is a runtime failure") {
    ScratchDir dir("cli-corrupt");
    std::ofstream(dir / "bad.eegb") << "not a trial file";
    const auto r = run({"train", "--data", (dir / "bad.eegb").string(), "--out", (dir / "m.json").string()});
    CHECK(r.code == cli::kExitFailure);
    CHECK_FALSE(r.err.empty());
}

TEST_CASE("cli train, craft and eval end to end") {
    ScratchDir dir("cli-e2e");
    const auto data = small_data(dir);
    const auto model = (dir / "m.json").string();

    auto t = run({"train", "--data", data, "--model", "affine", "--seed", "1", "--out", model});
    REQUIRE(t.code == 0);
    CHECK(std::stod(value_after(t.out, "validation rca=")) >= 0.9);

    const auto uap = (dir / "v.uapf").string();
    auto c = run({"craft", "--model", model, "--data", data, "--method", "tlm", "--max-iter", "20", "--out", uap,
                  "--csv", (dir / "v.csv").string()});
    REQUIRE(c.code == 0);
    CHECK(c.out.find("validation asr=") != std::string::npos);
    const auto v = read_uap(uap);
    CHECK(norm(v.values.values(), NormOrder::Linf) <= v.xi + 1e-9);
    CHECK(std::filesystem::exists(dir / "v.csv"));

    auto df_target = run({"craft", "--model", model, "--data", data, "--method", "df", "--target", "1", "--out",
                          (dir / "d.uapf").string()});
    CHECK(df_target.code == cli::kExitUsage);

    write_uap(Uap::zeros(UapMode::Full, 4, 32, 0.2, NormOrder::Linf), dir / "zero.uapf");
    const auto report = (dir / "r.csv").string();
    auto e = run({"eval", "--model", model, "--data", data, "--uap", uap, "--uap", (dir / "zero.uapf").string(),
                  "--baseline", "noise", "--out", report});
    REQUIRE(e.code == 0);
    std::istringstream lines(e.out);
    std::string header, clean, noise, crafted, zero;
    std::getline(lines, header);
    std::getline(lines, clean);
    std::getline(lines, noise);
    std::getline(lines, crafted);
    std::getline(lines, zero);
    CHECK(header.rfind("cell,dataset,split,victim,attack,", 0) == 0);
    CHECK(clean.find(",clean,") != std::string::npos);
    CHECK(noise.find(",noise,") != std::string::npos);
    CHECK(crafted.find(",v,") != std::string::npos);
    CHECK(zero.find(",zero,") != std::string::npos);
    CHECK(zero.find(",0.000000,nan,inf,") != std::string::npos);
    CHECK(testing_support::read_bytes(report) == e.out);
    CHECK(std::filesystem::exists(dir / "r.json"));

    write_uap(Uap::zeros(UapMode::Full, 4, 16, 0.2, NormOrder::Linf), dir / "short.uapf");
    CHECK(run({"eval", "--model", model, "--data", data, "--uap", (dir / "short.uapf").string(), "--out",
               (dir / "s.csv").string()})
              .code == cli::kExitUsage);
}

TEST_CASE("cli --config: sections override top-level keys and the command line overrides both") {
    ScratchDir dir("cli-config");
    const auto cfg = dir / "cfg.json";
    std::ofstream(cfg) << R"({"channels": 3, "gen-data": {"samples": 24, "per-class": 4}})";
    auto r = run({"--config", cfg.string(), "gen-data", "--samples", "20", "--out", (dir / "a").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("n=8 C=3 T=20 K=2") != std::string::npos);
    r = run({"--config", cfg.string(), "gen-data", "--out", (dir / "b").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("C=3 T=24") != std::string::npos);

    std::ofstream(dir / "bad.json") << R"({"no-such-flag": 1})";
    CHECK(run({"--config", (dir / "bad.json").string(), "gen-data", "--out", (dir / "c").string()}).code ==
          cli::kExitUsage);
}

TEST_CASE("cli sweep: one row per grid point after the clean row") {
    ScratchDir dir("cli-sweep");
    const auto data = small_data(dir);
    const auto r = run({"sweep", "--data", data, "--victim", "affine", "--epochs", "10", "--param", "xi",
                        "--values", "0.05,0.3", "--max-iter", "5", "--out", (dir / "s.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find(",clean,") != std::string::npos);
    CHECK(r.out.find("tlm@xi=0.05") != std::string::npos);
    CHECK(r.out.find("tlm@xi=0.3") != std::string::npos);
}
