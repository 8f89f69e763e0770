#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fuselab/byte_io.hpp"
#include "fuselab/dataset.hpp"
#include "fuselab/model_io.hpp"
#include "process.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace fuselab;
using testing::run;

namespace {

const std::string kBin = FUSELAB_BIN;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

/// Small train/val/test files at the default embedding widths.
struct Fixture {
    testing::TempDir dir;
    std::string train = (dir / "train.mmeb").string();
    std::string val = (dir / "val.mmeb").string();
    std::string test = (dir / "test.mmeb").string();

    Fixture() {
        save_embeddings(testing::separable_dataset(30, 1, 768, 384, 2.0, "tr"), train);
        save_embeddings(testing::separable_dataset(9, 2, 768, 384, 2.0, "va"), val);
        save_embeddings(testing::separable_dataset(3, 3, 768, 384, 2.0, "te"), test);
    }

    std::string train_cmd(const std::string& kind, const std::string& out, const std::string& extra = "",
                          int epochs = 3) const {
        return kBin + " train --model " + kind + " --train " + train + " --val " + val + " --epochs " +
               std::to_string(epochs) + " --batch 8 --seed 5 --quiet --out " + out + " " + extra + " 2>/dev/null";
    }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run(kBin + " 2>/dev/null").exit_code == 2);
    CHECK(run(kBin + " train 2>/dev/null").exit_code == 2);
    CHECK(run(kBin + " frobnicate 2>/dev/null").exit_code == 2);
    Fixture f;
    CHECK(run(f.train_cmd("basic", (f.dir / "m").string(), "--lr -1")).exit_code == 2);
    CHECK(run(f.train_cmd("basic", (f.dir / "m").string(), "--dropout 1.0")).exit_code == 2);
    CHECK(run(f.train_cmd("basic", (f.dir / "m").string(), "--loss hinge")).exit_code == 2);
    CHECK(run(kBin + " train --model basic --train /nonexistent --val " + f.val + " --out x 2>/dev/null").exit_code == 2);
}

TEST_CASE("runtime failures exit with 1") {
    Fixture f;
    io::write_file_atomic(f.dir / "junk.mmeb", std::vector<std::uint8_t>{'n', 'o', 'p', 'e'});
    CHECK(run(kBin + " train --model basic --quiet --train " + (f.dir / "junk.mmeb").string() + " --val " + f.val +
              " --out " + (f.dir / "m").string() + " 2>/dev/null").exit_code == 1);
    CHECK(run(f.train_cmd("triple", (f.dir / "m").string())).exit_code != 0);
}

TEST_CASE("train is reproducible and writes its artifacts") {
    Fixture f;
    const auto a = (f.dir / "a.fmdl").string(), b = (f.dir / "b.fmdl").string();
    REQUIRE(run(f.train_cmd("dual-attn", a, "--dropout 0.2")).exit_code == 0);
    REQUIRE(run(f.train_cmd("dual-attn", b, "--dropout 0.2")).exit_code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a + ".history.csv") == slurp(b + ".history.csv"));
    CHECK(load_model(a).kind == FusionKind::DualAttention);
    auto metrics = nlohmann::json::parse(slurp(a + ".metrics.json"));
    CHECK(metrics.at("kind") == "dual-attn");
    CHECK(metrics.contains("validation"));
    CHECK(count_lines(slurp(a + ".history.csv")) == 1 + metrics.at("epochs_run").get<std::size_t>());
}

TEST_CASE("eval and predict") {
    Fixture f;
    const auto m = (f.dir / "m.fmdl").string();
    REQUIRE(run(f.train_cmd("self-attn", m)).exit_code == 0);

    auto ev = run(kBin + " eval --model-file " + m + " --embeddings " + f.test + " 2>/dev/null");
    REQUIRE(ev.exit_code == 0);
    auto j = nlohmann::json::parse(ev.out);
    CHECK(j.at("records") == 3);
    CHECK(j.contains("macro_f1"));

    auto pr = run(kBin + " predict --model-file " + m + " --embeddings " + f.test + " 2>/dev/null");
    REQUIRE(pr.exit_code == 0);
    CHECK(count_lines(pr.out) == 3);
    std::istringstream lines(pr.out);
    std::string line;
    while (std::getline(lines, line)) {
        auto row = nlohmann::json::parse(line);
        double total = 0.0;
        for (double p : row.at("probs")) total += p;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(row.at("pred").get<int>() >= 0);
    }

    CHECK(run(kBin + " eval --model basic --model-file " + m + " --embeddings " + f.test + " 2>/dev/null").exit_code != 0);
}

TEST_CASE("gridsearch over a restricted grid") {
    Fixture f;
    const auto out = (f.dir / "grid.csv").string();
    auto r = run(kBin + " gridsearch --train " + f.train + " --val " + f.val +
                 " --lr 1e-3 --dropout 0 --gamma 2,3,4 --model basic --epochs 2 --quiet --out " + out + " 2>/dev/null");
    REQUIRE(r.exit_code == 0);
    CHECK(count_lines(slurp(out)) == 4);
    auto best = nlohmann::json::parse(slurp(out + ".best.json"));
    CHECK(best.at("kind") == "basic");
    CHECK(best.at("cells") == 3);
}

TEST_CASE("gradcheck exit status") {
    auto ok = run(kBin + " gradcheck --model self-attn --coords 4 2>/dev/null");
    CHECK(ok.exit_code == 0);
    CHECK(nlohmann::json::parse(ok.out).at("passed") == true);
    auto bad = run(kBin + " gradcheck --model basic --coords 4 --fault-block classifier.hidden.weight 2>/dev/null");
    CHECK(bad.exit_code == 1);
    CHECK(nlohmann::json::parse(bad.out).at("passed") == false);
    CHECK(run(kBin + " gradcheck --eps 0 2>/dev/null").exit_code == 2);
}

TEST_CASE("split") {
    testing::TempDir dir;
    const auto all = (dir / "all.mmeb").string();
    save_embeddings(testing::separable_dataset(300, 9, 16, 8), all);
    const auto prefix = (dir / "part").string();
    auto r = run(kBin + " split --embeddings " + all + " --seed 1 --out " + prefix + " 2>/dev/null");
    REQUIRE(r.exit_code == 0);
    CHECK(load_embeddings(prefix + ".train.mmeb").size() == 240);
    CHECK(load_embeddings(prefix + ".val.mmeb").size() == 30);
    CHECK(load_embeddings(prefix + ".test.mmeb").size() == 30);
    CHECK(run(kBin + " split --embeddings " + all + " --fractions 0.5,0.3,0.3 --out " + prefix + " 2>/dev/null").exit_code == 2);
    CHECK(run(kBin + " split --embeddings " + all + " --fractions 0.5,0.5 --out " + prefix + " 2>/dev/null").exit_code == 2);
}

TEST_CASE("report") {
    Fixture f;
    const auto m = (f.dir / "m.fmdl").string();
    REQUIRE(run(f.train_cmd("basic", m, "--patience 10", 10)).exit_code == 0);
    const auto out = (f.dir / "breakdown.csv").string();
    auto r = run(kBin + " report --history " + m + ".history.csv --out " + out + " --quiet 2>/dev/null");
    REQUIRE(r.exit_code == 0);
    const auto wide = slurp(out);
    CHECK(wide.rfind("epoch,f1_negative,f1_neutral,f1_positive\n", 0) == 0);
    CHECK(count_lines(wide) == 11);
    CHECK(count_lines(slurp((f.dir / "breakdown.long.csv").string())) == 31);
}
