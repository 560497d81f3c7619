#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <mpcg/mpcg.hpp>

namespace fs = std::filesystem;
using namespace mpcg;

namespace {

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    static fs::path dir() {
        static const fs::path d = [] {
            auto p = fs::temp_directory_path() / ("mpcg_cli_" + std::to_string(::getpid()));
            fs::create_directories(p);
            return p;
        }();
        return d;
    }

    static RunResult run(const std::string& args) {
        const auto out = dir() / "stdout.txt";
        const auto err = dir() / "stderr.txt";
        const std::string cmd = std::string(MPCG_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    static std::string write_matrix(const std::string& name, const std::string& body) {
        const auto p = dir() / name;
        std::ofstream(p) << body;
        return p.string();
    }

    static std::string value_of(const std::string& out, const std::string& key) {
        std::istringstream in(out);
        std::string k, rest;
        while (in >> k) {
            std::getline(in, rest);
            if (k == key) return rest.substr(rest.find_first_not_of(' '));
        }
        return {};
    }
};

const char* identity4 = "%%MatrixMarket matrix coordinate real symmetric\n4 4 4\n1 1 1\n2 2 1\n3 3 1\n4 4 1\n";
const char* path3 =
    "%%MatrixMarket matrix coordinate real symmetric\n3 3 5\n1 1 3\n2 1 1\n2 2 3\n3 2 1\n3 3 3\n";

} // namespace

TEST_F(Cli, FeaturesOfIdentity) {
    const auto r = run("features " + write_matrix("i4.mtx", identity4));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(value_of(r.out, "n"), "4");
    EXPECT_EQ(value_of(r.out, "m"), "4");
    EXPECT_EQ(value_of(r.out, "pseudo_diameter"), "0");
    EXPECT_EQ(value_of(r.out, "spread"), "0");
    EXPECT_EQ(value_of(r.out, "lambda_max"), "1");
    EXPECT_EQ(value_of(r.out, "combined"), "[1, 1]");
}

TEST_F(Cli, FeaturesOfTridiagonal) {
    const auto r = run("features " + write_matrix("p3.mtx", path3));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(value_of(r.out, "n"), "3");
    EXPECT_EQ(value_of(r.out, "m"), "7");
    EXPECT_EQ(value_of(r.out, "pseudo_diameter"), "2");
    EXPECT_DOUBLE_EQ(std::stod(value_of(r.out, "spread")), 4.0 / 6.0);
    EXPECT_EQ(value_of(r.out, "lambda_max"), "5");
    EXPECT_EQ(value_of(r.out, "basic"), "[1, 5]");
}

TEST_F(Cli, FeaturesInputErrors) {
    auto r = run("features " + (dir() / "does_not_exist.mtx").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.err.empty());
    r = run("features " + write_matrix("bad.mtx", "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1\n2 2 1\n"));
    EXPECT_EQ(r.code, 2);
    r = run("features");
    EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, SolveIdentity) {
    const auto x = dir() / "x.txt";
    const auto r = run("solve " + write_matrix("i4s.mtx", identity4) + " --eps1 0.1 --x-out " + x.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_LE(std::stoul(value_of(r.out, "n1")), 1u);
    EXPECT_LE(std::stoul(value_of(r.out, "n2")), 1u);
    EXPECT_LE(std::stod(value_of(r.out, "final_residual")), 1e-10);
    EXPECT_EQ(slurp(x), "1\n1\n1\n1\n");
}

TEST_F(Cli, SolveRhsSources) {
    const auto m = write_matrix("p3r.mtx", path3);
    auto r = run("--seed 4 solve " + m + " --rhs random --eps1 1e-3");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto b = dir() / "b.txt";
    std::ofstream(b) << "5 5 4\n";
    r = run("solve " + m + " --rhs " + b.string() + " --x-out " + (dir() / "xb.txt").string());
    ASSERT_EQ(r.code, 0) << r.err;
    std::ofstream(b) << "1 2\n";
    EXPECT_EQ(run("solve " + m + " --rhs " + b.string()).code, 2);
}

TEST_F(Cli, SolveValidation) {
    const auto m = write_matrix("i4v.mtx", identity4);
    EXPECT_EQ(run("solve " + m + " --eps1 1e-12").code, 2);
    EXPECT_EQ(run("solve " + m + " --eps1 abc").code, 2);
    EXPECT_EQ(run("--mu 1.5 solve " + m).code, 2);
    EXPECT_EQ(run("--residual sideways solve " + m).code, 2);
    EXPECT_EQ(run("solve " + m + " --eps1 auto").code, 4);
    EXPECT_EQ(run("solve " + m + " --eps1 auto --model " + (dir() / "none.json").string()).code, 4);
}

TEST_F(Cli, SolveBreakdownIsRuntimeFailure) {
    // symmetric, indefinite: CG hits zero curvature
    const auto m = write_matrix("indef.mtx",
                                "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n2 2 -1\n");
    EXPECT_EQ(run("solve " + m + " --eps1 0.1").code, 3);
}

TEST_F(Cli, PipelineEndToEnd) {
    const auto d = dir() / "pipe";
    fs::create_directories(d);
    const auto plan = (d / "plan.json").string();
    const auto sample = (d / "sample.jsonl").string();
    const auto model = (d / "model.json").string();
    const auto report = (d / "report.txt").string();
    const auto mtx = (d / "mtx").string();

    auto r = run("--seed 3 generate --matrices 50 --n-min 60 --n-max 160 --out " + plan + " --mtx-dir " + mtx);
    ASSERT_EQ(r.code, 0) << r.err;
    r = run("--threads 2 label --plan " + plan + " --out " + sample);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto records = read_sample(sample);
    ASSERT_GE(records.size(), 50u);
    EXPECT_TRUE(fs::exists(manifest_path_for(sample)));

    r = run("--seed 3 train --sample " + sample + " --model " + model);
    ASSERT_EQ(r.code, 0) << r.err;
    r = run("evaluate --model " + model + " --sample " + sample + " --report " + report);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = read_json_file(report + ".json");
    EXPECT_LE(rep.at("n_opt").get<double>(), rep.at("n_knn").get<double>());
    EXPECT_LE(rep.at("n_knn").get<double>(), rep.at("n_wrst").get<double>());
    EXPECT_EQ(slurp(report), r.out);

    // k = 1 on the training side reproduces the optimal labels
    const auto report1 = (d / "train_k1.txt").string();
    r = run("evaluate --model " + model + " --sample " + sample + " --on train --k 1 --report " + report1);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep1 = read_json_file(report1 + ".json");
    EXPECT_EQ(rep1.at("n_knn").get<double>(), rep1.at("n_opt").get<double>());

    // same seeds, byte-identical artefacts
    const auto d2 = dir() / "pipe2";
    fs::create_directories(d2);
    ASSERT_EQ(run("--seed 3 generate --matrices 50 --n-min 60 --n-max 160 --out " + (d2 / "plan.json").string()).code, 0);
    ASSERT_EQ(run("label --plan " + (d2 / "plan.json").string() + " --out " + (d2 / "sample.jsonl").string()).code, 0);
    ASSERT_EQ(run("--seed 3 train --sample " + (d2 / "sample.jsonl").string() + " --model " + (d2 / "model.json").string()).code, 0);
    ASSERT_EQ(run("evaluate --model " + (d2 / "model.json").string() + " --sample " + (d2 / "sample.jsonl").string() +
                  " --report " + (d2 / "report.txt").string()).code, 0);
    EXPECT_EQ(slurp(plan), slurp(d2 / "plan.json"));
    EXPECT_EQ(slurp(sample), slurp(d2 / "sample.jsonl"));
    EXPECT_EQ(slurp(model), slurp(d2 / "model.json"));
    EXPECT_EQ(slurp(report), slurp(d2 / "report.txt"));
    EXPECT_EQ(slurp(report + ".json"), slurp(d2 / "report.txt.json"));

    // auto on a training-side matrix predicts its stored label with k = 1
    const auto mf = read_json_file(model).get<ModelFile>();
    auto m1 = mf;
    m1.model.k = 1;
    const auto model1 = (d / "model_k1.json").string();
    write_json_file(model1, json(m1));
    std::set<std::string> held(mf.test_ids.begin(), mf.test_ids.end());
    std::size_t checked = 0;
    for (const auto& rec : records) {
        if (held.count(rec.matrix_id) || !rec.valid) continue;
        r = run("solve " + (fs::path(mtx) / (rec.matrix_id + ".mtx")).string() + " --eps1 auto --model " + model1);
        ASSERT_EQ(r.code, 0) << r.err;
        EXPECT_EQ(std::stoul(value_of(r.out, "class")), rec.label) << rec.matrix_id;
        EXPECT_EQ(std::stod(value_of(r.out, "cost")), rec.cost_of(rec.label));
        if (++checked == 5) break;
    }
    EXPECT_EQ(checked, 5u);
}

TEST_F(Cli, MissingInputsForWorkflow) {
    EXPECT_EQ(run("label --plan " + (dir() / "nope.json").string() + " --out " + (dir() / "s.jsonl").string()).code, 5);
    EXPECT_EQ(run("train --sample " + (dir() / "nope.jsonl").string() + " --model " + (dir() / "m.json").string()).code, 5);
    EXPECT_EQ(run("evaluate --model " + (dir() / "nope.json").string() + " --sample x").code, 4);
    EXPECT_EQ(run("--grid 1e-2,1e-1 label --plan x --out y").code, 2);
}
