// mpcg: command-line front end for feature extraction, two-stage solves and
// the sample / train / evaluate workflow.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <mpcg/mpcg.hpp>

namespace fs = std::filesystem;
using namespace mpcg;

namespace {

enum Exit : int { ok = 0, config_error = 2, runtime_error = 3, missing_model = 4, io_error = 5 };

/// Failure carrying the process exit code.
struct Failure {
    int code;
    std::string message;
};

int exit_code_for(ErrorCode c) {
    switch (c) {
    case ErrorCode::IoError:
        return io_error;
    case ErrorCode::BreakdownDivisionByZero:
    case ErrorCode::Stage2NotConverged:
    case ErrorCode::EmptyIntersection:
    case ErrorCode::DegenerateInterval:
    case ErrorCode::GraphFull:
        return runtime_error;
    default:
        return config_error;
    }
}

std::string num(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, end) : std::to_string(v);
}

std::string interval(const Interval& iv) { return "[" + num(iv.lo) + ", " + num(iv.hi) + "]"; }

struct Globals {
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    double mu = 0.5;
    double eps2 = 1e-10;
    std::vector<double> grid{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
    ResidualMode residual = ResidualMode::relative;
    Preconditioner precond = Preconditioner::none;

    EpsilonGrid epsilon_grid() const {
        EpsilonGrid g;
        g.values = grid;
        g.epsilon2 = eps2;
        g.mu = mu;
        g.validate();
        return g;
    }

    SolveConfig solver() const {
        SolveConfig c;
        c.residual_mode = residual;
        c.preconditioner = precond;
        return c;
    }
};

/// Matrix input problems of any kind, including a missing file, are usage errors.
SparseSymMatrix load_matrix(const std::string& path) {
    try {
        return read_matrix_market(fs::path(path));
    } catch (const Error& e) {
        throw Failure{config_error, path + ": " + e.what()};
    }
}

// ---------------------------------------------------------------------------

int cmd_features(const std::string& path) {
    const auto a = load_matrix(path);
    const auto est = eigen_estimates(a);
    const auto f = extract_features(a);
    std::cout << "n                " << f.n << '\n'
              << "m                " << f.m << '\n'
              << "pseudo_diameter  " << f.pseudo_diameter << '\n'
              << "spread           " << num(f.spread) << '\n'
              << "lambda_max       " << num(f.lambda_max) << '\n'
              << "basic            " << interval(est.basic) << '\n'
              << "scaled1          " << interval(est.scaled1) << '\n'
              << "scaled2          " << interval(est.scaled2) << '\n'
              << "combined         " << interval(est.combined) << '\n';
    return ok;
}

struct SolveArgs {
    std::string matrix;
    std::string eps1 = "0.001";
    std::string model;
    std::string rhs = "ones";
    std::string x_out;
};

Vector<double> make_rhs(const SolveArgs& args, const SparseSymMatrix& a, std::uint64_t seed) {
    if (args.rhs == "ones") return ones_rhs(a);
    if (args.rhs == "random") {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Vector<double> b(a.size());
        for (auto& v : b) v = u(rng);
        return b;
    }
    std::ifstream in(args.rhs);
    if (!in) throw Failure{io_error, "cannot open right-hand side " + args.rhs};
    Vector<double> b;
    double v;
    while (in >> v) b.push_back(v);
    if (!in.eof()) throw Failure{config_error, args.rhs + ": malformed number"};
    if (b.size() != a.size())
        throw Failure{config_error, args.rhs + ": expected " + std::to_string(a.size()) + " values, got " +
                                        std::to_string(b.size())};
    return b;
}

ModelFile load_model(const std::string& path) {
    if (path.empty()) throw Failure{missing_model, "--eps1 auto requires --model"};
    if (!fs::exists(path)) throw Failure{missing_model, "model file not found: " + path};
    try {
        return read_json_file(path).get<ModelFile>();
    } catch (const json::exception& e) {
        throw Failure{config_error, path + ": " + e.what()};
    }
}

int cmd_solve(const Globals& g, const SolveArgs& args) {
    const bool automatic = args.eps1 == "auto";
    double eps1 = 0.0;
    if (!automatic) {
        const char* first = args.eps1.data();
        const char* last = first + args.eps1.size();
        auto [end, ec] = std::from_chars(first, last, eps1);
        if (ec != std::errc{} || end != last) throw Failure{config_error, "--eps1: not a number: " + args.eps1};
        if (!(g.eps2 > 0.0 && eps1 >= g.eps2))
            throw Failure{config_error, "--eps1 must be at least --eps2 (" + num(g.eps2) + ")"};
    }
    if (!(g.mu > 0.0 && g.mu < 1.0)) throw Failure{config_error, "--mu must lie in (0, 1)"};
    std::optional<ModelFile> model;
    if (automatic) model = load_model(args.model);

    const auto a = load_matrix(args.matrix);
    const auto b = make_rhs(args, a, g.seed);
    std::optional<std::size_t> predicted;
    if (automatic) {
        predicted = knn_predict(model->model, extract_features(a));
        eps1 = model->model.grid.epsilon_of(*predicted);
        if (eps1 < g.eps2) throw Failure{config_error, "predicted epsilon1 is below --eps2"};
    }

    const auto r = two_stage_solve(a, b, eps1, g.eps2, g.mu, g.solver());
    if (predicted) std::cout << "class            " << *predicted << '\n';
    std::cout << "epsilon1         " << num(r.epsilon1) << '\n'
              << "epsilon2         " << num(r.epsilon2) << '\n'
              << "n1               " << r.n1 << '\n'
              << "n2               " << r.n2 << '\n'
              << "cost             " << num(r.cost) << '\n'
              << "stage1_status    " << to_string(r.stage1_status) << '\n'
              << "final_residual   " << num(r.final_residual) << '\n';

    if (!args.x_out.empty()) {
        std::ofstream out(args.x_out);
        if (!out) throw Failure{io_error, "cannot write " + args.x_out};
        for (double v : r.x) out << num(v) << '\n';
        if (!out) throw Failure{io_error, "write failed for " + args.x_out};
    }
    return ok;
}

struct GenerateArgs {
    std::string out;
    std::string mtx_dir;
    PlanOptions plan;
};

int cmd_generate(const Globals& g, GenerateArgs args) {
    args.plan.seed = g.seed;
    std::vector<GroupSpec> groups;
    try {
        groups = default_sample_plan(args.plan);
    } catch (const Error& e) {
        throw Failure{config_error, e.what()};
    }
    json doc{{"format_version", sample_format_version},
             {"options",
              {{"matrices", args.plan.matrices},
               {"n_min", args.plan.n_min},
               {"n_max", args.plan.n_max},
               {"structured_fraction", args.plan.structured_fraction},
               {"variants_per_group", args.plan.variants_per_group},
               {"seed", args.plan.seed}}},
             {"groups", groups}};
    write_json_file(args.out, doc);

    std::size_t matrices = 0;
    for (const auto& grp : groups) matrices += grp.variants + 1;
    if (!args.mtx_dir.empty()) {
        fs::create_directories(args.mtx_dir);
        for (std::size_t k = 0; k < groups.size(); ++k) {
            std::vector<SparseSymMatrix> ms{generate(groups[k].base)};
            if (groups[k].variants > 0) {
                const auto extra = groups[k].edges_to_add ? groups[k].edges_to_add : default_edges_to_add(ms[0]);
                for (auto& v : perturb(ms[0], groups[k].base, groups[k].variants, extra, groups[k].base.seed))
                    ms.push_back(std::move(v));
            }
            for (std::size_t v = 0; v < ms.size(); ++v)
                write_matrix_market(ms[v], fs::path(args.mtx_dir) /
                                               (group_name(k) + (v < 10 ? "-v0" : "-v") + std::to_string(v) + ".mtx"));
        }
    }
    std::cout << groups.size() << " groups, " << matrices << " matrices -> " << args.out << '\n';
    return ok;
}

std::vector<GroupSpec> read_plan(const std::string& path) {
    if (!fs::exists(path)) throw Failure{io_error, "plan file not found: " + path};
    try {
        return read_json_file(path).at("groups").get<std::vector<GroupSpec>>();
    } catch (const json::exception& e) {
        throw Failure{config_error, path + ": " + e.what()};
    }
}

int cmd_label(const Globals& g, const std::string& plan_path, const std::string& out) {
    const auto grid = g.epsilon_grid();
    const auto groups = read_plan(plan_path);
    const auto manifest = build_sample(groups, grid, out, g.solver(), g.threads);
    std::cout << manifest.record_count << " records (" << manifest.valid_count << " valid, "
              << manifest.invalid_count << " invalid, " << manifest.skipped_groups << " groups skipped) -> "
              << out << '\n';
    return ok;
}

/// Grid stored in the sample's manifest, falling back to the command-line grid.
EpsilonGrid sample_grid(const Globals& g, const std::string& sample) {
    const auto mp = manifest_path_for(sample);
    if (fs::exists(mp)) {
        auto grid = read_json_file(mp).at("grid").get<EpsilonGrid>();
        grid.validate();
        return grid;
    }
    return g.epsilon_grid();
}

std::vector<SampleRecord> load_sample(const std::string& path) {
    if (!fs::exists(path)) throw Failure{io_error, "sample file not found: " + path};
    return read_sample(path);
}

struct TrainArgs {
    std::string sample;
    std::string model;
    std::size_t k = 5;
    double test_fraction = 0.1;
    SplitMode split = SplitMode::group;
};

int cmd_train(const Globals& g, const TrainArgs& args) {
    const auto records = load_sample(args.sample);
    const auto grid = sample_grid(g, args.sample);
    const auto parts = split(records, args.test_fraction, g.seed, args.split);
    std::vector<SampleRecord> train;
    for (auto i : parts.train) train.push_back(records[i]);

    ModelFile mf;
    mf.model = fit_knn(train, args.k, grid);
    mf.split_mode = args.split;
    mf.test_fraction = args.test_fraction;
    mf.seed = g.seed;
    mf.sample_file = fs::path(args.sample).filename().string();
    for (auto i : parts.test) mf.test_ids.push_back(records[i].matrix_id);
    write_json_file(args.model, json(mf));
    std::cout << mf.model.points.size() << " training points, " << mf.test_ids.size() << " held out -> "
              << args.model << '\n';
    return ok;
}

struct EvaluateArgs {
    std::string model;
    std::string sample;
    std::string on = "test";
    std::size_t k = 0;
    std::string report;
};

int cmd_evaluate(const EvaluateArgs& args) {
    auto mf = load_model(args.model);
    if (args.k) mf.model.k = args.k;
    const auto records = load_sample(args.sample);
    const std::set<std::string> held_out(mf.test_ids.begin(), mf.test_ids.end());
    std::vector<SampleRecord> chosen;
    for (const auto& r : records) {
        const bool in_test = held_out.count(r.matrix_id) > 0;
        if (args.on == "all" || (args.on == "test") == in_test) chosen.push_back(r);
    }
    const auto rep = evaluate(mf.model, chosen);
    const auto table = format_report(rep, mf.model.grid);
    std::cout << table;
    if (!args.report.empty()) {
        std::ofstream out(args.report);
        if (!out) throw Failure{io_error, "cannot write " + args.report};
        out << table;
        if (!out) throw Failure{io_error, "write failed for " + args.report};
        json j = rep;
        j["k"] = mf.model.k;
        j["on"] = args.on;
        write_json_file(args.report + ".json", j);
    }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage mixed-precision CG with learned stage-1 tolerance"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::string grid_text;
    app.add_option("--seed", g.seed, "seed for plans, splits and random right-hand sides");
    app.add_option("--threads", g.threads, "worker threads for labelling")->check(CLI::PositiveNumber);
    app.add_option("--mu", g.mu, "relative cost of a reduced-precision iteration");
    app.add_option("--eps2", g.eps2, "final relative residual tolerance");
    app.add_option("--grid", grid_text, "comma-separated descending epsilon1 candidates");
    const std::map<std::string, ResidualMode> residual_names{{"relative", ResidualMode::relative},
                                                             {"absolute", ResidualMode::absolute}};
    const std::map<std::string, Preconditioner> precond_names{{"none", Preconditioner::none},
                                                              {"jacobi", Preconditioner::jacobi}};
    app.add_option("--residual", g.residual, "relative|absolute")
        ->transform(CLI::CheckedTransformer(residual_names, CLI::ignore_case));
    app.add_option("--precond", g.precond, "none|jacobi")
        ->transform(CLI::CheckedTransformer(precond_names, CLI::ignore_case));

    std::string features_path;
    auto* features = app.add_subcommand("features", "print the feature vector and eigenvalue intervals");
    features->add_option("matrix", features_path, "Matrix Market file")->required();

    SolveArgs solve_args;
    auto* solve_cmd = app.add_subcommand("solve", "two-stage solve of one system");
    solve_cmd->add_option("matrix", solve_args.matrix, "Matrix Market file")->required();
    solve_cmd->add_option("--eps1", solve_args.eps1, "stage-1 tolerance or 'auto'");
    solve_cmd->add_option("--model", solve_args.model, "model file for --eps1 auto");
    solve_cmd->add_option("--rhs", solve_args.rhs, "ones | random | path to values");
    solve_cmd->add_option("--x-out", solve_args.x_out, "write the solution here");

    GenerateArgs gen_args;
    auto* gen = app.add_subcommand("generate", "write a sample plan");
    gen->add_option("--out", gen_args.out, "plan file")->required();
    gen->add_option("--matrices", gen_args.plan.matrices);
    gen->add_option("--n-min", gen_args.plan.n_min);
    gen->add_option("--n-max", gen_args.plan.n_max);
    gen->add_option("--structured-fraction", gen_args.plan.structured_fraction);
    gen->add_option("--variants", gen_args.plan.variants_per_group);
    gen->add_option("--mtx-dir", gen_args.mtx_dir, "also write every matrix as Matrix Market");

    std::string plan_path, sample_out;
    auto* label = app.add_subcommand("label", "label a plan into a sample file");
    label->add_option("--plan", plan_path)->required();
    label->add_option("--out", sample_out)->required();

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "split a sample and fit the kNN model");
    train->add_option("--sample", train_args.sample)->required();
    train->add_option("--model", train_args.model)->required();
    train->add_option("--k", train_args.k)->check(CLI::PositiveNumber);
    train->add_option("--test-fraction", train_args.test_fraction);
    train->add_option("--split", train_args.split, "group|record")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, SplitMode>{{"group", SplitMode::group}, {"record", SplitMode::record}}));

    EvaluateArgs eval_args;
    auto* eval = app.add_subcommand("evaluate", "report total costs of the model's predictions");
    eval->add_option("--model", eval_args.model)->required();
    eval->add_option("--sample", eval_args.sample)->required();
    eval->add_option("--on", eval_args.on, "test|train|all")->check(CLI::IsMember({"test", "train", "all"}));
    eval->add_option("--k", eval_args.k, "override the model's k")->check(CLI::PositiveNumber);
    eval->add_option("--report", eval_args.report, "text report; JSON goes to <report>.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    }

    try {
        if (!grid_text.empty()) {
            g.grid.clear();
            std::stringstream ss(grid_text);
            std::string item;
            while (std::getline(ss, item, ',')) {
                double v = 0.0;
                auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
                if (ec != std::errc{} || end != item.data() + item.size())
                    throw Failure{config_error, "--grid: not a number: " + item};
                g.grid.push_back(v);
            }
        }
        if (*features) return cmd_features(features_path);
        if (*solve_cmd) return cmd_solve(g, solve_args);
        if (*gen) return cmd_generate(g, gen_args);
        if (*label) return cmd_label(g, plan_path, sample_out);
        if (*train) return cmd_train(g, train_args);
        if (*eval) return cmd_evaluate(eval_args);
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << '\n';
        return f.code;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return runtime_error;
    }
    return config_error;
}
