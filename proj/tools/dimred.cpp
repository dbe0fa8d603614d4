// Command-line front end: reduce, solve, bench, verify, sample.

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dimred/bench.hpp"
#include "dimred/cas.hpp"
#include "dimred/csvio.hpp"
#include "dimred/eval.hpp"
#include "dimred/regress.hpp"

using namespace dimred;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::uint64_t seed = 0;
    std::string measure = "codec";
    int beam_size = 1;
    std::string sub_types = "both";
    int max_intermediary = 1;
    std::string grammar = "standard";
    std::string regressor;
    std::vector<double> noise{0.0};
    double holdout = 0.2;
    std::string out;
    int threads = 0;
    long n = 1000;
    std::string trace;
    std::string plot_data;
    std::string truth;
    int dim = 0;
    std::string ranges;
};

BeamConfig beam_config(const Flags& f)
{
    BeamConfig cfg;
    cfg.beam_size = f.beam_size;
    cfg.measure = *parse_measure(f.measure);
    cfg.sub_types = parse_sub_types(f.sub_types);
    if (f.grammar == "aifeynman") cfg.budget = GrammarBudget::aifeynman();
    else if (f.grammar == "full") cfg.budget = GrammarBudget::full(f.max_intermediary);
    else cfg.budget = GrammarBudget::standard(f.max_intermediary);
    return cfg;
}

std::optional<RegressorSpec> regressor(const Flags& f, const std::string& fallback)
{
    std::string text = f.regressor.empty() ? fallback : f.regressor;
    if (text == "none") return std::nullopt;
    try {
        return RegressorSpec::parse(text);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

Dataset load_dataset(const std::string& path)
{
    CsvData csv = read_csv_file(path);
    return Dataset::from_samples(std::move(csv.X), std::move(csv.y));
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw CsvError("cannot write " + path.string());
    return out;
}

int cmd_reduce(const Flags& f, const std::string& csv)
{
    Dataset ds = load_dataset(csv);
    SearchResult r = search(ds, beam_config(f));
    std::cout << "depth\tn_vars\tscore\trows\tsubstitution\n";
    for (const auto& node : r.best_path)
        std::cout << node->depth << '\t' << node->dataset.dim() << '\t' << node->score.value << '\t'
                  << node->dataset.size() << '\t' << (node->edge ? describe(*node->edge) : "-") << '\n';
    if (!f.out.empty()) {
        std::filesystem::path dir(f.out);
        std::filesystem::create_directories(dir);
        for (const auto& node : r.best_path) {
            if (node->depth == 0) continue;
            std::string stem = "node" + std::to_string(node->depth);
            auto data = open_out(dir / (stem + ".csv"));
            write_csv(data, node->dataset.X, node->dataset.y);
            auto maps = open_out(dir / (stem + ".maps"));
            for (std::size_t j = 0; j < node->dataset.var_map.size(); ++j)
                maps << 'x' << j + 1 << " = " << node->dataset.var_map[j].str() << '\n';
            maps << "y = " << node->dataset.y_map.str(node->dataset.original_dim()) << '\n';
        }
        auto trace = open_out(dir / "trace.jsonl");
        trace << trace_jsonl(r);
    }
    if (!f.trace.empty()) open_out(f.trace) << trace_jsonl(r);
    return kOk;
}

int cmd_solve(const Flags& f, const std::string& csv)
{
    Dataset ds = load_dataset(csv);
    auto spec = regressor(f, "dagsearch");
    if (!spec) throw UsageError("solve needs a regressor");
    SearchResult r = search(ds, beam_config(f));
    SolveResult s = solve_pipeline(r, *spec, f.holdout, f.seed);
    std::cout << "expr\t" << s.expr.str() << '\n'
              << "nrmse_test\t" << s.nrmse_test << '\n'
              << "complexity\t" << s.complexity << '\n'
              << "source_node_depth\t" << s.source_node_depth << '\n'
              << "reduced_vars\t" << r.best().dataset.dim() << '\n';
    if (!f.truth.empty()) std::cout << "recovered\t" << (recovery(parse(f.truth), s.expr) ? "true" : "false") << '\n';
    if (!f.trace.empty()) open_out(f.trace) << trace_jsonl(r);
    return kOk;
}

std::string noise_tag(double gamma)
{
    std::ostringstream s;
    s << gamma;
    return s.str();
}

int cmd_bench(const Flags& f, const std::string& corpus)
{
    auto problems = load_corpus(corpus);
    BenchConfig cfg;
    cfg.beam = beam_config(f);
    cfg.regressor = regressor(f, "none");
    cfg.n = f.n;
    cfg.holdout = f.holdout;
    cfg.seed = f.seed;
    std::vector<Report> reports;
    for (double gamma : f.noise) {
        cfg.gamma = gamma;
        reports.push_back(run_benchmark(problems, cfg));
    }
    for (const auto& rep : reports) {
        if (f.out.empty()) {
            if (reports.size() > 1) std::cout << "# noise " << noise_tag(rep.gamma) << '\n';
            write_report_csv(std::cout, rep);
            continue;
        }
        std::filesystem::path path(f.out);
        if (reports.size() > 1)
            path = path.parent_path() / (path.stem().string() + "-noise" + noise_tag(rep.gamma) + path.extension().string());
        auto out = open_out(path);
        write_report_csv(out, rep);
    }
    if (!f.trace.empty()) {
        auto out = open_out(f.trace);
        for (const auto& rep : reports) write_trace_jsonl(out, rep);
    }
    if (!f.plot_data.empty()) {
        auto out = open_out(f.plot_data);
        write_plot_data(out, reports);
    }
    return kOk;
}

// the substitution is written over the formula's variables and y
int cmd_verify(const Flags& f, const std::string& formula, const std::string& sub, const std::string& indices)
{
    ExprDag truth = parse(formula);
    int d = std::max(f.dim, truth.arity());
    constexpr int kProbe = 1 << 16;
    for (int v : parse(sub, {.y_index = kProbe}).variables())
        if (v >= d && v != kProbe) throw UsageError("substitution uses x" + std::to_string(v + 1) + " beyond the formula's " + std::to_string(d) + " variables");
    ExprDag s = parse(sub, {.y_index = d});
    std::vector<int> I;
    if (indices.empty()) {
        for (int v : s.variables())
            if (v < d) I.push_back(v);
    } else {
        std::istringstream items(indices);
        std::string item;
        while (std::getline(items, item, ',')) {
            int one_based = 0;
            try {
                one_based = std::stoi(item);
            } catch (const std::logic_error&) {
                throw UsageError("bad index '" + item + "'");
            }
            if (one_based < 1 || one_based > d) throw UsageError("index " + item + " outside 1.." + std::to_string(d));
            I.push_back(one_based - 1);
        }
    }
    std::sort(I.begin(), I.end());
    I.erase(std::unique(I.begin(), I.end()), I.end());
    bool out_input = s.uses_var(d);
    std::vector<int> local(static_cast<std::size_t>(d) + 1, -1);
    for (std::size_t k = 0; k < I.size(); ++k) local[static_cast<std::size_t>(I[k])] = static_cast<int>(k);
    local[static_cast<std::size_t>(d)] = static_cast<int>(I.size());
    for (int v : s.variables())
        if (v > d || local[static_cast<std::size_t>(v)] < 0)
            throw UsageError("substitution uses x" + std::to_string(v + 1) + " outside the index set");
    for (int& v : local) v = std::max(v, 0);
    ExprDag tmpl = s.remap_vars(local);
    std::optional<ExprDag> reduced;
    try {
        if (out_input) {
            if (I.empty()) throw UsageError("an out-input substitution needs at least one input");
            reduced = transfer_outinput(truth, d, {tmpl, I});
        } else {
            if (I.size() < 2) throw UsageError("an input substitution needs at least two inputs");
            reduced = transfer_input(truth, d, {tmpl, I});
        }
    } catch (const Unverifiable& e) {
        std::cout << "unverifiable\t" << e.what() << '\n';
        return kOk;
    }
    if (reduced) std::cout << "valid\t" << reduced->str() << '\n';
    else std::cout << "invalid\n";
    return kOk;
}

int cmd_sample(const Flags& f, const std::string& formula)
{
    Problem p;
    p.id = formula;
    p.f_true = parse(formula);
    p.d = std::max(f.dim, p.f_true.arity());
    if (p.d < 1) throw UsageError("the formula has no variables; pass --dim");
    if (!f.ranges.empty()) {
        std::istringstream corpus("sample\t" + std::to_string(p.d) + "\t" + formula + "\t" + f.ranges);
        try {
            p.ranges = parse_corpus(corpus).at(0).ranges;
        } catch (const CorpusError& e) {
            throw UsageError(e.what());
        }
    }
    Dataset ds = sample_problem(p, f.n, derive_seed(f.seed, 1));
    Vector y = add_noise(ds.y, f.noise.front(), derive_seed(f.seed, 2));
    if (f.out.empty()) write_csv(std::cout, ds.X, y);
    else write_csv_file(f.out, ds.X, y);
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dimension reduction for symbolic regression by substitution search"};
    app.require_subcommand(1);
    Flags f;
    auto measures = CLI::IsMember({"xi", "codec", "kmac", "volume"});
    app.add_option("--seed", f.seed, "Random seed")->capture_default_str();
    app.add_option("--measure", f.measure, "Dependence measure")->check(measures)->capture_default_str();
    app.add_option("--beam-size", f.beam_size, "Beam size")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--sub-types", f.sub_types, "Substitution types")
        ->check(CLI::IsMember({"input", "outinput", "both"}))
        ->capture_default_str();
    app.add_option("--max-intermediary", f.max_intermediary, "Intermediary nodes of substitution DAGs")
        ->check(CLI::Range(0, 4))
        ->capture_default_str();
    app.add_option("--grammar", f.grammar, "Substitution grammar")
        ->check(CLI::IsMember({"standard", "aifeynman", "full"}))
        ->capture_default_str();
    app.add_option("--regressor", f.regressor, "poly, dagsearch, external:<command> or none");
    app.add_option("--noise", f.noise, "Noise levels, comma separated")
        ->delimiter(',')
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--holdout", f.holdout, "Test fraction")->check(CLI::Bound(0.0, 1.0))->capture_default_str();
    app.add_option("--out", f.out, "Output file or directory");
    app.add_option("--threads", f.threads, "OpenMP threads (0: all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--n", f.n, "Samples per problem")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--trace", f.trace, "Search trace JSON-lines file");
    app.add_option("--plot-data", f.plot_data, "Noise-curve triples file");

    std::string path, formula, sub, indices;
    auto* reduce = app.add_subcommand("reduce", "Search substitutions for a CSV dataset");
    reduce->add_option("csv", path, "Data file with header x1,...,xd,y")->required();
    auto* solve = app.add_subcommand("solve", "Reduce, then fit a regressor along the best path");
    solve->add_option("csv", path, "Data file with header x1,...,xd,y")->required();
    solve->add_option("--truth", f.truth, "Known formula; reports recovery");
    auto* bench = app.add_subcommand("bench", "Run a formula corpus");
    bench->add_option("corpus", path, "Lines id<TAB>d<TAB>expression[<TAB>ranges]")->required();
    auto* verify = app.add_subcommand("verify", "Check a substitution against a known formula");
    verify->add_option("formula", formula, "Known formula over x1..xd")->required();
    verify->add_option("substitution", sub, "g over the formula's variables, or h using y")->required();
    verify->add_option("indices", indices, "1-based index set, comma separated (default: variables used)");
    verify->add_option("--dim", f.dim, "Number of variables when the formula does not use all");
    auto* sample = app.add_subcommand("sample", "Sample a formula to CSV");
    sample->add_option("formula", formula, "Formula over x1..xd")->required();
    sample->add_option("--dim", f.dim, "Number of variables when the formula does not use all");
    sample->add_option("--ranges", f.ranges, "lo:hi per variable instead of the growing interval");
    for (auto* s : {reduce, solve, bench, verify, sample}) s->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    if (f.threads > 0) omp_set_num_threads(f.threads);

    try {
        if (*reduce) return cmd_reduce(f, path);
        if (*solve) return cmd_solve(f, path);
        if (*bench) return cmd_bench(f, path);
        if (*verify) return cmd_verify(f, formula, sub, indices);
        return cmd_sample(f, formula);
    } catch (const UsageError& e) {
        std::cerr << "dimred: " << e.what() << '\n';
        return kUsage;
    } catch (const CsvError& e) {
        std::cerr << "dimred: " << e.what() << '\n';
        return kData;
    } catch (const CorpusError& e) {
        std::cerr << "dimred: " << e.what() << '\n';
        return kData;
    } catch (const ParseError& e) {
        std::cerr << "dimred: " << e.what() << '\n';
        return kData;
    } catch (const Unsampleable& e) {
        std::cerr << "dimred: " << e.what() << '\n';
        return kData;
    } catch (const DegenerateY& e) {
        std::cerr << "dimred: " << e.what() << '\n';
        return kData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "dimred: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "dimred: internal failure: " << e.what() << '\n';
        return kInternal;
    }
}
